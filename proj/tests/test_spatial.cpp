#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qmc/error.hpp"
#include "qmc/mc.hpp"
#include "qmc/spatial.hpp"
#include "testutil.hpp"

using namespace qmc;

namespace {

SpatialField grid_field(int nx, int ny, double spacing_um,
                        const std::function<double(double, double)>& z) {
    SpatialField f;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double x = i * spacing_um, y = j * spacing_um;
            f.points.push_back({x, y, z(x, y)});
        }
    return f;
}

// Independent reference: direct restatement of the documented local fit with
// a Cramer 3x3 solve. Neighbor ties at the cutoff distance are harmless for
// comparison purposes: tied candidates sit at d_max and carry weight zero.
std::vector<double> loess_reference(const SpatialField& f, int k) {
    const size_t n = f.points.size();
    std::vector<double> fitted(n);
    for (size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, size_t>> d;
        d.reserve(n);
        for (size_t j = 0; j < n; ++j) {
            const double dx = f.points[j].x_um - f.points[i].x_um;
            const double dy = f.points[j].y_um - f.points[i].y_um;
            d.emplace_back(std::sqrt(dx * dx + dy * dy), j);
        }
        std::sort(d.begin(), d.end());
        const double d_max = d[static_cast<size_t>(k) - 1].first;
        double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, sz = 0, sxz = 0, syz = 0;
        for (int m = 0; m < k; ++m) {
            const auto& [dist, j] = d[static_cast<size_t>(m)];
            const double u = d_max > 0.0 ? dist / d_max : 0.0;
            const double w = u < 1.0 ? std::pow(1.0 - u * u * u, 3) : 0.0;
            const double xr = f.points[j].x_um - f.points[i].x_um;
            const double yr = f.points[j].y_um - f.points[i].y_um;
            s += w;
            sx += w * xr;
            sy += w * yr;
            sxx += w * xr * xr;
            sxy += w * xr * yr;
            syy += w * yr * yr;
            sz += w * f.points[j].z_nm;
            sxz += w * xr * f.points[j].z_nm;
            syz += w * yr * f.points[j].z_nm;
        }
        const double det = s * (sxx * syy - sxy * sxy) - sx * (sx * syy - sxy * sy) +
                           sy * (sx * sxy - sxx * sy);
        const double scale = std::max({std::abs(s), std::abs(sxx), std::abs(syy)});
        if (std::abs(det) <= 1e-12 * scale * scale * scale) {
            fitted[i] = sz / s;
            continue;
        }
        // Fitted value at the expansion point is the constant term.
        fitted[i] = ((sxx * syy - sxy * sxy) * sz + (sy * sxy - sx * syy) * sxz +
                     (sx * sxy - sy * sxx) * syz) / det;
    }
    return fitted;
}

} // namespace

TEST_CASE("an exact quadratic field is recovered to machine precision") {
    const auto truth = [](double x, double y) {
        return 2.0 + 0.1 * x - 0.05 * y + 0.01 * x * x;
    };
    const SpatialField f = grid_field(8, 7, 3.0, truth);
    const QuadraticSurface s = fit_quadratic_surface(f);
    const std::array<double, 6> expect{2.0, 0.1, -0.05, 0.01, 0.0, 0.0};
    for (int i = 0; i < 6; ++i)
        CHECK(std::abs(s.beta[static_cast<size_t>(i)] - expect[static_cast<size_t>(i)]) < 1e-9);

    std::vector<double> fitted;
    for (const SpatialPoint& p : f.points) fitted.push_back(s.evaluate(p.x_um, p.y_um));
    const ResidualSummary r = residual_summary(f, fitted);
    CHECK(r.std_after_nm < 1e-9);
}

TEST_CASE("fitting pure noise leaves the expected residual spread") {
    const CounterRng rng(301, 0);
    const double sigma = 8.44;
    const int nx = 25, ny = 20;
    SpatialField f;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            f.points.push_back(
                {static_cast<double>(i), static_cast<double>(j),
                 sigma * rng.normal(static_cast<uint64_t>(j) * nx + static_cast<uint64_t>(i))});
    const double n = static_cast<double>(f.points.size());
    const QuadraticSurface s = fit_quadratic_surface(f);
    std::vector<double> fitted;
    for (const SpatialPoint& p : f.points) fitted.push_back(s.evaluate(p.x_um, p.y_um));
    const ResidualSummary r = residual_summary(f, fitted);
    // Six fitted parameters absorb six degrees of freedom; the sample std of
    // the draw itself fluctuates with standard error sigma/sqrt(2n).
    const double expect = sigma * std::sqrt((n - 6.0) / n);
    CHECK(std::abs(r.std_after_nm - expect) <= 3.0 * sigma / std::sqrt(2.0 * n));
    CHECK(r.std_after_nm < r.std_before_nm);
}

TEST_CASE("quadratic residuals are orthogonal to the design columns") {
    const CounterRng rng(302, 0);
    SpatialField f;
    for (int i = 0; i < 200; ++i)
        f.points.push_back({30.0 * rng.uniform(3 * static_cast<uint64_t>(i)),
                            20.0 * rng.uniform(3 * static_cast<uint64_t>(i) + 1),
                            10.0 * rng.normal(3 * static_cast<uint64_t>(i) + 2)});
    const QuadraticSurface s = fit_quadratic_surface(f);
    std::vector<double> resid;
    for (const SpatialPoint& p : f.points) resid.push_back(p.z_nm - s.evaluate(p.x_um, p.y_um));
    double rn = 0.0;
    for (double v : resid) rn += v * v;
    rn = std::sqrt(rn);
    const auto col = [&](int which, const SpatialPoint& p) {
        switch (which) {
            case 0: return 1.0;
            case 1: return p.x_um;
            case 2: return p.y_um;
            case 3: return p.x_um * p.x_um;
            case 4: return p.x_um * p.y_um;
            default: return p.y_um * p.y_um;
        }
    };
    for (int c = 0; c < 6; ++c) {
        double dot = 0.0, cn = 0.0;
        for (size_t i = 0; i < f.points.size(); ++i) {
            const double v = col(c, f.points[i]);
            dot += resid[i] * v;
            cn += v * v;
        }
        CHECK(std::abs(dot) <= 1e-8 * rn * std::sqrt(cn));
    }
}

TEST_CASE("quadratic fit rejects too-few and degenerate layouts") {
    SpatialField five;
    for (int i = 0; i < 5; ++i)
        five.points.push_back({static_cast<double>(i), static_cast<double>(i % 2), 1.0});
    try {
        fit_quadratic_surface(five);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficient);
    }

    SpatialField line;
    for (int i = 0; i < 10; ++i)
        line.points.push_back({static_cast<double>(i), 2.0 * i, 0.5 * i});
    try {
        fit_quadratic_surface(line);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficient);
    }
}

TEST_CASE("field validation rejects empty, non-finite, and non-positive-target inputs") {
    CHECK_THROWS_AS(fit_quadratic_surface(SpatialField{}), Error);
    SpatialField bad = grid_field(4, 4, 1.0, [](double, double) { return 0.0; });
    bad.points[3].z_nm = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fit_quadratic_surface(bad), Error);
    SpatialField target = grid_field(4, 4, 1.0, [](double, double) { return 0.0; });
    target.target = Length::nm(0.0);
    CHECK_THROWS_AS(fit_quadratic_surface(target), Error);
}

TEST_CASE("quadratic coefficients do not depend on point ordering") {
    const CounterRng rng(303, 0);
    SpatialField f;
    for (int i = 0; i < 100; ++i)
        f.points.push_back({20.0 * rng.uniform(3 * static_cast<uint64_t>(i)),
                            20.0 * rng.uniform(3 * static_cast<uint64_t>(i) + 1),
                            5.0 * rng.normal(3 * static_cast<uint64_t>(i) + 2)});
    SpatialField shuffled = f;
    std::reverse(shuffled.points.begin(), shuffled.points.end());
    std::rotate(shuffled.points.begin(), shuffled.points.begin() + 37, shuffled.points.end());
    const QuadraticSurface a = fit_quadratic_surface(f);
    const QuadraticSurface b = fit_quadratic_surface(shuffled);
    for (int i = 0; i < 6; ++i)
        CHECK(a.beta[static_cast<size_t>(i)] == b.beta[static_cast<size_t>(i)]);
}

TEST_CASE("local linear smoothing reproduces a global plane exactly") {
    const SpatialField f =
        grid_field(12, 10, 2.5, [](double x, double y) { return 1.0 + 0.2 * x - 0.1 * y; });
    const LoessFit fit = loess_fit(f, 9);
    REQUIRE(fit.fitted_nm.size() == f.points.size());
    for (size_t i = 0; i < f.points.size(); ++i) {
        CHECK(std::abs(fit.fitted_nm[i] - f.points[i].z_nm) < 1e-9);
        CHECK(fit.degenerate[i] == 0);
    }
    const ResidualSummary r = residual_summary(f, fit.fitted_nm);
    CHECK(r.std_after_nm < 1e-9);
    CHECK(std::abs(r.reduction_pct - 100.0) < 1e-6);
}

TEST_CASE("local linear smoothing matches a direct reference implementation") {
    const CounterRng rng(304, 0);
    SpatialField f;
    const int nx = 20, ny = 15;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double x = 2.0 * i, y = 2.0 * j;
            const double trend = 5.0 * std::sin(2.0 * M_PI * x / 40.0) *
                                 std::cos(2.0 * M_PI * y / 32.0);
            f.points.push_back(
                {x, y,
                 trend + 7.0 * rng.normal(static_cast<uint64_t>(j) * nx + static_cast<uint64_t>(i))});
        }
    const int k = default_loess_k(f.points.size());
    const LoessFit fit = loess_fit(f, k);
    const std::vector<double> ref = loess_reference(f, k);
    for (size_t i = 0; i < f.points.size(); ++i) CHECK(std::abs(fit.fitted_nm[i] - ref[i]) < 1e-9);

    const ResidualSummary r = residual_summary(f, fit.fitted_nm);
    CHECK(r.std_after_nm < r.std_before_nm);
    CHECK(r.reduction_pct > 0.0);
}

TEST_CASE("with k equal to N the local fit is the tricube-weighted global plane") {
    const CounterRng rng(305, 0);
    SpatialField f;
    for (int i = 0; i < 40; ++i) {
        const double x = 10.0 * rng.uniform(3 * static_cast<uint64_t>(i));
        const double y = 10.0 * rng.uniform(3 * static_cast<uint64_t>(i) + 1);
        f.points.push_back({x, y, 0.3 * x * x - 0.2 * x * y + rng.normal(3 * static_cast<uint64_t>(i) + 2)});
    }
    const int k = static_cast<int>(f.points.size());
    const LoessFit fit = loess_fit(f, k);
    const std::vector<double> ref = loess_reference(f, k);
    for (size_t i = 0; i < f.points.size(); ++i) CHECK(std::abs(fit.fitted_nm[i] - ref[i]) < 1e-9);
}

TEST_CASE("the farthest neighbor carries exactly zero weight") {
    SpatialField a;
    a.points.push_back({0.0, 0.0, 0.4});
    a.points.push_back({1.0, 0.2, -0.3});
    a.points.push_back({0.3, 0.9, 0.8});
    a.points.push_back({-0.7, 0.4, 0.1});
    a.points.push_back({0.5, -0.6, -0.5});
    a.points.push_back({-0.2, -0.8, 0.6});
    a.points.push_back({0.9, 0.7, -0.2});
    a.points.push_back({100.0, 0.0, 3.0});
    SpatialField b = a;
    b.points.back().z_nm = 1e6;

    const int k = static_cast<int>(a.points.size());
    const LoessFit fa = loess_fit(a, k);
    const LoessFit fb = loess_fit(b, k);
    // For every cluster point the far point is the farthest neighbor; its z
    // must not influence the fit at all.
    for (size_t i = 0; i + 1 < a.points.size(); ++i) CHECK(fa.fitted_nm[i] == fb.fitted_nm[i]);
    CHECK(fa.fitted_nm.back() != fb.fitted_nm.back());
}

TEST_CASE("collinear neighborhoods fall back to the weighted mean and are flagged") {
    SpatialField f;
    for (int i = 0; i < 10; ++i) f.points.push_back({static_cast<double>(i), 0.0, i * i * 0.1});
    const int k = 4;
    const LoessFit fit = loess_fit(f, k);
    for (size_t i = 0; i < f.points.size(); ++i) CHECK(fit.degenerate[i] == 1);
    // Interior point 5: neighbors {5, 4, 6, 3-or-7} with the tied far pair at
    // weight zero; the weighted mean reduces to points 4, 5, 6.
    const double w_near = std::pow(1.0 - 0.5 * 0.5 * 0.5, 3);
    const double expect = (1.0 * 2.5 + w_near * 1.6 + w_near * 3.6) / (1.0 + 2.0 * w_near);
    CHECK(std::abs(fit.fitted_nm[5] - expect) < 1e-12);
}

TEST_CASE("neighbor count bounds are enforced") {
    const SpatialField f = grid_field(4, 4, 1.0, [](double x, double y) { return x + y; });
    CHECK_THROWS_AS(loess_fit(f, 2), Error);
    CHECK_THROWS_AS(loess_fit(f, 17), Error);
}

TEST_CASE("default neighbor count is 30% of the data, at least 3") {
    CHECK(default_loess_k(10) == 3);
    CHECK(default_loess_k(100) == 30);
    CHECK(default_loess_k(5) == 3);
    CHECK(default_loess_k(2000) == 600);
    CHECK(default_loess_k(3) == 3);
}

TEST_CASE("local fits do not depend on point ordering") {
    const CounterRng rng(306, 0);
    SpatialField f;
    for (int i = 0; i < 60; ++i)
        f.points.push_back({15.0 * rng.uniform(3 * static_cast<uint64_t>(i)),
                            15.0 * rng.uniform(3 * static_cast<uint64_t>(i) + 1),
                            rng.normal(3 * static_cast<uint64_t>(i) + 2)});
    std::vector<size_t> perm(f.points.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::rotate(perm.begin(), perm.begin() + 19, perm.end());
    SpatialField g;
    g.target = f.target;
    for (size_t i : perm) g.points.push_back(f.points[i]);

    const LoessFit ff = loess_fit(f, 20);
    const LoessFit fg = loess_fit(g, 20);
    for (size_t i = 0; i < perm.size(); ++i) CHECK(fg.fitted_nm[i] == ff.fitted_nm[perm[i]]);
}

TEST_CASE("residual summary obeys its defining identities") {
    const SpatialField f =
        grid_field(5, 4, 1.0, [](double x, double y) { return 3.0 * x - y + 0.5; });
    std::vector<double> z;
    for (const SpatialPoint& p : f.points) z.push_back(p.z_nm);

    const ResidualSummary self = residual_summary(f, z);
    CHECK(self.std_after_nm == 0.0);
    CHECK(self.reduction_pct == 100.0);

    const ResidualSummary zero = residual_summary(f, std::vector<double>(z.size(), 0.0));
    CHECK(zero.std_after_nm == zero.std_before_nm);
    CHECK(zero.reduction_pct == 0.0);
    REQUIRE(zero.residuals_nm.size() == z.size());
    for (size_t i = 0; i < z.size(); ++i) CHECK(zero.residuals_nm[i] == z[i]);

    CHECK_THROWS_AS(residual_summary(f, std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("a constant field has an identically zero semivariogram") {
    const SpatialField f = grid_field(10, 6, 1.0, [](double, double) { return 4.2; });
    const SemivariogramResult v = semivariogram(f, FieldAxis::X, 1.0, 5.0);
    REQUIRE(!v.bins.empty());
    for (const VariogramBin& b : v.bins) {
        CHECK(b.gamma_nm2 == 0.0);
        CHECK(b.pairs > 0);
    }
    CHECK(v.nugget_nm2 == 0.0);
}

TEST_CASE("independent noise produces a flat semivariogram at the noise variance") {
    const CounterRng rng(307, 0);
    const double sigma = 7.0;
    const int nx = 50, ny = 40;
    SpatialField f;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            f.points.push_back(
                {static_cast<double>(i), static_cast<double>(j),
                 sigma * rng.normal(static_cast<uint64_t>(j) * nx + static_cast<uint64_t>(i))});
    const SemivariogramResult v = semivariogram(f, FieldAxis::X, 1.0, 10.0);
    REQUIRE(v.bins.size() == 10);
    for (size_t k = 0; k < v.bins.size(); ++k) {
        const VariogramBin& b = v.bins[k];
        CHECK(b.lag_um == static_cast<double>(k + 1));
        CHECK(b.pairs == static_cast<uint64_t>(ny) * static_cast<uint64_t>(nx - 1 - static_cast<int>(k)));
        // Pair differences of independent draws: each squared-difference term
        // has variance 2 sigma^4; shared points roughly double it. Three
        // inflated standard errors bound the bin estimate.
        const double se = 2.0 * sigma * sigma * std::sqrt(2.0 / static_cast<double>(b.pairs));
        CHECK(std::abs(b.gamma_nm2 - sigma * sigma) <= 3.0 * se);
    }

    const SemivariogramResult vy = semivariogram(f, FieldAxis::Y, 1.0, 6.0);
    for (const VariogramBin& b : vy.bins) {
        const double se = 2.0 * sigma * sigma * std::sqrt(2.0 / static_cast<double>(b.pairs));
        CHECK(std::abs(b.gamma_nm2 - sigma * sigma) <= 3.0 * se);
    }
}

TEST_CASE("a pure linear trend gives the algebraic semivariogram") {
    const double m = 0.4;
    const SpatialField f =
        grid_field(30, 8, 1.0, [&](double x, double) { return m * x; });
    const SemivariogramResult v = semivariogram(f, FieldAxis::X, 1.0, 12.0);
    REQUIRE(v.bins.size() == 12);
    for (const VariogramBin& b : v.bins) {
        const double expect = m * m * b.lag_um * b.lag_um / 2.0;
        CHECK(std::abs(b.gamma_nm2 - expect) <= 1e-12 * expect);
    }
    CHECK(v.nugget_nm2 == v.bins.front().gamma_nm2);
}

TEST_CASE("semivariogram validates inputs and reports empty ranges") {
    const SpatialField f = grid_field(6, 6, 1.0, [](double x, double y) { return x * y; });
    CHECK_THROWS_AS(semivariogram(f, FieldAxis::X, 0.0, 5.0), Error);
    CHECK_THROWS_AS(semivariogram(f, FieldAxis::X, -1.0, 5.0), Error);
    CHECK_THROWS_AS(semivariogram(f, FieldAxis::X, 1.0, 0.0), Error);
    try {
        semivariogram(f, FieldAxis::X, 1.0, 0.4);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoPairsInRange);
    }
}

TEST_CASE("semivariogram bins do not depend on point ordering") {
    const CounterRng rng(308, 0);
    SpatialField f;
    for (int j = 0; j < 12; ++j)
        for (int i = 0; i < 12; ++i)
            f.points.push_back({static_cast<double>(i), static_cast<double>(j),
                                rng.normal(static_cast<uint64_t>(j) * 12 + static_cast<uint64_t>(i))});
    SpatialField g = f;
    std::reverse(g.points.begin(), g.points.end());
    std::rotate(g.points.begin(), g.points.begin() + 41, g.points.end());
    const SemivariogramResult a = semivariogram(f, FieldAxis::X, 1.0, 6.0);
    const SemivariogramResult b = semivariogram(g, FieldAxis::X, 1.0, 6.0);
    REQUIRE(a.bins.size() == b.bins.size());
    for (size_t i = 0; i < a.bins.size(); ++i) {
        CHECK(a.bins[i].lag_um == b.bins[i].lag_um);
        CHECK(a.bins[i].gamma_nm2 == b.bins[i].gamma_nm2);
        CHECK(a.bins[i].pairs == b.bins[i].pairs);
    }
}

TEST_CASE("removing the smooth trend flattens the semivariogram") {
    const CounterRng rng(309, 0);
    const int nx = 40, ny = 20;
    SpatialField f;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            f.points.push_back(
                {static_cast<double>(i), static_cast<double>(j),
                 0.3 * i + rng.normal(static_cast<uint64_t>(j) * nx + static_cast<uint64_t>(i))});

    const LoessFit fit = loess_fit(f, default_loess_k(f.points.size()));
    SpatialField resid = f;
    for (size_t i = 0; i < resid.points.size(); ++i)
        resid.points[i].z_nm = f.points[i].z_nm - fit.fitted_nm[i];

    const auto slope = [](const SemivariogramResult& v) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(v.bins.size());
        for (const VariogramBin& b : v.bins) {
            sx += b.lag_um;
            sy += b.gamma_nm2;
            sxx += b.lag_um * b.lag_um;
            sxy += b.lag_um * b.gamma_nm2;
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    const double raw = slope(semivariogram(f, FieldAxis::X, 1.0, 10.0));
    const double after = slope(semivariogram(resid, FieldAxis::X, 1.0, 10.0));
    CHECK(raw > 0.0);
    CHECK(std::abs(after) <= 0.5 * raw);
}
