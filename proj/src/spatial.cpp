#include "qmc/spatial.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qmc/error.hpp"
#include "qmc/parallel.hpp"

namespace qmc {

namespace {

void validate_field(const SpatialField& field) {
    if (field.points.empty())
        throw Error(ErrorCode::InvalidArgument, "spatial field has no points", {});
    if (!(field.target.um() > 0.0))
        throw Error(ErrorCode::InvalidArgument, "target wavelength must be positive",
                    {{"target_nm", std::to_string(field.target.nm())}});
    for (const SpatialPoint& p : field.points)
        if (!std::isfinite(p.x_um) || !std::isfinite(p.y_um) || !std::isfinite(p.z_nm))
            throw Error(ErrorCode::InvalidArgument, "spatial field has non-finite entries", {});
}

// Every fit processes points in coordinate order, so results cannot depend on
// how the caller happened to order the input.
std::vector<size_t> canonical_order(const std::vector<SpatialPoint>& pts) {
    std::vector<size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t l, size_t r) {
        if (pts[l].x_um != pts[r].x_um) return pts[l].x_um < pts[r].x_um;
        if (pts[l].y_um != pts[r].y_um) return pts[l].y_um < pts[r].y_um;
        return pts[l].z_nm < pts[r].z_nm;
    });
    return idx;
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double tricube(double u) {
    if (!(u < 1.0)) return 0.0;
    const double t = 1.0 - u * u * u;
    return t * t * t;
}

} // namespace

double QuadraticSurface::evaluate(double x_um, double y_um) const {
    return beta[0] + beta[1] * x_um + beta[2] * y_um + beta[3] * x_um * x_um +
           beta[4] * x_um * y_um + beta[5] * y_um * y_um;
}

QuadraticSurface fit_quadratic_surface(const SpatialField& field) {
    validate_field(field);
    const std::vector<SpatialPoint>& pts = field.points;
    const size_t n = pts.size();
    if (n < 6)
        throw Error(ErrorCode::RankDeficient, "quadratic surface needs at least 6 points",
                    {{"points", std::to_string(n)}});
    const std::vector<size_t> order = canonical_order(pts);

    double cx = 0.0, cy = 0.0;
    for (size_t i : order) {
        cx += pts[i].x_um;
        cy += pts[i].y_um;
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    double vx = 0.0, vy = 0.0;
    for (size_t i : order) {
        vx += (pts[i].x_um - cx) * (pts[i].x_um - cx);
        vy += (pts[i].y_um - cy) * (pts[i].y_um - cy);
    }
    // Unit-spread coordinates condition the normal equations; degenerate
    // spreads fall through to the rank check below.
    const double sx = vx > 0.0 ? std::sqrt(vx / static_cast<double>(n)) : 1.0;
    const double sy = vy > 0.0 ? std::sqrt(vy / static_cast<double>(n)) : 1.0;

    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), 6);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (size_t r = 0; r < n; ++r) {
        const SpatialPoint& p = pts[order[r]];
        const double u = (p.x_um - cx) / sx;
        const double v = (p.y_um - cy) / sy;
        const auto row = static_cast<Eigen::Index>(r);
        A(row, 0) = 1.0;
        A(row, 1) = u;
        A(row, 2) = v;
        A(row, 3) = u * u;
        A(row, 4) = u * v;
        A(row, 5) = v * v;
        z(row) = p.z_nm;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < 6)
        throw Error(ErrorCode::RankDeficient, "points do not span the quadratic basis",
                    {{"rank", std::to_string(qr.rank())}});
    const Eigen::VectorXd alpha = qr.solve(z);

    const Eigen::VectorXd grad = A.transpose() * (A * alpha - z);
    const double ref = (A.transpose() * z).norm();
    if (grad.norm() > 1e-8 * std::max(ref, 1e-30))
        throw Error(ErrorCode::RankDeficient, "normal-equation residual check failed",
                    {{"relative", std::to_string(grad.norm() / std::max(ref, 1e-30))}});

    // Expand alpha(u, v) with u = (x-cx)/sx, v = (y-cy)/sy back to x/y.
    QuadraticSurface out;
    const double a0 = alpha(0), a1 = alpha(1), a2 = alpha(2), a3 = alpha(3), a4 = alpha(4),
                 a5 = alpha(5);
    out.beta[3] = a3 / (sx * sx);
    out.beta[4] = a4 / (sx * sy);
    out.beta[5] = a5 / (sy * sy);
    out.beta[1] = a1 / sx - 2.0 * a3 * cx / (sx * sx) - a4 * cy / (sx * sy);
    out.beta[2] = a2 / sy - 2.0 * a5 * cy / (sy * sy) - a4 * cx / (sx * sy);
    out.beta[0] = a0 - a1 * cx / sx - a2 * cy / sy + a3 * cx * cx / (sx * sx) +
                  a4 * cx * cy / (sx * sy) + a5 * cy * cy / (sy * sy);
    return out;
}

int default_loess_k(size_t n_points) {
    const auto k = static_cast<int>(std::ceil(0.3 * static_cast<double>(n_points)));
    return std::max(3, std::min<int>(k, static_cast<int>(std::max<size_t>(n_points, 1))));
}

LoessFit loess_fit(const SpatialField& field, int k) {
    validate_field(field);
    const std::vector<SpatialPoint>& pts = field.points;
    const size_t n = pts.size();
    if (k < 3 || static_cast<size_t>(k) > n)
        throw Error(ErrorCode::InvalidArgument, "neighbor count must satisfy 3 <= k <= N",
                    {{"k", std::to_string(k)}, {"n", std::to_string(n)}});
    const std::vector<size_t> order = canonical_order(pts);

    LoessFit out;
    out.k = k;
    out.fitted_nm.resize(n);
    out.planes.resize(n);
    out.degenerate.assign(n, 0);

    parallel_for_chunks(n, [&](size_t begin, size_t end) {
        std::vector<std::pair<double, size_t>> dist(n);
        for (size_t i = begin; i < end; ++i) {
            const SpatialPoint& pi = pts[i];
            for (size_t r = 0; r < n; ++r) {
                const SpatialPoint& pj = pts[order[r]];
                const double dx = pj.x_um - pi.x_um, dy = pj.y_um - pi.y_um;
                dist[r] = {std::sqrt(dx * dx + dy * dy), r};
            }
            std::sort(dist.begin(), dist.end());
            const double d_max = dist[static_cast<size_t>(k) - 1].first;

            // Weighted plane in coordinates centered on the target point; the
            // constant term is then the fitted value.
            double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0, sz = 0, sxz = 0, syz = 0;
            for (int m = 0; m < k; ++m) {
                const auto& [d, r] = dist[static_cast<size_t>(m)];
                const SpatialPoint& pj = pts[order[r]];
                const double w = tricube(d_max > 0.0 ? d / d_max : 0.0);
                const double xr = pj.x_um - pi.x_um, yr = pj.y_um - pi.y_um;
                s += w;
                sx += w * xr;
                sy += w * yr;
                sxx += w * xr * xr;
                sxy += w * xr * yr;
                syy += w * yr * yr;
                sz += w * pj.z_nm;
                sxz += w * xr * pj.z_nm;
                syz += w * yr * pj.z_nm;
            }

            Eigen::Matrix3d M;
            M << s, sx, sy, sx, sxx, sxy, sy, sxy, syy;
            Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
            if (lu.rank() < 3) {
                // Collinear neighborhood: the plane is underdetermined, so
                // report the tricube-weighted mean instead.
                const double mean = sz / s;
                out.fitted_nm[i] = mean;
                out.planes[i] = {mean, 0.0, 0.0};
                out.degenerate[i] = 1;
                continue;
            }
            const Eigen::Vector3d sol = lu.solve(Eigen::Vector3d(sz, sxz, syz));
            out.fitted_nm[i] = sol(0);
            out.planes[i] = {sol(0) - sol(1) * pi.x_um - sol(2) * pi.y_um, sol(1), sol(2)};
        }
    });
    return out;
}

ResidualSummary residual_summary(const SpatialField& field, const std::vector<double>& fitted_nm) {
    validate_field(field);
    if (fitted_nm.size() != field.points.size())
        throw Error(ErrorCode::InvalidArgument, "one fitted value per point required",
                    {{"points", std::to_string(field.points.size())},
                     {"fitted", std::to_string(fitted_nm.size())}});
    for (double v : fitted_nm)
        if (!std::isfinite(v))
            throw Error(ErrorCode::InvalidArgument, "fitted values must be finite", {});

    ResidualSummary out;
    std::vector<double> z;
    z.reserve(field.points.size());
    for (const SpatialPoint& p : field.points) z.push_back(p.z_nm);
    out.residuals_nm.resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) out.residuals_nm[i] = z[i] - fitted_nm[i];
    out.std_before_nm = sample_std(z);
    out.std_after_nm = sample_std(out.residuals_nm);
    out.reduction_pct =
        out.std_before_nm > 0.0 ? 100.0 * (1.0 - out.std_after_nm / out.std_before_nm) : 0.0;
    return out;
}

SemivariogramResult semivariogram(const SpatialField& field, FieldAxis axis, double bin_width_um,
                                  double max_lag_um) {
    validate_field(field);
    if (!(bin_width_um > 0.0) || !std::isfinite(bin_width_um))
        throw Error(ErrorCode::InvalidArgument, "bin width must be positive",
                    {{"bin_width_um", std::to_string(bin_width_um)}});
    if (!(max_lag_um > 0.0) || !std::isfinite(max_lag_um))
        throw Error(ErrorCode::InvalidArgument, "max lag must be positive",
                    {{"max_lag_um", std::to_string(max_lag_um)}});

    const std::vector<SpatialPoint>& pts = field.points;
    const std::vector<size_t> order = canonical_order(pts);
    const auto nb = static_cast<size_t>(std::llround(max_lag_um / bin_width_um)) + 1;
    std::vector<double> sums(nb, 0.0);
    std::vector<uint64_t> counts(nb, 0);

    for (size_t a = 0; a + 1 < order.size(); ++a) {
        const SpatialPoint& pa = pts[order[a]];
        for (size_t b = a + 1; b < order.size(); ++b) {
            const SpatialPoint& pb = pts[order[b]];
            const double h = axis == FieldAxis::X ? std::abs(pa.x_um - pb.x_um)
                                                  : std::abs(pa.y_um - pb.y_um);
            const double o = axis == FieldAxis::X ? std::abs(pa.y_um - pb.y_um)
                                                  : std::abs(pa.x_um - pb.x_um);
            if (!(o < 0.5 * bin_width_um) || h > max_lag_um) continue;
            const auto bin = static_cast<size_t>(std::llround(h / bin_width_um));
            const double dz = pa.z_nm - pb.z_nm;
            sums[bin] += dz * dz;
            counts[bin] += 1;
        }
    }

    SemivariogramResult out;
    out.axis = axis;
    for (size_t bin = 0; bin < nb; ++bin) {
        if (counts[bin] == 0) continue;
        out.bins.push_back({static_cast<double>(bin) * bin_width_um,
                            sums[bin] / (2.0 * static_cast<double>(counts[bin])), counts[bin]});
    }
    if (out.bins.empty())
        throw Error(ErrorCode::NoPairsInRange, "no axis-aligned pairs within the lag range",
                    {{"max_lag_um", std::to_string(max_lag_um)}});
    out.nugget_nm2 = out.bins.front().gamma_nm2;
    return out;
}

} // namespace qmc
