#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "qmc/mc.hpp"
#include "qmc/surrogate.hpp"
#include "testutil.hpp"

using namespace qmc;
using qmctest::TempDir;

namespace {

SurrogateModel hand_model() {
    SurrogateModel m;
    m.w0_um = 0.330;
    m.r0_um = 0.045;
    m.t0_um = 0.129;
    m.lambda0_nm = 633.2;
    m.c_w = 229.0;
    m.c_r = -579.0;
    m.c_t = 704.0;
    m.validity.w_um[0] = 0.30;
    m.validity.w_um[1] = 0.36;
    m.validity.r_um[0] = 0.03;
    m.validity.r_um[1] = 0.06;
    m.validity.t_um[0] = 0.06;
    m.validity.t_um[1] = 0.20;
    return m;
}

double linear_law(double dw, double dr, double dt) {
    return 633.0 + 200.0 * dw - 500.0 * dr + 700.0 * dt;
}

std::vector<SurrogateSample> grid_samples(int per_axis, double span,
                                          bool quadratic_terms = false) {
    std::vector<SurrogateSample> out;
    for (int i = 0; i < per_axis; ++i) {
        for (int j = 0; j < per_axis; ++j) {
            for (int k = 0; k < per_axis; ++k) {
                const double fw = per_axis == 1 ? 0.0 : (2.0 * i / (per_axis - 1) - 1.0);
                const double fr = per_axis == 1 ? 0.0 : (2.0 * j / (per_axis - 1) - 1.0);
                const double ft = per_axis == 1 ? 0.0 : (2.0 * k / (per_axis - 1) - 1.0);
                SurrogateSample s;
                s.w_um = 0.330 + span * fw;
                s.r_um = 0.045 + span * fr;
                s.t_um = 0.129 + span * ft;
                const double dw = s.w_um - 0.330, dr = s.r_um - 0.045, dt = s.t_um - 0.129;
                s.lambda_nm = linear_law(dw, dr, dt);
                if (quadratic_terms) {
                    s.lambda_nm += 1000.0 * dw * dw - 2000.0 * dr * dr + 3000.0 * dt * dt +
                                   400.0 * dw * dr + 500.0 * dw * dt - 600.0 * dr * dt;
                }
                out.push_back(s);
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("diamond dispersion at frozen reference wavelengths") {
    const double n620 = sellmeier_n(Length::nm(620.0));
    CHECK(n620 == doctest::Approx(2.4135791).epsilon(1e-6));
    // Within half a percent of the round-number bulk value 2.424.
    CHECK(std::abs(n620 - 2.424) / 2.424 < 0.005);

    CHECK(sellmeier_n(Length::um(1.0)) == doctest::Approx(2.3929).epsilon(2e-4));

    // Long-wavelength limit sqrt(1 + B1 + B2) = 2.380378, approached
    // within 1e-3 at the 5 um validity edge.
    CHECK(std::abs(sellmeier_n(Length::um(5.0)) - 2.380378) < 1e-3);

    // Dispersion is normal: n falls monotonically across the visible.
    CHECK(sellmeier_n(Length::nm(500.0)) > n620);
    CHECK(n620 > sellmeier_n(Length::nm(800.0)));
}

TEST_CASE("dispersion rejects out-of-range and near-pole wavelengths") {
    SUBCASE("validity range") {
        try {
            sellmeier_n(Length::nm(200.0));
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::OutOfValidityRange);
        }
        CHECK_THROWS_AS(sellmeier_n(Length::um(6.0)), Error);
    }
    SUBCASE("pole proximity in a custom parameter set") {
        SellmeierParams p;
        p.b1 = 0.5;
        p.c1_um2 = 0.36;  // pole at 0.6 um, inside the stated range
        p.b2 = 1.0;
        p.c2_um2 = 0.01;
        p.valid_lo = Length::um(0.3);
        p.valid_hi = Length::um(2.0);
        try {
            sellmeier_n(Length::um(0.6), p);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::PoleProximity);
        }
        // Just outside the 1e-6 um^2 guard it evaluates (to a huge value).
        CHECK(std::isfinite(sellmeier_n(Length::um(std::sqrt(0.36 + 1e-5)), p)));
    }
    SUBCASE("nonphysical n^2 below one") {
        SellmeierParams p;
        p.b1 = -5.0;
        p.c1_um2 = 0.01;
        p.b2 = 0.0;
        p.c2_um2 = 0.04;
        p.valid_lo = Length::um(0.3);
        p.valid_hi = Length::um(2.0);
        CHECK_THROWS_AS(sellmeier_n(Length::um(1.0), p), Error);
    }
}

TEST_CASE("surrogate evaluation is the documented closed form") {
    auto m = hand_model();
    const Length lam = surrogate_eval(m, Length::um(0.331), Length::um(0.043),
                                      Length::um(0.132));
    // 633.2 + 229*0.001 - 579*(-0.002) + 704*0.003 = 636.699
    CHECK(lam.nm() == doctest::Approx(636.699).epsilon(1e-12));

    SUBCASE("quadratic terms use plain products in ww,rr,tt,wr,wt,rt order") {
        m.quadratic = std::array<double, 6>{10.0, 20.0, 30.0, 40.0, 50.0, 60.0};
        const Length q = surrogate_eval(m, Length::um(0.340), Length::um(0.055),
                                        Length::um(0.139));
        // dw = dr = dt = 0.01; linear part 633.2 + (229-579+704)*0.01 = 636.74;
        // quadratic part (10+20+30+40+50+60)*1e-4 = 0.021.
        CHECK(q.nm() == doctest::Approx(636.761).epsilon(1e-12));
    }
    SUBCASE("outside the validity box") {
        try {
            surrogate_eval(m, Length::um(0.50), Length::um(0.045), Length::um(0.129));
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::OutOfValidityBox);
        }
    }
}

TEST_CASE("shipped default calibration has physical sensitivities") {
    const auto m = default_surrogate();
    CHECK(m.w0_um == 0.330);
    CHECK(m.r0_um == 0.045);
    CHECK(m.t0_um == 0.129);
    CHECK(m.lambda0_nm == doctest::Approx(633.2).epsilon(1e-9));

    // Wider or thicker beams red-shift, larger holes blue-shift.
    CHECK(m.c_w > 0.0);
    CHECK(m.c_r < 0.0);
    CHECK(m.c_t > 0.0);
    CHECK(m.c_t > 400.0);
    CHECK(m.c_t < 1000.0);
    CHECK_FALSE(m.quadratic.has_value());

    CHECK(m.validity.w_um[0] == 0.300);
    CHECK(m.validity.w_um[1] == 0.360);
    CHECK(m.validity.t_um[0] == 0.060);
    CHECK(m.validity.t_um[1] == 0.200);
    CHECK_FALSE(m.provenance.empty());

    const Length at_ref =
        surrogate_eval(m, Length::um(0.330), Length::um(0.045), Length::um(0.129));
    CHECK(at_ref.nm() == doctest::Approx(m.lambda0_nm).epsilon(1e-15));
}

TEST_CASE("linear fit recovers an exact linear law") {
    const auto samples = grid_samples(3, 0.01);
    const auto m = fit_surrogate(samples, SurrogateOrder::Linear);
    // Grid is symmetric, so the centroid is the nominal center.
    CHECK(m.w0_um == doctest::Approx(0.330).epsilon(1e-12));
    CHECK(m.lambda0_nm == doctest::Approx(633.0).epsilon(1e-12));
    CHECK(m.c_w == doctest::Approx(200.0).epsilon(1e-9));
    CHECK(m.c_r == doctest::Approx(-500.0).epsilon(1e-9));
    CHECK(m.c_t == doctest::Approx(700.0).epsilon(1e-9));
    CHECK_FALSE(m.quadratic.has_value());
    // Validity box equals the sample bounding box.
    CHECK(m.validity.w_um[0] == doctest::Approx(0.320).epsilon(1e-12));
    CHECK(m.validity.w_um[1] == doctest::Approx(0.340).epsilon(1e-12));
}

TEST_CASE("fit is bitwise invariant under sample permutation") {
    auto samples = grid_samples(3, 0.01);
    // Add noise so the fit is not trivially exact.
    const CounterRng rng(8, 0);
    for (size_t i = 0; i < samples.size(); ++i) {
        samples[i].lambda_nm += 0.05 * rng.normal(i);
    }
    const auto base = fit_surrogate(samples, SurrogateOrder::Linear);

    auto shuffled = samples;
    const CounterRng perm(9, 0);
    for (size_t i = shuffled.size() - 1; i > 0; --i) {
        std::swap(shuffled[i], shuffled[perm.below(i, i + 1)]);
    }
    REQUIRE(shuffled.size() == samples.size());
    const auto again = fit_surrogate(shuffled, SurrogateOrder::Linear);

    CHECK(base.lambda0_nm == again.lambda0_nm);
    CHECK(base.c_w == again.c_w);
    CHECK(base.c_r == again.c_r);
    CHECK(base.c_t == again.c_t);
    CHECK(base.w0_um == again.w0_um);
    CHECK(base.r0_um == again.r0_um);
    CHECK(base.t0_um == again.t0_um);
    CHECK(base.validity.w_um[0] == again.validity.w_um[0]);
    CHECK(base.validity.t_um[1] == again.validity.t_um[1]);
}

TEST_CASE("quadratic fit recovers exact quadratic coefficients") {
    const auto samples = grid_samples(4, 0.012, true);
    REQUIRE(samples.size() >= 20);  // 2x the 10 coefficients
    const auto m = fit_surrogate(samples, SurrogateOrder::Quadratic);
    REQUIRE(m.quadratic.has_value());
    // The reference moved to the centroid; on the symmetric grid the pure
    // quadratic terms shift lambda0 but leave every coefficient intact.
    CHECK(m.c_w == doctest::Approx(200.0).epsilon(1e-6));
    CHECK(m.c_r == doctest::Approx(-500.0).epsilon(1e-6));
    CHECK(m.c_t == doctest::Approx(700.0).epsilon(1e-6));
    const auto& q = *m.quadratic;
    CHECK(q[0] == doctest::Approx(1000.0).epsilon(1e-6));
    CHECK(q[1] == doctest::Approx(-2000.0).epsilon(1e-6));
    CHECK(q[2] == doctest::Approx(3000.0).epsilon(1e-6));
    CHECK(q[3] == doctest::Approx(400.0).epsilon(1e-6));
    CHECK(q[4] == doctest::Approx(500.0).epsilon(1e-6));
    CHECK(q[5] == doctest::Approx(-600.0).epsilon(1e-6));

    // The fitted surface reproduces the generating law at an interior point.
    const double dw = 0.004, dr = -0.006, dt = 0.008;
    const double want = linear_law(dw, dr, dt) + 1000.0 * dw * dw - 2000.0 * dr * dr +
                        3000.0 * dt * dt + 400.0 * dw * dr + 500.0 * dw * dt -
                        600.0 * dr * dt;
    const Length got = surrogate_eval(m, Length::um(0.330 + dw), Length::um(0.045 + dr),
                                      Length::um(0.129 + dt));
    CHECK(got.nm() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("noisy linear fit lands inside the OLS sampling band") {
    auto samples = grid_samples(5, 0.015);
    const double sigma = 0.05;  // nm
    const CounterRng rng(123, 0);
    for (size_t i = 0; i < samples.size(); ++i) {
        samples[i].lambda_nm += sigma * rng.normal(i);
    }
    const auto m = fit_surrogate(samples, SurrogateOrder::Linear);

    // Coefficient standard errors from the exact design: sqrt of the
    // diagonal of sigma^2 (X^T X)^-1 on the centered design.
    const size_t n = samples.size();
    Eigen::MatrixXd x(n, 4);
    double mw = 0, mr = 0, mt = 0;
    for (const auto& s : samples) {
        mw += s.w_um;
        mr += s.r_um;
        mt += s.t_um;
    }
    mw /= n;
    mr /= n;
    mt /= n;
    for (size_t i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = samples[i].w_um - mw;
        x(i, 2) = samples[i].r_um - mr;
        x(i, 3) = samples[i].t_um - mt;
    }
    const Eigen::MatrixXd cov = sigma * sigma * (x.transpose() * x).inverse();
    CHECK(std::abs(m.c_w - 200.0) < 3.0 * std::sqrt(cov(1, 1)));
    CHECK(std::abs(m.c_r - (-500.0)) < 3.0 * std::sqrt(cov(2, 2)));
    CHECK(std::abs(m.c_t - 700.0) < 3.0 * std::sqrt(cov(3, 3)));
    CHECK(std::abs(m.lambda0_nm - 633.0) < 3.0 * std::sqrt(cov(0, 0)));
}

TEST_CASE("fit rejects deficient designs and short sample sets") {
    SUBCASE("constant width column") {
        auto samples = grid_samples(3, 0.01);
        for (auto& s : samples) s.w_um = 0.330;
        try {
            fit_surrogate(samples, SurrogateOrder::Linear);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::RankDeficient);
        }
    }
    SUBCASE("too few samples") {
        auto samples = grid_samples(3, 0.01);
        samples.resize(7);  // below 2 x 4 coefficients
        try {
            fit_surrogate(samples, SurrogateOrder::Linear);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::TooFewSamples);
        }
    }
}

TEST_CASE("thickness inversion round-trips through the forward model") {
    const auto m = default_surrogate();
    const Length w = Length::um(0.330), r = Length::um(0.045);
    const Length t = invert_for_thickness(m, w, r, Length::nm(640.0), Length::um(0.060),
                                          Length::um(0.200));
    const double t_closed = m.t0_um + (640.0 - m.lambda0_nm) / m.c_t;
    CHECK(std::abs(t.um() - t_closed) < 2e-7);
    CHECK(std::abs(surrogate_eval(m, w, r, t).nm() - 640.0) < 1e-3);

    SUBCASE("bracket that misses the solution") {
        try {
            invert_for_thickness(m, w, r, Length::nm(700.0), Length::um(0.060),
                                 Length::um(0.200));
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NoSignChange);
        }
    }
    SUBCASE("slope reversal inside the bracket") {
        auto bad = hand_model();
        bad.c_t = 0.0;
        bad.quadratic = std::array<double, 6>{0, 0, 100.0, 0, 0, 0};
        try {
            invert_for_thickness(bad, w, r, Length::nm(633.3), Length::um(0.079),
                                 Length::um(0.179));
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonMonotoneOnBracket);
        }
    }
}

TEST_CASE("calibration files round-trip every field") {
    TempDir dir("surr");
    auto m = hand_model();
    m.quadratic = std::array<double, 6>{1.5, -2.5, 3.25, 0.125, -0.0625, 7.0};
    m.provenance = "unit fixture";
    const std::string path = dir.path("cal.json");
    save_surrogate(m, path);
    const auto back = load_surrogate(path);
    CHECK(back.w0_um == m.w0_um);
    CHECK(back.r0_um == m.r0_um);
    CHECK(back.t0_um == m.t0_um);
    CHECK(back.lambda0_nm == m.lambda0_nm);
    CHECK(back.c_w == m.c_w);
    CHECK(back.c_r == m.c_r);
    CHECK(back.c_t == m.c_t);
    REQUIRE(back.quadratic.has_value());
    for (size_t i = 0; i < 6; ++i) CHECK((*back.quadratic)[i] == (*m.quadratic)[i]);
    CHECK(back.validity.w_um[0] == m.validity.w_um[0]);
    CHECK(back.validity.t_um[1] == m.validity.t_um[1]);
    CHECK(back.provenance == m.provenance);

    SUBCASE("linear models omit the quadratic block") {
        auto lin = hand_model();
        save_surrogate(lin, dir.path("lin.json"));
        const auto lin_back = load_surrogate(dir.path("lin.json"));
        CHECK_FALSE(lin_back.quadratic.has_value());
    }
    SUBCASE("missing keys are a typed error") {
        write_file_bytes(dir.path("broken.json"), R"({"reference": {}})");
        try {
            load_surrogate(dir.path("broken.json"));
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::HeaderMismatch);
        }
    }
}
