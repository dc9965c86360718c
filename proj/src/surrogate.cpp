#include "qmc/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <json.hpp>

#include "qmc/io.hpp"

namespace qmc {

SellmeierParams SellmeierParams::diamond() {
    SellmeierParams p;
    p.b1 = 0.3306;
    p.c1_um2 = 0.175 * 0.175;
    p.b2 = 4.3356;
    p.c2_um2 = 0.106 * 0.106;
    p.valid_lo = Length::um(0.23);
    p.valid_hi = Length::um(5.0);
    return p;
}

double sellmeier_n(Length lambda, const SellmeierParams& params) {
    const double l_um = lambda.um();
    require_positive(l_um, "lambda_um");
    if (lambda < params.valid_lo || lambda > params.valid_hi) {
        throw Error(ErrorCode::OutOfValidityRange, "wavelength outside Sellmeier validity",
                    {{"lambda_um", format_real17(l_um)},
                     {"valid_lo_um", format_real17(params.valid_lo.um())},
                     {"valid_hi_um", format_real17(params.valid_hi.um())}});
    }
    const double l2 = l_um * l_um;
    constexpr double kPoleGuard = 1e-6;  // um^2
    if (std::abs(l2 - params.c1_um2) < kPoleGuard || std::abs(l2 - params.c2_um2) < kPoleGuard) {
        throw Error(ErrorCode::PoleProximity, "wavelength too close to a Sellmeier pole",
                    {{"lambda2_um2", format_real17(l2)}});
    }
    const double n2 =
        1.0 + params.b1 * l2 / (l2 - params.c1_um2) + params.b2 * l2 / (l2 - params.c2_um2);
    if (!(n2 > 0.0) || !std::isfinite(n2)) {
        throw Error(ErrorCode::PoleProximity, "nonphysical Sellmeier evaluation",
                    {{"n2", format_real17(n2)}});
    }
    return std::sqrt(n2);
}

bool SurrogateModel::inside(double w_um, double r_um, double t_um) const {
    return w_um >= validity.w_um[0] && w_um <= validity.w_um[1] && r_um >= validity.r_um[0] &&
           r_um <= validity.r_um[1] && t_um >= validity.t_um[0] && t_um <= validity.t_um[1];
}

namespace {

double eval_um(const SurrogateModel& m, double w, double r, double t) {
    const double dw = w - m.w0_um, dr = r - m.r0_um, dt = t - m.t0_um;
    double nm = m.lambda0_nm + m.c_w * dw + m.c_r * dr + m.c_t * dt;
    if (m.quadratic) {
        const auto& q = *m.quadratic;
        nm += q[0] * dw * dw + q[1] * dr * dr + q[2] * dt * dt + q[3] * dw * dr +
              q[4] * dw * dt + q[5] * dr * dt;
    }
    return nm;
}

void require_inside(const SurrogateModel& m, double w, double r, double t) {
    if (!m.inside(w, r, t)) {
        throw Error(ErrorCode::OutOfValidityBox, "geometry outside calibration validity box",
                    {{"w_um", format_real17(w)},
                     {"r_um", format_real17(r)},
                     {"t_um", format_real17(t)}});
    }
}

} // namespace

Length surrogate_eval(const SurrogateModel& m, Length w, Length r, Length t) {
    require_positive(w.um(), "w_um");
    require_positive(r.um(), "r_um");
    require_positive(t.um(), "t_um");
    require_inside(m, w.um(), r.um(), t.um());
    return Length::nm(eval_um(m, w.um(), r.um(), t.um()));
}

SurrogateModel fit_surrogate(std::vector<SurrogateSample> samples, SurrogateOrder order) {
    const size_t n_coef = order == SurrogateOrder::Linear ? 4 : 10;
    if (samples.size() < 2 * n_coef) {
        throw Error(ErrorCode::TooFewSamples, "need at least 2x coefficient count",
                    {{"n", std::to_string(samples.size())},
                     {"n_coef", std::to_string(n_coef)}});
    }
    for (const auto& s : samples) {
        require_positive(s.w_um, "w_um");
        require_positive(s.r_um, "r_um");
        require_positive(s.t_um, "t_um");
        require_finite(s.lambda_nm, "lambda_nm");
    }
    // Canonical order makes the accumulation independent of input order.
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
        return std::tie(a.w_um, a.r_um, a.t_um, a.lambda_nm) <
               std::tie(b.w_um, b.r_um, b.t_um, b.lambda_nm);
    });

    const size_t n = samples.size();
    double w0 = 0, r0 = 0, t0 = 0;
    for (const auto& s : samples) {
        w0 += s.w_um;
        r0 += s.r_um;
        t0 += s.t_um;
    }
    w0 /= static_cast<double>(n);
    r0 /= static_cast<double>(n);
    t0 /= static_cast<double>(n);

    Eigen::MatrixXd design(n, n_coef);
    Eigen::VectorXd rhs(n);
    for (size_t i = 0; i < n; ++i) {
        const double dw = samples[i].w_um - w0;
        const double dr = samples[i].r_um - r0;
        const double dt = samples[i].t_um - t0;
        design(i, 0) = 1.0;
        design(i, 1) = dw;
        design(i, 2) = dr;
        design(i, 3) = dt;
        if (n_coef == 10) {
            design(i, 4) = dw * dw;
            design(i, 5) = dr * dr;
            design(i, 6) = dt * dt;
            design(i, 7) = dw * dr;
            design(i, 8) = dw * dt;
            design(i, 9) = dr * dt;
        }
        rhs(i) = samples[i].lambda_nm;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > 1e10) {
        throw Error(ErrorCode::RankDeficient, "degenerate sample design",
                    {{"condition", format_real17(sv(sv.size() - 1) > 0
                                                     ? sv(0) / sv(sv.size() - 1)
                                                     : std::numeric_limits<double>::infinity())}});
    }
    Eigen::VectorXd beta = svd.solve(rhs);

    SurrogateModel m;
    m.w0_um = w0;
    m.r0_um = r0;
    m.t0_um = t0;
    m.lambda0_nm = beta(0);
    m.c_w = beta(1);
    m.c_r = beta(2);
    m.c_t = beta(3);
    if (n_coef == 10) {
        m.quadratic = std::array<double, 6>{beta(4), beta(5), beta(6),
                                            beta(7), beta(8), beta(9)};
    }
    auto minmax = [](auto&& proj, const std::vector<SurrogateSample>& ss) {
        double lo = proj(ss[0]), hi = proj(ss[0]);
        for (const auto& s : ss) {
            lo = std::min(lo, proj(s));
            hi = std::max(hi, proj(s));
        }
        return std::pair{lo, hi};
    };
    auto [wl, wh] = minmax([](const SurrogateSample& s) { return s.w_um; }, samples);
    auto [rl, rh] = minmax([](const SurrogateSample& s) { return s.r_um; }, samples);
    auto [tl, th] = minmax([](const SurrogateSample& s) { return s.t_um; }, samples);
    m.validity.w_um[0] = wl;
    m.validity.w_um[1] = wh;
    m.validity.r_um[0] = rl;
    m.validity.r_um[1] = rh;
    m.validity.t_um[0] = tl;
    m.validity.t_um[1] = th;
    m.provenance = std::string("least-squares fit, ") +
                   (order == SurrogateOrder::Linear ? "linear" : "quadratic") + ", n=" +
                   std::to_string(n);
    return m;
}

Length invert_for_thickness(const SurrogateModel& m, Length w, Length r, Length lambda,
                            Length t_lo, Length t_hi) {
    require_positive(w.um(), "w_um");
    require_positive(r.um(), "r_um");
    double lo = t_lo.um(), hi = t_hi.um();
    if (!(lo < hi)) {
        throw Error(ErrorCode::InvalidArgument, "bracket must satisfy t_lo < t_hi",
                    {{"t_lo_um", format_real17(lo)}, {"t_hi_um", format_real17(hi)}});
    }
    const double target = lambda.nm();
    auto f = [&](double t) { return eval_um(m, w.um(), r.um(), t) - target; };

    if (m.quadratic) {
        // Reject brackets on which the model is not monotone in t.
        const auto& q = *m.quadratic;
        const double dw = w.um() - m.w0_um, dr = r.um() - m.r0_um;
        auto slope = [&](double t) {
            return m.c_t + 2.0 * q[2] * (t - m.t0_um) + q[4] * dw + q[5] * dr;
        };
        // Slope is affine in t, so the endpoints decide.
        if (slope(lo) * slope(hi) < 0.0) {
            throw Error(ErrorCode::NonMonotoneOnBracket,
                        "surrogate slope changes sign inside the bracket",
                        {{"t_lo_um", format_real17(lo)}, {"t_hi_um", format_real17(hi)}});
        }
    }
    double f_lo = f(lo), f_hi = f(hi);
    if (f_lo == 0.0) return Length::um(lo);
    if (f_hi == 0.0) return Length::um(hi);
    if (f_lo * f_hi > 0.0) {
        throw Error(ErrorCode::NoSignChange, "target wavelength not bracketed",
                    {{"f_lo_nm", format_real17(f_lo)}, {"f_hi_nm", format_real17(f_hi)}});
    }
    constexpr double kTol = 1e-7;  // um
    while (hi - lo > kTol) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if (f_mid == 0.0) return Length::um(mid);
        if (f_lo * f_mid < 0.0) {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    return Length::um(0.5 * (lo + hi));
}

double analytic_standin_lambda_nm(double w_um, double r_um, double t_um) {
    // Bulk index at the 620 nm design wavelength.
    static const double n_bulk = sellmeier_n(Length::nm(620.0));
    constexpr double kThicknessScale = 0.180;  // um
    constexpr double kWidthScale = 0.220;      // um
    constexpr double kHolePitch = 0.250;       // um
    const double conf_t = t_um / (t_um + kThicknessScale);
    const double conf_w = w_um / (w_um + kWidthScale);
    const double fill = std::numbers::pi * r_um * r_um / (kHolePitch * w_um);
    const double n_eff = 1.0 + (n_bulk - 1.0) * conf_t * conf_w * (1.0 - fill);
    // K pins the reference geometry (0.330, 0.045, 0.129) um to 633.2 nm.
    static const double k_scale = [&] {
        const double ct = 0.129 / (0.129 + kThicknessScale);
        const double cw = 0.330 / (0.330 + kWidthScale);
        const double fl = std::numbers::pi * 0.045 * 0.045 / (kHolePitch * 0.330);
        return 633.2 / (1.0 + (n_bulk - 1.0) * ct * cw * (1.0 - fl));
    }();
    return k_scale * n_eff;
}

SurrogateModel default_surrogate() {
    SurrogateModel m;
    m.w0_um = 0.330;
    m.r0_um = 0.045;
    m.t0_um = 0.129;
    m.lambda0_nm = analytic_standin_lambda_nm(m.w0_um, m.r0_um, m.t0_um);
    constexpr double h = 1e-4;  // um
    m.c_w = (analytic_standin_lambda_nm(m.w0_um + h, m.r0_um, m.t0_um) -
             analytic_standin_lambda_nm(m.w0_um - h, m.r0_um, m.t0_um)) /
            (2 * h);
    m.c_r = (analytic_standin_lambda_nm(m.w0_um, m.r0_um + h, m.t0_um) -
             analytic_standin_lambda_nm(m.w0_um, m.r0_um - h, m.t0_um)) /
            (2 * h);
    m.c_t = (analytic_standin_lambda_nm(m.w0_um, m.r0_um, m.t0_um + h) -
             analytic_standin_lambda_nm(m.w0_um, m.r0_um, m.t0_um - h)) /
            (2 * h);
    m.validity.w_um[0] = 0.300;
    m.validity.w_um[1] = 0.360;
    m.validity.r_um[0] = 0.030;
    m.validity.r_um[1] = 0.060;
    m.validity.t_um[0] = 0.060;
    m.validity.t_um[1] = 0.200;
    m.provenance =
        "analytic effective-index stand-in, linearized at the reference geometry; "
        "not derived from an electromagnetic (FDTD) solve";
    return m;
}

namespace {

void require_key(const nlohmann::json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) {
        throw Error(ErrorCode::HeaderMismatch, std::string("calibration missing key: ") + key,
                    {{"path", path}});
    }
}

} // namespace

SurrogateModel load_surrogate(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_bytes(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::UnsupportedFormat, std::string("bad calibration JSON: ") + e.what(),
                    {{"path", path}});
    }
    for (const char* key : {"reference", "linear", "validity", "provenance"}) {
        require_key(j, key, path);
    }
    SurrogateModel m;
    try {
        const auto& ref = j["reference"];
        m.w0_um = ref.at("W_um").get<double>();
        m.r0_um = ref.at("r_um").get<double>();
        m.t0_um = ref.at("t_um").get<double>();
        m.lambda0_nm = ref.at("lambda_nm").get<double>();
        const auto& lin = j["linear"];
        m.c_w = lin.at("cW").get<double>();
        m.c_r = lin.at("cr").get<double>();
        m.c_t = lin.at("ct").get<double>();
        if (j.contains("quadratic") && !j["quadratic"].is_null()) {
            const auto& q = j["quadratic"];
            m.quadratic = std::array<double, 6>{
                q.at("cWW").get<double>(), q.at("crr").get<double>(), q.at("ctt").get<double>(),
                q.at("cWr").get<double>(), q.at("cWt").get<double>(), q.at("crt").get<double>()};
        }
        const auto& box = j["validity"];
        auto range = [&](const char* key, double out[2]) {
            out[0] = box.at(key).at(0).get<double>();
            out[1] = box.at(key).at(1).get<double>();
        };
        range("W_um", m.validity.w_um);
        range("r_um", m.validity.r_um);
        range("t_um", m.validity.t_um);
        m.provenance = j["provenance"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::HeaderMismatch, std::string("bad calibration field: ") + e.what(),
                    {{"path", path}});
    }
    for (double v : {m.w0_um, m.r0_um, m.t0_um, m.lambda0_nm, m.c_w, m.c_r, m.c_t}) {
        require_finite(v, "calibration value");
    }
    return m;
}

void save_surrogate(const SurrogateModel& m, const std::string& path) {
    nlohmann::json j;
    j["reference"] = {{"W_um", m.w0_um},
                      {"r_um", m.r0_um},
                      {"t_um", m.t0_um},
                      {"lambda_nm", m.lambda0_nm}};
    j["linear"] = {{"cW", m.c_w}, {"cr", m.c_r}, {"ct", m.c_t}};
    if (m.quadratic) {
        const auto& q = *m.quadratic;
        j["quadratic"] = {{"cWW", q[0]}, {"crr", q[1]}, {"ctt", q[2]},
                          {"cWr", q[3]}, {"cWt", q[4]}, {"crt", q[5]}};
    }
    j["validity"] = {{"W_um", {m.validity.w_um[0], m.validity.w_um[1]}},
                     {"r_um", {m.validity.r_um[0], m.validity.r_um[1]}},
                     {"t_um", {m.validity.t_um[0], m.validity.t_um[1]}}};
    j["provenance"] = m.provenance;
    write_file_bytes(path, j.dump(2) + "\n");
}

} // namespace qmc
