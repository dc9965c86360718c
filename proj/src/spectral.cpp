#include "qmc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "qmc/error.hpp"
#include "qmc/io.hpp"

namespace qmc {

namespace {

struct RawPeak {
    size_t index;      // plateau midpoint
    double prominence;
    double left_min;
    double right_min;
    size_t left_base;
    size_t right_base;
};

// Interior strict maxima; plateaus collapse to their midpoint.
std::vector<size_t> local_maxima(const std::vector<double>& y) {
    std::vector<size_t> out;
    const size_t n = y.size();
    size_t i = 1;
    while (i + 1 < n) {
        if (y[i - 1] < y[i]) {
            size_t ahead = i + 1;
            while (ahead + 1 < n && y[ahead] == y[i]) ++ahead;
            if (y[ahead] < y[i]) {
                out.push_back(i + (ahead - 1 - i) / 2);
                i = ahead;
                continue;
            }
        }
        ++i;
    }
    return out;
}

// Contour prominence: drop to the lowest point on each side before a
// strictly higher sample (or the boundary); prominence is the height above
// the higher of the two minima. Bases are the argmin positions.
RawPeak measure_peak(const std::vector<double>& y, size_t peak) {
    RawPeak r;
    r.index = peak;
    const double top = y[peak];

    double left_min = top;
    size_t left_base = peak;
    for (size_t i = peak; y[i] <= top;) {
        if (y[i] < left_min) {
            left_min = y[i];
            left_base = i;
        }
        if (i == 0) break;
        --i;
    }
    double right_min = top;
    size_t right_base = peak;
    for (size_t i = peak; i < y.size() && y[i] <= top; ++i) {
        if (y[i] < right_min) {
            right_min = y[i];
            right_base = i;
        }
    }
    r.left_min = left_min;
    r.right_min = right_min;
    r.left_base = left_base;
    r.right_base = right_base;
    r.prominence = top - std::max(left_min, right_min);
    return r;
}

// Wavelength of the crossing with `height` between the base and the peak,
// linearly interpolated on the segment where the crossing happens.
double cross_left_um(const std::vector<double>& lam, const std::vector<double>& y,
                     const RawPeak& p, double height) {
    size_t i = p.index;
    while (i > p.left_base && y[i] > height) --i;
    if (y[i] >= height) return lam[i];
    const double t = (height - y[i]) / (y[i + 1] - y[i]);
    return lam[i] + t * (lam[i + 1] - lam[i]);
}

double cross_right_um(const std::vector<double>& lam, const std::vector<double>& y,
                      const RawPeak& p, double height) {
    size_t i = p.index;
    while (i < p.right_base && y[i] > height) ++i;
    if (y[i] >= height) return lam[i];
    const double t = (height - y[i]) / (y[i - 1] - y[i]);
    return lam[i] - t * (lam[i] - lam[i - 1]);
}

} // namespace

std::vector<PeakCandidate> find_peaks(const Spectrum& spectrum, const PeakFindConfig& cfg) {
    if (!(cfg.fwhm_lo < cfg.fwhm_hi)) {
        throw Error(ErrorCode::InvalidArgument, "fwhm range must be ordered");
    }
    const auto& lam = spectrum.wavelength_um();
    const auto& y = spectrum.intensity();

    std::vector<PeakCandidate> out;
    for (size_t idx : local_maxima(y)) {
        const RawPeak raw = measure_peak(y, idx);
        if (raw.prominence < cfg.min_prominence) continue;
        const double height = y[idx] - 0.5 * raw.prominence;
        const double lo_um = cross_left_um(lam, y, raw, height);
        const double hi_um = cross_right_um(lam, y, raw, height);
        const double fwhm_um = hi_um - lo_um;
        if (fwhm_um < cfg.fwhm_lo.um() || fwhm_um > cfg.fwhm_hi.um()) continue;
        PeakCandidate c;
        c.index = idx;
        c.center = Length::um(lam[idx]);
        c.prominence = raw.prominence;
        c.fwhm = Length::um(fwhm_um);
        c.height = y[idx];
        out.push_back(c);
    }
    std::stable_sort(out.begin(), out.end(), [](const PeakCandidate& a, const PeakCandidate& b) {
        return a.prominence > b.prominence;
    });
    if (out.size() > cfg.max_peaks) out.resize(cfg.max_peaks);
    return out;
}

namespace {

struct WindowData {
    std::vector<double> x_nm;  // wavelength minus the window center, nm
    std::vector<double> y;
    double shift_nm = 0.0;  // add back to recover absolute wavelength
};

WindowData extract_window(const Spectrum& s, Length lo, Length hi, Length init_center) {
    const auto [first, last] = s.window(lo, hi);
    if (last - first < 5) {
        throw Error(ErrorCode::WindowTooSmall, "fit window needs at least 5 samples",
                    {{"samples", std::to_string(last - first)}});
    }
    if (init_center < lo || init_center > hi) {
        throw Error(ErrorCode::WindowTooSmall, "initial center outside fit window");
    }
    WindowData w;
    w.shift_nm = init_center.nm();
    for (size_t i = first; i < last; ++i) {
        w.x_nm.push_back(s.wavelength_um()[i] * 1e3 - w.shift_nm);
        w.y.push_back(s.intensity()[i]);
    }
    return w;
}

struct LmOutcome {
    Eigen::VectorXd theta;
    double sse = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Damped Gauss-Newton: (J^T J + mu diag) step, mu shrinks on success and
// grows on rejection. Converged when the relative parameter step falls
// below 1e-10; hard cap 200 accepted iterations.
LmOutcome run_lm(Eigen::VectorXd theta,
                 const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&,
                                          Eigen::MatrixXd&)>& eval,
                 const std::function<void(Eigen::VectorXd&)>& project, size_t n_res) {
    const int n_par = static_cast<int>(theta.size());
    Eigen::VectorXd r(n_res);
    Eigen::MatrixXd jac(n_res, n_par);
    eval(theta, r, jac);
    double sse = r.squaredNorm();

    double mu = 1e-3;
    LmOutcome out;
    for (int iter = 1; iter <= 200; ++iter) {
        out.iterations = iter;
        const Eigen::MatrixXd h = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        const double diag_floor = 1e-12 * h.diagonal().maxCoeff() + 1e-300;

        bool accepted = false;
        Eigen::VectorXd delta(n_par);
        while (mu < 1e14) {
            Eigen::MatrixXd hd = h;
            for (int k = 0; k < n_par; ++k) {
                hd(k, k) += mu * std::max(h(k, k), diag_floor);
            }
            delta = hd.ldlt().solve(-g);
            if (!delta.allFinite()) {
                mu *= 10.0;
                continue;
            }
            Eigen::VectorXd cand = theta + delta;
            project(cand);
            Eigen::VectorXd r_new(n_res);
            Eigen::MatrixXd j_new(n_res, n_par);
            eval(cand, r_new, j_new);
            const double sse_new = r_new.squaredNorm();
            if (std::isfinite(sse_new) && sse_new <= sse) {
                theta = cand;
                r.swap(r_new);
                jac.swap(j_new);
                sse = sse_new;
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if (!accepted) break;  // damping exhausted: stationary or degenerate
        const double rel = delta.norm() / (theta.norm() + 1e-300);
        if (rel < 1e-10) {
            out.converged = true;
            break;
        }
    }
    out.theta = theta;
    out.sse = sse;
    return out;
}

} // namespace

LorentzianFit fit_lorentzian(const Spectrum& spectrum, Length window_lo, Length window_hi,
                             const PeakCandidate& init) {
    const WindowData w = extract_window(spectrum, window_lo, window_hi, init.center);
    const size_t n = w.y.size();
    const auto [y_min, y_max] = std::minmax_element(w.y.begin(), w.y.end());
    const double b0 = *y_min;
    const double ptp = *y_max - *y_min;
    double g0 = init.fwhm.nm();
    if (!(g0 > 0.0)) g0 = (window_hi.nm() - window_lo.nm()) / 10.0;

    if (!(ptp > 0.0)) {
        // A window without contrast carries no line; the amplitude/offset
        // split is unconstrained there, so refuse to claim convergence.
        LorentzianFit fit;
        fit.center = init.center;
        fit.fwhm = Length::nm(g0);
        fit.offset = b0;
        fit.q_factor = fit.center.nm() / fit.fwhm.nm();
        return fit;
    }

    Eigen::VectorXd theta(4);
    theta << 0.0, g0, init.height, b0;  // center offset, fwhm, amplitude, offset

    auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double l0 = th(0), gam = th(1), a = th(2), b = th(3);
        const double h = 0.5 * gam;
        for (size_t i = 0; i < n; ++i) {
            const double u = w.x_nm[i] - l0;
            const double d = u * u + h * h;
            r(i) = a * h * h / d + b - w.y[i];
            jac(i, 0) = 2.0 * a * h * h * u / (d * d);
            jac(i, 1) = a * h * u * u / (d * d);
            jac(i, 2) = h * h / d;
            jac(i, 3) = 1.0;
        }
    };
    auto project = [](Eigen::VectorXd& th) { th(1) = std::abs(th(1)); };

    const LmOutcome lm = run_lm(theta, eval, project, n);
    LorentzianFit fit;
    fit.center = Length::nm(lm.theta(0) + w.shift_nm);
    fit.fwhm = Length::nm(std::abs(lm.theta(1)));
    fit.amplitude = lm.theta(2);
    fit.offset = lm.theta(3);
    fit.q_factor = fit.center.nm() / fit.fwhm.nm();
    fit.residual_rms = std::sqrt(lm.sse / static_cast<double>(n));
    fit.iterations = lm.iterations;
    // A degenerate lineshape (amplitude vanishing against the window
    // contrast or collapsed width) cannot claim convergence even if the
    // steps stalled.
    fit.converged = lm.converged && lm.theta(2) > 1e-9 * ptp && fit.fwhm.nm() > 0.0;
    return fit;
}

FanoFit fit_fano(const Spectrum& spectrum, Length window_lo, Length window_hi,
                 const PeakCandidate& init) {
    const WindowData w = extract_window(spectrum, window_lo, window_hi, init.center);
    const size_t n = w.y.size();
    const auto [y_min, y_max] = std::minmax_element(w.y.begin(), w.y.end());
    const double b0 = *y_min;
    const double ptp = *y_max - *y_min;
    double g0 = init.fwhm.nm();
    if (!(g0 > 0.0)) g0 = (window_hi.nm() - window_lo.nm()) / 10.0;

    if (!(ptp > 0.0)) {
        FanoFit fit;
        fit.center = init.center;
        fit.fwhm = Length::nm(g0);
        fit.offset = b0;
        fit.q_factor = fit.center.nm() / fit.fwhm.nm();
        return fit;
    }

    auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
        const double l0 = th(0), gam = th(1), q = th(2), a = th(3), b = th(4);
        const double h = 0.5 * gam;
        for (size_t i = 0; i < n; ++i) {
            const double u = w.x_nm[i] - l0;
            const double s = q * h + u;
            const double d = h * h + u * u;
            r(i) = a * s * s / d + b - w.y[i];
            jac(i, 0) = 2.0 * a * s * (s * u - d) / (d * d);
            jac(i, 1) = a * s * (q * d - s * h) / (d * d);
            jac(i, 2) = 2.0 * a * s * h / d;
            jac(i, 3) = s * s / d;
            jac(i, 4) = 1.0;
        }
    };
    // Gamma stays positive; a sign flip of gamma is absorbed by q.
    auto project = [](Eigen::VectorXd& th) {
        if (th(1) < 0.0) {
            th(1) = -th(1);
            th(2) = -th(2);
        }
    };

    // The asymmetry direction is invisible to the candidate metrics, so try
    // a fixed ladder of q seeds and keep the lowest-residual outcome.
    // The window's full contrast sets the amplitude scale A (1 + q0^2)
    // whether the feature is a peak or a dip.
    const double q_seeds[] = {0.0, 1.0, -1.0, 4.0, -4.0};
    LmOutcome best;
    best.sse = std::numeric_limits<double>::infinity();
    for (double q0 : q_seeds) {
        Eigen::VectorXd theta(5);
        theta << 0.0, g0, q0, ptp / (1.0 + q0 * q0), b0;
        const LmOutcome lm = run_lm(theta, eval, project, n);
        if (lm.sse < best.sse) best = lm;
    }

    FanoFit fit;
    fit.center = Length::nm(best.theta(0) + w.shift_nm);
    fit.fwhm = Length::nm(std::abs(best.theta(1)));
    fit.q_asym = best.theta(2);
    fit.amplitude = best.theta(3);
    fit.offset = best.theta(4);
    fit.q_factor = fit.center.nm() / fit.fwhm.nm();
    fit.residual_rms = std::sqrt(best.sse / static_cast<double>(n));
    fit.iterations = best.iterations;
    // The shape scale of the model is A (1 + q^2); compare against the
    // window contrast as for the symmetric line.
    const double scale = fit.amplitude * (1.0 + fit.q_asym * fit.q_asym);
    fit.converged = best.converged && fit.fwhm.nm() > 0.0 && scale > 1e-9 * ptp;
    return fit;
}

TuningTrajectory track_resonance_shift(const std::vector<Spectrum>& frames, Length seed_lo,
                                       Length seed_hi, const TrackConfig& cfg) {
    if (frames.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "tracking needs at least two frames");
    }
    if (cfg.max_gap < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_gap must be positive");
    }

    auto refit = [&](const Spectrum& s, const PeakCandidate& c) -> std::optional<double> {
        const Length lo = Length::nm(c.center.nm() - cfg.fit_halfwidth.nm());
        const Length hi = Length::nm(c.center.nm() + cfg.fit_halfwidth.nm());
        try {
            const LorentzianFit fit = fit_lorentzian(s, lo, hi, c);
            return fit.center.nm();
        } catch (const Error&) {
            return std::nullopt;  // window clipped at the axis edge
        }
    };

    TuningTrajectory traj;
    traj.frame.resize(frames.size());
    traj.lambda_nm.resize(frames.size());

    // Seed: most prominent candidate inside the seed window on frame 0.
    double current_nm = 0.0;
    {
        const auto cands = find_peaks(frames[0], cfg.peaks);
        const PeakCandidate* seed = nullptr;
        for (const auto& c : cands) {
            if (c.center >= seed_lo && c.center <= seed_hi) {
                seed = &c;
                break;  // already sorted by prominence
            }
        }
        if (!seed) {
            throw Error(ErrorCode::SeedPeakNotFound, "no peak inside the seed window",
                        {{"lo_nm", format_real17(seed_lo.nm())},
                         {"hi_nm", format_real17(seed_hi.nm())}});
        }
        const auto fitted = refit(frames[0], *seed);
        current_nm = fitted.value_or(seed->center.nm());
        traj.frame[0] = 0;
        traj.lambda_nm[0] = current_nm;
    }

    int gap = 0;
    for (size_t f = 1; f < frames.size(); ++f) {
        traj.frame[f] = static_cast<int>(f);
        const auto cands = find_peaks(frames[f], cfg.peaks);
        const PeakCandidate* nearest = nullptr;
        double best_dist = 0.0;
        for (const auto& c : cands) {
            const double dist = std::abs(c.center.nm() - current_nm);
            if (dist > cfg.search_radius.nm()) continue;
            // ties keep the more prominent (earlier) candidate
            if (!nearest || dist < best_dist) {
                nearest = &c;
                best_dist = dist;
            }
        }
        std::optional<double> lam;
        if (nearest) lam = refit(frames[f], *nearest);
        if (lam) {
            current_nm = *lam;
            traj.lambda_nm[f] = lam;
            gap = 0;
        } else {
            ++gap;
            if (gap >= cfg.max_gap) {
                throw Error(ErrorCode::TrackLost, "resonance lost",
                            {{"frame", std::to_string(f)},
                             {"consecutive_missing", std::to_string(gap)}});
            }
        }
    }

    double first = 0.0, last = 0.0;
    bool any = false;
    for (const auto& lam : traj.lambda_nm) {
        if (!lam) continue;
        if (!any) first = *lam;
        last = *lam;
        any = true;
    }
    traj.total_shift_nm = any ? last - first : 0.0;
    traj.direction = traj.total_shift_nm > 0.0 ? 1 : (traj.total_shift_nm < 0.0 ? -1 : 0);
    return traj;
}

double enhancement_factor(const Spectrum& on, const Spectrum& off, Length line,
                          Length half_width) {
    const Length lo = Length::nm(line.nm() - half_width.nm());
    const Length hi = Length::nm(line.nm() + half_width.nm());

    auto integrate = [&](const Spectrum& s, bool off_side) -> double {
        if (s.wavelength_um().front() > lo.um() || s.wavelength_um().back() < hi.um()) {
            throw Error(ErrorCode::WindowTooSmall, "spectrum does not cover the line window");
        }
        const auto [first, last] = s.window(lo, hi);
        if (last - first < 2) {
            throw Error(ErrorCode::WindowTooSmall, "line window holds fewer than 2 samples");
        }
        std::vector<double> outside;
        for (size_t i = 0; i < s.size(); ++i) {
            if (i < first || i >= last) outside.push_back(s.intensity()[i]);
        }
        if (outside.empty()) {
            throw Error(ErrorCode::WindowTooSmall, "no samples outside the window for background");
        }
        std::sort(outside.begin(), outside.end());
        const size_t m = outside.size();
        const double bg = m % 2 ? outside[m / 2]
                                : 0.5 * (outside[m / 2 - 1] + outside[m / 2]);
        double acc = 0.0;
        for (size_t i = first; i + 1 < last; ++i) {
            const double dx = (s.wavelength_um()[i + 1] - s.wavelength_um()[i]) * 1e3;
            acc += 0.5 * dx * ((s.intensity()[i] - bg) + (s.intensity()[i + 1] - bg));
        }
        if (off_side && acc <= 0.0) {
            throw Error(ErrorCode::ZeroOffResonanceSignal,
                        "off-resonance window has no signal above background");
        }
        return acc;
    };

    const double denom = integrate(off, true);
    const double numer = integrate(on, false);
    if (numer <= 0.0) {
        throw Error(ErrorCode::InvalidArgument,
                    "on-resonance window has no signal above background");
    }
    return numer / denom;
}

} // namespace qmc
