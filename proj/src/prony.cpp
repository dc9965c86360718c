#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qmc/error.hpp"
#include "qmc/spectral.hpp"

namespace qmc {

namespace {

using Cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct PoleEstimate {
    Cplx z;
    Cplx amplitude;
};

// Lag-space basis of the Hankel matrix Y[i][j] = x[i+j], rows N-l, columns
// l+1. Rows of Y are spanned by Vandermonde vectors (z^j)_j of the true
// poles; with Y = U S V^H that span is conj(V), so the basis returned here
// is V conjugated, making the shift-invariance pencil deliver z rather
// than conj(z). Small problems take a direct SVD; long records accumulate
// the Gram matrix Y^H Y with a short pencil instead for O(N l^2) work and
// O(l^2) memory. Squaring halves the attainable precision: components
// below ~1e-6 of the leading singular value cannot be certified on that
// path, and sv_floor reports the bound for the order decision.
void hankel_right_basis(const std::vector<Cplx>& x, int max_order, MatrixXcd& v,
                        VectorXd& sv, double& sv_floor) {
    const size_t n = x.size();
    size_t l = std::clamp(n / 3, static_cast<size_t>(2 * max_order), static_cast<size_t>(256));

    if (n * (l + 1) <= 4'000'000) {
        MatrixXcd y(n - l, l + 1);
        for (size_t i = 0; i + l < n; ++i) {
            for (size_t j = 0; j <= l; ++j) y(i, j) = x[i + j];
        }
        Eigen::BDCSVD<MatrixXcd> svd(y, Eigen::ComputeThinV);
        sv = svd.singularValues();
        v = svd.matrixV().conjugate();
        sv_floor = 0.0;
        return;
    }

    l = static_cast<size_t>(std::max(2 * max_order, 24));
    const size_t rows = n - l;
    const size_t block = 8192;
    MatrixXcd g = MatrixXcd::Zero(l + 1, l + 1);
    MatrixXcd b;
    for (size_t start = 0; start < rows; start += block) {
        const size_t m = std::min(block, rows - start);
        b.resize(m, l + 1);
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j <= l; ++j) b(i, j) = x[start + i + j];
        }
        g.noalias() += b.adjoint() * b;
    }
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(g);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::InvalidArgument, "gram eigendecomposition failed");
    }
    // Ascending eigenvalues; flip to descending singular values.
    const auto& mu = es.eigenvalues();
    const auto& vec = es.eigenvectors();
    const Eigen::Index k = mu.size();
    sv.resize(k);
    v.resize(l + 1, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        sv(i) = std::sqrt(std::max(mu(k - 1 - i), 0.0));
        v.col(i) = vec.col(k - 1 - i).conjugate();
    }
    sv_floor = 1e-6;
}

std::vector<PoleEstimate> pencil_poles(const std::vector<Cplx>& x, const PronyConfig& cfg,
                                       int& model_order) {
    MatrixXcd v;
    VectorXd sv;
    double sv_floor = 0.0;
    hankel_right_basis(x, cfg.max_order, v, sv, sv_floor);

    const double sigma0 = sv(0);
    if (!(sigma0 > 0.0)) {
        throw Error(ErrorCode::AllModesUnresolved, "record carries no signal");
    }
    const double ratio = std::max(cfg.sv_ratio, sv_floor);
    int m = 0;
    while (m < sv.size() && m < cfg.max_order && sv(m) >= ratio * sigma0) ++m;
    model_order = m;

    const Eigen::Index l = v.rows() - 1;
    const MatrixXcd vs = v.leftCols(m);
    const MatrixXcd v1 = vs.topRows(l);
    const MatrixXcd v2 = vs.bottomRows(l);
    // Shift-invariance pencil: eigenvalues of pinv(V1) V2 are the poles.
    const MatrixXcd a =
        (v1.adjoint() * v1).ldlt().solve(v1.adjoint() * v2);
    Eigen::ComplexEigenSolver<MatrixXcd> es(a);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorCode::InvalidArgument, "pencil eigendecomposition failed");
    }

    // Amplitudes by least squares on the Vandermonde system. Poles are
    // projected onto the closed unit disk here so the power recurrence
    // cannot overflow; a genuinely growing pole only misstates amplitude.
    std::vector<Cplx> z(m), zc(m), p(m, Cplx(1.0, 0.0));
    for (int k = 0; k < m; ++k) {
        z[k] = es.eigenvalues()(k);
        const double mag = std::abs(z[k]);
        zc[k] = mag > 1.0 ? z[k] / mag : z[k];
    }
    MatrixXcd gram = MatrixXcd::Zero(m, m);
    VectorXcd rhs = VectorXcd::Zero(m);
    for (size_t nidx = 0; nidx < x.size(); ++nidx) {
        for (int j = 0; j < m; ++j) {
            rhs(j) += std::conj(p[j]) * x[nidx];
            for (int k = j; k < m; ++k) gram(j, k) += std::conj(p[j]) * p[k];
        }
        for (int k = 0; k < m; ++k) p[k] *= zc[k];
    }
    for (int j = 0; j < m; ++j) {
        for (int k = 0; k < j; ++k) gram(j, k) = std::conj(gram(k, j));
    }
    const VectorXcd amp = gram.ldlt().solve(rhs);

    std::vector<PoleEstimate> poles(m);
    for (int k = 0; k < m; ++k) poles[k] = {z[k], amp(k)};
    return poles;
}

RingdownMode make_mode(double f, double gamma, Cplx amplitude, double n_dt) {
    RingdownMode mode;
    mode.frequency = f;
    mode.unresolved = gamma * n_dt < 1e-6;
    mode.gamma = std::max(gamma, 0.0);
    mode.amp_magnitude = std::abs(amplitude);
    mode.amp_phase = std::arg(amplitude);
    mode.q_factor = mode.gamma > 0.0
                        ? std::numbers::pi * std::abs(f) / mode.gamma
                        : std::numeric_limits<double>::infinity();
    return mode;
}

RingdownModes assemble(const std::vector<PoleEstimate>& poles, double dt, size_t n,
                       bool fold_real, int model_order) {
    const double n_dt = static_cast<double>(n) * dt;
    std::vector<RingdownMode> modes;

    if (!fold_real) {
        for (const auto& p : poles) {
            const double f = std::arg(p.z) / (2.0 * std::numbers::pi * dt);
            const double gamma = -std::log(std::abs(p.z)) / dt;
            modes.push_back(make_mode(f, gamma, p.amplitude, n_dt));
        }
    } else {
        // Real records produce conjugate pole pairs; fold them onto f >= 0
        // with the oscillator amplitude 2|a| cos(2 pi f t + phi).
        constexpr double kArgEps = 1e-9;
        std::vector<bool> used(poles.size(), false);
        for (size_t i = 0; i < poles.size(); ++i) {
            if (used[i]) continue;
            const double arg_i = std::arg(poles[i].z);
            if (std::abs(arg_i) <= kArgEps) {
                used[i] = true;
                const double gamma = -std::log(std::abs(poles[i].z)) / dt;
                modes.push_back(make_mode(0.0, gamma, poles[i].amplitude, n_dt));
                continue;
            }
            // nearest unused conjugate partner
            size_t partner = poles.size();
            double best = 1e-6;
            for (size_t j = 0; j < poles.size(); ++j) {
                if (j == i || used[j]) continue;
                if (std::arg(poles[j].z) * arg_i >= 0.0) continue;
                const double miss = std::abs(std::conj(poles[j].z) - poles[i].z);
                if (miss < best) {
                    best = miss;
                    partner = j;
                }
            }
            used[i] = true;
            if (partner == poles.size()) {
                // No conjugate found; report the pole as estimated.
                const double f = arg_i / (2.0 * std::numbers::pi * dt);
                const double gamma = -std::log(std::abs(poles[i].z)) / dt;
                modes.push_back(make_mode(f, gamma, poles[i].amplitude, n_dt));
                continue;
            }
            used[partner] = true;
            const auto& pos = arg_i > 0.0 ? poles[i] : poles[partner];
            const auto& neg = arg_i > 0.0 ? poles[partner] : poles[i];
            const double f =
                0.5 * (std::arg(pos.z) - std::arg(neg.z)) / (2.0 * std::numbers::pi * dt);
            const double gamma =
                -0.5 * (std::log(std::abs(pos.z)) + std::log(std::abs(neg.z))) / dt;
            const Cplx a_eff = 0.5 * (pos.amplitude + std::conj(neg.amplitude));
            modes.push_back(make_mode(f, gamma, 2.0 * a_eff, n_dt));
        }
    }

    std::stable_sort(modes.begin(), modes.end(), [](const RingdownMode& a, const RingdownMode& b) {
        if (a.amp_magnitude != b.amp_magnitude) return a.amp_magnitude > b.amp_magnitude;
        return a.frequency < b.frequency;
    });
    RingdownModes out;
    out.modes = std::move(modes);
    out.model_order = model_order;
    return out;
}

void validate_prony_inputs(size_t n, double dt, const PronyConfig& cfg) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw Error(ErrorCode::InvalidArgument, "sample interval must be positive");
    }
    if (cfg.max_order < 1 || !(cfg.sv_ratio > 0.0) || !(cfg.sv_ratio < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "bad model-order configuration");
    }
    if (n < static_cast<size_t>(4 * cfg.max_order)) {
        throw Error(ErrorCode::TooFewSamples, "record shorter than 4x model order",
                    {{"samples", std::to_string(n)},
                     {"required", std::to_string(4 * cfg.max_order)}});
    }
}

} // namespace

RingdownModes prony_ringdown_q(const std::vector<Cplx>& samples, double dt,
                               const PronyConfig& cfg) {
    validate_prony_inputs(samples.size(), dt, cfg);
    int order = 0;
    const auto poles = pencil_poles(samples, cfg, order);
    return assemble(poles, dt, samples.size(), false, order);
}

RingdownModes prony_ringdown_q(const std::vector<double>& samples, double dt,
                               const PronyConfig& cfg) {
    validate_prony_inputs(samples.size(), dt, cfg);
    std::vector<Cplx> x(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) x[i] = Cplx(samples[i], 0.0);
    int order = 0;
    const auto poles = pencil_poles(x, cfg, order);
    return assemble(poles, dt, samples.size(), true, order);
}

} // namespace qmc
