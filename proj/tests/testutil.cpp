#include "testutil.hpp"

#include <algorithm>
#include <random>

namespace qmctest {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    const auto base = fs::temp_directory_path() / ("qmc_" + tag + "_XXXXXX");
    std::string tmpl = base.string();
    if (!mkdtemp(tmpl.data())) {
        throw std::runtime_error("mkdtemp failed for " + tmpl);
    }
    root_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(root_, ec);
}

std::string TempDir::path(const std::string& name) const {
    return (root_ / name).string();
}

double lorentzian(double lambda_nm, double center_nm, double fwhm_nm, double amplitude,
                  double offset) {
    const double h = 0.5 * fwhm_nm;
    const double d = lambda_nm - center_nm;
    return amplitude * h * h / (d * d + h * h) + offset;
}

double fano(double lambda_nm, double center_nm, double fwhm_nm, double q_asym,
            double amplitude, double offset) {
    const double h = 0.5 * fwhm_nm;
    const double d = lambda_nm - center_nm;
    const double num = q_asym * h + d;
    return amplitude * num * num / (d * d + h * h) + offset;
}

std::vector<double> axis_nm(double lo_nm, double hi_nm, size_t n) {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i] = lo_nm + (hi_nm - lo_nm) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return out;
}

qmc::Spectrum make_lorentzian_spectrum(double lo_nm, double hi_nm, size_t n,
                                       double center_nm, double fwhm_nm, double amplitude,
                                       double offset) {
    auto nm = axis_nm(lo_nm, hi_nm, n);
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = lorentzian(nm[i], center_nm, fwhm_nm, amplitude, offset);
    return qmc::Spectrum::from_nm(nm, std::move(y));
}

qmc::Spectrum make_noisy_lorentzian_spectrum(double lo_nm, double hi_nm, size_t n,
                                             double center_nm, double fwhm_nm,
                                             double amplitude, double offset,
                                             double noise_sigma, uint64_t seed) {
    auto nm = axis_nm(lo_nm, hi_nm, n);
    std::vector<double> y(n);
    const qmc::CounterRng rng(seed, 7);
    for (size_t i = 0; i < n; ++i) {
        const double clean = lorentzian(nm[i], center_nm, fwhm_nm, amplitude, offset);
        y[i] = std::max(0.0, clean + noise_sigma * rng.normal(i));
    }
    return qmc::Spectrum::from_nm(nm, std::move(y));
}

double ks_uniform(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(samples[i] - lo, hi - samples[i]));
    }
    return d;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double num = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace qmctest
