#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "qmc/io.hpp"
#include "qmc/spectrum.hpp"
#include "qmc/units.hpp"

namespace qmc {

// Local maximum with contour prominence: height above the lowest saddle on
// the way to a higher sample (or the boundary), width at half prominence.
struct PeakCandidate {
    size_t index = 0;     // sample index of the maximum (plateau midpoint)
    Length center;        // axis value at index
    double prominence = 0.0;
    Length fwhm;          // half-prominence width, interpolated
    double height = 0.0;  // intensity at the maximum
};

struct PeakFindConfig {
    double min_prominence = 0.0;
    Length fwhm_lo = Length::nm(0.0);
    Length fwhm_hi = Length::um(1e6);
    size_t max_peaks = SIZE_MAX;
};

// Candidates sorted by prominence descending (stable in center for ties),
// truncated to max_peaks.
std::vector<PeakCandidate> find_peaks(const Spectrum& spectrum, const PeakFindConfig& cfg = {});

// I(l) = A (G/2)^2 / ((l - l0)^2 + (G/2)^2) + B, fitted by damped
// Gauss-Newton with analytic Jacobians. q_factor is stored as center/fwhm
// of the same fit, exactly.
struct LorentzianFit {
    Length center;
    Length fwhm;
    double amplitude = 0.0;
    double offset = 0.0;
    double q_factor = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

// I(l) = A (q G/2 + (l - l0))^2 / ((G/2)^2 + (l - l0)^2) + B. q -> inf with
// A q^2 fixed tends to the Lorentzian of amplitude A q^2.
struct FanoFit {
    Length center;
    Length fwhm;
    double q_asym = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    double q_factor = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Fits within [window_lo, window_hi]. The window must hold at least five
// samples and contain init.center (else WindowTooSmall). A fit that exhausts
// its iteration budget or degenerates comes back converged = false; it never
// throws for that.
LorentzianFit fit_lorentzian(const Spectrum& spectrum, Length window_lo, Length window_hi,
                             const PeakCandidate& init);
FanoFit fit_fano(const Spectrum& spectrum, Length window_lo, Length window_hi,
                 const PeakCandidate& init);

// One damped complex exponential a exp((i 2 pi f - gamma) t). Q = pi f/gamma
// for the field decay rate gamma. unresolved marks gamma N dt < 1e-6: the
// record is too short to pin the decay, Q reported as +inf when gamma <= 0.
struct RingdownMode {
    double frequency = 0.0;   // 1/time unit of dt
    double gamma = 0.0;       // field decay rate
    double amp_magnitude = 0.0;
    double amp_phase = 0.0;   // radians
    double q_factor = 0.0;
    bool unresolved = false;
};

struct RingdownModes {
    std::vector<RingdownMode> modes;  // sorted by amplitude descending
    int model_order = 0;
};

struct PronyConfig {
    int max_order = 8;
    // Singular-value acceptance threshold relative to the largest. Long
    // records are reduced through a Gram matrix whose squaring limits the
    // certifiable ratio to ~1e-6; the effective threshold never drops
    // below that limit on such records.
    double sv_ratio = 1e-8;
};

// Matrix-pencil estimation of damped exponentials from a uniformly sampled
// record. Real input folds conjugate pairs onto f >= 0. Throws TooFewSamples
// below 4*max_order samples and AllModesUnresolved when nothing clears the
// singular-value threshold.
RingdownModes prony_ringdown_q(const std::vector<std::complex<double>>& samples, double dt,
                               const PronyConfig& cfg = {});
RingdownModes prony_ringdown_q(const std::vector<double>& samples, double dt,
                               const PronyConfig& cfg = {});

// Chiplet tiling of the cube raster: rows x cols uniform tiles, each holding
// `nanobeams` horizontal strips stacked along y.
struct ChipletGrid {
    int rows = 0;
    int cols = 0;
    int nanobeams = 0;
};

struct CavityRecord {
    int x_idx = 0;
    int y_idx = 0;
    int chiplet_row = 0;
    int chiplet_col = 0;
    int nanobeam = 0;
    LorentzianFit fit;
};

struct CavityMap {
    std::vector<CavityRecord> records;
    ChipletGrid grid;
    int nx = 0;
    int ny = 0;
};

struct CavityMapConfig {
    PeakFindConfig peaks;
    Length fit_halfwidth = Length::nm(1.0);
    Length merge_tol = Length::nm(0.3);  // 8-connected same-mode merge
};

// Per-pixel peak search and Lorentzian fit over the whole raster; adjacent
// (8-connected) detections within merge_tol of each other collapse onto the
// brightest pixel. Deterministic for a fixed cube + config, any thread count.
CavityMap build_cavity_map(const HyperspectralCube& cube, const ChipletGrid& grid,
                           const CavityMapConfig& cfg = {});

// One row per chiplet: mean/std of resonance wavelength and Q, fill fraction
// (nanobeams with >= 1 record over nanobeams), record count. Chiplets with
// no records carry null statistics and fill 0.
ResultTable summarize_mask(const CavityMap& map);

struct TuningTrajectory {
    std::vector<int> frame;                    // 0..n-1
    std::vector<std::optional<double>> lambda_nm;  // absent = no peak found
    double total_shift_nm = 0.0;  // last present minus first present
    int direction = 0;            // sign of total_shift
};

struct TrackConfig {
    PeakFindConfig peaks;
    Length search_radius = Length::nm(1.0);
    Length fit_halfwidth = Length::nm(1.0);
    int max_gap = 5;  // consecutive absent frames before TrackLost
};

// Follows one resonance through an ordered frame sequence. The seed is the
// most prominent peak inside seed_window on frame 0 (SeedPeakNotFound when
// none). Each later frame refits the nearest candidate within search_radius
// of the last present center; max_gap consecutive misses raise TrackLost.
TuningTrajectory track_resonance_shift(const std::vector<Spectrum>& frames,
                                       Length seed_lo, Length seed_hi,
                                       const TrackConfig& cfg = {});

// Ratio of background-subtracted integrals over [line - half_width,
// line + half_width]; background is the per-spectrum median outside the
// window. Throws ZeroOffResonanceSignal when the denominator is <= 0.
double enhancement_factor(const Spectrum& on, const Spectrum& off, Length line,
                          Length half_width);

} // namespace qmc
