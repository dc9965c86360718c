#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qmc/io.hpp"
#include "qmc/units.hpp"

namespace qmc {

// Thinned edge pixels plus the smoothed gradient fields they came from.
// Dimensions always match the source image.
struct EdgeMap {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> edges;   // 1 = edge pixel, row-major
    std::vector<float> grad_x;    // Scharr gradient of the smoothed image
    std::vector<float> grad_y;
    std::vector<float> magnitude;

    bool edge_at(int x, int y) const {
        return edges[static_cast<size_t>(y) * width + x] != 0;
    }
    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

struct PreprocessConfig {
    double denoise_sigma = 1.5;
    double canny_low_pct = 70.0;   // percentile of positive gradient magnitudes
    double canny_high_pct = 90.0;
};

// Gaussian smoothing, Scharr gradients, percentile-threshold Canny with
// 4-sector non-maximum suppression and 8-connected hysteresis. A uniform
// image has no positive gradient magnitudes and yields an empty edge set.
EdgeMap preprocess(const GrayImage& image, const PreprocessConfig& cfg = {});

// Dominant in-plane direction of the image texture. angle is the
// orientation of the structure-tensor eigenvector with the smaller
// eigenvalue (edges run along it), normalized to (-90, 90] degrees;
// coherence = (l1 - l2)/(l1 + l2) of the aggregated tensor.
struct BeamAxis {
    Angle angle;
    double coherence = 0.0;
};

// Structure tensor from Scharr gradients, smoothed over rho = 8 px and
// aggregated globally. Throws LowCoherence below 0.2.
BeamAxis estimate_beam_axis(const GrayImage& image);

// Four edge positions along the beam-normal coordinate, in pixels,
// ascending; polarity pattern is rise, rise, fall, fall. The outer pair
// spans the bottom width, the inner pair the top width.
struct WidthMeasurement {
    Length w_top;
    Length w_bottom;
    std::array<double, 4> edge_positions_px{};
    std::array<double, 4> edge_weights{};  // gradient mass used per edge
    Length sigma_w_top;     // centroid standard errors propagated to widths
    Length sigma_w_bottom;
};

// Signed normal-direction gradient, binned at 1 px along the normal
// coordinate; the two strongest rising and two strongest falling peaks are
// refined by gradient-magnitude-weighted centroids (+-3 px window, 10
// iterations or step < 0.01 px). Requires a physical pixel scale.
WidthMeasurement measure_widths(const GrayImage& image, const BeamAxis& axis,
                                const PreprocessConfig& cfg = {});

struct Hole {
    double center_x_px = 0.0;
    double center_y_px = 0.0;
    Length radius;
};

// Holes sorted by their position along the beam axis. Radius spread is 0
// below two detections.
struct HoleSet {
    std::vector<Hole> holes;
    Length mean_radius;
    Length std_radius;
};

struct HoleDetectConfig {
    Length r_lo = Length::nm(20.0);
    Length r_hi = Length::nm(80.0);
    Length max_midline_offset = Length::nm(60.0);
    Length min_spacing = Length::nm(80.0);
};

// Gradient-direction Hough voting (each edge pixel votes at p +- r g_hat
// over the radius range), algebraic circle fit plus one geometric
// Gauss-Newton step, then the filters in order: radius range, distance
// from the beam midline, minimum spacing. An empty result is valid.
HoleSet detect_holes(const GrayImage& image, const BeamAxis& axis,
                     const HoleDetectConfig& cfg = {});

struct RidgeLine {
    Angle angle;          // absolute image-frame angle of the fitted line
    double offset_px = 0.0;  // perpendicular offset at the shared evaluation point
};

// The three near-parallel ridges of a tilted view, ordered across the
// image normal: far-top, near-top, near-bottom. d_t and d_nb are the
// perpendicular separations of consecutive ridges in pixels.
struct TiltedRidges {
    std::array<RidgeLine, 3> lines;
    double d_t_px = 0.0;
    double d_nb_px = 0.0;
    Angle psi;                // mean fitted line angle
    double psi_spread_deg = 0.0;  // largest pairwise angle disagreement
};

// Deterministic full-accumulator Hough picks the shared ridge direction,
// 1-D k-means (k = 3, quantile init) splits edge pixels by normal offset,
// and each cluster is fit by IRLS with Welsch weights (c = 2 px).
TiltedRidges detect_ridges_tilted(const GrayImage& image, const PreprocessConfig& cfg = {});

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Robust line fit y ~ slope*x + intercept. Plain least squares seeds an
// IRLS iteration with Welsch weights w(e) = exp(-(e/c)^2), which drives the
// influence of gross outliers to zero. Needs >= 2 distinct x.
LineFit fit_line_welsch(const std::vector<double>& x, const std::vector<double>& y,
                        double c = 2.0, int max_iters = 20);

// Closed-form thickness from the projected-geometry ratio:
// t = [cos^2(theta) cos(psi) / (sin(theta) sqrt(1 - sin^2(theta) cos^2(psi)))]
//     * (W_t d_NB/d_T - (W_b - W_t)/2).
// Depends on (d_T, d_NB) only through their ratio. theta must lie in
// (0, 90) degrees and |psi| < 90 degrees, else DegenerateTilt; a
// non-positive result is InvalidGeometry.
Length thickness_from_projection(Length w_t, Length w_b, double d_t, double d_nb,
                                 Angle theta, Angle psi);

struct ThicknessNoise {
    Length sigma_w_top = Length::um(0.0);
    Length sigma_w_bottom = Length::um(0.0);
    double sigma_d_top = 0.0;  // px, perturbs d_T
    double sigma_d_nb = 0.0;   // px, perturbs d_NB
};

struct ThicknessEstimate {
    Length t;
    Length sigma_t;
    int n_mc = 0;
    // inputs echoed for the report
    Length w_top;
    Length w_bottom;
    double d_t_px = 0.0;
    double d_nb_px = 0.0;
    Angle theta;
    Angle psi;
};

// Monte Carlo propagation of Gaussian input noise through the projection
// formula: n_mc >= 100 independent draws (streams: W_t 0, W_b 1, d_T 2,
// d_NB 3), sample mean and (n-1) standard deviation over the valid
// evaluations. More than 10% invalid draws raise UnstableGeometry.
// Deterministic for a fixed seed.
ThicknessEstimate thickness_with_uncertainty(const WidthMeasurement& widths,
                                             const TiltedRidges& ridges, Angle theta,
                                             const ThicknessNoise& noise, int n_mc,
                                             uint64_t seed);

} // namespace qmc
