#pragma once
// Spatial trend fitting and residual diagnostics for mask-scale cavity
// wavelength data: a global quadratic surface, locally weighted linear
// smoothing, and per-axis semivariograms of the residuals.

#include <array>
#include <cstdint>
#include <vector>

#include "qmc/units.hpp"

namespace qmc {

struct SpatialPoint {
    double x_um = 0.0;
    double y_um = 0.0;
    double z_nm = 0.0;  // deviation from the target wavelength
};

struct SpatialField {
    std::vector<SpatialPoint> points;
    Length target = Length::nm(620.0);
};

// z = b0 + b1 x + b2 y + b3 x^2 + b4 xy + b5 y^2, x/y in um, z in nm.
struct QuadraticSurface {
    std::array<double, 6> beta{};
    double evaluate(double x_um, double y_um) const;
};

// Local plane z ~ a + b x + c y in original coordinates.
struct LocalPlane {
    double a = 0.0, b = 0.0, c = 0.0;
};

struct LoessFit {
    int k = 0;
    std::vector<double> fitted_nm;    // one per input point
    std::vector<LocalPlane> planes;   // local plane per point
    std::vector<uint8_t> degenerate;  // 1 where collinear neighbors forced the
                                      // weighted-mean fallback
};

struct ResidualSummary {
    double std_before_nm = 0.0;
    double std_after_nm = 0.0;
    double reduction_pct = 0.0;  // 100 * (1 - after/before), 0 when before is 0
    std::vector<double> residuals_nm;
};

enum class FieldAxis { X, Y };

struct VariogramBin {
    double lag_um = 0.0;
    double gamma_nm2 = 0.0;
    uint64_t pairs = 0;
};

struct SemivariogramResult {
    FieldAxis axis = FieldAxis::X;
    std::vector<VariogramBin> bins;  // non-empty bins only, lags increasing
    double nugget_nm2 = 0.0;         // first reported bin
};

// Ordinary least squares on internally centered/scaled coordinates;
// coefficients are mapped back to original coordinates. Requires at least
// 6 points spanning the quadratic basis.
QuadraticSurface fit_quadratic_surface(const SpatialField& field);

// Per point: the k nearest neighbors (the point itself included), tricube
// weights w = (1 - u^3)^3 with u = d/d_max where d_max is the distance to the
// farthest selected neighbor, then a weighted plane. The farthest neighbor
// always carries weight exactly 0. Collinear neighborhoods fall back to the
// weighted mean and are flagged, not rejected.
LoessFit loess_fit(const SpatialField& field, int k);

// ceil(0.3 n) clamped to [3, n].
int default_loess_k(size_t n_points);

ResidualSummary residual_summary(const SpatialField& field, const std::vector<double>& fitted_nm);

// Pairs are binned by |axis separation| (1 bin per bin_width, centers at
// k * bin_width) with the orthogonal separation below bin_width/2 and the
// axis separation at most max_lag; gamma(h) = sum (zi - zj)^2 / (2 * pairs).
SemivariogramResult semivariogram(const SpatialField& field, FieldAxis axis, double bin_width_um,
                                  double max_lag_um);

}  // namespace qmc
