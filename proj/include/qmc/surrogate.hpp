#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qmc/units.hpp"

namespace qmc {

// Sellmeier dispersion n^2(lambda) = 1 + B1 l^2/(l^2-C1) + B2 l^2/(l^2-C2),
// lambda in micrometers, C terms in um^2.
struct SellmeierParams {
    double b1 = 0.0;
    double c1_um2 = 0.0;
    double b2 = 0.0;
    double c2_um2 = 0.0;
    Length valid_lo;
    Length valid_hi;

    // Diamond: B1 0.3306, C1 (0.175 um)^2, B2 4.3356, C2 (0.106 um)^2,
    // valid 0.23-5 um.
    static SellmeierParams diamond();
};

// Throws OutOfValidityRange outside [valid_lo, valid_hi] and PoleProximity
// when lambda^2 comes within 1e-6 um^2 of either pole.
double sellmeier_n(Length lambda, const SellmeierParams& params = SellmeierParams::diamond());

// Resonance response surface lambda(W, r, t) linearized (optionally
// quadratic) around a reference geometry. Lengths in micrometers,
// wavelengths in nm, coefficients in nm/um and nm/um^2.
struct SurrogateModel {
    double w0_um = 0.0, r0_um = 0.0, t0_um = 0.0;
    double lambda0_nm = 0.0;
    double c_w = 0.0, c_r = 0.0, c_t = 0.0;
    // ww, rr, tt, wr, wt, rt
    std::optional<std::array<double, 6>> quadratic;
    struct Box {
        double w_um[2] = {0, 0};
        double r_um[2] = {0, 0};
        double t_um[2] = {0, 0};
    } validity;
    std::string provenance;

    bool inside(double w_um, double r_um, double t_um) const;
};

// Evaluates the model; throws OutOfValidityBox outside the validity box.
Length surrogate_eval(const SurrogateModel& m, Length w, Length r, Length t);

struct SurrogateSample {
    double w_um = 0.0, r_um = 0.0, t_um = 0.0;
    double lambda_nm = 0.0;
};

enum class SurrogateOrder { Linear, Quadratic };

// Least-squares fit about the sample centroid. Samples are sorted into a
// canonical order first, so permuting the input leaves every coefficient
// bit-identical. Requires n >= 2x the coefficient count and a design matrix
// with condition number below 1e10 (else RankDeficient).
SurrogateModel fit_surrogate(std::vector<SurrogateSample> samples, SurrogateOrder order);

// Bisection for t with |interval| < 1e-7 um. Throws NoSignChange when the
// bracket does not straddle lambda and NonMonotoneOnBracket when a quadratic
// model changes slope inside the bracket.
Length invert_for_thickness(const SurrogateModel& m, Length w, Length r, Length lambda,
                            Length t_lo, Length t_hi);

// Analytic effective-index stand-in used to generate the shipped default
// calibration. Not an electromagnetic solve: confinement factors t/(t+a),
// W/(W+b) and the hole fill fraction pi r^2/(pitch W) scale the bulk index
// into lambda = K * n_eff. Signs match physical sensitivities
// (dl/dt > 0, dl/dW > 0, dl/dr < 0).
double analytic_standin_lambda_nm(double w_um, double r_um, double t_um);

// Linearization of the stand-in at W 0.330 um, r 0.045 um, t 0.129 um
// (central differences, h = 1e-4 um), lambda0 = 633.2 nm. Provenance labels
// it as the non-FDTD stand-in.
SurrogateModel default_surrogate();

// JSON calibration file: {reference, linear, quadratic?, validity, provenance}.
SurrogateModel load_surrogate(const std::string& path);
void save_surrogate(const SurrogateModel& m, const std::string& path);

} // namespace qmc
