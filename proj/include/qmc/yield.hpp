#pragma once
// Closed-form integration-effort and replacement-yield models, plus the fill
// fraction of one mapped chiplet.

#include "qmc/spectral.hpp"

namespace qmc {

struct EffortParams {
    double e0 = 0.0;  // fixed overhead per transfer event
    double eu = 0.0;  // incremental effort per membrane
    int nc = 1;       // chiplets per membrane
    int b = 1;        // membranes
};

struct EffortResult {
    double total = 0.0;        // E = E0 + B * Eu
    double per_chiplet = 0.0;  // E0/(B*Nc) + Eu/Nc, decreasing in B, floor Eu/Nc
};

struct ReplacementParams {
    int n = 0;       // sites
    double p = 0.0;  // per-attempt success probability
    int r = 0;       // replacement attempts after the first
};

struct ReplacementResult {
    double n_good = 0.0;          // N * (1 - q^(r+1)), q = 1 - p
    double residual_defect = 0.0; // q^(r+1)
};

EffortResult integration_effort(const EffortParams& params);

ReplacementResult expected_functional(const ReplacementParams& params);

// Fraction of the chiplet's nanobeams holding at least one record;
// multiplicity is ignored.
double fill_fraction(const CavityMap& map, int chiplet_row, int chiplet_col);

}  // namespace qmc
