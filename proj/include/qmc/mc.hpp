#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "qmc/surrogate.hpp"
#include "qmc/units.hpp"

namespace qmc {

// Counter-based random stream: draw j of stream s is a pure function of
// (seed, s, j), so any partition of the index range over threads reproduces
// the sequential sequence bit for bit. Core is a Philox2x64-10 block cipher
// keyed by the seed with (stream, index) as the counter.
class CounterRng {
public:
    CounterRng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t bits(uint64_t index) const;
    // Uniform on the open interval (0, 1): never returns an exact endpoint,
    // so inverse-CDF transforms stay finite.
    double uniform(uint64_t index) const;
    // Standard normal via the inverse CDF of uniform(index); no rejection,
    // one draw per index.
    double normal(uint64_t index) const;
    // Uniform integer in [0, n).
    uint64_t below(uint64_t index, uint64_t n) const;

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

private:
    uint64_t seed_;
    uint64_t stream_;
};

// Inverse standard normal CDF (Wichura's AS 241, double precision).
// Relative error below 1e-15 on (0, 1); p at or beyond the endpoints throws.
double normal_quantile(double p);

// Monte Carlo inversion inputs. lambda_nm is either an empirical sample set
// (resampled uniformly with replacement) or a Gaussian spec; w_um and r_um
// are Gaussian. bracket is the thickness search interval handed to the
// surrogate inversion.
struct InverseMcInputs {
    GaussianSpec w_um;
    GaussianSpec r_um;
    std::variant<std::vector<double>, GaussianSpec> lambda_nm;
    int n_mc = 10000;
    uint64_t seed = 0;
    double bracket_lo_um = 0.0;
    double bracket_hi_um = 0.0;
};

struct ThicknessDistribution {
    std::vector<double> samples_um;  // successful inversions, in draw order
    double mean_um = 0.0;
    double std_um = 0.0;   // n-1 denominator
    int n_failed = 0;
    uint64_t seed = 0;
};

// Draws (W, r, lambda) per index from independent streams, inverts the
// surrogate for thickness, and aggregates with a fixed-order compensated
// sum. Identical results for any thread count. Throws TooManyFailures when
// more than 20% of draws fail to invert.
ThicknessDistribution run_inverse_mc(const SurrogateModel& model,
                                     const InverseMcInputs& inputs);

} // namespace qmc
