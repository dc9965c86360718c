#include "qmc/mc.hpp"

#include <cmath>

#include "qmc/io.hpp"
#include "qmc/parallel.hpp"

namespace qmc {

namespace {

// Philox2x64-10: counter = (stream, index), key = seed. One block yields two
// 64-bit words; word 0 is the draw for this index.
constexpr uint64_t kPhiloxM = 0xD2B74407B1CE6E93ull;
constexpr uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

inline void philox_round(uint64_t& c0, uint64_t& c1, uint64_t key) {
    const __uint128_t prod = static_cast<__uint128_t>(kPhiloxM) * c0;
    const uint64_t hi = static_cast<uint64_t>(prod >> 64);
    const uint64_t lo = static_cast<uint64_t>(prod);
    c0 = hi ^ key ^ c1;
    c1 = lo;
}

inline uint64_t philox2x64_10(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t c0 = stream, c1 = index, key = seed;
    for (int round = 0; round < 10; ++round) {
        philox_round(c0, c1, key);
        key += kWeyl;
    }
    return c0;
}

} // namespace

uint64_t CounterRng::bits(uint64_t index) const {
    return philox2x64_10(seed_, stream_, index);
}

double CounterRng::uniform(uint64_t index) const {
    // 53-bit mantissa plus a half-ulp offset keeps the value strictly inside
    // (0, 1).
    return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1p-53;
}

double CounterRng::normal(uint64_t index) const {
    return normal_quantile(uniform(index));
}

uint64_t CounterRng::below(uint64_t index, uint64_t n) const {
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "empty range");
    }
    // 53 uniform bits are ample for the sample-set sizes used here; the
    // floor map keeps the draw a pure function of (seed, stream, index).
    const uint64_t v = static_cast<uint64_t>(uniform(index) * static_cast<double>(n));
    return v >= n ? n - 1 : v;
}

// Wichura (1988), algorithm AS 241, PPND16. Max relative error ~1e-15.
double normal_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "quantile argument must lie in (0, 1)",
                    {{"p", format_real17(p)}});
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return q < 0.0 ? -value : value;
}

ThicknessDistribution run_inverse_mc(const SurrogateModel& model,
                                     const InverseMcInputs& inputs) {
    if (inputs.n_mc < 100) {
        throw Error(ErrorCode::InvalidArgument, "n_mc must be >= 100",
                    {{"n_mc", std::to_string(inputs.n_mc)}});
    }
    if (!(inputs.bracket_lo_um < inputs.bracket_hi_um)) {
        throw Error(ErrorCode::InvalidArgument, "bad thickness bracket",
                    {{"lo_um", format_real17(inputs.bracket_lo_um)},
                     {"hi_um", format_real17(inputs.bracket_hi_um)}});
    }
    if (const auto* set = std::get_if<std::vector<double>>(&inputs.lambda_nm)) {
        if (set->empty()) {
            throw Error(ErrorCode::TooFewSamples, "empty empirical wavelength set");
        }
        for (double v : *set) require_finite(v, "lambda_nm");
    }

    const CounterRng rng_w(inputs.seed, 0);
    const CounterRng rng_r(inputs.seed, 1);
    const CounterRng rng_l(inputs.seed, 2);
    const size_t n = static_cast<size_t>(inputs.n_mc);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> slots(n, nan);

    parallel_for_chunks(n, [&](size_t begin, size_t end) {
        for (size_t j = begin; j < end; ++j) {
            const double w = inputs.w_um.mean + inputs.w_um.std * rng_w.normal(j);
            const double r = inputs.r_um.mean + inputs.r_um.std * rng_r.normal(j);
            double lambda;
            if (const auto* set = std::get_if<std::vector<double>>(&inputs.lambda_nm)) {
                lambda = (*set)[rng_l.below(j, set->size())];
            } else {
                const auto& g = std::get<GaussianSpec>(inputs.lambda_nm);
                lambda = g.mean + g.std * rng_l.normal(j);
            }
            try {
                slots[j] = invert_for_thickness(model, Length::um(w), Length::um(r),
                                                Length::nm(lambda),
                                                Length::um(inputs.bracket_lo_um),
                                                Length::um(inputs.bracket_hi_um))
                               .um();
            } catch (const Error&) {
                // counted below as a failed draw
            }
        }
    });

    ThicknessDistribution out;
    out.seed = inputs.seed;
    out.samples_um.reserve(n);
    // Fixed-order compensated (Kahan) sums keep the aggregate independent of
    // the thread partition.
    double sum = 0.0, comp = 0.0;
    for (size_t j = 0; j < n; ++j) {
        if (std::isnan(slots[j])) {
            ++out.n_failed;
            continue;
        }
        out.samples_um.push_back(slots[j]);
        const double y = slots[j] - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const size_t kept = out.samples_um.size();
    if (kept < (n * 4) / 5 || kept < 2) {
        throw Error(ErrorCode::TooManyFailures, "more than 20% of draws failed to invert",
                    {{"n_failed", std::to_string(out.n_failed)},
                     {"n_mc", std::to_string(n)}});
    }
    out.mean_um = sum / static_cast<double>(kept);
    double ss = 0.0, ss_comp = 0.0;
    for (double v : out.samples_um) {
        const double d = v - out.mean_um;
        const double y = d * d - ss_comp;
        const double t = ss + y;
        ss_comp = (t - ss) - y;
        ss = t;
    }
    out.std_um = std::sqrt(ss / static_cast<double>(kept - 1));
    return out;
}

} // namespace qmc
