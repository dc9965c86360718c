#include "qmc/yield.hpp"

#include <cmath>
#include <vector>

#include "qmc/error.hpp"

namespace qmc {

EffortResult integration_effort(const EffortParams& params) {
    if (!std::isfinite(params.e0) || params.e0 < 0.0)
        throw Error(ErrorCode::InvalidArgument, "overhead effort must be finite and non-negative",
                    {{"e0", std::to_string(params.e0)}});
    if (!std::isfinite(params.eu) || params.eu < 0.0)
        throw Error(ErrorCode::InvalidArgument,
                    "incremental effort must be finite and non-negative",
                    {{"eu", std::to_string(params.eu)}});
    if (params.nc < 1)
        throw Error(ErrorCode::InvalidArgument, "chiplets per membrane must be at least 1",
                    {{"nc", std::to_string(params.nc)}});
    if (params.b < 1)
        throw Error(ErrorCode::InvalidArgument, "membrane count must be at least 1",
                    {{"b", std::to_string(params.b)}});
    EffortResult out;
    const double b = params.b, nc = params.nc;
    out.total = params.e0 + b * params.eu;
    out.per_chiplet = params.e0 / (b * nc) + params.eu / nc;
    return out;
}

ReplacementResult expected_functional(const ReplacementParams& params) {
    if (params.n < 0)
        throw Error(ErrorCode::InvalidArgument, "site count must be non-negative",
                    {{"n", std::to_string(params.n)}});
    if (!(params.p >= 0.0) || !(params.p <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "success probability must lie in [0, 1]",
                    {{"p", std::to_string(params.p)}});
    if (params.r < 0)
        throw Error(ErrorCode::InvalidArgument, "replacement attempts must be non-negative",
                    {{"r", std::to_string(params.r)}});
    ReplacementResult out;
    const double q = 1.0 - params.p;
    out.residual_defect = std::pow(q, params.r + 1);
    out.n_good = static_cast<double>(params.n) * (1.0 - out.residual_defect);
    return out;
}

double fill_fraction(const CavityMap& map, int chiplet_row, int chiplet_col) {
    if (map.grid.rows < 1 || map.grid.cols < 1 || map.grid.nanobeams < 1)
        throw Error(ErrorCode::InvalidArgument, "cavity map grid is not set", {});
    if (chiplet_row < 0 || chiplet_row >= map.grid.rows || chiplet_col < 0 ||
        chiplet_col >= map.grid.cols)
        throw Error(ErrorCode::ChipletOutOfRange, "chiplet index outside the grid",
                    {{"row", std::to_string(chiplet_row)},
                     {"col", std::to_string(chiplet_col)},
                     {"rows", std::to_string(map.grid.rows)},
                     {"cols", std::to_string(map.grid.cols)}});
    std::vector<uint8_t> seen(static_cast<size_t>(map.grid.nanobeams), 0);
    for (const CavityRecord& rec : map.records) {
        if (rec.chiplet_row != chiplet_row || rec.chiplet_col != chiplet_col) continue;
        if (rec.nanobeam >= 0 && rec.nanobeam < map.grid.nanobeams)
            seen[static_cast<size_t>(rec.nanobeam)] = 1;
    }
    int populated = 0;
    for (uint8_t s : seen) populated += s;
    return static_cast<double>(populated) / static_cast<double>(map.grid.nanobeams);
}

} // namespace qmc
