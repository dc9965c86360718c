#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "qmc/error.hpp"
#include "qmc/parallel.hpp"
#include "qmc/spectral.hpp"

namespace qmc {

namespace {

// Uniform tiling without divisibility requirements: pixel -> tile through
// exact integer arithmetic.
int tile_of(int coord, int extent, int tiles) {
    return static_cast<int>(static_cast<int64_t>(coord) * tiles / extent);
}

// Position of y inside its tile row, mapped onto the nanobeam strips.
int beam_of(int y, int ny, int rows, int beams) {
    const int64_t rem = (static_cast<int64_t>(y) * rows) % ny;
    return static_cast<int>(rem * beams / ny);
}

struct Flat {
    int x;
    int y;
    LorentzianFit fit;
};

struct UnionFind {
    std::vector<size_t> parent;
    std::vector<size_t> size;
    explicit UnionFind(size_t n) : parent(n), size(n, 1) {
        std::iota(parent.begin(), parent.end(), size_t{0});
    }
    size_t find(size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(size_t a, size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
};

} // namespace

CavityMap build_cavity_map(const HyperspectralCube& cube, const ChipletGrid& grid,
                           const CavityMapConfig& cfg) {
    cube.validate();
    if (grid.rows < 1 || grid.cols < 1 || grid.nanobeams < 1) {
        throw Error(ErrorCode::InvalidArgument, "chiplet grid must be positive");
    }

    const int nx = cube.nx, ny = cube.ny;
    std::vector<std::vector<Flat>> per_pixel(static_cast<size_t>(nx) * ny);

    parallel_for_chunks(static_cast<size_t>(ny), [&](size_t y0, size_t y1) {
        for (size_t y = y0; y < y1; ++y) {
            for (int x = 0; x < nx; ++x) {
                const Spectrum s = cube.spectrum_at(x, static_cast<int>(y));
                for (const PeakCandidate& cand : find_peaks(s, cfg.peaks)) {
                    const Length lo = Length::nm(cand.center.nm() - cfg.fit_halfwidth.nm());
                    const Length hi = Length::nm(cand.center.nm() + cfg.fit_halfwidth.nm());
                    try {
                        const LorentzianFit fit = fit_lorentzian(s, lo, hi, cand);
                        // Only settled fits enter the map; a wandering fit
                        // would scatter the merge step.
                        if (fit.converged) {
                            per_pixel[y * nx + x].push_back({x, static_cast<int>(y), fit});
                        }
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::WindowTooSmall) throw;
                        // candidate too close to the axis edge to fit
                    }
                }
            }
        }
    });

    std::vector<Flat> all;
    std::vector<size_t> pixel_start(per_pixel.size() + 1, 0);
    for (size_t p = 0; p < per_pixel.size(); ++p) {
        pixel_start[p] = all.size();
        all.insert(all.end(), per_pixel[p].begin(), per_pixel[p].end());
    }
    pixel_start[per_pixel.size()] = all.size();

    // 8-connected merge of detections that agree within merge_tol.
    UnionFind uf(all.size());
    const double tol_nm = cfg.merge_tol.nm();
    for (size_t i = 0; i < all.size(); ++i) {
        const int x = all[i].x, y = all[i].y;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int xn = x + dx, yn = y + dy;
                if (xn < 0 || xn >= nx || yn < 0 || yn >= ny) continue;
                const size_t p = static_cast<size_t>(yn) * nx + xn;
                for (size_t j = pixel_start[p]; j < pixel_start[p + 1]; ++j) {
                    if (std::abs(all[i].fit.center.nm() - all[j].fit.center.nm()) < tol_nm) {
                        uf.unite(i, j);
                    }
                }
            }
        }
    }

    // Winner per component: brightest amplitude, ties to the lowest flat
    // index (pixel-major, then candidate prominence order).
    std::vector<size_t> winner(all.size(), SIZE_MAX);
    for (size_t i = 0; i < all.size(); ++i) {
        const size_t root = uf.find(i);
        if (winner[root] == SIZE_MAX || all[i].fit.amplitude > all[winner[root]].fit.amplitude) {
            winner[root] = i;
        }
    }

    CavityMap map;
    map.grid = grid;
    map.nx = nx;
    map.ny = ny;
    for (size_t i = 0; i < all.size(); ++i) {
        if (winner[uf.find(i)] != i) continue;
        CavityRecord rec;
        rec.x_idx = all[i].x;
        rec.y_idx = all[i].y;
        rec.chiplet_row = tile_of(all[i].y, ny, grid.rows);
        rec.chiplet_col = tile_of(all[i].x, nx, grid.cols);
        rec.nanobeam = beam_of(all[i].y, ny, grid.rows, grid.nanobeams);
        rec.fit = all[i].fit;
        map.records.push_back(rec);
    }
    return map;
}

ResultTable summarize_mask(const CavityMap& map) {
    const auto& g = map.grid;
    if (g.rows < 1 || g.cols < 1 || g.nanobeams < 1) {
        throw Error(ErrorCode::InvalidArgument, "chiplet grid must be positive");
    }

    struct Acc {
        std::vector<double> lambda_nm;
        std::vector<double> q;
        std::set<int> beams;
    };
    std::vector<Acc> acc(static_cast<size_t>(g.rows) * g.cols);
    for (const auto& rec : map.records) {
        if (rec.chiplet_row < 0 || rec.chiplet_row >= g.rows || rec.chiplet_col < 0 ||
            rec.chiplet_col >= g.cols) {
            throw Error(ErrorCode::ChipletOutOfRange, "record outside the chiplet grid",
                        {{"row", std::to_string(rec.chiplet_row)},
                         {"col", std::to_string(rec.chiplet_col)}});
        }
        Acc& a = acc[static_cast<size_t>(rec.chiplet_row) * g.cols + rec.chiplet_col];
        a.lambda_nm.push_back(rec.fit.center.nm());
        a.q.push_back(rec.fit.q_factor);
        a.beams.insert(rec.nanobeam);
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto mean_of = [&](const std::vector<double>& v) {
        if (v.empty()) return nan;
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto std_of = [&](const std::vector<double>& v, double m) {
        if (v.size() < 2) return nan;
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };

    ResultTable t({{"chiplet_row", ResultTable::Type::Int},
                   {"chiplet_col", ResultTable::Type::Int},
                   {"n_cavities", ResultTable::Type::Int},
                   {"mean_lambda_nm", ResultTable::Type::Real},
                   {"std_lambda_nm", ResultTable::Type::Real},
                   {"mean_q", ResultTable::Type::Real},
                   {"std_q", ResultTable::Type::Real},
                   {"fill_fraction", ResultTable::Type::Real}});
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            const Acc& a = acc[static_cast<size_t>(r) * g.cols + c];
            const double ml = mean_of(a.lambda_nm);
            const double mq = mean_of(a.q);
            t.append_row({static_cast<int64_t>(r), static_cast<int64_t>(c),
                          static_cast<int64_t>(a.lambda_nm.size()), ml,
                          std_of(a.lambda_nm, ml), mq, std_of(a.q, mq),
                          static_cast<double>(a.beams.size()) / g.nanobeams});
        }
    }
    return t;
}

} // namespace qmc
