// C binding over the C++ core. Every entry point follows the same pattern:
// validate pointers, run the core call inside guarded(), translate a thrown
// qmc::Error into its status code plus a thread-local message. Out-parameters
// are written only on success.

#include "qmcmet.h"

#include <cmath>
#include <complex>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qmc/error.hpp"
#include "qmc/io.hpp"
#include "qmc/mc.hpp"
#include "qmc/sem.hpp"
#include "qmc/spatial.hpp"
#include "qmc/spectral.hpp"
#include "qmc/spectrum.hpp"
#include "qmc/surrogate.hpp"
#include "qmc/units.hpp"
#include "qmc/yield.hpp"

// The C status values are pinned to the C++ enum by position; a drift in
// either direction must not compile.
static_assert(static_cast<int>(qmc::ErrorCode::Ok) == QMCMET_OK);
static_assert(static_cast<int>(qmc::ErrorCode::InvalidArgument) == QMCMET_ERR_INVALID_ARGUMENT);
static_assert(static_cast<int>(qmc::ErrorCode::IoFailure) == QMCMET_ERR_IO_FAILURE);
static_assert(static_cast<int>(qmc::ErrorCode::MissingScale) == QMCMET_ERR_MISSING_SCALE);
static_assert(static_cast<int>(qmc::ErrorCode::WindowTooSmall) == QMCMET_ERR_WINDOW_TOO_SMALL);
static_assert(static_cast<int>(qmc::ErrorCode::ChipletOutOfRange) ==
              QMCMET_ERR_CHIPLET_OUT_OF_RANGE);
static_assert(static_cast<int>(qmc::ErrorCode::LowCoherence) == QMCMET_ERR_LOW_COHERENCE);
static_assert(static_cast<int>(qmc::ErrorCode::DegenerateTilt) == QMCMET_ERR_DEGENERATE_TILT);
static_assert(static_cast<int>(qmc::ErrorCode::PoleProximity) == QMCMET_ERR_POLE_PROXIMITY);
static_assert(static_cast<int>(qmc::ErrorCode::RankDeficient) == QMCMET_ERR_RANK_DEFICIENT);
static_assert(static_cast<int>(qmc::ErrorCode::TooManyFailures) == QMCMET_ERR_TOO_MANY_FAILURES);
static_assert(static_cast<int>(qmc::ErrorCode::NoPairsInRange) == QMCMET_ERR_NO_PAIRS_IN_RANGE);

struct qmcmet_table {
    qmc::ResultTable value;
};
struct qmcmet_spectrum {
    qmc::Spectrum value;
};
struct qmcmet_cube {
    qmc::HyperspectralCube value;
};
struct qmcmet_image {
    qmc::GrayImage value;
};
struct qmcmet_cavity_map {
    qmc::CavityMap value;
};
struct qmcmet_surrogate {
    qmc::SurrogateModel value;
};
struct qmcmet_mc_result {
    qmc::ThicknessDistribution value;
};

namespace {

thread_local int g_last_status = QMCMET_OK;
thread_local std::string g_last_message;

void clear_last() {
    g_last_status = QMCMET_OK;
    g_last_message.clear();
}

int fail(int status, std::string message) {
    g_last_status = status;
    g_last_message = std::move(message);
    return status;
}

std::string describe(const qmc::Error& e) {
    std::string msg = e.what();
    if (!e.context().empty()) {
        msg += " (";
        bool first = true;
        for (const auto& [k, v] : e.context()) {
            if (!first) msg += ", ";
            first = false;
            msg += k;
            msg += "=";
            msg += v;
        }
        msg += ")";
    }
    return msg;
}

// Null pointers are caller bugs, reported as InvalidArgument rather than UB.
void require_ptr(const void* p, const char* name) {
    if (p == nullptr) {
        throw qmc::Error(qmc::ErrorCode::InvalidArgument, "null pointer argument",
                         {{"argument", name}});
    }
}

template <typename F>
int guarded(F&& body) {
    try {
        body();
        clear_last();
        return QMCMET_OK;
    } catch (const qmc::Error& e) {
        return fail(static_cast<int>(e.code()), describe(e));
    } catch (const std::exception& e) {
        return fail(QMCMET_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(QMCMET_ERR_INTERNAL, "unidentified failure");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void check_cell(const qmc::ResultTable& t, size_t row, size_t col) {
    if (col >= t.cols() || row >= t.rows()) {
        throw qmc::Error(qmc::ErrorCode::InvalidArgument, "cell index out of range",
                         {{"row", std::to_string(row)}, {"col", std::to_string(col)}});
    }
}

void check_cell_type(const qmc::ResultTable& t, size_t row, size_t col,
                     qmc::ResultTable::Type want, const char* label) {
    check_cell(t, row, col);
    if (t.type(col) != want) {
        throw qmc::Error(qmc::ErrorCode::InvalidArgument, "column type mismatch",
                         {{"column", t.name(col)}, {"wanted", label}});
    }
}

qmc::Spectrum spectrum_from(const qmcmet_spectrum* s, const char* name) {
    require_ptr(s, name);
    return s->value;
}

qmc::PeakCandidate fit_seed(double center_nm, double fwhm_nm, double height) {
    qmc::PeakCandidate init;
    init.center = qmc::Length::nm(center_nm);
    init.fwhm = qmc::Length::nm(fwhm_nm);
    init.height = height;
    return init;
}

qmc::BeamAxis axis_from(const qmcmet_beam_axis* axis) {
    require_ptr(axis, "axis");
    return qmc::BeamAxis{qmc::Angle::deg(axis->angle_deg), axis->coherence};
}

qmc::SpatialField field_from(const double* x_um, const double* y_um, const double* z_nm,
                             size_t n) {
    require_ptr(x_um, "x_um");
    require_ptr(y_um, "y_um");
    require_ptr(z_nm, "z_nm");
    qmc::SpatialField field;
    field.points.resize(n);
    for (size_t i = 0; i < n; ++i) {
        field.points[i] = qmc::SpatialPoint{x_um[i], y_um[i], z_nm[i]};
    }
    return field;
}

qmc::ThicknessDistribution run_mc(const qmcmet_surrogate* m, double w_mean_um, double w_std_um,
                                  double r_mean_um, double r_std_um,
                                  std::variant<std::vector<double>, qmc::GaussianSpec> lambda_nm,
                                  int n_mc, uint64_t seed, double bracket_lo_um,
                                  double bracket_hi_um) {
    require_ptr(m, "surrogate");
    qmc::InverseMcInputs in;
    in.w_um = qmc::GaussianSpec(w_mean_um, w_std_um);
    in.r_um = qmc::GaussianSpec(r_mean_um, r_std_um);
    in.lambda_nm = std::move(lambda_nm);
    in.n_mc = n_mc;
    in.seed = seed;
    in.bracket_lo_um = bracket_lo_um;
    in.bracket_hi_um = bracket_hi_um;
    return qmc::run_inverse_mc(m->value, in);
}

// One canonical tabular rendering of fit results, shared by the record and
// hole builders so every output surface agrees on column names.
qmc::ResultTable records_table(const qmc::CavityMap& map) {
    using T = qmc::ResultTable;
    T t({{"x_idx", T::Type::Int},
         {"y_idx", T::Type::Int},
         {"chiplet_row", T::Type::Int},
         {"chiplet_col", T::Type::Int},
         {"nanobeam", T::Type::Int},
         {"lambda_nm", T::Type::Real},
         {"fwhm_nm", T::Type::Real},
         {"q_factor", T::Type::Real},
         {"amplitude", T::Type::Real},
         {"offset", T::Type::Real},
         {"residual_rms", T::Type::Real},
         {"converged", T::Type::Int},
         {"iterations", T::Type::Int}});
    for (const auto& rec : map.records) {
        t.append_row({static_cast<int64_t>(rec.x_idx), static_cast<int64_t>(rec.y_idx),
                      static_cast<int64_t>(rec.chiplet_row),
                      static_cast<int64_t>(rec.chiplet_col),
                      static_cast<int64_t>(rec.nanobeam), rec.fit.center.nm(),
                      rec.fit.fwhm.nm(), rec.fit.q_factor, rec.fit.amplitude, rec.fit.offset,
                      rec.fit.residual_rms, static_cast<int64_t>(rec.fit.converged ? 1 : 0),
                      static_cast<int64_t>(rec.fit.iterations)});
    }
    return t;
}

} // namespace

extern "C" {

const char* qmcmet_version(void) { return "1.0.0"; }

int qmcmet_last_status(void) { return g_last_status; }

const char* qmcmet_last_message(void) { return g_last_message.c_str(); }

void qmcmet_string_free(char* s) { std::free(s); }

/* ------------------------------------------------------------------ */

int qmcmet_table_read_csv(const char* path, qmcmet_table** out) {
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new qmcmet_table{qmc::read_table_csv(path)};
    });
}

size_t qmcmet_table_rows(const qmcmet_table* t) { return t ? t->value.rows() : 0; }

size_t qmcmet_table_cols(const qmcmet_table* t) { return t ? t->value.cols() : 0; }

const char* qmcmet_table_name(const qmcmet_table* t, size_t col) {
    if (t == nullptr || col >= t->value.cols()) return nullptr;
    return t->value.name(col).c_str();
}

int qmcmet_table_cell_type(const qmcmet_table* t, size_t col) {
    if (t == nullptr || col >= t->value.cols()) return -1;
    switch (t->value.type(col)) {
        case qmc::ResultTable::Type::Int: return QMCMET_CELL_INT;
        case qmc::ResultTable::Type::Real: return QMCMET_CELL_REAL;
        case qmc::ResultTable::Type::Text: return QMCMET_CELL_TEXT;
    }
    return -1;
}

int qmcmet_table_column(const qmcmet_table* t, const char* name, size_t* out_col) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(name, "name");
        require_ptr(out_col, "out_col");
        const auto col = t->value.column(name);
        if (!col) {
            throw qmc::Error(qmc::ErrorCode::InvalidArgument, "no such column",
                             {{"name", name}});
        }
        *out_col = *col;
    });
}

int qmcmet_table_int_at(const qmcmet_table* t, size_t row, size_t col, int64_t* out) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(out, "out");
        check_cell_type(t->value, row, col, qmc::ResultTable::Type::Int, "int");
        *out = t->value.int_at(row, col);
    });
}

int qmcmet_table_real_at(const qmcmet_table* t, size_t row, size_t col, double* out) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(out, "out");
        check_cell_type(t->value, row, col, qmc::ResultTable::Type::Real, "real");
        *out = t->value.real_at(row, col);
    });
}

int qmcmet_table_text_at(const qmcmet_table* t, size_t row, size_t col, const char** out) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(out, "out");
        check_cell_type(t->value, row, col, qmc::ResultTable::Type::Text, "text");
        *out = t->value.text_at(row, col).c_str();
    });
}

int qmcmet_table_numeric_at(const qmcmet_table* t, size_t row, size_t col, double* out) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(out, "out");
        check_cell(t->value, row, col);
        *out = t->value.numeric_at(row, col);
    });
}

int qmcmet_table_to_csv(const qmcmet_table* t, char** out) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(out, "out");
        *out = dup_string(qmc::table_to_csv(t->value));
    });
}

int qmcmet_table_to_json(const qmcmet_table* t, char** out) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(out, "out");
        *out = dup_string(qmc::table_to_json(t->value));
    });
}

int qmcmet_table_write_csv(const qmcmet_table* t, const char* path) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(path, "path");
        qmc::write_table_csv(t->value, path);
    });
}

int qmcmet_table_write_json(const qmcmet_table* t, const char* path) {
    return guarded([&] {
        require_ptr(t, "table");
        require_ptr(path, "path");
        qmc::write_table_json(t->value, path);
    });
}

void qmcmet_table_free(qmcmet_table* t) { delete t; }

/* ------------------------------------------------------------------ */

int qmcmet_spectrum_read_csv(const char* path, qmcmet_spectrum** out) {
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new qmcmet_spectrum{qmc::read_spectrum_csv(path)};
    });
}

int qmcmet_spectrum_from_arrays(const double* wavelength_nm, const double* intensity,
                                size_t n, qmcmet_spectrum** out) {
    return guarded([&] {
        require_ptr(wavelength_nm, "wavelength_nm");
        require_ptr(intensity, "intensity");
        require_ptr(out, "out");
        std::vector<double> wl(wavelength_nm, wavelength_nm + n);
        std::vector<double> in(intensity, intensity + n);
        *out = new qmcmet_spectrum{qmc::Spectrum::from_nm(wl, std::move(in))};
    });
}

size_t qmcmet_spectrum_size(const qmcmet_spectrum* s) { return s ? s->value.size() : 0; }

int qmcmet_spectrum_copy(const qmcmet_spectrum* s, double* wavelength_nm, double* intensity) {
    return guarded([&] {
        require_ptr(s, "spectrum");
        const size_t n = s->value.size();
        if (wavelength_nm != nullptr) {
            for (size_t i = 0; i < n; ++i) wavelength_nm[i] = s->value.wavelength_nm(i);
        }
        if (intensity != nullptr) {
            const auto& in = s->value.intensity();
            std::memcpy(intensity, in.data(), n * sizeof(double));
        }
    });
}

void qmcmet_spectrum_free(qmcmet_spectrum* s) { delete s; }

/* ------------------------------------------------------------------ */

int qmcmet_find_peaks(const qmcmet_spectrum* s, double min_prominence, double fwhm_lo_nm,
                      double fwhm_hi_nm, size_t max_peaks, qmcmet_table** out) {
    return guarded([&] {
        require_ptr(s, "spectrum");
        require_ptr(out, "out");
        qmc::PeakFindConfig cfg;
        cfg.min_prominence = min_prominence;
        cfg.fwhm_lo = qmc::Length::nm(fwhm_lo_nm);
        if (fwhm_hi_nm > 0.0) cfg.fwhm_hi = qmc::Length::nm(fwhm_hi_nm);
        if (max_peaks > 0) cfg.max_peaks = max_peaks;
        const auto peaks = qmc::find_peaks(s->value, cfg);

        using T = qmc::ResultTable;
        T t({{"index", T::Type::Int},
             {"center_nm", T::Type::Real},
             {"prominence", T::Type::Real},
             {"fwhm_nm", T::Type::Real},
             {"height", T::Type::Real}});
        for (const auto& p : peaks) {
            t.append_row({static_cast<int64_t>(p.index), p.center.nm(), p.prominence,
                          p.fwhm.nm(), p.height});
        }
        *out = new qmcmet_table{std::move(t)};
    });
}

int qmcmet_fit_lorentzian(const qmcmet_spectrum* s, double window_lo_nm, double window_hi_nm,
                          double init_center_nm, double init_fwhm_nm, double init_height,
                          qmcmet_line_fit* out) {
    return guarded([&] {
        require_ptr(s, "spectrum");
        require_ptr(out, "out");
        const auto fit =
            qmc::fit_lorentzian(s->value, qmc::Length::nm(window_lo_nm),
                                qmc::Length::nm(window_hi_nm),
                                fit_seed(init_center_nm, init_fwhm_nm, init_height));
        *out = qmcmet_line_fit{fit.center.nm(), fit.fwhm.nm(),     fit.amplitude,
                               fit.offset,      fit.q_factor,      0.0,
                               fit.residual_rms, fit.converged ? 1 : 0, fit.iterations};
    });
}

int qmcmet_fit_fano(const qmcmet_spectrum* s, double window_lo_nm, double window_hi_nm,
                    double init_center_nm, double init_fwhm_nm, double init_height,
                    qmcmet_line_fit* out) {
    return guarded([&] {
        require_ptr(s, "spectrum");
        require_ptr(out, "out");
        const auto fit = qmc::fit_fano(s->value, qmc::Length::nm(window_lo_nm),
                                       qmc::Length::nm(window_hi_nm),
                                       fit_seed(init_center_nm, init_fwhm_nm, init_height));
        *out = qmcmet_line_fit{fit.center.nm(), fit.fwhm.nm(),     fit.amplitude,
                               fit.offset,      fit.q_factor,      fit.q_asym,
                               fit.residual_rms, fit.converged ? 1 : 0, fit.iterations};
    });
}

int qmcmet_prony_modes(const double* re, const double* im, size_t n, double dt, int max_order,
                       double sv_ratio, qmcmet_table** out) {
    return guarded([&] {
        require_ptr(re, "re");
        require_ptr(out, "out");
        qmc::PronyConfig cfg;
        if (max_order > 0) cfg.max_order = max_order;
        if (sv_ratio > 0.0) cfg.sv_ratio = sv_ratio;

        qmc::RingdownModes modes;
        if (im != nullptr) {
            std::vector<std::complex<double>> samples(n);
            for (size_t i = 0; i < n; ++i) samples[i] = {re[i], im[i]};
            modes = qmc::prony_ringdown_q(samples, dt, cfg);
        } else {
            modes = qmc::prony_ringdown_q(std::vector<double>(re, re + n), dt, cfg);
        }

        using T = qmc::ResultTable;
        T t({{"frequency", T::Type::Real},
             {"gamma", T::Type::Real},
             {"q_factor", T::Type::Real},
             {"amp_magnitude", T::Type::Real},
             {"amp_phase_rad", T::Type::Real},
             {"unresolved", T::Type::Int}});
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& m : modes.modes) {
            // Tables serialize to CSV/JSON, which cannot carry infinities;
            // an unbounded Q is stored as a null cell.
            const double q = std::isfinite(m.q_factor) ? m.q_factor : nan;
            t.append_row({m.frequency, m.gamma, q, m.amp_magnitude, m.amp_phase,
                          static_cast<int64_t>(m.unresolved ? 1 : 0)});
        }
        *out = new qmcmet_table{std::move(t)};
    });
}

/* ------------------------------------------------------------------ */

int qmcmet_cube_read(const char* path, qmcmet_cube** out) {
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new qmcmet_cube{qmc::read_cube(path)};
    });
}

int qmcmet_cube_from_long_csv(const char* path, double pixel_pitch_um, double origin_x_um,
                              double origin_y_um, qmcmet_cube** out) {
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new qmcmet_cube{qmc::cube_from_long_csv(path, qmc::Length::um(pixel_pitch_um),
                                                       origin_x_um, origin_y_um)};
    });
}

int qmcmet_cube_write(const qmcmet_cube* c, const char* path) {
    return guarded([&] {
        require_ptr(c, "cube");
        require_ptr(path, "path");
        qmc::write_cube(c->value, path);
    });
}

int qmcmet_cube_dims(const qmcmet_cube* c, int* nx, int* ny, size_t* n_lambda) {
    return guarded([&] {
        require_ptr(c, "cube");
        if (nx != nullptr) *nx = c->value.nx;
        if (ny != nullptr) *ny = c->value.ny;
        if (n_lambda != nullptr) *n_lambda = c->value.n_lambda();
    });
}

int qmcmet_cube_axis(const qmcmet_cube* c, double* lambda_nm) {
    return guarded([&] {
        require_ptr(c, "cube");
        require_ptr(lambda_nm, "lambda_nm");
        std::memcpy(lambda_nm, c->value.axis_nm.data(),
                    c->value.axis_nm.size() * sizeof(double));
    });
}

int qmcmet_cube_spectrum_at(const qmcmet_cube* c, int x, int y, qmcmet_spectrum** out) {
    return guarded([&] {
        require_ptr(c, "cube");
        require_ptr(out, "out");
        *out = new qmcmet_spectrum{c->value.spectrum_at(x, y)};
    });
}

void qmcmet_cube_free(qmcmet_cube* c) { delete c; }

int qmcmet_cavity_map_build(const qmcmet_cube* c, int rows, int cols, int nanobeams,
                            double min_prominence, double fit_halfwidth_nm,
                            double merge_tol_nm, qmcmet_cavity_map** out) {
    return guarded([&] {
        require_ptr(c, "cube");
        require_ptr(out, "out");
        qmc::CavityMapConfig cfg;
        cfg.peaks.min_prominence = min_prominence;
        if (fit_halfwidth_nm > 0.0) cfg.fit_halfwidth = qmc::Length::nm(fit_halfwidth_nm);
        if (merge_tol_nm > 0.0) cfg.merge_tol = qmc::Length::nm(merge_tol_nm);
        qmc::ChipletGrid grid{rows, cols, nanobeams};
        *out = new qmcmet_cavity_map{qmc::build_cavity_map(c->value, grid, cfg)};
    });
}

int qmcmet_cavity_map_records(const qmcmet_cavity_map* m, qmcmet_table** out) {
    return guarded([&] {
        require_ptr(m, "map");
        require_ptr(out, "out");
        *out = new qmcmet_table{records_table(m->value)};
    });
}

int qmcmet_cavity_map_summary(const qmcmet_cavity_map* m, qmcmet_table** out) {
    return guarded([&] {
        require_ptr(m, "map");
        require_ptr(out, "out");
        *out = new qmcmet_table{qmc::summarize_mask(m->value)};
    });
}

int qmcmet_cavity_map_fill_fraction(const qmcmet_cavity_map* m, int chiplet_row,
                                    int chiplet_col, double* out) {
    return guarded([&] {
        require_ptr(m, "map");
        require_ptr(out, "out");
        *out = qmc::fill_fraction(m->value, chiplet_row, chiplet_col);
    });
}

void qmcmet_cavity_map_free(qmcmet_cavity_map* m) { delete m; }

/* ------------------------------------------------------------------ */

int qmcmet_track_shift(const qmcmet_spectrum* const* frames, size_t n_frames,
                       double seed_lo_nm, double seed_hi_nm, double min_prominence,
                       double search_radius_nm, double fit_halfwidth_nm, int max_gap,
                       double* total_shift_nm, int* direction, qmcmet_table** out_trajectory) {
    return guarded([&] {
        require_ptr(frames, "frames");
        require_ptr(out_trajectory, "out_trajectory");
        std::vector<qmc::Spectrum> seq;
        seq.reserve(n_frames);
        for (size_t i = 0; i < n_frames; ++i) {
            seq.push_back(spectrum_from(frames[i], "frames[i]"));
        }

        qmc::TrackConfig cfg;
        cfg.peaks.min_prominence = min_prominence;
        if (search_radius_nm > 0.0) cfg.search_radius = qmc::Length::nm(search_radius_nm);
        if (fit_halfwidth_nm > 0.0) cfg.fit_halfwidth = qmc::Length::nm(fit_halfwidth_nm);
        if (max_gap > 0) cfg.max_gap = max_gap;

        const auto traj = qmc::track_resonance_shift(seq, qmc::Length::nm(seed_lo_nm),
                                                     qmc::Length::nm(seed_hi_nm), cfg);

        using T = qmc::ResultTable;
        T t({{"frame", T::Type::Int}, {"lambda_nm", T::Type::Real}});
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (size_t i = 0; i < traj.frame.size(); ++i) {
            t.append_row({static_cast<int64_t>(traj.frame[i]),
                          traj.lambda_nm[i] ? *traj.lambda_nm[i] : nan});
        }
        if (total_shift_nm != nullptr) *total_shift_nm = traj.total_shift_nm;
        if (direction != nullptr) *direction = traj.direction;
        *out_trajectory = new qmcmet_table{std::move(t)};
    });
}

int qmcmet_enhancement_factor(const qmcmet_spectrum* on, const qmcmet_spectrum* off,
                              double line_nm, double half_width_nm, double* out) {
    return guarded([&] {
        require_ptr(on, "on");
        require_ptr(off, "off");
        require_ptr(out, "out");
        *out = qmc::enhancement_factor(on->value, off->value, qmc::Length::nm(line_nm),
                                       qmc::Length::nm(half_width_nm));
    });
}

/* ------------------------------------------------------------------ */

int qmcmet_image_read(const char* path, double scale_override_nm_per_px, qmcmet_image** out) {
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        std::optional<double> scale;
        if (scale_override_nm_per_px > 0.0) scale = scale_override_nm_per_px;
        *out = new qmcmet_image{qmc::read_gray_image(path, scale)};
    });
}

int qmcmet_image_info(const qmcmet_image* img, int* width, int* height,
                      double* scale_nm_per_px, double* tilt_deg) {
    return guarded([&] {
        require_ptr(img, "image");
        if (width != nullptr) *width = img->value.width;
        if (height != nullptr) *height = img->value.height;
        if (scale_nm_per_px != nullptr) *scale_nm_per_px = img->value.scale_nm_per_px;
        if (tilt_deg != nullptr) {
            *tilt_deg = img->value.tilt_deg ? *img->value.tilt_deg
                                            : std::numeric_limits<double>::quiet_NaN();
        }
    });
}

void qmcmet_image_free(qmcmet_image* img) { delete img; }

int qmcmet_sem_beam_axis(const qmcmet_image* img, qmcmet_beam_axis* out) {
    return guarded([&] {
        require_ptr(img, "image");
        require_ptr(out, "out");
        const auto axis = qmc::estimate_beam_axis(img->value);
        *out = qmcmet_beam_axis{axis.angle.deg(), axis.coherence};
    });
}

int qmcmet_sem_measure_widths(const qmcmet_image* img, const qmcmet_beam_axis* axis,
                              qmcmet_widths* out) {
    return guarded([&] {
        require_ptr(img, "image");
        require_ptr(out, "out");
        const auto w = qmc::measure_widths(img->value, axis_from(axis));
        qmcmet_widths r{};
        r.w_top_nm = w.w_top.nm();
        r.w_bottom_nm = w.w_bottom.nm();
        r.sigma_w_top_nm = w.sigma_w_top.nm();
        r.sigma_w_bottom_nm = w.sigma_w_bottom.nm();
        for (int i = 0; i < 4; ++i) {
            r.edge_positions_px[i] = w.edge_positions_px[static_cast<size_t>(i)];
            r.edge_weights[i] = w.edge_weights[static_cast<size_t>(i)];
        }
        *out = r;
    });
}

int qmcmet_sem_detect_holes(const qmcmet_image* img, const qmcmet_beam_axis* axis,
                            double r_lo_nm, double r_hi_nm, double max_midline_offset_nm,
                            double min_spacing_nm, double* mean_radius_nm,
                            double* std_radius_nm, qmcmet_table** out) {
    return guarded([&] {
        require_ptr(img, "image");
        require_ptr(out, "out");
        qmc::HoleDetectConfig cfg;
        if (r_lo_nm > 0.0) cfg.r_lo = qmc::Length::nm(r_lo_nm);
        if (r_hi_nm > 0.0) cfg.r_hi = qmc::Length::nm(r_hi_nm);
        if (max_midline_offset_nm > 0.0) {
            cfg.max_midline_offset = qmc::Length::nm(max_midline_offset_nm);
        }
        if (min_spacing_nm > 0.0) cfg.min_spacing = qmc::Length::nm(min_spacing_nm);
        const auto holes = qmc::detect_holes(img->value, axis_from(axis), cfg);

        using T = qmc::ResultTable;
        T t({{"center_x_px", T::Type::Real},
             {"center_y_px", T::Type::Real},
             {"radius_nm", T::Type::Real}});
        for (const auto& h : holes.holes) {
            t.append_row({h.center_x_px, h.center_y_px, h.radius.nm()});
        }
        if (mean_radius_nm != nullptr) *mean_radius_nm = holes.mean_radius.nm();
        if (std_radius_nm != nullptr) *std_radius_nm = holes.std_radius.nm();
        *out = new qmcmet_table{std::move(t)};
    });
}

int qmcmet_sem_detect_ridges(const qmcmet_image* img, qmcmet_ridges* out) {
    return guarded([&] {
        require_ptr(img, "image");
        require_ptr(out, "out");
        const auto ridges = qmc::detect_ridges_tilted(img->value);
        qmcmet_ridges r{};
        r.d_t_px = ridges.d_t_px;
        r.d_nb_px = ridges.d_nb_px;
        r.psi_deg = ridges.psi.deg();
        r.psi_spread_deg = ridges.psi_spread_deg;
        for (int i = 0; i < 3; ++i) {
            r.line_angles_deg[i] = ridges.lines[static_cast<size_t>(i)].angle.deg();
            r.line_offsets_px[i] = ridges.lines[static_cast<size_t>(i)].offset_px;
        }
        *out = r;
    });
}

int qmcmet_thickness(double w_top_um, double w_bottom_um, double d_t, double d_nb,
                     double theta_deg, double psi_deg, double* t_um) {
    return guarded([&] {
        require_ptr(t_um, "t_um");
        const auto t = qmc::thickness_from_projection(
            qmc::Length::um(w_top_um), qmc::Length::um(w_bottom_um), d_t, d_nb,
            qmc::Angle::deg(theta_deg), qmc::Angle::deg(psi_deg));
        *t_um = t.um();
    });
}

int qmcmet_thickness_mc(double w_top_um, double w_bottom_um, double d_t_px, double d_nb_px,
                        double theta_deg, double psi_deg, double sigma_w_top_um,
                        double sigma_w_bottom_um, double sigma_d_t_px, double sigma_d_nb_px,
                        int n_mc, uint64_t seed, double* t_um, double* sigma_t_um) {
    return guarded([&] {
        qmc::WidthMeasurement widths;
        widths.w_top = qmc::Length::um(w_top_um);
        widths.w_bottom = qmc::Length::um(w_bottom_um);
        qmc::TiltedRidges ridges;
        ridges.d_t_px = d_t_px;
        ridges.d_nb_px = d_nb_px;
        ridges.psi = qmc::Angle::deg(psi_deg);
        qmc::ThicknessNoise noise;
        noise.sigma_w_top = qmc::Length::um(sigma_w_top_um);
        noise.sigma_w_bottom = qmc::Length::um(sigma_w_bottom_um);
        noise.sigma_d_top = sigma_d_t_px;
        noise.sigma_d_nb = sigma_d_nb_px;
        const auto est = qmc::thickness_with_uncertainty(widths, ridges,
                                                         qmc::Angle::deg(theta_deg), noise,
                                                         n_mc, seed);
        if (t_um != nullptr) *t_um = est.t.um();
        if (sigma_t_um != nullptr) *sigma_t_um = est.sigma_t.um();
    });
}

/* ------------------------------------------------------------------ */

int qmcmet_sellmeier_n(double lambda_um, double* out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = qmc::sellmeier_n(qmc::Length::um(lambda_um));
    });
}

int qmcmet_sellmeier_n_custom(double lambda_um, double b1, double c1_um2, double b2,
                              double c2_um2, double valid_lo_um, double valid_hi_um,
                              double* out) {
    return guarded([&] {
        require_ptr(out, "out");
        qmc::SellmeierParams p;
        p.b1 = b1;
        p.c1_um2 = c1_um2;
        p.b2 = b2;
        p.c2_um2 = c2_um2;
        p.valid_lo = qmc::Length::um(valid_lo_um);
        p.valid_hi = qmc::Length::um(valid_hi_um);
        *out = qmc::sellmeier_n(qmc::Length::um(lambda_um), p);
    });
}

int qmcmet_surrogate_default(qmcmet_surrogate** out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = new qmcmet_surrogate{qmc::default_surrogate()};
    });
}

int qmcmet_surrogate_load(const char* path, qmcmet_surrogate** out) {
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new qmcmet_surrogate{qmc::load_surrogate(path)};
    });
}

int qmcmet_surrogate_save(const qmcmet_surrogate* m, const char* path) {
    return guarded([&] {
        require_ptr(m, "surrogate");
        require_ptr(path, "path");
        qmc::save_surrogate(m->value, path);
    });
}

int qmcmet_surrogate_fit(const double* w_um, const double* r_um, const double* t_um,
                         const double* lambda_nm, size_t n, int order,
                         qmcmet_surrogate** out) {
    return guarded([&] {
        require_ptr(w_um, "w_um");
        require_ptr(r_um, "r_um");
        require_ptr(t_um, "t_um");
        require_ptr(lambda_nm, "lambda_nm");
        require_ptr(out, "out");
        qmc::SurrogateOrder ord;
        if (order == QMCMET_SURROGATE_LINEAR) {
            ord = qmc::SurrogateOrder::Linear;
        } else if (order == QMCMET_SURROGATE_QUADRATIC) {
            ord = qmc::SurrogateOrder::Quadratic;
        } else {
            throw qmc::Error(qmc::ErrorCode::InvalidArgument, "order must be 1 or 2",
                             {{"order", std::to_string(order)}});
        }
        std::vector<qmc::SurrogateSample> samples(n);
        for (size_t i = 0; i < n; ++i) {
            samples[i] = qmc::SurrogateSample{w_um[i], r_um[i], t_um[i], lambda_nm[i]};
        }
        *out = new qmcmet_surrogate{qmc::fit_surrogate(std::move(samples), ord)};
    });
}

int qmcmet_surrogate_eval(const qmcmet_surrogate* m, double w_um, double r_um, double t_um,
                          double* lambda_nm) {
    return guarded([&] {
        require_ptr(m, "surrogate");
        require_ptr(lambda_nm, "lambda_nm");
        const auto lambda = qmc::surrogate_eval(m->value, qmc::Length::um(w_um),
                                                qmc::Length::um(r_um), qmc::Length::um(t_um));
        *lambda_nm = lambda.nm();
    });
}

int qmcmet_surrogate_invert(const qmcmet_surrogate* m, double w_um, double r_um,
                            double lambda_nm, double t_lo_um, double t_hi_um, double* t_um) {
    return guarded([&] {
        require_ptr(m, "surrogate");
        require_ptr(t_um, "t_um");
        const auto t = qmc::invert_for_thickness(m->value, qmc::Length::um(w_um),
                                                 qmc::Length::um(r_um),
                                                 qmc::Length::nm(lambda_nm),
                                                 qmc::Length::um(t_lo_um),
                                                 qmc::Length::um(t_hi_um));
        *t_um = t.um();
    });
}

int qmcmet_surrogate_info(const qmcmet_surrogate* m, double reference[4], double linear[3],
                          double quadratic[6], double validity[6]) {
    return guarded([&] {
        require_ptr(m, "surrogate");
        const auto& v = m->value;
        if (reference != nullptr) {
            reference[0] = v.w0_um;
            reference[1] = v.r0_um;
            reference[2] = v.t0_um;
            reference[3] = v.lambda0_nm;
        }
        if (linear != nullptr) {
            linear[0] = v.c_w;
            linear[1] = v.c_r;
            linear[2] = v.c_t;
        }
        if (quadratic != nullptr) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (int i = 0; i < 6; ++i) {
                quadratic[i] = v.quadratic ? (*v.quadratic)[static_cast<size_t>(i)] : nan;
            }
        }
        if (validity != nullptr) {
            validity[0] = v.validity.w_um[0];
            validity[1] = v.validity.w_um[1];
            validity[2] = v.validity.r_um[0];
            validity[3] = v.validity.r_um[1];
            validity[4] = v.validity.t_um[0];
            validity[5] = v.validity.t_um[1];
        }
    });
}

const char* qmcmet_surrogate_provenance(const qmcmet_surrogate* m) {
    return m ? m->value.provenance.c_str() : nullptr;
}

void qmcmet_surrogate_free(qmcmet_surrogate* m) { delete m; }

/* ------------------------------------------------------------------ */

int qmcmet_invert_mc_gaussian(const qmcmet_surrogate* m, double w_mean_um, double w_std_um,
                              double r_mean_um, double r_std_um, double lambda_mean_nm,
                              double lambda_std_nm, int n_mc, uint64_t seed,
                              double bracket_lo_um, double bracket_hi_um,
                              qmcmet_mc_result** out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = new qmcmet_mc_result{
            run_mc(m, w_mean_um, w_std_um, r_mean_um, r_std_um,
                   qmc::GaussianSpec(lambda_mean_nm, lambda_std_nm), n_mc, seed,
                   bracket_lo_um, bracket_hi_um)};
    });
}

int qmcmet_invert_mc_empirical(const qmcmet_surrogate* m, double w_mean_um, double w_std_um,
                               double r_mean_um, double r_std_um, const double* lambda_nm,
                               size_t n_lambda, int n_mc, uint64_t seed, double bracket_lo_um,
                               double bracket_hi_um, qmcmet_mc_result** out) {
    return guarded([&] {
        require_ptr(lambda_nm, "lambda_nm");
        require_ptr(out, "out");
        *out = new qmcmet_mc_result{
            run_mc(m, w_mean_um, w_std_um, r_mean_um, r_std_um,
                   std::vector<double>(lambda_nm, lambda_nm + n_lambda), n_mc, seed,
                   bracket_lo_um, bracket_hi_um)};
    });
}

int qmcmet_mc_result_stats(const qmcmet_mc_result* r, double* mean_um, double* std_um,
                           int* n_failed, size_t* n_samples, uint64_t* seed) {
    return guarded([&] {
        require_ptr(r, "result");
        if (mean_um != nullptr) *mean_um = r->value.mean_um;
        if (std_um != nullptr) *std_um = r->value.std_um;
        if (n_failed != nullptr) *n_failed = r->value.n_failed;
        if (n_samples != nullptr) *n_samples = r->value.samples_um.size();
        if (seed != nullptr) *seed = r->value.seed;
    });
}

int qmcmet_mc_result_samples(const qmcmet_mc_result* r, double* samples_um) {
    return guarded([&] {
        require_ptr(r, "result");
        require_ptr(samples_um, "samples_um");
        std::memcpy(samples_um, r->value.samples_um.data(),
                    r->value.samples_um.size() * sizeof(double));
    });
}

void qmcmet_mc_result_free(qmcmet_mc_result* r) { delete r; }

/* ------------------------------------------------------------------ */

int qmcmet_fit_quadratic_surface(const double* x_um, const double* y_um, const double* z_nm,
                                 size_t n, double beta[6]) {
    return guarded([&] {
        require_ptr(beta, "beta");
        const auto surface = qmc::fit_quadratic_surface(field_from(x_um, y_um, z_nm, n));
        for (int i = 0; i < 6; ++i) beta[i] = surface.beta[static_cast<size_t>(i)];
    });
}

int qmcmet_quadratic_eval(const double beta[6], double x_um, double y_um, double* z_nm) {
    return guarded([&] {
        require_ptr(beta, "beta");
        require_ptr(z_nm, "z_nm");
        qmc::QuadraticSurface surface;
        for (int i = 0; i < 6; ++i) surface.beta[static_cast<size_t>(i)] = beta[i];
        *z_nm = surface.evaluate(x_um, y_um);
    });
}

int qmcmet_default_loess_k(size_t n, int* out) {
    return guarded([&] {
        require_ptr(out, "out");
        *out = qmc::default_loess_k(n);
    });
}

int qmcmet_loess(const double* x_um, const double* y_um, const double* z_nm, size_t n, int k,
                 double* fitted_nm, uint8_t* degenerate) {
    return guarded([&] {
        require_ptr(fitted_nm, "fitted_nm");
        const auto field = field_from(x_um, y_um, z_nm, n);
        const int kk = k > 0 ? k : qmc::default_loess_k(n);
        const auto fit = qmc::loess_fit(field, kk);
        std::memcpy(fitted_nm, fit.fitted_nm.data(), n * sizeof(double));
        if (degenerate != nullptr) {
            std::memcpy(degenerate, fit.degenerate.data(), n * sizeof(uint8_t));
        }
    });
}

int qmcmet_residual_summary(const double* z_nm, const double* fitted_nm, size_t n,
                            double* std_before_nm, double* std_after_nm,
                            double* reduction_pct) {
    return guarded([&] {
        require_ptr(z_nm, "z_nm");
        require_ptr(fitted_nm, "fitted_nm");
        qmc::SpatialField field;
        field.points.resize(n);
        for (size_t i = 0; i < n; ++i) field.points[i] = qmc::SpatialPoint{0.0, 0.0, z_nm[i]};
        const auto summary =
            qmc::residual_summary(field, std::vector<double>(fitted_nm, fitted_nm + n));
        if (std_before_nm != nullptr) *std_before_nm = summary.std_before_nm;
        if (std_after_nm != nullptr) *std_after_nm = summary.std_after_nm;
        if (reduction_pct != nullptr) *reduction_pct = summary.reduction_pct;
    });
}

int qmcmet_semivariogram(const double* x_um, const double* y_um, const double* z_nm, size_t n,
                         int axis, double bin_width_um, double max_lag_um, double* nugget_nm2,
                         qmcmet_table** out) {
    return guarded([&] {
        require_ptr(out, "out");
        if (axis != QMCMET_AXIS_X && axis != QMCMET_AXIS_Y) {
            throw qmc::Error(qmc::ErrorCode::InvalidArgument, "axis must be 0 (x) or 1 (y)",
                             {{"axis", std::to_string(axis)}});
        }
        const auto result = qmc::semivariogram(
            field_from(x_um, y_um, z_nm, n),
            axis == QMCMET_AXIS_X ? qmc::FieldAxis::X : qmc::FieldAxis::Y, bin_width_um,
            max_lag_um);

        using T = qmc::ResultTable;
        T t({{"lag_um", T::Type::Real}, {"gamma_nm2", T::Type::Real}, {"pairs", T::Type::Int}});
        for (const auto& bin : result.bins) {
            t.append_row({bin.lag_um, bin.gamma_nm2, static_cast<int64_t>(bin.pairs)});
        }
        if (nugget_nm2 != nullptr) *nugget_nm2 = result.nugget_nm2;
        *out = new qmcmet_table{std::move(t)};
    });
}

/* ------------------------------------------------------------------ */

int qmcmet_integration_effort(double e0, double eu, int nc, int b, double* total,
                              double* per_chiplet) {
    return guarded([&] {
        const auto result = qmc::integration_effort(qmc::EffortParams{e0, eu, nc, b});
        if (total != nullptr) *total = result.total;
        if (per_chiplet != nullptr) *per_chiplet = result.per_chiplet;
    });
}

int qmcmet_expected_functional(int n, double p, int r, double* n_good,
                               double* residual_defect) {
    return guarded([&] {
        const auto result = qmc::expected_functional(qmc::ReplacementParams{n, p, r});
        if (n_good != nullptr) *n_good = result.n_good;
        if (residual_defect != nullptr) *residual_defect = result.residual_defect;
    });
}

} // extern "C"
