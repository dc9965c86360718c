// Command-line front end. Links the C API only; everything the binary
// knows about the library goes through qmcmet.h. Exit codes: 0 success,
// 2 validation failure (one stderr line), 3 runtime failure. Randomized
// subcommands require a seed and echo it in their output headers, so any
// invocation is reproducible byte for byte.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli_util.hpp"
#include "qmcmet.h"
#include "svg_plot.hpp"

namespace {

using cli::CliExit;
using cli::fail;
using cli::fmt_g;
using nlohmann::ordered_json;

// Status-to-exit-code policy: parameter preconditions are validation (2),
// IO problems and data-driven algorithm failures are runtime (3).
int classify(int status) {
    switch (status) {
        case QMCMET_ERR_INVALID_ARGUMENT:
        case QMCMET_ERR_UNKNOWN_UNIT:
        case QMCMET_ERR_MISSING_SCALE:
        case QMCMET_ERR_WINDOW_TOO_SMALL:
        case QMCMET_ERR_CHIPLET_OUT_OF_RANGE:
        case QMCMET_ERR_INVALID_GEOMETRY:
        case QMCMET_ERR_DEGENERATE_TILT:
        case QMCMET_ERR_OUT_OF_VALIDITY_RANGE:
        case QMCMET_ERR_OUT_OF_VALIDITY_BOX:
            return 2;
        default:
            return 3;
    }
}

std::string one_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::string last_message() {
    const char* m = qmcmet_last_message();
    return one_line(m != nullptr && m[0] != '\0' ? m : "unspecified failure");
}

void check(int rc) {
    if (rc != QMCMET_OK) fail(classify(rc), last_message());
}

template <auto F>
struct HandleFree {
    template <typename T>
    void operator()(T* p) const {
        F(p);
    }
};

using TablePtr = std::unique_ptr<qmcmet_table, HandleFree<&qmcmet_table_free>>;
using SpectrumPtr = std::unique_ptr<qmcmet_spectrum, HandleFree<&qmcmet_spectrum_free>>;
using CubePtr = std::unique_ptr<qmcmet_cube, HandleFree<&qmcmet_cube_free>>;
using CavityMapPtr = std::unique_ptr<qmcmet_cavity_map, HandleFree<&qmcmet_cavity_map_free>>;
using ImagePtr = std::unique_ptr<qmcmet_image, HandleFree<&qmcmet_image_free>>;
using SurrogatePtr = std::unique_ptr<qmcmet_surrogate, HandleFree<&qmcmet_surrogate_free>>;
using McResultPtr = std::unique_ptr<qmcmet_mc_result, HandleFree<&qmcmet_mc_result_free>>;

TablePtr read_table(const std::string& path) {
    qmcmet_table* t = nullptr;
    check(qmcmet_table_read_csv(path.c_str(), &t));
    return TablePtr(t);
}

SpectrumPtr read_spectrum(const std::string& path) {
    qmcmet_spectrum* s = nullptr;
    check(qmcmet_spectrum_read_csv(path.c_str(), &s));
    return SpectrumPtr(s);
}

bool try_column(const qmcmet_table* t, const char* name, size_t* col) {
    return qmcmet_table_column(t, name, col) == QMCMET_OK;
}

size_t need_column(const qmcmet_table* t, const char* name, const std::string& path) {
    size_t col = 0;
    if (!try_column(t, name, &col)) fail(2, path + ": missing column " + name);
    return col;
}

std::vector<double> numeric_column(const qmcmet_table* t, size_t col) {
    std::vector<double> v(qmcmet_table_rows(t));
    for (size_t i = 0; i < v.size(); ++i) check(qmcmet_table_numeric_at(t, i, col, &v[i]));
    return v;
}

struct MeanStd {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
    size_t n = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    double sum = 0.0;
    for (double t : v) {
        if (!std::isfinite(t)) continue;
        sum += t;
        ++out.n;
    }
    if (out.n == 0) return out;
    out.mean = sum / static_cast<double>(out.n);
    if (out.n < 2) return out;
    double ss = 0.0;
    for (double t : v) {
        if (!std::isfinite(t)) continue;
        ss += (t - out.mean) * (t - out.mean);
    }
    out.std = std::sqrt(ss / static_cast<double>(out.n - 1));
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(3, "cannot open " + path + " for writing");
    f << text;
    f.flush();
    if (!f) fail(3, "failed writing " + path);
}

std::string join_argv(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i > 0) out += ' ';
        const std::string a = argv[i];
        if (a.find(' ') != std::string::npos) {
            out += '"';
            out += a;
            out += '"';
        } else {
            out += a;
        }
    }
    return out;
}

void print_header(const std::string& cmdline) {
    std::cout << "# qmcmet " << qmcmet_version() << "\n# command: " << cmdline << "\n";
}

void print_seed(uint64_t seed) { std::cout << "# seed: " << seed << "\n"; }

std::string seeded_provenance(const std::string& cmdline, uint64_t seed) {
    return cmdline + " | seed=" + std::to_string(seed);
}

void kv(const char* key, double v) { std::cout << key << " = " << fmt_g(v) << "\n"; }
void kvi(const char* key, long long v) { std::cout << key << " = " << v << "\n"; }

// A config [section] both feeds values to and triggers its subcommand, so a
// file shared by several workflows would run subcommands argv never named.
// Restrict the file to top-level keys and the one section argv selected.
class ScopedConfig : public CLI::ConfigBase {
public:
    std::string scope;

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::vector<CLI::ConfigItem> kept;
        for (auto& item : CLI::ConfigBase::from_config(input)) {
            if (item.parents.empty() || item.parents.front() == scope) {
                kept.push_back(std::move(item));
            }
        }
        return kept;
    }
};

// First bare token outside --config and its value; app-level flags take no
// other values, so this is the subcommand argv named.
std::string selected_subcommand(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config") {
            ++i;
            continue;
        }
        if (a.rfind("--config=", 0) == 0) continue;
        if (!a.empty() && a[0] != '-') return a;
    }
    return {};
}

// ------------------------------------------------------------------
// Shared option groups

struct CubeIn {
    std::string cube;
    std::string cube_csv;
    double pitch_um = 1.0;
    double origin_x_um = 0.0;
    double origin_y_um = 0.0;
};

struct Grid {
    int rows = 0;
    int cols = 0;
    int nanobeams = 0;
};

struct Detect {
    double min_prominence = 0.0;
    double fit_halfwidth_nm = 1.0;
    double merge_tol_nm = 0.3;
};

void add_cube_opts(CLI::App* sc, CubeIn& c) {
    auto* a = sc->add_option("--cube", c.cube, "binary hyperspectral cube path");
    auto* b = sc->add_option("--cube-csv", c.cube_csv,
                             "long-format cube CSV with columns x_idx, y_idx, lambda_nm, intensity");
    a->excludes(b);
    b->excludes(a);
    sc->add_option("--pitch-um", c.pitch_um, "pixel pitch for --cube-csv (um)")
        ->capture_default_str();
    sc->add_option("--origin-x-um", c.origin_x_um, "raster origin x for --cube-csv (um)")
        ->capture_default_str();
    sc->add_option("--origin-y-um", c.origin_y_um, "raster origin y for --cube-csv (um)")
        ->capture_default_str();
}

void add_grid_opts(CLI::App* sc, Grid& g) {
    sc->add_option("--rows", g.rows, "chiplet grid rows (count)")->required();
    sc->add_option("--cols", g.cols, "chiplet grid columns (count)")->required();
    sc->add_option("--nanobeams", g.nanobeams, "nanobeams per chiplet (count)")->required();
}

void add_detect_opts(CLI::App* sc, Detect& d) {
    sc->add_option("--min-prominence", d.min_prominence, "peak prominence floor (intensity units)")
        ->capture_default_str();
    sc->add_option("--fit-halfwidth", d.fit_halfwidth_nm, "line fit window half width (nm)")
        ->capture_default_str();
    sc->add_option("--merge-tol", d.merge_tol_nm,
                   "wavelength tolerance for merging neighboring detections (nm)")
        ->capture_default_str();
}

CubePtr load_cube(const CubeIn& c) {
    if (c.cube.empty() == c.cube_csv.empty()) {
        fail(2, "exactly one of --cube / --cube-csv is required");
    }
    qmcmet_cube* raw = nullptr;
    if (!c.cube.empty()) {
        check(qmcmet_cube_read(c.cube.c_str(), &raw));
    } else {
        check(qmcmet_cube_from_long_csv(c.cube_csv.c_str(), c.pitch_um, c.origin_x_um,
                                        c.origin_y_um, &raw));
    }
    return CubePtr(raw);
}

CavityMapPtr build_map(const qmcmet_cube* cube, const Grid& g, const Detect& d) {
    qmcmet_cavity_map* raw = nullptr;
    check(qmcmet_cavity_map_build(cube, g.rows, g.cols, g.nanobeams, d.min_prominence,
                                  d.fit_halfwidth_nm, d.merge_tol_nm, &raw));
    return CavityMapPtr(raw);
}

ImagePtr read_image(const std::string& path, double scale_nm_per_px) {
    qmcmet_image* raw = nullptr;
    check(qmcmet_image_read(path.c_str(), scale_nm_per_px, &raw));
    return ImagePtr(raw);
}

// ------------------------------------------------------------------
// peaks

struct PeaksOpts {
    std::string in, out, plot;
    std::string fit = "none";
    double min_prominence = 0.0;
    double fwhm_lo_nm = 0.0;
    double fwhm_hi_nm = 0.0;
    double fit_halfwidth_nm = 1.0;
    size_t max_peaks = 0;
};

void run_peaks(const PeaksOpts& o, const std::string& cmdline) {
    auto s = read_spectrum(o.in);
    qmcmet_table* raw = nullptr;
    check(qmcmet_find_peaks(s.get(), o.min_prominence, o.fwhm_lo_nm, o.fwhm_hi_nm, o.max_peaks,
                            &raw));
    TablePtr t(raw);
    const size_t n = qmcmet_table_rows(t.get());

    if (o.fit == "none") {
        check(qmcmet_table_write_csv(t.get(), o.out.c_str()));
    } else {
        const bool fano = o.fit == "fano";
        std::ostringstream csv;
        csv << "index,center_nm,prominence,fwhm_nm,height,fit_center_nm,fit_fwhm_nm,fit_q,"
               "fit_q_asym,fit_amplitude,fit_offset,fit_residual_rms,fit_converged,"
               "fit_iterations\n";
        for (size_t i = 0; i < n; ++i) {
            int64_t idx = 0;
            double c = 0, prom = 0, fw = 0, h = 0;
            check(qmcmet_table_int_at(t.get(), i, 0, &idx));
            check(qmcmet_table_numeric_at(t.get(), i, 1, &c));
            check(qmcmet_table_numeric_at(t.get(), i, 2, &prom));
            check(qmcmet_table_numeric_at(t.get(), i, 3, &fw));
            check(qmcmet_table_numeric_at(t.get(), i, 4, &h));
            qmcmet_line_fit f{};
            const auto fit_fn = fano ? qmcmet_fit_fano : qmcmet_fit_lorentzian;
            check(fit_fn(s.get(), c - o.fit_halfwidth_nm, c + o.fit_halfwidth_nm, c, fw, h, &f));
            csv << idx << ',' << fmt_g(c) << ',' << fmt_g(prom) << ',' << fmt_g(fw) << ','
                << fmt_g(h) << ',' << fmt_g(f.center_nm) << ',' << fmt_g(f.fwhm_nm) << ','
                << fmt_g(f.q_factor) << ',' << fmt_g(f.q_asym) << ',' << fmt_g(f.amplitude) << ','
                << fmt_g(f.offset) << ',' << fmt_g(f.residual_rms) << ',' << f.converged << ','
                << f.iterations << "\n";
        }
        write_text_file(o.out, csv.str());
    }

    if (!o.plot.empty()) {
        const size_t len = qmcmet_spectrum_size(s.get());
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Spectrum;
        pd.title = "spectrum";
        pd.x_label = "wavelength (nm)";
        pd.y_label = "intensity (arb)";
        pd.x.resize(len);
        pd.y.resize(len);
        check(qmcmet_spectrum_copy(s.get(), pd.x.data(), pd.y.data()));
        for (size_t i = 0; i < n; ++i) {
            double c = 0, h = 0;
            check(qmcmet_table_numeric_at(t.get(), i, 1, &c));
            check(qmcmet_table_numeric_at(t.get(), i, 4, &h));
            pd.mark_x.push_back(c);
            pd.mark_y.push_back(h);
        }
        pd.provenance = cmdline;
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    kvi("n_peaks", static_cast<long long>(n));
}

// ------------------------------------------------------------------
// map

struct MapOpts {
    CubeIn in;
    Grid grid;
    Detect det;
    std::string out, plot;
};

void run_map(const MapOpts& o, const std::string& cmdline) {
    auto cube = load_cube(o.in);
    auto map = build_map(cube.get(), o.grid, o.det);
    qmcmet_table* raw = nullptr;
    check(qmcmet_cavity_map_records(map.get(), &raw));
    TablePtr rec(raw);
    check(qmcmet_table_write_csv(rec.get(), o.out.c_str()));

    int nx = 0, ny = 0;
    size_t nl = 0;
    check(qmcmet_cube_dims(cube.get(), &nx, &ny, &nl));
    const size_t n = qmcmet_table_rows(rec.get());

    if (!o.plot.empty()) {
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Map;
        pd.title = "cavity map";
        pd.x_label = "x (px)";
        pd.y_label = "y (px)";
        pd.value_label = "lambda0 (nm)";
        pd.map_nx = nx;
        pd.map_ny = ny;
        pd.cells.assign(static_cast<size_t>(nx) * static_cast<size_t>(ny),
                        std::numeric_limits<double>::quiet_NaN());
        const size_t cx = need_column(rec.get(), "x_idx", o.out);
        const size_t cy = need_column(rec.get(), "y_idx", o.out);
        const size_t cl = need_column(rec.get(), "lambda_nm", o.out);
        for (size_t i = 0; i < n; ++i) {
            double x = 0, y = 0, lam = 0;
            check(qmcmet_table_numeric_at(rec.get(), i, cx, &x));
            check(qmcmet_table_numeric_at(rec.get(), i, cy, &y));
            check(qmcmet_table_numeric_at(rec.get(), i, cl, &lam));
            pd.cells[static_cast<size_t>(y) * static_cast<size_t>(nx) + static_cast<size_t>(x)] =
                lam;
            pd.mark_x.push_back(x + 0.5);
            pd.mark_y.push_back(y + 0.5);
            pd.mark_value.push_back(lam);
        }
        pd.provenance = cmdline;
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    kvi("nx", nx);
    kvi("ny", ny);
    kvi("n_lambda", static_cast<long long>(nl));
    kvi("n_records", static_cast<long long>(n));
}

// ------------------------------------------------------------------
// summarize

struct SummarizeOpts {
    CubeIn in;
    Grid grid;
    Detect det;
    std::string out, plot;
    int bins = 0;
};

void run_summarize(const SummarizeOpts& o, const std::string& cmdline) {
    auto cube = load_cube(o.in);
    auto map = build_map(cube.get(), o.grid, o.det);
    qmcmet_table* raw = nullptr;
    check(qmcmet_cavity_map_summary(map.get(), &raw));
    TablePtr summary(raw);
    check(qmcmet_table_write_csv(summary.get(), o.out.c_str()));

    qmcmet_table* rraw = nullptr;
    check(qmcmet_cavity_map_records(map.get(), &rraw));
    TablePtr rec(rraw);
    const auto lam = numeric_column(rec.get(), need_column(rec.get(), "lambda_nm", "records"));
    const auto q = numeric_column(rec.get(), need_column(rec.get(), "q_factor", "records"));
    const auto fill =
        numeric_column(summary.get(), need_column(summary.get(), "fill_fraction", "summary"));
    const MeanStd lam_s = mean_std(lam);
    const MeanStd q_s = mean_std(q);
    const MeanStd fill_s = mean_std(fill);

    if (!o.plot.empty()) {
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Histogram;
        pd.title = "resonance wavelengths";
        pd.x_label = "lambda0 (nm)";
        pd.y_label = "count";
        pd.x = lam;
        pd.bins = o.bins;
        pd.provenance = cmdline;
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    kvi("n_records", static_cast<long long>(lam.size()));
    kv("mean_lambda_nm", lam_s.mean);
    kv("std_lambda_nm", lam_s.std);
    kv("mean_q", q_s.mean);
    kv("std_q", q_s.std);
    kv("mean_fill_fraction", fill_s.mean);
}

// ------------------------------------------------------------------
// tune

struct TuneOpts {
    std::vector<std::string> frames;
    double seed_lo_nm = 0.0;
    double seed_hi_nm = 0.0;
    double min_prominence = 0.0;
    double search_radius_nm = 1.0;
    double fit_halfwidth_nm = 1.0;
    int max_gap = 5;
    std::string out, plot;
};

void run_tune(const TuneOpts& o, const std::string& cmdline) {
    std::vector<SpectrumPtr> keep;
    std::vector<const qmcmet_spectrum*> frames;
    keep.reserve(o.frames.size());
    frames.reserve(o.frames.size());
    for (const auto& path : o.frames) {
        keep.push_back(read_spectrum(path));
        frames.push_back(keep.back().get());
    }
    double shift = 0.0;
    int direction = 0;
    qmcmet_table* raw = nullptr;
    check(qmcmet_track_shift(frames.data(), frames.size(), o.seed_lo_nm, o.seed_hi_nm,
                             o.min_prominence, o.search_radius_nm, o.fit_halfwidth_nm, o.max_gap,
                             &shift, &direction, &raw));
    TablePtr traj(raw);
    check(qmcmet_table_write_csv(traj.get(), o.out.c_str()));

    const auto frame_idx = numeric_column(traj.get(), 0);
    const auto lambda = numeric_column(traj.get(), 1);
    size_t tracked = 0;
    for (double v : lambda) {
        if (std::isfinite(v)) ++tracked;
    }

    if (!o.plot.empty()) {
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Trajectory;
        pd.title = "resonance trajectory";
        pd.x_label = "frame";
        pd.y_label = "lambda0 (nm)";
        pd.x = frame_idx;
        pd.y = lambda;
        pd.provenance = cmdline;
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    kvi("n_frames", static_cast<long long>(frames.size()));
    kvi("n_tracked", static_cast<long long>(tracked));
    kv("total_shift_nm", shift);
    kvi("direction", direction);
}

// ------------------------------------------------------------------
// enhance

struct EnhanceOpts {
    std::string on, off, out;
    double line_nm = 0.0;
    double half_width_nm = 0.0;
};

void run_enhance(const EnhanceOpts& o, const std::string& cmdline) {
    auto on = read_spectrum(o.on);
    auto off = read_spectrum(o.off);
    double factor = 0.0;
    check(qmcmet_enhancement_factor(on.get(), off.get(), o.line_nm, o.half_width_nm, &factor));
    if (!o.out.empty()) {
        ordered_json j{{"command", cmdline},
                       {"line_nm", o.line_nm},
                       {"half_width_nm", o.half_width_nm},
                       {"enhancement", factor}};
        write_text_file(o.out, j.dump(2) + "\n");
    }
    print_header(cmdline);
    kv("enhancement", factor);
}

// ------------------------------------------------------------------
// sem-top

struct SemTopOpts {
    std::string in, out, holes_csv;
    double scale_nm_per_px = 0.0;
    double r_lo_nm = 0.0;
    double r_hi_nm = 0.0;
    double max_offset_nm = 0.0;
    double min_spacing_nm = 0.0;
};

void run_sem_top(const SemTopOpts& o, const std::string& cmdline) {
    auto img = read_image(o.in, o.scale_nm_per_px);
    int width = 0, height = 0;
    double scale = 0.0;
    check(qmcmet_image_info(img.get(), &width, &height, &scale, nullptr));

    qmcmet_beam_axis axis{};
    check(qmcmet_sem_beam_axis(img.get(), &axis));
    qmcmet_widths w{};
    check(qmcmet_sem_measure_widths(img.get(), &axis, &w));

    double r_mean = 0.0, r_std = 0.0;
    qmcmet_table* hraw = nullptr;
    check(qmcmet_sem_detect_holes(img.get(), &axis, o.r_lo_nm, o.r_hi_nm, o.max_offset_nm,
                                  o.min_spacing_nm, &r_mean, &r_std, &hraw));
    TablePtr holes(hraw);
    const size_t n_holes = qmcmet_table_rows(holes.get());
    if (!o.holes_csv.empty()) check(qmcmet_table_write_csv(holes.get(), o.holes_csv.c_str()));

    if (!o.out.empty()) {
        ordered_json holes_rows = ordered_json::array();
        for (size_t i = 0; i < n_holes; ++i) {
            double cx = 0, cy = 0, r = 0;
            check(qmcmet_table_numeric_at(holes.get(), i, 0, &cx));
            check(qmcmet_table_numeric_at(holes.get(), i, 1, &cy));
            check(qmcmet_table_numeric_at(holes.get(), i, 2, &r));
            holes_rows.push_back(
                {{"center_x_px", cx}, {"center_y_px", cy}, {"radius_nm", r}});
        }
        ordered_json j{
            {"command", cmdline},
            {"image",
             {{"path", o.in}, {"width_px", width}, {"height_px", height},
              {"scale_nm_per_px", scale}}},
            {"axis", {{"angle_deg", axis.angle_deg}, {"coherence", axis.coherence}}},
            {"widths",
             {{"w_top_nm", w.w_top_nm},
              {"sigma_w_top_nm", w.sigma_w_top_nm},
              {"w_bottom_nm", w.w_bottom_nm},
              {"sigma_w_bottom_nm", w.sigma_w_bottom_nm},
              {"edge_positions_px", {w.edge_positions_px[0], w.edge_positions_px[1],
                                     w.edge_positions_px[2], w.edge_positions_px[3]}},
              {"edge_weights", {w.edge_weights[0], w.edge_weights[1], w.edge_weights[2],
                                w.edge_weights[3]}}}},
            {"holes",
             {{"n", n_holes}, {"mean_radius_nm", r_mean}, {"std_radius_nm", r_std},
              {"rows", holes_rows}}}};
        write_text_file(o.out, j.dump(2) + "\n");
    }

    print_header(cmdline);
    kv("axis_deg", axis.angle_deg);
    kv("coherence", axis.coherence);
    kv("w_top_nm", w.w_top_nm);
    kv("sigma_w_top_nm", w.sigma_w_top_nm);
    kv("w_bottom_nm", w.w_bottom_nm);
    kv("sigma_w_bottom_nm", w.sigma_w_bottom_nm);
    kvi("n_holes", static_cast<long long>(n_holes));
    kv("mean_radius_nm", r_mean);
    kv("std_radius_nm", r_std);
}

// ------------------------------------------------------------------
// sem-tilt

struct SemTiltOpts {
    std::string in, out;
    double scale_nm_per_px = 0.0;
    double wt_um = 0.0;
    double wb_um = 0.0;
    double theta_deg = 0.0;
    bool wt_given = false;
    bool theta_given = false;
};

void run_sem_tilt(const SemTiltOpts& o, const std::string& cmdline) {
    // Ridge geometry is pixel based; a missing pixel scale must not block
    // it, so retry with a unit scale and drop the scale from the report.
    qmcmet_image* raw = nullptr;
    bool scale_known = true;
    int rc = qmcmet_image_read(o.in.c_str(), o.scale_nm_per_px, &raw);
    if (rc == QMCMET_ERR_MISSING_SCALE) {
        scale_known = false;
        rc = qmcmet_image_read(o.in.c_str(), 1.0, &raw);
    }
    check(rc);
    ImagePtr img(raw);

    double scale = 0.0, tilt = 0.0;
    check(qmcmet_image_info(img.get(), nullptr, nullptr, &scale, &tilt));
    qmcmet_ridges r{};
    check(qmcmet_sem_detect_ridges(img.get(), &r));
    const double ratio = r.d_nb_px / r.d_t_px;

    double theta = o.theta_given ? o.theta_deg : tilt;
    double t_um = std::numeric_limits<double>::quiet_NaN();
    if (o.wt_given) {
        if (!std::isfinite(theta)) {
            fail(2, "--theta is required when the image metadata carries no tilt angle");
        }
        check(qmcmet_thickness(o.wt_um, o.wb_um, r.d_t_px, r.d_nb_px, theta, r.psi_deg, &t_um));
    }

    if (!o.out.empty()) {
        ordered_json j{{"command", cmdline},
                       {"image", {{"path", o.in}}},
                       {"d_t_px", r.d_t_px},
                       {"d_nb_px", r.d_nb_px},
                       {"d_ratio", ratio},
                       {"psi_deg", r.psi_deg},
                       {"psi_spread_deg", r.psi_spread_deg},
                       {"line_angles_deg",
                        {r.line_angles_deg[0], r.line_angles_deg[1], r.line_angles_deg[2]}},
                       {"line_offsets_px",
                        {r.line_offsets_px[0], r.line_offsets_px[1], r.line_offsets_px[2]}}};
        if (scale_known) j["image"]["scale_nm_per_px"] = scale;
        if (std::isfinite(theta)) j["theta_deg"] = theta;
        if (o.wt_given) {
            j["w_top_um"] = o.wt_um;
            j["w_bottom_um"] = o.wb_um;
            j["t_um"] = t_um;
        }
        write_text_file(o.out, j.dump(2) + "\n");
    }

    print_header(cmdline);
    kv("d_t_px", r.d_t_px);
    kv("d_nb_px", r.d_nb_px);
    kv("d_ratio", ratio);
    kv("psi_deg", r.psi_deg);
    kv("psi_spread_deg", r.psi_spread_deg);
    if (std::isfinite(theta)) kv("theta_deg", theta);
    if (o.wt_given) kv("t_um", t_um);
}

// ------------------------------------------------------------------
// thickness

struct ThicknessOpts {
    double wt_um = 0.0;
    double wb_um = 0.0;
    double dt = 0.0;
    double dnb = 0.0;
    double theta_deg = 0.0;
    double psi_deg = 0.0;
    double sigma_wt_um = 0.0;
    double sigma_wb_um = 0.0;
    double sigma_dt_px = 0.0;
    double sigma_dnb_px = 0.0;
    int n_mc = 10000;
    uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
};

void run_thickness(const ThicknessOpts& o, const std::string& cmdline) {
    double t = 0.0;
    check(qmcmet_thickness(o.wt_um, o.wb_um, o.dt, o.dnb, o.theta_deg, o.psi_deg, &t));

    const bool mc = o.sigma_wt_um > 0.0 || o.sigma_wb_um > 0.0 || o.sigma_dt_px > 0.0 ||
                    o.sigma_dnb_px > 0.0;
    double t_mc = 0.0, sigma_t = 0.0;
    if (mc) {
        if (!o.seed_given) fail(2, "--seed is required when any sigma flag is set");
        check(qmcmet_thickness_mc(o.wt_um, o.wb_um, o.dt, o.dnb, o.theta_deg, o.psi_deg,
                                  o.sigma_wt_um, o.sigma_wb_um, o.sigma_dt_px, o.sigma_dnb_px,
                                  o.n_mc, o.seed, &t_mc, &sigma_t));
    }

    if (!o.out.empty()) {
        ordered_json j{{"command", cmdline},
                       {"w_top_um", o.wt_um},
                       {"w_bottom_um", o.wb_um},
                       {"d_t", o.dt},
                       {"d_nb", o.dnb},
                       {"theta_deg", o.theta_deg},
                       {"psi_deg", o.psi_deg},
                       {"t_um", t}};
        if (mc) {
            j["seed"] = o.seed;
            j["n_mc"] = o.n_mc;
            j["t_mc_um"] = t_mc;
            j["sigma_t_um"] = sigma_t;
        }
        write_text_file(o.out, j.dump(2) + "\n");
    }

    print_header(cmdline);
    if (mc) print_seed(o.seed);
    kv("t_um", t);
    if (mc) {
        kv("t_mc_um", t_mc);
        kv("sigma_t_um", sigma_t);
        kvi("n_mc", o.n_mc);
    }
}

// ------------------------------------------------------------------
// calibrate

struct CalibrateOpts {
    std::string samples, out;
    std::string order = "linear";
};

void run_calibrate(const CalibrateOpts& o, const std::string& cmdline) {
    auto t = read_table(o.samples);
    const auto w = numeric_column(t.get(), need_column(t.get(), "w_um", o.samples));
    const auto r = numeric_column(t.get(), need_column(t.get(), "r_um", o.samples));
    const auto th = numeric_column(t.get(), need_column(t.get(), "t_um", o.samples));
    const auto lam = numeric_column(t.get(), need_column(t.get(), "lambda_nm", o.samples));

    const int order =
        o.order == "quadratic" ? QMCMET_SURROGATE_QUADRATIC : QMCMET_SURROGATE_LINEAR;
    qmcmet_surrogate* raw = nullptr;
    check(qmcmet_surrogate_fit(w.data(), r.data(), th.data(), lam.data(), w.size(), order, &raw));
    SurrogatePtr model(raw);
    check(qmcmet_surrogate_save(model.get(), o.out.c_str()));

    double ref[4] = {0, 0, 0, 0};
    double lin[3] = {0, 0, 0};
    double validity[6] = {0, 0, 0, 0, 0, 0};
    check(qmcmet_surrogate_info(model.get(), ref, lin, nullptr, validity));

    print_header(cmdline);
    kvi("n_samples", static_cast<long long>(w.size()));
    std::cout << "order = " << o.order << "\n";
    kv("w0_um", ref[0]);
    kv("r0_um", ref[1]);
    kv("t0_um", ref[2]);
    kv("lambda0_nm", ref[3]);
    kv("c_w_nm_per_um", lin[0]);
    kv("c_r_nm_per_um", lin[1]);
    kv("c_t_nm_per_um", lin[2]);
    kv("w_lo_um", validity[0]);
    kv("w_hi_um", validity[1]);
    kv("r_lo_um", validity[2]);
    kv("r_hi_um", validity[3]);
    kv("t_lo_um", validity[4]);
    kv("t_hi_um", validity[5]);
}

// ------------------------------------------------------------------
// invert-mc

struct McOpts {
    std::string job, model, lambda_file, out, samples_out, plot;
    double w_mean_um = std::numeric_limits<double>::quiet_NaN();
    double w_std_um = std::numeric_limits<double>::quiet_NaN();
    double r_mean_um = std::numeric_limits<double>::quiet_NaN();
    double r_std_um = std::numeric_limits<double>::quiet_NaN();
    double lambda_mean_nm = std::numeric_limits<double>::quiet_NaN();
    double lambda_std_nm = std::numeric_limits<double>::quiet_NaN();
    double bracket_lo_um = std::numeric_limits<double>::quiet_NaN();
    double bracket_hi_um = std::numeric_limits<double>::quiet_NaN();
    int n_mc = 10000;
    uint64_t seed = 0;
    int bins = 0;
};

double job_number(const nlohmann::json& v, const char* what) {
    if (!v.is_number()) fail(2, std::string("job file: ") + what + " must be a number");
    return v.get<double>();
}

void run_invert_mc(McOpts o, const CLI::App* sub, const std::string& cmdline) {
    bool seed_given = sub->count("--seed") > 0;
    std::vector<double> lambda_samples;
    bool lambda_from_job_array = false;

    if (!o.job.empty()) {
        std::ifstream f(o.job);
        if (!f) fail(2, "cannot open job file " + o.job);
        nlohmann::json j;
        try {
            f >> j;
        } catch (const std::exception& e) {
            fail(2, "job file " + o.job + ": " + one_line(e.what()));
        }
        if (!j.is_object()) fail(2, "job file " + o.job + ": top level must be an object");

        if (j.contains("model") && sub->count("--model") == 0) {
            if (!j["model"].is_string()) fail(2, "job file: model must be a path string");
            o.model = j["model"].get<std::string>();
        }
        for (const auto& [key, mean_dst, std_dst, mean_flag, std_flag] :
             {std::tuple{"w_um", &o.w_mean_um, &o.w_std_um, "--w-mean", "--w-std"},
              std::tuple{"r_um", &o.r_mean_um, &o.r_std_um, "--r-mean", "--r-std"}}) {
            if (!j.contains(key)) continue;
            const auto& g = j[key];
            if (!g.is_object()) fail(2, std::string("job file: ") + key +
                                            " must be an object with mean and std");
            if (g.contains("mean") && sub->count(mean_flag) == 0) {
                *mean_dst = job_number(g["mean"], key);
            }
            if (g.contains("std") && sub->count(std_flag) == 0) {
                *std_dst = job_number(g["std"], key);
            }
        }
        if (j.contains("lambda_nm") && sub->count("--lambda-file") == 0 &&
            sub->count("--lambda-mean") == 0) {
            const auto& lj = j["lambda_nm"];
            if (lj.is_array()) {
                for (const auto& v : lj) lambda_samples.push_back(job_number(v, "lambda_nm[]"));
                lambda_from_job_array = true;
            } else if (lj.is_object() && lj.contains("file")) {
                if (!lj["file"].is_string()) fail(2, "job file: lambda_nm.file must be a string");
                o.lambda_file = lj["file"].get<std::string>();
            } else if (lj.is_object()) {
                if (lj.contains("mean")) o.lambda_mean_nm = job_number(lj["mean"], "lambda_nm.mean");
                if (lj.contains("std")) o.lambda_std_nm = job_number(lj["std"], "lambda_nm.std");
            } else {
                fail(2, "job file: lambda_nm must be an object or a sample array");
            }
        }
        if (j.contains("n_mc") && sub->count("--n-mc") == 0) {
            o.n_mc = static_cast<int>(job_number(j["n_mc"], "n_mc"));
        }
        if (j.contains("seed") && !seed_given) {
            if (!j["seed"].is_number_unsigned()) {
                fail(2, "job file: seed must be a non-negative integer");
            }
            o.seed = j["seed"].get<uint64_t>();
            seed_given = true;
        }
        if (j.contains("bracket_um")) {
            const auto& b = j["bracket_um"];
            if (!b.is_array() || b.size() != 2) {
                fail(2, "job file: bracket_um must be [lo, hi]");
            }
            if (sub->count("--bracket-lo") == 0) o.bracket_lo_um = job_number(b[0], "bracket_um");
            if (sub->count("--bracket-hi") == 0) o.bracket_hi_um = job_number(b[1], "bracket_um");
        }
    }

    if (!seed_given) fail(2, "a seed is required: pass --seed or set \"seed\" in the job file");
    if (!std::isfinite(o.w_mean_um) || !std::isfinite(o.w_std_um) ||
        !std::isfinite(o.r_mean_um) || !std::isfinite(o.r_std_um)) {
        fail(2, "w and r need mean and std (--w-mean/--w-std/--r-mean/--r-std or job file)");
    }

    if (!o.lambda_file.empty()) {
        auto t = read_table(o.lambda_file);
        size_t col = 0;
        if (!try_column(t.get(), "lambda_nm", &col) &&
            !try_column(t.get(), "wavelength_nm", &col)) {
            fail(2, o.lambda_file + ": need column lambda_nm or wavelength_nm");
        }
        lambda_samples = numeric_column(t.get(), col);
        lambda_from_job_array = false;
    }
    const bool empirical = !lambda_samples.empty();
    if (!empirical &&
        (!std::isfinite(o.lambda_mean_nm) || !std::isfinite(o.lambda_std_nm))) {
        fail(2,
             "a wavelength source is required: --lambda-mean/--lambda-std, --lambda-file, or a "
             "job-file lambda_nm entry");
    }

    SurrogatePtr model;
    {
        qmcmet_surrogate* raw = nullptr;
        if (o.model.empty()) {
            check(qmcmet_surrogate_default(&raw));
        } else {
            check(qmcmet_surrogate_load(o.model.c_str(), &raw));
        }
        model.reset(raw);
    }
    double validity[6] = {0, 0, 0, 0, 0, 0};
    check(qmcmet_surrogate_info(model.get(), nullptr, nullptr, nullptr, validity));
    if (!std::isfinite(o.bracket_lo_um)) o.bracket_lo_um = validity[4];
    if (!std::isfinite(o.bracket_hi_um)) o.bracket_hi_um = validity[5];

    McResultPtr result;
    {
        qmcmet_mc_result* raw = nullptr;
        if (empirical) {
            check(qmcmet_invert_mc_empirical(model.get(), o.w_mean_um, o.w_std_um, o.r_mean_um,
                                             o.r_std_um, lambda_samples.data(),
                                             lambda_samples.size(), o.n_mc, o.seed,
                                             o.bracket_lo_um, o.bracket_hi_um, &raw));
        } else {
            check(qmcmet_invert_mc_gaussian(model.get(), o.w_mean_um, o.w_std_um, o.r_mean_um,
                                            o.r_std_um, o.lambda_mean_nm, o.lambda_std_nm, o.n_mc,
                                            o.seed, o.bracket_lo_um, o.bracket_hi_um, &raw));
        }
        result.reset(raw);
    }
    double mean = 0.0, std = 0.0;
    int n_failed = 0;
    size_t n_samples = 0;
    check(qmcmet_mc_result_stats(result.get(), &mean, &std, &n_failed, &n_samples, nullptr));
    std::vector<double> samples(n_samples);
    check(qmcmet_mc_result_samples(result.get(), samples.data()));

    ordered_json lambda_desc;
    if (empirical) {
        lambda_desc = {{"kind", "empirical"}, {"n", lambda_samples.size()}};
        if (lambda_from_job_array) lambda_desc["source"] = "job";
        if (!o.lambda_file.empty()) lambda_desc["source"] = o.lambda_file;
    } else {
        lambda_desc = {{"kind", "gaussian"},
                       {"mean_nm", o.lambda_mean_nm},
                       {"std_nm", o.lambda_std_nm}};
    }
    ordered_json summary{{"command", cmdline},
                         {"seed", o.seed},
                         {"n_mc", o.n_mc},
                         {"n_samples", n_samples},
                         {"n_failed", n_failed},
                         {"t_mean_um", mean},
                         {"t_std_um", std},
                         {"bracket_um", {o.bracket_lo_um, o.bracket_hi_um}},
                         {"w_um", {{"mean", o.w_mean_um}, {"std", o.w_std_um}}},
                         {"r_um", {{"mean", o.r_mean_um}, {"std", o.r_std_um}}},
                         {"lambda_nm", lambda_desc},
                         {"model", qmcmet_surrogate_provenance(model.get())}};
    if (!o.out.empty()) write_text_file(o.out, summary.dump(2) + "\n");

    if (!o.samples_out.empty()) {
        std::ostringstream csv;
        csv << "t_um\n";
        for (double v : samples) csv << fmt_g(v) << "\n";
        write_text_file(o.samples_out, csv.str());
    }

    if (!o.plot.empty()) {
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Histogram;
        pd.title = "inverted thickness";
        pd.x_label = "t (um)";
        pd.y_label = "count";
        pd.x = samples;
        pd.bins = o.bins;
        pd.provenance = seeded_provenance(cmdline, o.seed);
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    print_seed(o.seed);
    std::cout << summary.dump(2) << "\n";
}

// ------------------------------------------------------------------
// spatial and variogram

struct FieldData {
    std::vector<double> x, y, z;
};

FieldData load_field(const std::string& path, double target_nm, bool target_given) {
    auto t = read_table(path);
    FieldData f;
    f.x = numeric_column(t.get(), need_column(t.get(), "x_um", path));
    f.y = numeric_column(t.get(), need_column(t.get(), "y_um", path));
    size_t col = 0;
    if (try_column(t.get(), "z_nm", &col)) {
        f.z = numeric_column(t.get(), col);
    } else if (try_column(t.get(), "lambda_nm", &col)) {
        if (!target_given) {
            fail(2, path + ": column lambda_nm needs --target-nm to form deviations");
        }
        f.z = numeric_column(t.get(), col);
        for (double& v : f.z) v -= target_nm;
    } else {
        fail(2, path + ": need column z_nm or lambda_nm");
    }
    return f;
}

struct SpatialOpts {
    std::string in, out, summary;
    std::string method = "quadratic";
    double target_nm = 0.0;
    bool target_given = false;
    int k = 0;
};

void run_spatial(const SpatialOpts& o, const std::string& cmdline) {
    const FieldData f = load_field(o.in, o.target_nm, o.target_given);
    const size_t n = f.x.size();

    std::vector<double> fitted(n, 0.0);
    double beta[6] = {0, 0, 0, 0, 0, 0};
    std::vector<uint8_t> degenerate;
    int k_used = 0;
    if (o.method == "quadratic") {
        check(qmcmet_fit_quadratic_surface(f.x.data(), f.y.data(), f.z.data(), n, beta));
        for (size_t i = 0; i < n; ++i) {
            check(qmcmet_quadratic_eval(beta, f.x[i], f.y[i], &fitted[i]));
        }
    } else {
        degenerate.assign(n, 0);
        check(qmcmet_loess(f.x.data(), f.y.data(), f.z.data(), n, o.k, fitted.data(),
                           degenerate.data()));
        k_used = o.k;
        if (k_used <= 0) check(qmcmet_default_loess_k(n, &k_used));
    }

    double before = 0.0, after = 0.0, reduction = 0.0;
    check(qmcmet_residual_summary(f.z.data(), fitted.data(), n, &before, &after, &reduction));

    if (!o.out.empty()) {
        std::ostringstream csv;
        csv << "x_um,y_um,z_nm,fit_nm,residual_nm\n";
        for (size_t i = 0; i < n; ++i) {
            csv << fmt_g(f.x[i]) << ',' << fmt_g(f.y[i]) << ',' << fmt_g(f.z[i]) << ','
                << fmt_g(fitted[i]) << ',' << fmt_g(f.z[i] - fitted[i]) << "\n";
        }
        write_text_file(o.out, csv.str());
    }

    long long n_degenerate = 0;
    for (uint8_t d : degenerate) n_degenerate += d;

    if (!o.summary.empty()) {
        ordered_json j{{"command", cmdline},
                       {"method", o.method},
                       {"n_points", n},
                       {"std_before_nm", before},
                       {"std_after_nm", after},
                       {"reduction_pct", reduction}};
        if (o.method == "quadratic") {
            j["beta"] = {beta[0], beta[1], beta[2], beta[3], beta[4], beta[5]};
        } else {
            j["k"] = k_used;
            j["n_degenerate"] = n_degenerate;
        }
        write_text_file(o.summary, j.dump(2) + "\n");
    }

    print_header(cmdline);
    std::cout << "method = " << o.method << "\n";
    kvi("n_points", static_cast<long long>(n));
    if (o.method == "quadratic") {
        kv("b0", beta[0]);
        kv("b1_x", beta[1]);
        kv("b2_y", beta[2]);
        kv("b3_xx", beta[3]);
        kv("b4_xy", beta[4]);
        kv("b5_yy", beta[5]);
    } else {
        kvi("k", k_used);
        kvi("n_degenerate", n_degenerate);
    }
    kv("std_before_nm", before);
    kv("std_after_nm", after);
    kv("reduction_pct", reduction);
}

struct VariogramOpts {
    std::string in, out, plot;
    std::string axis = "x";
    std::string detrend = "none";
    double bin_width_um = 0.0;
    double max_lag_um = 0.0;
    double target_nm = 0.0;
    bool target_given = false;
    int k = 0;
};

void run_variogram(const VariogramOpts& o, const std::string& cmdline) {
    FieldData f = load_field(o.in, o.target_nm, o.target_given);
    const size_t n = f.x.size();

    if (o.detrend == "quadratic") {
        double beta[6] = {0, 0, 0, 0, 0, 0};
        check(qmcmet_fit_quadratic_surface(f.x.data(), f.y.data(), f.z.data(), n, beta));
        for (size_t i = 0; i < n; ++i) {
            double fit = 0.0;
            check(qmcmet_quadratic_eval(beta, f.x[i], f.y[i], &fit));
            f.z[i] -= fit;
        }
    } else if (o.detrend == "loess") {
        std::vector<double> fitted(n, 0.0);
        check(qmcmet_loess(f.x.data(), f.y.data(), f.z.data(), n, o.k, fitted.data(), nullptr));
        for (size_t i = 0; i < n; ++i) f.z[i] -= fitted[i];
    }

    const int axis = o.axis == "y" ? QMCMET_AXIS_Y : QMCMET_AXIS_X;
    double nugget = 0.0;
    qmcmet_table* raw = nullptr;
    check(qmcmet_semivariogram(f.x.data(), f.y.data(), f.z.data(), n, axis, o.bin_width_um,
                               o.max_lag_um, &nugget, &raw));
    TablePtr bins(raw);
    check(qmcmet_table_write_csv(bins.get(), o.out.c_str()));

    const auto lag = numeric_column(bins.get(), 0);
    const auto gamma = numeric_column(bins.get(), 1);
    const auto pairs = numeric_column(bins.get(), 2);
    double total_pairs = 0.0;
    for (double p : pairs) total_pairs += p;

    if (!o.plot.empty()) {
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Variogram;
        pd.title = "semivariogram (" + o.axis + " axis)";
        pd.x_label = "lag (um)";
        pd.y_label = "gamma (nm^2)";
        pd.x = lag;
        pd.y = gamma;
        pd.provenance = cmdline;
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    std::cout << "detrend = " << o.detrend << "\n";
    kvi("n_points", static_cast<long long>(n));
    kvi("n_bins", static_cast<long long>(lag.size()));
    kvi("n_pairs", static_cast<long long>(total_pairs));
    kv("nugget_nm2", nugget);
}

// ------------------------------------------------------------------
// yield

struct YieldOpts {
    double e0 = 0.0;
    double eu = 0.0;
    int nc = 1;
    int b = 1;
    int n = 0;
    double p = 0.0;
    int r = 0;
    bool effort_given = false;
    bool replacement_given = false;
    std::string out;
};

void run_yield(const YieldOpts& o, const std::string& cmdline) {
    if (!o.effort_given && !o.replacement_given) {
        fail(2, "provide --e0/--eu (integration effort) and/or --n/--p (replacement yield)");
    }
    double total = 0.0, per_chiplet = 0.0, n_good = 0.0, residual = 0.0;
    if (o.effort_given) check(qmcmet_integration_effort(o.e0, o.eu, o.nc, o.b, &total, &per_chiplet));
    if (o.replacement_given) check(qmcmet_expected_functional(o.n, o.p, o.r, &n_good, &residual));

    if (!o.out.empty()) {
        ordered_json j{{"command", cmdline}};
        if (o.effort_given) {
            j["integration_effort"] = {{"e0", o.e0},         {"eu", o.eu},
                                       {"nc", o.nc},         {"b", o.b},
                                       {"total", total},     {"per_chiplet", per_chiplet}};
        }
        if (o.replacement_given) {
            j["replacement_yield"] = {{"n", o.n},
                                      {"p", o.p},
                                      {"r", o.r},
                                      {"expected_functional", n_good},
                                      {"residual_defect", residual}};
        }
        write_text_file(o.out, j.dump(2) + "\n");
    }

    print_header(cmdline);
    if (o.effort_given) {
        kv("total_effort", total);
        kv("per_chiplet_effort", per_chiplet);
    }
    if (o.replacement_given) {
        kv("expected_functional", n_good);
        kv("residual_defect", residual);
    }
}

// ------------------------------------------------------------------
// report

struct ReportOpts {
    CubeIn in;
    Grid grid;
    Detect det;
    std::string out, plot, model;
    int bins = 0;
    double w_mean_um = std::numeric_limits<double>::quiet_NaN();
    double w_std_um = std::numeric_limits<double>::quiet_NaN();
    double r_mean_um = std::numeric_limits<double>::quiet_NaN();
    double r_std_um = std::numeric_limits<double>::quiet_NaN();
    double bracket_lo_um = std::numeric_limits<double>::quiet_NaN();
    double bracket_hi_um = std::numeric_limits<double>::quiet_NaN();
    int n_mc = 10000;
    uint64_t seed = 0;
    bool invert_given = false;
    bool seed_given = false;
    double p = 0.0;
    int r = 0;
    bool replacement_given = false;
    double e0 = 0.0;
    double eu = 0.0;
    bool effort_given = false;
};

void run_report(const ReportOpts& o, const std::string& cmdline) {
    if (o.invert_given && !o.seed_given) {
        fail(2, "--seed is required when thickness inversion flags are set");
    }

    auto cube = load_cube(o.in);
    auto map = build_map(cube.get(), o.grid, o.det);
    qmcmet_table* rraw = nullptr;
    check(qmcmet_cavity_map_records(map.get(), &rraw));
    TablePtr rec(rraw);
    qmcmet_table* sraw = nullptr;
    check(qmcmet_cavity_map_summary(map.get(), &sraw));
    TablePtr summary(sraw);

    const auto lam = numeric_column(rec.get(), need_column(rec.get(), "lambda_nm", "records"));
    const auto q = numeric_column(rec.get(), need_column(rec.get(), "q_factor", "records"));
    const auto fill =
        numeric_column(summary.get(), need_column(summary.get(), "fill_fraction", "summary"));
    const MeanStd lam_s = mean_std(lam);
    const MeanStd q_s = mean_std(q);
    const MeanStd fill_s = mean_std(fill);

    ordered_json rep{{"command", cmdline}};
    if (o.invert_given) rep["seed"] = o.seed;
    rep["grid"] = {{"rows", o.grid.rows}, {"cols", o.grid.cols}, {"nanobeams", o.grid.nanobeams}};
    rep["detection"] = {{"min_prominence", o.det.min_prominence},
                        {"fit_halfwidth_nm", o.det.fit_halfwidth_nm},
                        {"merge_tol_nm", o.det.merge_tol_nm},
                        {"n_records", lam.size()}};
    ordered_json lam_j{{"n", lam.size()}, {"mean", lam_s.mean}, {"std", lam_s.std}};
    if (!lam.empty()) {
        const auto [lo, hi] = std::minmax_element(lam.begin(), lam.end());
        lam_j["min"] = *lo;
        lam_j["max"] = *hi;
        double n_idx = 0.0;
        if (qmcmet_sellmeier_n(lam_s.mean / 1000.0, &n_idx) == QMCMET_OK) {
            lam_j["refractive_index_at_mean"] = n_idx;
        }
    }
    rep["lambda_nm"] = lam_j;
    rep["q_factor"] = {{"mean", q_s.mean}, {"std", q_s.std}};
    rep["mean_fill_fraction"] = fill_s.mean;

    ordered_json chiplets = ordered_json::array();
    const size_t rows = qmcmet_table_rows(summary.get());
    for (size_t i = 0; i < rows; ++i) {
        int64_t cr = 0, cc = 0, nc = 0;
        check(qmcmet_table_int_at(summary.get(), i, 0, &cr));
        check(qmcmet_table_int_at(summary.get(), i, 1, &cc));
        check(qmcmet_table_int_at(summary.get(), i, 2, &nc));
        double ml = 0, sl = 0, mq = 0, sq = 0, ff = 0;
        check(qmcmet_table_numeric_at(summary.get(), i, 3, &ml));
        check(qmcmet_table_numeric_at(summary.get(), i, 4, &sl));
        check(qmcmet_table_numeric_at(summary.get(), i, 5, &mq));
        check(qmcmet_table_numeric_at(summary.get(), i, 6, &sq));
        check(qmcmet_table_numeric_at(summary.get(), i, 7, &ff));
        chiplets.push_back({{"row", cr},
                            {"col", cc},
                            {"n_cavities", nc},
                            {"mean_lambda_nm", ml},
                            {"std_lambda_nm", sl},
                            {"mean_q", mq},
                            {"std_q", sq},
                            {"fill_fraction", ff}});
    }
    rep["chiplets"] = chiplets;

    double t_mean = std::numeric_limits<double>::quiet_NaN();
    if (o.invert_given) {
        if (lam.empty()) fail(3, "no detected cavities to invert");
        SurrogatePtr model;
        {
            qmcmet_surrogate* mraw = nullptr;
            if (o.model.empty()) {
                check(qmcmet_surrogate_default(&mraw));
            } else {
                check(qmcmet_surrogate_load(o.model.c_str(), &mraw));
            }
            model.reset(mraw);
        }
        double validity[6] = {0, 0, 0, 0, 0, 0};
        check(qmcmet_surrogate_info(model.get(), nullptr, nullptr, nullptr, validity));
        const double lo = std::isfinite(o.bracket_lo_um) ? o.bracket_lo_um : validity[4];
        const double hi = std::isfinite(o.bracket_hi_um) ? o.bracket_hi_um : validity[5];
        qmcmet_mc_result* raw = nullptr;
        check(qmcmet_invert_mc_empirical(model.get(), o.w_mean_um, o.w_std_um, o.r_mean_um,
                                         o.r_std_um, lam.data(), lam.size(), o.n_mc, o.seed, lo,
                                         hi, &raw));
        McResultPtr result(raw);
        double t_std = 0.0;
        int n_failed = 0;
        size_t n_samples = 0;
        check(qmcmet_mc_result_stats(result.get(), &t_mean, &t_std, &n_failed, &n_samples,
                                     nullptr));
        rep["thickness_inversion"] = {{"model", qmcmet_surrogate_provenance(model.get())},
                                      {"n_mc", o.n_mc},
                                      {"n_samples", n_samples},
                                      {"n_failed", n_failed},
                                      {"t_mean_um", t_mean},
                                      {"t_std_um", t_std},
                                      {"bracket_um", {lo, hi}},
                                      {"w_um", {{"mean", o.w_mean_um}, {"std", o.w_std_um}}},
                                      {"r_um", {{"mean", o.r_mean_um}, {"std", o.r_std_um}}}};
    }

    const int total_sites = o.grid.rows * o.grid.cols * o.grid.nanobeams;
    if (o.replacement_given) {
        double n_good = 0.0, residual = 0.0;
        check(qmcmet_expected_functional(total_sites, o.p, o.r, &n_good, &residual));
        rep["replacement_yield"] = {{"n", total_sites},
                                    {"p", o.p},
                                    {"r", o.r},
                                    {"expected_functional", n_good},
                                    {"residual_defect", residual}};
    }
    if (o.effort_given) {
        double total = 0.0, per_chiplet = 0.0;
        check(qmcmet_integration_effort(o.e0, o.eu, o.grid.nanobeams,
                                        o.grid.rows * o.grid.cols, &total, &per_chiplet));
        rep["integration_effort"] = {{"e0", o.e0},
                                     {"eu", o.eu},
                                     {"nc", o.grid.nanobeams},
                                     {"b", o.grid.rows * o.grid.cols},
                                     {"total", total},
                                     {"per_chiplet", per_chiplet}};
    }

    write_text_file(o.out, rep.dump(2) + "\n");

    if (!o.plot.empty()) {
        cli::PlotData pd;
        pd.kind = cli::PlotKind::Histogram;
        pd.title = "resonance wavelengths";
        pd.x_label = "lambda0 (nm)";
        pd.y_label = "count";
        pd.x = lam;
        pd.bins = o.bins;
        pd.provenance = o.invert_given ? seeded_provenance(cmdline, o.seed) : cmdline;
        cli::emit_plot(pd, o.plot);
    }

    print_header(cmdline);
    if (o.invert_given) print_seed(o.seed);
    kvi("n_records", static_cast<long long>(lam.size()));
    kv("mean_lambda_nm", lam_s.mean);
    kv("std_lambda_nm", lam_s.std);
    kv("mean_fill_fraction", fill_s.mean);
    if (o.invert_given) kv("t_mean_um", t_mean);
}

}  // namespace

int main(int argc, char** argv) {
    std::ios::sync_with_stdio(false);
    const std::string cmdline = join_argv(argc, argv);

    CLI::App app{"quantum-microchiplet metrology: spectra, micrographs, and variation analysis"};
    app.name("qmcmet");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(qmcmet_version()));
    app.set_config("--config", "",
                   "TOML-style config file with one [section] per subcommand; keys mirror flag "
                   "names, command-line flags override file values");
    const std::string selected = selected_subcommand(argc, argv);
    auto scoped = std::make_shared<ScopedConfig>();
    scoped->scope = selected;
    app.config_formatter(scoped);

    // The section for the selected subcommand still triggers it a second
    // time on top of argv; run each body at most once per process.
    bool dispatched = false;
    auto once = [&dispatched](std::function<void()> fn) {
        return [&dispatched, fn = std::move(fn)] {
            if (dispatched) return;
            dispatched = true;
            fn();
        };
    };

    PeaksOpts peaks_o;
    auto* peaks = app.add_subcommand("peaks", "find and optionally refine spectral peaks");
    peaks->add_option("--in", peaks_o.in, "input spectrum CSV (columns wavelength_nm, intensity)")
        ->required();
    peaks->add_option("--min-prominence", peaks_o.min_prominence,
                      "peak prominence floor (intensity units)")
        ->capture_default_str();
    peaks->add_option("--fwhm-lo", peaks_o.fwhm_lo_nm, "minimum peak width (nm); 0 disables")
        ->capture_default_str();
    peaks->add_option("--fwhm-hi", peaks_o.fwhm_hi_nm, "maximum peak width (nm); 0 = unbounded")
        ->capture_default_str();
    peaks->add_option("--max-peaks", peaks_o.max_peaks,
                      "keep at most this many peaks (count); 0 = unlimited")
        ->capture_default_str();
    peaks->add_option("--fit", peaks_o.fit, "refine each peak: none | lorentzian | fano")
        ->check(CLI::IsMember({"none", "lorentzian", "fano"}))
        ->capture_default_str();
    peaks
        ->add_option("--fit-halfwidth", peaks_o.fit_halfwidth_nm,
                     "fit window half width around each peak (nm)")
        ->capture_default_str();
    peaks->add_option("--out", peaks_o.out, "output peak table CSV")->required();
    peaks->add_option("--plot", peaks_o.plot, "optional spectrum SVG with peak markers");
    peaks->callback([&] { run_peaks(peaks_o, cmdline); });

    MapOpts map_o;
    auto* mapc = app.add_subcommand("map", "per-pixel cavity detection over a hyperspectral cube");
    add_cube_opts(mapc, map_o.in);
    add_grid_opts(mapc, map_o.grid);
    add_detect_opts(mapc, map_o.det);
    mapc->add_option("--out", map_o.out, "output cavity record CSV")->required();
    mapc->add_option("--plot", map_o.plot, "optional cavity map SVG");
    mapc->callback([&] { run_map(map_o, cmdline); });

    SummarizeOpts sum_o;
    auto* sum = app.add_subcommand("summarize", "per-chiplet statistics of a cavity map");
    add_cube_opts(sum, sum_o.in);
    add_grid_opts(sum, sum_o.grid);
    add_detect_opts(sum, sum_o.det);
    sum->add_option("--out", sum_o.out, "output per-chiplet summary CSV")->required();
    sum->add_option("--plot", sum_o.plot, "optional wavelength histogram SVG");
    sum->add_option("--bins", sum_o.bins, "histogram bin count; 0 = automatic")
        ->capture_default_str();
    sum->callback([&] { run_summarize(sum_o, cmdline); });

    TuneOpts tune_o;
    auto* tune = app.add_subcommand("tune", "track one resonance across an ordered frame sequence");
    tune->add_option("--frames", tune_o.frames, "spectrum CSV per frame, in frame order")
        ->required()
        ->expected(-1);
    tune->add_option("--seed-lo", tune_o.seed_lo_nm, "seed window lower edge on frame 0 (nm)")
        ->required();
    tune->add_option("--seed-hi", tune_o.seed_hi_nm, "seed window upper edge on frame 0 (nm)")
        ->required();
    tune->add_option("--min-prominence", tune_o.min_prominence,
                     "peak prominence floor (intensity units)")
        ->capture_default_str();
    tune->add_option("--search-radius", tune_o.search_radius_nm,
                     "frame-to-frame search radius (nm)")
        ->capture_default_str();
    tune->add_option("--fit-halfwidth", tune_o.fit_halfwidth_nm, "line fit half width (nm)")
        ->capture_default_str();
    tune->add_option("--max-gap", tune_o.max_gap, "max consecutive missing frames (count)")
        ->capture_default_str();
    tune->add_option("--out", tune_o.out, "output trajectory CSV")->required();
    tune->add_option("--plot", tune_o.plot, "optional trajectory SVG");
    tune->callback([&] { run_tune(tune_o, cmdline); });

    EnhanceOpts enh_o;
    auto* enh = app.add_subcommand("enhance",
                                   "on/off-resonance intensity enhancement at an emission line");
    enh->add_option("--on", enh_o.on, "on-resonance spectrum CSV")->required();
    enh->add_option("--off", enh_o.off, "off-resonance spectrum CSV")->required();
    enh->add_option("--line", enh_o.line_nm, "emission line center (nm)")->required();
    enh->add_option("--half-width", enh_o.half_width_nm, "integration half width (nm)")
        ->required();
    enh->add_option("--out", enh_o.out, "optional JSON result path");
    enh->callback([&] { run_enhance(enh_o, cmdline); });

    SemTopOpts top_o;
    auto* top = app.add_subcommand("sem-top",
                                   "top-view micrograph metrology: beam widths and hole radii");
    top->add_option("--in", top_o.in, "grayscale micrograph (PGM or 8-bit PNG)")->required();
    top->add_option("--scale", top_o.scale_nm_per_px,
                    "pixel scale (nm/px); 0 = use the image sidecar");
    top->add_option("--r-lo", top_o.r_lo_nm, "hole radius search floor (nm); 0 = default 20");
    top->add_option("--r-hi", top_o.r_hi_nm, "hole radius search ceiling (nm); 0 = default 80");
    top->add_option("--max-offset", top_o.max_offset_nm,
                    "max hole center offset from the beam midline (nm); 0 = default 60");
    top->add_option("--min-spacing", top_o.min_spacing_nm,
                    "min spacing between holes (nm); 0 = default 80");
    top->add_option("--holes", top_o.holes_csv, "optional hole table CSV");
    top->add_option("--out", top_o.out, "optional JSON report path");
    top->callback([&] { run_sem_top(top_o, cmdline); });

    SemTiltOpts tilt_o;
    auto* tilt = app.add_subcommand("sem-tilt",
                                    "tilted-view micrograph metrology: ridge geometry and "
                                    "optional thickness");
    tilt->add_option("--in", tilt_o.in, "grayscale micrograph (PGM or 8-bit PNG)")->required();
    tilt->add_option("--scale", tilt_o.scale_nm_per_px,
                     "pixel scale (nm/px); 0 = use the image sidecar if present");
    auto* tilt_wt = tilt->add_option("--wt", tilt_o.wt_um, "top width from the top view (um)");
    auto* tilt_wb = tilt->add_option("--wb", tilt_o.wb_um, "bottom width from the top view (um)");
    tilt_wt->needs(tilt_wb);
    tilt_wb->needs(tilt_wt);
    tilt->add_option("--theta", tilt_o.theta_deg,
                     "stage tilt (deg); default = image sidecar tilt");
    tilt->add_option("--out", tilt_o.out, "optional JSON report path");
    tilt->callback([&] {
        tilt_o.wt_given = tilt->count("--wt") > 0;
        tilt_o.theta_given = tilt->count("--theta") > 0;
        run_sem_tilt(tilt_o, cmdline);
    });

    ThicknessOpts th_o;
    auto* th = app.add_subcommand("thickness",
                                  "membrane thickness from projected tilted-view geometry");
    th->add_option("--wt", th_o.wt_um, "top width (um)")->required();
    th->add_option("--wb", th_o.wb_um, "bottom width (um)")->required();
    th->add_option("--dt", th_o.dt, "far-top to near-top projected separation (px)")->required();
    th->add_option("--dnb", th_o.dnb, "near-top to near-bottom projected separation (px)")
        ->required();
    th->add_option("--theta", th_o.theta_deg, "stage tilt (deg), in (0, 90)")->required();
    th->add_option("--psi", th_o.psi_deg, "in-plane rotation (deg), |psi| < 90")
        ->capture_default_str();
    th->add_option("--sigma-wt", th_o.sigma_wt_um, "top width noise, 1-sigma (um)")
        ->capture_default_str();
    th->add_option("--sigma-wb", th_o.sigma_wb_um, "bottom width noise, 1-sigma (um)")
        ->capture_default_str();
    th->add_option("--sigma-dt", th_o.sigma_dt_px, "d_t noise, 1-sigma (px)")
        ->capture_default_str();
    th->add_option("--sigma-dnb", th_o.sigma_dnb_px, "d_nb noise, 1-sigma (px)")
        ->capture_default_str();
    th->add_option("--n-mc", th_o.n_mc, "Monte Carlo draws when sigmas are set (count)")
        ->capture_default_str();
    th->add_option("--seed", th_o.seed, "random seed (required when any sigma is set)");
    th->add_option("--out", th_o.out, "optional JSON result path");
    th->callback([&] {
        th_o.seed_given = th->count("--seed") > 0;
        run_thickness(th_o, cmdline);
    });

    CalibrateOpts cal_o;
    auto* cal = app.add_subcommand("calibrate",
                                   "fit a resonance surrogate from (W, r, t, lambda) samples");
    cal->add_option("--samples", cal_o.samples,
                    "sample CSV (columns w_um, r_um, t_um, lambda_nm)")
        ->required();
    cal->add_option("--order", cal_o.order, "model order: linear | quadratic")
        ->check(CLI::IsMember({"linear", "quadratic"}))
        ->capture_default_str();
    cal->add_option("--out", cal_o.out, "output model JSON")->required();
    cal->callback([&] { run_calibrate(cal_o, cmdline); });

    McOpts mc_o;
    auto* mc = app.add_subcommand("invert-mc",
                                  "Monte Carlo thickness inversion through a resonance surrogate");
    mc->add_option("--job", mc_o.job, "JSON job file; flags override its fields");
    mc->add_option("--model", mc_o.model, "surrogate model JSON; default = built-in model");
    mc->add_option("--w-mean", mc_o.w_mean_um, "beam width mean (um)");
    mc->add_option("--w-std", mc_o.w_std_um, "beam width std (um)");
    mc->add_option("--r-mean", mc_o.r_mean_um, "hole radius mean (um)");
    mc->add_option("--r-std", mc_o.r_std_um, "hole radius std (um)");
    mc->add_option("--lambda-mean", mc_o.lambda_mean_nm, "resonance mean (nm)");
    mc->add_option("--lambda-std", mc_o.lambda_std_nm, "resonance std (nm)");
    mc->add_option("--lambda-file", mc_o.lambda_file,
                   "empirical wavelength CSV (column lambda_nm or wavelength_nm)");
    mc->add_option("--n-mc", mc_o.n_mc, "Monte Carlo draws (count)")->capture_default_str();
    mc->add_option("--seed", mc_o.seed, "random seed (required)");
    mc->add_option("--bracket-lo", mc_o.bracket_lo_um,
                   "inversion bracket lower edge (um); default = model validity");
    mc->add_option("--bracket-hi", mc_o.bracket_hi_um,
                   "inversion bracket upper edge (um); default = model validity");
    mc->add_option("--out", mc_o.out, "optional summary JSON path (also printed to stdout)");
    mc->add_option("--samples", mc_o.samples_out, "optional per-draw thickness CSV");
    mc->add_option("--plot", mc_o.plot, "optional thickness histogram SVG");
    mc->add_option("--bins", mc_o.bins, "histogram bin count; 0 = automatic")
        ->capture_default_str();
    mc->callback([&] { run_invert_mc(mc_o, mc, cmdline); });

    SpatialOpts sp_o;
    auto* sp = app.add_subcommand("spatial",
                                  "trend surface fit and residual summary of a spatial field");
    sp->add_option("--in", sp_o.in,
                   "field CSV (columns x_um, y_um and z_nm, or lambda_nm with --target-nm)")
        ->required();
    sp->add_option("--target-nm", sp_o.target_nm,
                   "target wavelength subtracted from lambda_nm (nm)");
    sp->add_option("--method", sp_o.method, "trend model: quadratic | loess")
        ->check(CLI::IsMember({"quadratic", "loess"}))
        ->capture_default_str();
    sp->add_option("--k", sp_o.k, "loess neighborhood size (points); 0 = automatic")
        ->capture_default_str();
    sp->add_option("--out", sp_o.out, "optional per-point residual CSV");
    sp->add_option("--summary", sp_o.summary, "optional summary JSON path");
    sp->callback([&] {
        sp_o.target_given = sp->count("--target-nm") > 0;
        run_spatial(sp_o, cmdline);
    });

    VariogramOpts vg_o;
    auto* vg = app.add_subcommand("variogram", "directional semivariogram of a spatial field");
    vg->add_option("--in", vg_o.in,
                   "field CSV (columns x_um, y_um and z_nm, or lambda_nm with --target-nm)")
        ->required();
    vg->add_option("--target-nm", vg_o.target_nm,
                   "target wavelength subtracted from lambda_nm (nm)");
    vg->add_option("--axis", vg_o.axis, "separation axis: x | y")
        ->check(CLI::IsMember({"x", "y"}))
        ->capture_default_str();
    vg->add_option("--bin-width", vg_o.bin_width_um, "lag bin width (um)")->required();
    vg->add_option("--max-lag", vg_o.max_lag_um, "largest separation considered (um)")
        ->required();
    vg->add_option("--detrend", vg_o.detrend,
                   "subtract a trend first: none | quadratic | loess")
        ->check(CLI::IsMember({"none", "quadratic", "loess"}))
        ->capture_default_str();
    vg->add_option("--k", vg_o.k, "loess neighborhood size for --detrend loess; 0 = automatic")
        ->capture_default_str();
    vg->add_option("--out", vg_o.out, "output bin table CSV")->required();
    vg->add_option("--plot", vg_o.plot, "optional semivariogram SVG");
    vg->callback([&] {
        vg_o.target_given = vg->count("--target-nm") > 0;
        run_variogram(vg_o, cmdline);
    });

    YieldOpts yd_o;
    auto* yd = app.add_subcommand("yield", "integration effort and replacement yield formulas");
    auto* yd_e0 = yd->add_option("--e0", yd_o.e0, "one-time integration effort (arbitrary units)");
    auto* yd_eu = yd->add_option("--eu", yd_o.eu, "per-unit integration effort (arbitrary units)");
    yd_e0->needs(yd_eu);
    yd_eu->needs(yd_e0);
    yd->add_option("--nc", yd_o.nc, "cavities per chiplet (count)")->capture_default_str();
    yd->add_option("--b", yd_o.b, "chiplets integrated (count)")->capture_default_str();
    auto* yd_n = yd->add_option("--n", yd_o.n, "total sites (count)");
    auto* yd_p = yd->add_option("--p", yd_o.p, "per-site success probability in [0, 1]");
    yd_n->needs(yd_p);
    yd_p->needs(yd_n);
    yd->add_option("--r", yd_o.r, "replacement attempts after the first (count)")
        ->capture_default_str();
    yd->add_option("--out", yd_o.out, "optional JSON result path");
    yd->callback([&] {
        yd_o.effort_given = yd->count("--e0") > 0;
        yd_o.replacement_given = yd->count("--n") > 0;
        run_yield(yd_o, cmdline);
    });

    ReportOpts rep_o;
    auto* rep = app.add_subcommand("report",
                                   "aggregate JSON report over a cube: detection, statistics, "
                                   "optional inversion and yield");
    add_cube_opts(rep, rep_o.in);
    add_grid_opts(rep, rep_o.grid);
    add_detect_opts(rep, rep_o.det);
    rep->add_option("--out", rep_o.out, "output report JSON")->required();
    rep->add_option("--plot", rep_o.plot, "optional wavelength histogram SVG");
    rep->add_option("--bins", rep_o.bins, "histogram bin count; 0 = automatic")
        ->capture_default_str();
    rep->add_option("--model", rep_o.model, "surrogate model JSON; default = built-in model");
    auto* rep_wm = rep->add_option("--w-mean", rep_o.w_mean_um, "beam width mean (um)");
    auto* rep_ws = rep->add_option("--w-std", rep_o.w_std_um, "beam width std (um)");
    auto* rep_rm = rep->add_option("--r-mean", rep_o.r_mean_um, "hole radius mean (um)");
    auto* rep_rs = rep->add_option("--r-std", rep_o.r_std_um, "hole radius std (um)");
    rep_wm->needs(rep_ws, rep_rm, rep_rs);
    rep_ws->needs(rep_wm);
    rep_rm->needs(rep_wm);
    rep_rs->needs(rep_wm);
    rep->add_option("--bracket-lo", rep_o.bracket_lo_um,
                    "inversion bracket lower edge (um); default = model validity");
    rep->add_option("--bracket-hi", rep_o.bracket_hi_um,
                    "inversion bracket upper edge (um); default = model validity");
    rep->add_option("--n-mc", rep_o.n_mc, "Monte Carlo draws (count)")->capture_default_str();
    rep->add_option("--seed", rep_o.seed, "random seed (required with inversion flags)");
    rep->add_option("--p", rep_o.p, "per-site success probability in [0, 1]");
    rep->add_option("--r", rep_o.r, "replacement attempts after the first (count)")
        ->capture_default_str();
    auto* rep_e0 = rep->add_option("--e0", rep_o.e0, "one-time integration effort");
    auto* rep_eu = rep->add_option("--eu", rep_o.eu, "per-unit integration effort");
    rep_e0->needs(rep_eu);
    rep_eu->needs(rep_e0);
    rep->callback([&] {
        rep_o.invert_given = rep->count("--w-mean") > 0;
        rep_o.seed_given = rep->count("--seed") > 0;
        rep_o.replacement_given = rep->count("--p") > 0;
        rep_o.effort_given = rep->count("--e0") > 0;
        run_report(rep_o, cmdline);
    });

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
        sub->configurable();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CliExit& e) {
        std::cerr << "error: " << one_line(e.message) << "\n";
        return e.code;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << one_line(e.what()) << "\n";
        return 3;
    }
    return 0;
}
