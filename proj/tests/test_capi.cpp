// Exercises the C binding end to end: handle lifecycles, status/thread-local
// message plumbing, and value round trips against the same oracles the C++
// suites use. Algorithm accuracy is covered by the per-module tests; here the
// concern is that nothing is lost or reordered crossing the C boundary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qmcmet.h"

#include "qmc/io.hpp"
#include "render_oracle.hpp"
#include "testutil.hpp"

namespace {

const double kPi = 3.14159265358979323846;

std::vector<double> lorentzian_trace(const std::vector<double>& axis, double center,
                                     double fwhm, double amplitude, double offset) {
    std::vector<double> out(axis.size());
    for (size_t i = 0; i < axis.size(); ++i) {
        out[i] = qmctest::lorentzian(axis[i], center, fwhm, amplitude, offset);
    }
    return out;
}

qmcmet_spectrum* make_spectrum(const std::vector<double>& axis,
                               const std::vector<double>& intensity) {
    qmcmet_spectrum* s = nullptr;
    REQUIRE(qmcmet_spectrum_from_arrays(axis.data(), intensity.data(), axis.size(), &s) ==
            QMCMET_OK);
    REQUIRE(s != nullptr);
    return s;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

} // namespace

TEST_CASE("version and initial error state") {
    const char* v = qmcmet_version();
    REQUIRE(v != nullptr);
    CHECK(std::strlen(v) >= 5);
    CHECK(qmcmet_last_status() == QMCMET_OK);
    REQUIRE(qmcmet_last_message() != nullptr);
    CHECK(std::strlen(qmcmet_last_message()) == 0);
}

TEST_CASE("thickness formula with status round trip") {
    double t = 0.0;
    REQUIRE(qmcmet_thickness(0.30, 0.30, 100.0, 43.0, 45.0, 0.0, &t) == QMCMET_OK);
    CHECK(t == 0.129);

    const int rc = qmcmet_thickness(0.30, 0.30, 100.0, 43.0, 90.0, 0.0, &t);
    CHECK(rc == QMCMET_ERR_DEGENERATE_TILT);
    CHECK(qmcmet_last_status() == QMCMET_ERR_DEGENERATE_TILT);
    CHECK(std::strlen(qmcmet_last_message()) > 0);

    CHECK(qmcmet_thickness(0.0, 0.30, 100.0, 43.0, 45.0, 0.0, &t) ==
          QMCMET_ERR_INVALID_ARGUMENT);
    CHECK(qmcmet_thickness(0.28, 0.33, 100.0, 5.0, 45.0, 0.0, &t) ==
          QMCMET_ERR_INVALID_GEOMETRY);
    CHECK(qmcmet_thickness(0.30, 0.30, 100.0, 43.0, 45.0, 0.0, nullptr) ==
          QMCMET_ERR_INVALID_ARGUMENT);

    // A succeeding call clears the sticky failure.
    REQUIRE(qmcmet_thickness(0.30, 0.30, 100.0, 43.0, 45.0, 0.0, &t) == QMCMET_OK);
    CHECK(qmcmet_last_status() == QMCMET_OK);
    CHECK(std::strlen(qmcmet_last_message()) == 0);
}

TEST_CASE("spectrum arrays, peaks table, and cell accessors") {
    const auto axis = qmctest::axis_nm(600.0, 660.0, 601);
    const auto trace = lorentzian_trace(axis, 632.0, 0.5, 80.0, 5.0);
    qmcmet_spectrum* s = make_spectrum(axis, trace);

    CHECK(qmcmet_spectrum_size(s) == 601);
    std::vector<double> wl(601), in(601);
    REQUIRE(qmcmet_spectrum_copy(s, wl.data(), in.data()) == QMCMET_OK);
    CHECK(wl[0] == 600.0);
    CHECK(wl[600] == 660.0);
    CHECK(in == trace);

    qmcmet_table* peaks = nullptr;
    REQUIRE(qmcmet_find_peaks(s, 5.0, 0.0, 0.0, 0, &peaks) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(peaks) >= 1);
    REQUIRE(qmcmet_table_cols(peaks) == 5);
    CHECK(std::string(qmcmet_table_name(peaks, 0)) == "index");
    CHECK(std::string(qmcmet_table_name(peaks, 1)) == "center_nm");
    CHECK(qmcmet_table_cell_type(peaks, 0) == QMCMET_CELL_INT);
    CHECK(qmcmet_table_cell_type(peaks, 1) == QMCMET_CELL_REAL);
    CHECK(qmcmet_table_cell_type(peaks, 99) == -1);
    CHECK(qmcmet_table_name(peaks, 99) == nullptr);

    size_t col = 99;
    REQUIRE(qmcmet_table_column(peaks, "center_nm", &col) == QMCMET_OK);
    CHECK(col == 1);
    CHECK(qmcmet_table_column(peaks, "no_such_column", &col) == QMCMET_ERR_INVALID_ARGUMENT);

    double center = 0.0;
    REQUIRE(qmcmet_table_real_at(peaks, 0, 1, &center) == QMCMET_OK);
    CHECK(std::abs(center - 632.0) < 0.2);

    int64_t index = -1;
    REQUIRE(qmcmet_table_int_at(peaks, 0, 0, &index) == QMCMET_OK);
    CHECK(index >= 0);
    double as_real = 0.0;
    REQUIRE(qmcmet_table_numeric_at(peaks, 0, 0, &as_real) == QMCMET_OK);
    CHECK(as_real == static_cast<double>(index));

    // Type and bounds misuse is an error, not UB.
    CHECK(qmcmet_table_int_at(peaks, 0, 1, &index) == QMCMET_ERR_INVALID_ARGUMENT);
    CHECK(qmcmet_table_real_at(peaks, 0, 0, &center) == QMCMET_ERR_INVALID_ARGUMENT);
    const char* text = nullptr;
    CHECK(qmcmet_table_text_at(peaks, 0, 1, &text) == QMCMET_ERR_INVALID_ARGUMENT);
    CHECK(qmcmet_table_real_at(peaks, 5000, 1, &center) == QMCMET_ERR_INVALID_ARGUMENT);

    qmcmet_line_fit fit{};
    REQUIRE(qmcmet_fit_lorentzian(s, 630.0, 634.0, center > 0 ? 632.0 : 632.0, 0.5, 80.0,
                                  &fit) == QMCMET_OK);
    CHECK(fit.converged == 1);
    CHECK(std::abs(fit.center_nm - 632.0) < 1e-6);
    CHECK(std::abs(fit.fwhm_nm - 0.5) < 1e-6);
    CHECK(fit.q_factor == fit.center_nm / fit.fwhm_nm);
    CHECK(fit.q_asym == 0.0);

    // A Fano fit needs a Fano target; against a pure Lorentzian the asymmetry
    // parameter diverges and the fit legitimately reports converged = 0.
    const auto fano_axis = qmctest::axis_nm(620.0, 630.0, 1001);
    std::vector<double> fano_trace(fano_axis.size());
    double fano_max = 0.0;
    for (size_t i = 0; i < fano_axis.size(); ++i) {
        fano_trace[i] = qmctest::fano(fano_axis[i], 625.0, 0.735, 2.0, 10.0, 1.0);
        fano_max = std::max(fano_max, fano_trace[i]);
    }
    qmcmet_spectrum* fs = make_spectrum(fano_axis, fano_trace);
    qmcmet_line_fit fano{};
    REQUIRE(qmcmet_fit_fano(fs, 622.0, 628.0, 625.2, 0.7, fano_max, &fano) == QMCMET_OK);
    CHECK(fano.converged == 1);
    CHECK(std::abs(fano.center_nm - 625.0) < 0.1);
    CHECK(std::abs(fano.q_asym - 2.0) / 2.0 < 1e-3);
    CHECK(std::abs(fano.amplitude - 10.0) / 10.0 < 1e-3);
    qmcmet_spectrum_free(fs);

    CHECK(qmcmet_fit_lorentzian(s, 632.1, 632.2, 632.15, 0.5, 80.0, &fit) ==
          QMCMET_ERR_WINDOW_TOO_SMALL);

    qmcmet_table_free(peaks);
    qmcmet_spectrum_free(s);
}

TEST_CASE("flat spectrum yields an empty peaks table") {
    const auto axis = qmctest::axis_nm(600.0, 610.0, 101);
    const std::vector<double> flat(101, 3.0);
    qmcmet_spectrum* s = make_spectrum(axis, flat);
    qmcmet_table* peaks = nullptr;
    REQUIRE(qmcmet_find_peaks(s, 5.0, 0.0, 0.0, 0, &peaks) == QMCMET_OK);
    CHECK(qmcmet_table_rows(peaks) == 0);
    CHECK(qmcmet_table_cols(peaks) == 5);
    qmcmet_table_free(peaks);
    qmcmet_spectrum_free(s);
}

TEST_CASE("table csv and json round trip through files") {
    qmctest::TempDir dir("capi_table");
    const auto axis = qmctest::axis_nm(620.0, 640.0, 201);
    const auto trace = lorentzian_trace(axis, 633.0, 0.8, 50.0, 2.0);
    qmcmet_spectrum* s = make_spectrum(axis, trace);
    qmcmet_table* peaks = nullptr;
    REQUIRE(qmcmet_find_peaks(s, 5.0, 0.0, 0.0, 0, &peaks) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(peaks) == 1);

    char* csv = nullptr;
    REQUIRE(qmcmet_table_to_csv(peaks, &csv) == QMCMET_OK);
    REQUIRE(csv != nullptr);
    CHECK(std::string(csv).rfind("index,center_nm", 0) == 0);

    char* json = nullptr;
    REQUIRE(qmcmet_table_to_json(peaks, &json) == QMCMET_OK);
    CHECK(std::string(json).find("\"center_nm\"") != std::string::npos);

    const std::string path = dir.path("peaks.csv");
    REQUIRE(qmcmet_table_write_csv(peaks, path.c_str()) == QMCMET_OK);
    qmcmet_table* back = nullptr;
    REQUIRE(qmcmet_table_read_csv(path.c_str(), &back) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(back) == 1);
    REQUIRE(qmcmet_table_cols(back) == 5);

    // The CSV reader re-infers column types, so an exact-integer center reads
    // back as an int column; numeric_at widens either way.
    double a = 0.0, b = 0.0;
    REQUIRE(qmcmet_table_numeric_at(peaks, 0, 1, &a) == QMCMET_OK);
    REQUIRE(qmcmet_table_numeric_at(back, 0, 1, &b) == QMCMET_OK);
    CHECK(a == b);  // 17-digit rendering parses back bit-exactly

    const std::string jpath = dir.path("peaks.json");
    REQUIRE(qmcmet_table_write_json(peaks, jpath.c_str()) == QMCMET_OK);

    qmcmet_string_free(csv);
    qmcmet_string_free(json);
    qmcmet_table_free(back);
    qmcmet_table_free(peaks);
    qmcmet_spectrum_free(s);
}

TEST_CASE("spectrum csv reader") {
    qmctest::TempDir dir("capi_spec");
    const std::string path = dir.path("trace.csv");
    write_text(path, "wavelength_nm,intensity\n630,1\n631,2\n632,1.5\n");
    qmcmet_spectrum* s = nullptr;
    REQUIRE(qmcmet_spectrum_read_csv(path.c_str(), &s) == QMCMET_OK);
    CHECK(qmcmet_spectrum_size(s) == 3);
    qmcmet_spectrum_free(s);

    CHECK(qmcmet_spectrum_read_csv(dir.path("absent.csv").c_str(), &s) ==
          QMCMET_ERR_IO_FAILURE);
}

TEST_CASE("prony mode table for complex and real records") {
    const double f = 0.05, q_true = 3000.0;
    const double gamma = kPi * f / q_true;
    const size_t n = 400;

    std::vector<double> re(n), im(n);
    for (size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k);
        const double env = std::exp(-gamma * t);
        re[k] = env * std::cos(2.0 * kPi * f * t);
        im[k] = env * std::sin(2.0 * kPi * f * t);
    }

    qmcmet_table* modes = nullptr;
    REQUIRE(qmcmet_prony_modes(re.data(), im.data(), n, 1.0, 0, 0.0, &modes) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(modes) >= 1);
    double freq = 0.0, q = 0.0;
    REQUIRE(qmcmet_table_real_at(modes, 0, 0, &freq) == QMCMET_OK);
    REQUIRE(qmcmet_table_real_at(modes, 0, 2, &q) == QMCMET_OK);
    CHECK(std::abs(freq - f) < 1e-8);
    CHECK(std::abs(q - q_true) / q_true < 0.01);
    qmcmet_table_free(modes);

    REQUIRE(qmcmet_prony_modes(re.data(), nullptr, n, 1.0, 0, 0.0, &modes) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(modes) >= 1);
    REQUIRE(qmcmet_table_real_at(modes, 0, 2, &q) == QMCMET_OK);
    CHECK(std::abs(q - q_true) / q_true < 0.01);
    qmcmet_table_free(modes);

    CHECK(qmcmet_prony_modes(re.data(), im.data(), 10, 1.0, 8, 0.0, &modes) ==
          QMCMET_ERR_TOO_FEW_SAMPLES);
}

TEST_CASE("cube from long csv, cavity map, summary, fill fraction") {
    qmctest::TempDir dir("capi_cube");
    const std::string csv_path = dir.path("cube.csv");

    std::string csv = "x_idx,y_idx,lambda_nm,intensity\n";
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 2; ++x) {
            for (int k = 0; k <= 20; ++k) {
                const double lambda = 630.0 + 0.5 * k;
                const bool lit = (x == 1 && y == 0);
                const double v =
                    lit ? qmctest::lorentzian(lambda, 634.0, 1.0, 100.0, 2.0) : 2.0;
                csv += std::to_string(x) + "," + std::to_string(y) + "," +
                       qmc::format_real17(lambda) + "," + qmc::format_real17(v) + "\n";
            }
        }
    }
    write_text(csv_path, csv);

    qmcmet_cube* cube = nullptr;
    REQUIRE(qmcmet_cube_from_long_csv(csv_path.c_str(), 1.0, 0.0, 0.0, &cube) == QMCMET_OK);
    int nx = 0, ny = 0;
    size_t nl = 0;
    REQUIRE(qmcmet_cube_dims(cube, &nx, &ny, &nl) == QMCMET_OK);
    CHECK(nx == 2);
    CHECK(ny == 2);
    CHECK(nl == 21);

    std::vector<double> axis(nl);
    REQUIRE(qmcmet_cube_axis(cube, axis.data()) == QMCMET_OK);
    CHECK(axis.front() == 630.0);
    CHECK(axis.back() == 640.0);

    const std::string bin_path = dir.path("cube.bin");
    REQUIRE(qmcmet_cube_write(cube, bin_path.c_str()) == QMCMET_OK);
    qmcmet_cube* cube2 = nullptr;
    REQUIRE(qmcmet_cube_read(bin_path.c_str(), &cube2) == QMCMET_OK);
    int nx2 = 0;
    REQUIRE(qmcmet_cube_dims(cube2, &nx2, nullptr, nullptr) == QMCMET_OK);
    CHECK(nx2 == 2);

    qmcmet_spectrum* pixel = nullptr;
    REQUIRE(qmcmet_cube_spectrum_at(cube2, 1, 0, &pixel) == QMCMET_OK);
    qmcmet_table* peaks = nullptr;
    REQUIRE(qmcmet_find_peaks(pixel, 10.0, 0.0, 0.0, 0, &peaks) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(peaks) == 1);
    double center = 0.0;
    REQUIRE(qmcmet_table_real_at(peaks, 0, 1, &center) == QMCMET_OK);
    CHECK(std::abs(center - 634.0) < 0.3);
    qmcmet_table_free(peaks);
    qmcmet_spectrum_free(pixel);

    CHECK(qmcmet_cube_spectrum_at(cube2, 5, 0, &pixel) == QMCMET_ERR_INVALID_ARGUMENT);

    qmcmet_cavity_map* map = nullptr;
    REQUIRE(qmcmet_cavity_map_build(cube, 1, 2, 1, 10.0, 0.0, 0.0, &map) == QMCMET_OK);

    qmcmet_table* records = nullptr;
    REQUIRE(qmcmet_cavity_map_records(map, &records) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(records) == 1);
    int64_t x_idx = -1, chip_col = -1;
    REQUIRE(qmcmet_table_int_at(records, 0, 0, &x_idx) == QMCMET_OK);
    REQUIRE(qmcmet_table_int_at(records, 0, 3, &chip_col) == QMCMET_OK);
    CHECK(x_idx == 1);
    CHECK(chip_col == 1);
    double lambda_rec = 0.0;
    size_t lambda_col = 0;
    REQUIRE(qmcmet_table_column(records, "lambda_nm", &lambda_col) == QMCMET_OK);
    REQUIRE(qmcmet_table_real_at(records, 0, lambda_col, &lambda_rec) == QMCMET_OK);
    CHECK(std::abs(lambda_rec - 634.0) < 0.3);
    qmcmet_table_free(records);

    qmcmet_table* summary = nullptr;
    REQUIRE(qmcmet_cavity_map_summary(map, &summary) == QMCMET_OK);
    REQUIRE(qmcmet_table_rows(summary) == 2);
    size_t ncol = 0, mcol = 0, scol = 0;
    REQUIRE(qmcmet_table_column(summary, "n_cavities", &ncol) == QMCMET_OK);
    REQUIRE(qmcmet_table_column(summary, "mean_lambda_nm", &mcol) == QMCMET_OK);
    REQUIRE(qmcmet_table_column(summary, "std_lambda_nm", &scol) == QMCMET_OK);
    // Row order is (0,0) then (0,1); the lit chiplet is the second row.
    int64_t n_cav = -1;
    REQUIRE(qmcmet_table_int_at(summary, 1, ncol, &n_cav) == QMCMET_OK);
    CHECK(n_cav == 1);
    double mean_l = 0.0, std_l = 0.0;
    REQUIRE(qmcmet_table_real_at(summary, 1, mcol, &mean_l) == QMCMET_OK);
    REQUIRE(qmcmet_table_real_at(summary, 1, scol, &std_l) == QMCMET_OK);
    CHECK(std::abs(mean_l - 634.0) < 0.3);
    CHECK(std::isnan(std_l));  // single record: std is null
    qmcmet_table_free(summary);

    double fill = -1.0;
    REQUIRE(qmcmet_cavity_map_fill_fraction(map, 0, 1, &fill) == QMCMET_OK);
    CHECK(fill == 1.0);
    REQUIRE(qmcmet_cavity_map_fill_fraction(map, 0, 0, &fill) == QMCMET_OK);
    CHECK(fill == 0.0);
    CHECK(qmcmet_cavity_map_fill_fraction(map, 5, 5, &fill) ==
          QMCMET_ERR_CHIPLET_OUT_OF_RANGE);

    qmcmet_cavity_map_free(map);
    qmcmet_cube_free(cube2);
    qmcmet_cube_free(cube);
}

TEST_CASE("resonance tracking and enhancement factor") {
    const auto axis = qmctest::axis_nm(600.0, 660.0, 601);
    std::vector<qmcmet_spectrum*> frames;
    for (int i = 0; i < 5; ++i) {
        const double center = 633.0 + 0.2 * i;
        frames.push_back(make_spectrum(axis, lorentzian_trace(axis, center, 0.5, 80.0, 5.0)));
    }

    double shift = 0.0;
    int direction = 0;
    qmcmet_table* traj = nullptr;
    REQUIRE(qmcmet_track_shift(frames.data(), frames.size(), 632.0, 634.0, 5.0, 0.0, 0.0, 0,
                               &shift, &direction, &traj) == QMCMET_OK);
    CHECK(std::abs(shift - 0.8) < 0.05);
    CHECK(direction == 1);
    REQUIRE(qmcmet_table_rows(traj) == 5);
    double l0 = 0.0, l4 = 0.0;
    REQUIRE(qmcmet_table_real_at(traj, 0, 1, &l0) == QMCMET_OK);
    REQUIRE(qmcmet_table_real_at(traj, 4, 1, &l4) == QMCMET_OK);
    CHECK(std::abs(l0 - 633.0) < 0.05);
    CHECK(std::abs(l4 - 633.8) < 0.05);
    qmcmet_table_free(traj);

    CHECK(qmcmet_track_shift(frames.data(), frames.size(), 650.0, 652.0, 5.0, 0.0, 0.0, 0,
                             &shift, &direction, &traj) == QMCMET_ERR_SEED_PEAK_NOT_FOUND);

    // Enhancement: identical line shapes with amplitude ratio 40.
    qmcmet_spectrum* off = make_spectrum(axis, lorentzian_trace(axis, 633.0, 0.5, 2.0, 1.0));
    double factor = 0.0;
    REQUIRE(qmcmet_enhancement_factor(frames[0], off, 633.0, 2.0, &factor) == QMCMET_OK);
    CHECK(std::abs(factor - 40.0) / 40.0 < 0.05);

    qmcmet_spectrum* zero = make_spectrum(axis, std::vector<double>(axis.size(), 1.0));
    CHECK(qmcmet_enhancement_factor(frames[0], zero, 633.0, 2.0, &factor) ==
          QMCMET_ERR_ZERO_OFF_RESONANCE_SIGNAL);

    qmcmet_spectrum_free(zero);
    qmcmet_spectrum_free(off);
    for (auto* f : frames) qmcmet_spectrum_free(f);
}

TEST_CASE("micrograph pipeline through the C interface") {
    qmctest::TempDir dir("capi_sem");

    qmctest::TopViewSpec top;
    top.hole_along_px = {-200.0, -100.0, 0.0, 100.0, 200.0};
    const qmc::GrayImage top_img = qmctest::render_top_view(top);
    const std::string top_path = dir.path("top.pgm");
    qmc::write_pgm(top_img, top_path);

    qmcmet_image* img = nullptr;
    REQUIRE(qmcmet_image_read(top_path.c_str(), 2.0, &img) == QMCMET_OK);
    int w = 0, h = 0;
    double scale = 0.0, tilt = 0.0;
    REQUIRE(qmcmet_image_info(img, &w, &h, &scale, &tilt) == QMCMET_OK);
    CHECK(w == 512);
    CHECK(h == 256);
    CHECK(scale == 2.0);
    CHECK(std::isnan(tilt));

    // Without an override the PGM has no scale source at all.
    qmcmet_image* bare = nullptr;
    CHECK(qmcmet_image_read(top_path.c_str(), 0.0, &bare) == QMCMET_ERR_MISSING_SCALE);

    qmcmet_beam_axis axis{};
    REQUIRE(qmcmet_sem_beam_axis(img, &axis) == QMCMET_OK);
    CHECK(std::abs(axis.angle_deg) < 0.5);
    // Hole rims contribute off-axis gradients, so global coherence sits well
    // below the hole-free ~0.95; it must still clear the library's 0.2 floor.
    CHECK(axis.coherence > 0.3);

    qmcmet_widths widths{};
    REQUIRE(qmcmet_sem_measure_widths(img, &axis, &widths) == QMCMET_OK);
    CHECK(std::abs(widths.w_top_nm - 280.0) < 4.0);
    CHECK(std::abs(widths.w_bottom_nm - 330.0) < 4.0);
    CHECK(widths.sigma_w_top_nm > 0.0);
    for (int i = 1; i < 4; ++i) {
        CHECK(widths.edge_positions_px[i] > widths.edge_positions_px[i - 1]);
    }

    double mean_r = 0.0, std_r = 0.0;
    qmcmet_table* holes = nullptr;
    REQUIRE(qmcmet_sem_detect_holes(img, &axis, 0.0, 0.0, 0.0, 0.0, &mean_r, &std_r,
                                    &holes) == QMCMET_OK);
    CHECK(qmcmet_table_rows(holes) == 5);
    CHECK(std::abs(mean_r - 45.0) < 4.0);
    CHECK(std_r < 2.0);
    double prev_x = -1e9;
    for (size_t r = 0; r < qmcmet_table_rows(holes); ++r) {
        double cx = 0.0;
        REQUIRE(qmcmet_table_real_at(holes, r, 0, &cx) == QMCMET_OK);
        CHECK(cx > prev_x);
        prev_x = cx;
    }
    qmcmet_table_free(holes);
    qmcmet_image_free(img);

    // Uniform frame: no texture direction to estimate.
    qmc::GrayImage flat;
    flat.width = 64;
    flat.height = 64;
    flat.pixels.assign(64 * 64, 128);
    const std::string flat_path = dir.path("flat.pgm");
    qmc::write_pgm(flat, flat_path);
    qmcmet_image* flat_img = nullptr;
    REQUIRE(qmcmet_image_read(flat_path.c_str(), 2.0, &flat_img) == QMCMET_OK);
    qmcmet_beam_axis flat_axis{};
    CHECK(qmcmet_sem_beam_axis(flat_img, &flat_axis) == QMCMET_ERR_LOW_COHERENCE);
    qmcmet_image_free(flat_img);

    // Tilted view: ridge separations and reconstructed thickness.
    qmctest::TiltViewSpec tilt_spec;
    const qmc::GrayImage tilt_img = qmctest::render_tilt_view(tilt_spec);
    const std::string tilt_path = dir.path("tilt.pgm");
    qmc::write_pgm(tilt_img, tilt_path);
    qmcmet_image* timg = nullptr;
    REQUIRE(qmcmet_image_read(tilt_path.c_str(), 2.0, &timg) == QMCMET_OK);

    qmcmet_ridges ridges{};
    REQUIRE(qmcmet_sem_detect_ridges(timg, &ridges) == QMCMET_OK);
    CHECK(std::abs(ridges.d_t_px - 100.0) < 1.0);
    CHECK(std::abs(ridges.d_nb_px / ridges.d_t_px - 0.43) < 0.43 * 0.01);
    CHECK(std::abs(ridges.psi_deg) < 0.5);
    CHECK(ridges.line_offsets_px[0] < ridges.line_offsets_px[1]);
    CHECK(ridges.line_offsets_px[1] < ridges.line_offsets_px[2]);
    qmcmet_image_free(timg);

    // Projection formula on the measured geometry. The render's ground truth
    // is t = W_t * (d_nb/d_t) - (W_b - W_t)/2 at theta 45, psi 0.
    const double t_true = 0.28 * 0.43 - 0.025;
    double t = 0.0;
    REQUIRE(qmcmet_thickness(widths.w_top_nm * 1e-3, widths.w_bottom_nm * 1e-3, ridges.d_t_px,
                             ridges.d_nb_px, 45.0, ridges.psi_deg, &t) == QMCMET_OK);
    CHECK(std::abs(t - t_true) / t_true < 0.05);

    double t_mc = 0.0, sigma_t = 0.0;
    REQUIRE(qmcmet_thickness_mc(0.28, 0.33, 100.0, 43.0, 45.0, 0.0, 0.002, 0.002, 0.5, 0.5,
                                5000, 7, &t_mc, &sigma_t) == QMCMET_OK);
    CHECK(std::abs(t_mc - t_true) < 0.01);
    CHECK(sigma_t > 0.0);
    CHECK(sigma_t < 0.02);
    double t_mc2 = 0.0, sigma_t2 = 0.0;
    REQUIRE(qmcmet_thickness_mc(0.28, 0.33, 100.0, 43.0, 45.0, 0.0, 0.002, 0.002, 0.5, 0.5,
                                5000, 7, &t_mc2, &sigma_t2) == QMCMET_OK);
    CHECK(t_mc == t_mc2);
    CHECK(sigma_t == sigma_t2);
}

TEST_CASE("sellmeier index") {
    double n = 0.0;
    REQUIRE(qmcmet_sellmeier_n(0.620, &n) == QMCMET_OK);
    CHECK(std::abs(n - 2.424) / 2.424 < 0.005);

    double n_custom = 0.0;
    REQUIRE(qmcmet_sellmeier_n_custom(0.620, 0.3306, 0.175 * 0.175, 4.3356, 0.106 * 0.106,
                                      0.23, 5.0, &n_custom) == QMCMET_OK);
    CHECK(n_custom == n);

    CHECK(qmcmet_sellmeier_n(0.10, &n) == QMCMET_ERR_OUT_OF_VALIDITY_RANGE);
}

TEST_CASE("surrogate handles: default, fit, eval, invert, save/load") {
    qmctest::TempDir dir("capi_surrogate");

    qmcmet_surrogate* model = nullptr;
    REQUIRE(qmcmet_surrogate_default(&model) == QMCMET_OK);

    double ref[4] = {0, 0, 0, 0}, lin[3] = {0, 0, 0}, quad[6] = {0}, box[6] = {0};
    REQUIRE(qmcmet_surrogate_info(model, ref, lin, quad, box) == QMCMET_OK);
    CHECK(ref[0] == 0.330);
    CHECK(ref[1] == 0.045);
    CHECK(ref[2] == 0.129);
    CHECK(ref[3] == 633.2);
    CHECK(lin[0] > 0.0);   // wider beam -> red shift
    CHECK(lin[1] < 0.0);   // larger holes -> blue shift
    CHECK(lin[2] > 0.0);   // thicker membrane -> red shift
    for (int i = 0; i < 6; ++i) CHECK(std::isnan(quad[i]));
    CHECK(box[4] < 0.129);
    CHECK(box[5] > 0.129);
    REQUIRE(qmcmet_surrogate_provenance(model) != nullptr);
    CHECK(std::strlen(qmcmet_surrogate_provenance(model)) > 0);

    double lambda0 = 0.0;
    REQUIRE(qmcmet_surrogate_eval(model, ref[0], ref[1], ref[2], &lambda0) == QMCMET_OK);
    CHECK(lambda0 == ref[3]);  // zero offsets evaluate to the anchor exactly

    double lambda_probe = 0.0;
    REQUIRE(qmcmet_surrogate_eval(model, ref[0], ref[1], 0.140, &lambda_probe) == QMCMET_OK);
    double t_back = 0.0;
    REQUIRE(qmcmet_surrogate_invert(model, ref[0], ref[1], lambda_probe, box[4], box[5],
                                    &t_back) == QMCMET_OK);
    CHECK(std::abs(t_back - 0.140) < 1e-6);

    CHECK(qmcmet_surrogate_eval(model, 0.5, ref[1], ref[2], &lambda_probe) ==
          QMCMET_ERR_OUT_OF_VALIDITY_BOX);
    CHECK(qmcmet_surrogate_invert(model, ref[0], ref[1], lambda_probe + 500.0, box[4], box[5],
                                  &t_back) == QMCMET_ERR_NO_SIGN_CHANGE);

    const std::string path = dir.path("model.json");
    REQUIRE(qmcmet_surrogate_save(model, path.c_str()) == QMCMET_OK);
    qmcmet_surrogate* loaded = nullptr;
    REQUIRE(qmcmet_surrogate_load(path.c_str(), &loaded) == QMCMET_OK);
    double l_orig = 0.0, l_loaded = 0.0;
    REQUIRE(qmcmet_surrogate_eval(model, 0.331, 0.0452, 0.131, &l_orig) == QMCMET_OK);
    REQUIRE(qmcmet_surrogate_eval(loaded, 0.331, 0.0452, 0.131, &l_loaded) == QMCMET_OK);
    CHECK(l_orig == l_loaded);
    CHECK(std::string(qmcmet_surrogate_provenance(loaded)) ==
          qmcmet_surrogate_provenance(model));
    qmcmet_surrogate_free(loaded);
    qmcmet_surrogate_free(model);

    // Fit from generated samples of a known linear response.
    std::vector<double> ws, rs, ts, ls;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < 3; ++k) {
                const double wv = 0.30 + 0.01 * i;
                const double rv = 0.043 + 0.002 * j;
                const double tv = 0.110 + 0.010 * k;
                ws.push_back(wv);
                rs.push_back(rv);
                ts.push_back(tv);
                ls.push_back(600.0 + 50.0 * (wv - 0.30) - 200.0 * (rv - 0.043) +
                             400.0 * (tv - 0.110));
            }
        }
    }
    qmcmet_surrogate* fitted = nullptr;
    REQUIRE(qmcmet_surrogate_fit(ws.data(), rs.data(), ts.data(), ls.data(), ws.size(),
                                 QMCMET_SURROGATE_LINEAR, &fitted) == QMCMET_OK);
    double l_fit = 0.0;
    REQUIRE(qmcmet_surrogate_eval(fitted, 0.305, 0.044, 0.115, &l_fit) == QMCMET_OK);
    const double l_want = 600.0 + 50.0 * 0.005 - 200.0 * 0.001 + 400.0 * 0.005;
    CHECK(std::abs(l_fit - l_want) < 1e-9);
    qmcmet_surrogate_free(fitted);

    CHECK(qmcmet_surrogate_fit(ws.data(), rs.data(), ts.data(), ls.data(), ws.size(), 3,
                               &fitted) == QMCMET_ERR_INVALID_ARGUMENT);
}

TEST_CASE("inverse monte carlo determinism through the C interface") {
    qmcmet_surrogate* model = nullptr;
    REQUIRE(qmcmet_surrogate_default(&model) == QMCMET_OK);
    double box[6] = {0};
    REQUIRE(qmcmet_surrogate_info(model, nullptr, nullptr, nullptr, box) == QMCMET_OK);

    qmcmet_mc_result* run1 = nullptr;
    REQUIRE(qmcmet_invert_mc_gaussian(model, 0.330, 0.002, 0.045, 0.001, 633.2, 1.0, 4000, 42,
                                      box[4], box[5], &run1) == QMCMET_OK);
    double mean1 = 0.0, std1 = 0.0;
    int failed1 = 0;
    size_t n1 = 0;
    uint64_t seed1 = 0;
    REQUIRE(qmcmet_mc_result_stats(run1, &mean1, &std1, &failed1, &n1, &seed1) == QMCMET_OK);
    CHECK(seed1 == 42);
    CHECK(n1 + static_cast<size_t>(failed1) == 4000);
    CHECK(failed1 < 800);
    CHECK(mean1 > box[4]);
    CHECK(mean1 < box[5]);
    CHECK(std1 > 0.0);

    std::vector<double> samples1(n1);
    REQUIRE(qmcmet_mc_result_samples(run1, samples1.data()) == QMCMET_OK);

    qmcmet_mc_result* run2 = nullptr;
    REQUIRE(qmcmet_invert_mc_gaussian(model, 0.330, 0.002, 0.045, 0.001, 633.2, 1.0, 4000, 42,
                                      box[4], box[5], &run2) == QMCMET_OK);
    double mean2 = 0.0, std2 = 0.0;
    size_t n2 = 0;
    REQUIRE(qmcmet_mc_result_stats(run2, &mean2, &std2, nullptr, &n2, nullptr) == QMCMET_OK);
    CHECK(mean1 == mean2);
    CHECK(std1 == std2);
    REQUIRE(n2 == n1);
    std::vector<double> samples2(n2);
    REQUIRE(qmcmet_mc_result_samples(run2, samples2.data()) == QMCMET_OK);
    CHECK(samples1 == samples2);
    qmcmet_mc_result_free(run2);

    qmcmet_mc_result* run3 = nullptr;
    REQUIRE(qmcmet_invert_mc_gaussian(model, 0.330, 0.002, 0.045, 0.001, 633.2, 1.0, 4000, 43,
                                      box[4], box[5], &run3) == QMCMET_OK);
    double mean3 = 0.0;
    REQUIRE(qmcmet_mc_result_stats(run3, &mean3, nullptr, nullptr, nullptr, nullptr) ==
            QMCMET_OK);
    CHECK(mean3 != mean1);
    qmcmet_mc_result_free(run3);

    const double lambdas[5] = {632.8, 633.0, 633.2, 633.4, 633.6};
    qmcmet_mc_result* emp = nullptr;
    REQUIRE(qmcmet_invert_mc_empirical(model, 0.330, 0.002, 0.045, 0.001, lambdas, 5, 4000,
                                       42, box[4], box[5], &emp) == QMCMET_OK);
    size_t n_emp = 0;
    int failed_emp = 0;
    REQUIRE(qmcmet_mc_result_stats(emp, nullptr, nullptr, &failed_emp, &n_emp, nullptr) ==
            QMCMET_OK);
    CHECK(n_emp + static_cast<size_t>(failed_emp) == 4000);
    qmcmet_mc_result_free(emp);

    qmcmet_mc_result* bad = nullptr;
    CHECK(qmcmet_invert_mc_gaussian(model, 0.330, -0.002, 0.045, 0.001, 633.2, 1.0, 4000, 42,
                                    box[4], box[5], &bad) == QMCMET_ERR_INVALID_ARGUMENT);

    qmcmet_mc_result_free(run1);
    qmcmet_surrogate_free(model);
}

TEST_CASE("spatial statistics through the C interface") {
    std::vector<double> xs, ys, zq, zp;
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 7; ++j) {
            const double x = 3.0 * i, y = 3.0 * j;
            xs.push_back(x);
            ys.push_back(y);
            zq.push_back(2.0 + 0.5 * x - 0.25 * y + 0.03 * x * x - 0.02 * x * y +
                         0.01 * y * y);
            zp.push_back(1.0 + 0.2 * x + 0.3 * y);
        }
    }

    double beta[6] = {0};
    REQUIRE(qmcmet_fit_quadratic_surface(xs.data(), ys.data(), zq.data(), xs.size(), beta) ==
            QMCMET_OK);
    const double want[6] = {2.0, 0.5, -0.25, 0.03, -0.02, 0.01};
    for (int i = 0; i < 6; ++i) CHECK(std::abs(beta[i] - want[i]) < 1e-9);
    double z_eval = 0.0;
    REQUIRE(qmcmet_quadratic_eval(beta, xs[10], ys[10], &z_eval) == QMCMET_OK);
    CHECK(std::abs(z_eval - zq[10]) < 1e-9);

    int k = 0;
    REQUIRE(qmcmet_default_loess_k(100, &k) == QMCMET_OK);
    CHECK(k == 30);

    std::vector<double> fitted(xs.size());
    std::vector<uint8_t> degenerate(xs.size(), 2);
    REQUIRE(qmcmet_loess(xs.data(), ys.data(), zp.data(), xs.size(), 9, fitted.data(),
                         degenerate.data()) == QMCMET_OK);
    for (size_t i = 0; i < xs.size(); ++i) {
        CHECK(std::abs(fitted[i] - zp[i]) < 1e-9);
        CHECK(degenerate[i] == 0);
    }

    double before = 0.0, after = 0.0, reduction = 0.0;
    REQUIRE(qmcmet_residual_summary(zp.data(), zp.data(), zp.size(), &before, &after,
                                    &reduction) == QMCMET_OK);
    CHECK(before > 0.0);
    CHECK(after == 0.0);
    CHECK(reduction == 100.0);

    // Linear trend: gamma(h) = (m h)^2 / 2 exactly. Same-column pairs fail
    // the orthogonal-separation gate (|dy| >= bin_width/2), so there is no
    // h = 0 bin and the nugget is the lag-1 value.
    std::vector<double> gx, gy, gz;
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 4; ++j) {
            gx.push_back(static_cast<double>(i));
            gy.push_back(static_cast<double>(j));
            gz.push_back(0.4 * i);
        }
    }
    double nugget = -1.0;
    qmcmet_table* vario = nullptr;
    REQUIRE(qmcmet_semivariogram(gx.data(), gy.data(), gz.data(), gx.size(), QMCMET_AXIS_X,
                                 1.0, 5.0, &nugget, &vario) == QMCMET_OK);
    CHECK(std::abs(nugget - 0.08) < 1e-15);
    REQUIRE(qmcmet_table_rows(vario) == 5);
    for (size_t r = 0; r < qmcmet_table_rows(vario); ++r) {
        double lag = 0.0, gamma = 0.0;
        int64_t pairs = 0;
        REQUIRE(qmcmet_table_real_at(vario, r, 0, &lag) == QMCMET_OK);
        REQUIRE(qmcmet_table_real_at(vario, r, 1, &gamma) == QMCMET_OK);
        REQUIRE(qmcmet_table_int_at(vario, r, 2, &pairs) == QMCMET_OK);
        CHECK(pairs > 0);
        const double expect = 0.5 * (0.4 * lag) * (0.4 * lag);
        CHECK(std::abs(gamma - expect) <= 1e-12 * expect);
    }
    qmcmet_table_free(vario);

    CHECK(qmcmet_semivariogram(gx.data(), gy.data(), gz.data(), gx.size(), 7, 1.0, 5.0,
                               &nugget, &vario) == QMCMET_ERR_INVALID_ARGUMENT);
    CHECK(qmcmet_semivariogram(gx.data(), gy.data(), gz.data(), gx.size(), QMCMET_AXIS_X, 0.0,
                               5.0, &nugget, &vario) == QMCMET_ERR_INVALID_ARGUMENT);

    std::vector<double> five(5, 0.0);
    CHECK(qmcmet_fit_quadratic_surface(five.data(), five.data(), five.data(), 5, beta) ==
          QMCMET_ERR_RANK_DEFICIENT);
}

TEST_CASE("yield formulas through the C interface") {
    double total = 0.0, per = 0.0;
    REQUIRE(qmcmet_integration_effort(100.0, 10.0, 120, 1, &total, &per) == QMCMET_OK);
    CHECK(total == 110.0);
    CHECK(std::abs(per - 11.0 / 12.0) < 1e-15);
    REQUIRE(qmcmet_integration_effort(100.0, 10.0, 120, 1, nullptr, nullptr) == QMCMET_OK);

    double n_good = 0.0, residual = 0.0;
    REQUIRE(qmcmet_expected_functional(100, 0.8, 2, &n_good, &residual) == QMCMET_OK);
    CHECK(std::abs(residual - 0.008) < 1e-15);
    CHECK(std::abs(n_good - 99.2) < 1e-12);

    REQUIRE(qmcmet_expected_functional(100, 0.8, 0, &n_good, &residual) == QMCMET_OK);
    CHECK(std::abs(n_good - 80.0) < 1e-12);

    CHECK(qmcmet_expected_functional(100, 1.5, 2, &n_good, &residual) ==
          QMCMET_ERR_INVALID_ARGUMENT);
    CHECK(qmcmet_integration_effort(100.0, 10.0, 0, 1, &total, &per) ==
          QMCMET_ERR_INVALID_ARGUMENT);
}

TEST_CASE("null handles are inert") {
    qmcmet_table_free(nullptr);
    qmcmet_spectrum_free(nullptr);
    qmcmet_cube_free(nullptr);
    qmcmet_cavity_map_free(nullptr);
    qmcmet_image_free(nullptr);
    qmcmet_surrogate_free(nullptr);
    qmcmet_mc_result_free(nullptr);
    qmcmet_string_free(nullptr);

    CHECK(qmcmet_table_rows(nullptr) == 0);
    CHECK(qmcmet_table_cols(nullptr) == 0);
    CHECK(qmcmet_table_name(nullptr, 0) == nullptr);
    CHECK(qmcmet_table_cell_type(nullptr, 0) == -1);
    CHECK(qmcmet_spectrum_size(nullptr) == 0);
    CHECK(qmcmet_surrogate_provenance(nullptr) == nullptr);

    qmcmet_table* t = nullptr;
    CHECK(qmcmet_table_read_csv(nullptr, &t) == QMCMET_ERR_INVALID_ARGUMENT);
    qmcmet_spectrum* s = nullptr;
    CHECK(qmcmet_spectrum_from_arrays(nullptr, nullptr, 3, &s) ==
          QMCMET_ERR_INVALID_ARGUMENT);
}
