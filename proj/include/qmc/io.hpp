#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qmc/spectrum.hpp"
#include "qmc/units.hpp"

namespace qmc {

// Hyperspectral intensity cube. Storage is 32-bit float in scan order
// y-outer, x-middle, lambda-inner; all computation converts to double.
// The wavelength axis is kept in nm exactly as serialized so that a
// read-then-write round trip is byte-identical; conversion to canonical
// micrometers happens when a Spectrum is extracted.
struct HyperspectralCube {
    int nx = 0;
    int ny = 0;
    std::vector<double> axis_nm;  // strictly increasing
    std::vector<float> data;      // nx*ny*n_lambda
    Length pixel_pitch = Length::um(1.0);
    double origin_x_um = 0.0;
    double origin_y_um = 0.0;

    size_t n_lambda() const { return axis_nm.size(); }
    size_t offset(int x, int y) const {
        return (static_cast<size_t>(y) * nx + x) * axis_nm.size();
    }
    Spectrum spectrum_at(int x, int y) const;
    void validate() const;
};

// Binary cube container: 8-byte magic "QMCCUBE1", UTF-8 JSON header
// {nx, ny, n_lambda, lambda_nm (array or {lambda0_nm, dlambda_nm}),
// pixel_pitch_um, origin_um}, a single '\0', then little-endian float32
// payload. Reading then writing a file produced here is byte-identical.
HyperspectralCube read_cube(const std::string& path);
void write_cube(const HyperspectralCube& cube, const std::string& path);

// Long-format CSV alternate input: columns x_idx, y_idx, lambda_nm,
// intensity. The (x_idx, y_idx, lambda_nm) grid must be complete.
HyperspectralCube cube_from_long_csv(const std::string& path,
                                     Length pixel_pitch = Length::um(1.0),
                                     double origin_x_um = 0.0,
                                     double origin_y_um = 0.0);

// 8-bit grayscale frame with physical pixel scale. scale_nm_per_px <= 0
// means "unknown"; readers fill it from the sidecar or an explicit override.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major, top-left origin
    double scale_nm_per_px = 0.0;
    std::optional<double> tilt_deg;

    uint8_t at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    bool has_scale() const { return scale_nm_per_px > 0.0; }
};

// Reads PGM (P5) or 8-bit grayscale PNG, sniffed by magic bytes. Pixel scale
// comes from scale_override_nm_per_px when given, else from the sidecar
// "<path>.meta.json" ({scale_nm_per_px, tilt_deg}); absent both -> MissingScale.
// 16-bit or color inputs -> UnsupportedFormat.
GrayImage read_gray_image(const std::string& path,
                          std::optional<double> scale_override_nm_per_px = std::nullopt);

void write_pgm(const GrayImage& image, const std::string& path);
void write_png_gray8(const GrayImage& image, const std::string& path);
void write_image_sidecar(const GrayImage& image, const std::string& path);

// Column-typed result table. Real cells may be null (stored as NaN,
// serialized as an empty CSV field / JSON null).
class ResultTable {
public:
    enum class Type { Int, Real, Text };
    using Cell = std::variant<int64_t, double, std::string>;

    ResultTable() = default;
    explicit ResultTable(std::vector<std::pair<std::string, Type>> schema);

    void append_row(const std::vector<Cell>& cells);

    size_t rows() const { return rows_; }
    size_t cols() const { return names_.size(); }
    const std::string& name(size_t c) const { return names_[c]; }
    Type type(size_t c) const { return types_[c]; }
    std::optional<size_t> column(const std::string& name) const;

    int64_t int_at(size_t row, size_t col) const;
    double real_at(size_t row, size_t col) const;  // NaN when null
    const std::string& text_at(size_t row, size_t col) const;
    // Numeric view of an int or real column entry.
    double numeric_at(size_t row, size_t col) const;

private:
    std::vector<std::string> names_;
    std::vector<Type> types_;
    std::vector<std::vector<int64_t>> int_cols_;
    std::vector<std::vector<double>> real_cols_;
    std::vector<std::vector<std::string>> text_cols_;
    std::vector<size_t> storage_;  // index into the per-type pool
    size_t rows_ = 0;
};

// CSV (RFC-4180-style quoting, LF line ends, header row) and JSON (array of
// records). Reals carry 17 significant digits and parse back bit-exactly.
std::string table_to_csv(const ResultTable& table);
std::string table_to_json(const ResultTable& table);
void write_table_csv(const ResultTable& table, const std::string& path);
void write_table_json(const ResultTable& table, const std::string& path);

// Parses a CSV written by table_to_csv. Column types are inferred
// (int -> real -> text, widening as needed); empty numeric fields -> null.
ResultTable read_table_csv(const std::string& path);

// Spectrum CSV with header columns wavelength_nm, intensity.
Spectrum read_spectrum_csv(const std::string& path);

// 17-significant-digit locale-independent rendering; round-trip exact.
std::string format_real17(double v);

// Strict full-string real parse (no locale, no trailing junk).
bool parse_real_strict(const std::string& text, double& out);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

} // namespace qmc
