#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <zlib.h>

#include <json.hpp>

#include "csv_internal.hpp"
#include "qmc/io.hpp"

namespace qmc {

namespace {

constexpr char kCubeMagic[8] = {'Q', 'M', 'C', 'C', 'U', 'B', 'E', '1'};

void put_f32_le(std::string& out, float v) {
    auto bits = std::bit_cast<uint32_t>(v);
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
    uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                    (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

} // namespace

std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error(ErrorCode::IoFailure, "cannot open file for reading", {{"path", path}});
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) {
        throw Error(ErrorCode::IoFailure, "read failed", {{"path", path}});
    }
    return bytes;
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw Error(ErrorCode::IoFailure, "cannot open file for writing", {{"path", path}});
    }
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
        throw Error(ErrorCode::IoFailure, "write failed", {{"path", path}});
    }
}

Spectrum HyperspectralCube::spectrum_at(int x, int y) const {
    if (x < 0 || x >= nx || y < 0 || y >= ny) {
        throw Error(ErrorCode::InvalidArgument, "pixel index out of range",
                    {{"x", std::to_string(x)}, {"y", std::to_string(y)}});
    }
    const size_t base = offset(x, y);
    std::vector<double> um(axis_nm.size()), intensity(axis_nm.size());
    for (size_t k = 0; k < axis_nm.size(); ++k) {
        um[k] = axis_nm[k] / 1e3;
        intensity[k] = static_cast<double>(data[base + k]);
    }
    return Spectrum(std::move(um), std::move(intensity));
}

void HyperspectralCube::validate() const {
    if (nx <= 0 || ny <= 0 || axis_nm.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "cube dimensions must be positive",
                    {{"nx", std::to_string(nx)},
                     {"ny", std::to_string(ny)},
                     {"n_lambda", std::to_string(axis_nm.size())}});
    }
    for (size_t k = 0; k < axis_nm.size(); ++k) {
        if (!std::isfinite(axis_nm[k]) || (k > 0 && axis_nm[k] <= axis_nm[k - 1])) {
            throw Error(ErrorCode::NonMonotonicAxis,
                        "wavelength axis must be finite and strictly increasing",
                        {{"index", std::to_string(k)}});
        }
    }
    const size_t expected =
        static_cast<size_t>(nx) * static_cast<size_t>(ny) * axis_nm.size();
    if (data.size() != expected) {
        throw Error(ErrorCode::HeaderMismatch, "payload size disagrees with dimensions",
                    {{"expected", std::to_string(expected)},
                     {"actual", std::to_string(data.size())}});
    }
}

HyperspectralCube read_cube(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() < sizeof(kCubeMagic) ||
        std::memcmp(bytes.data(), kCubeMagic, sizeof(kCubeMagic)) != 0) {
        throw Error(ErrorCode::BadMagic, "not a cube file", {{"path", path}});
    }
    const size_t header_start = sizeof(kCubeMagic);
    const size_t nul = bytes.find('\0', header_start);
    if (nul == std::string::npos) {
        throw Error(ErrorCode::HeaderMismatch, "unterminated header", {{"path", path}});
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(header_start, nul - header_start));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::HeaderMismatch, std::string("bad header JSON: ") + e.what(),
                    {{"path", path}});
    }
    HyperspectralCube cube;
    try {
        cube.nx = header.at("nx").get<int>();
        cube.ny = header.at("ny").get<int>();
        const auto n_lambda = header.at("n_lambda").get<size_t>();
        const auto& axis = header.at("lambda_nm");
        if (axis.is_array()) {
            cube.axis_nm = axis.get<std::vector<double>>();
        } else if (axis.is_object()) {
            const double lambda0 = axis.at("lambda0_nm").get<double>();
            const double dlambda = axis.at("dlambda_nm").get<double>();
            cube.axis_nm.resize(n_lambda);
            for (size_t k = 0; k < n_lambda; ++k) {
                cube.axis_nm[k] = lambda0 + static_cast<double>(k) * dlambda;
            }
        } else {
            throw Error(ErrorCode::HeaderMismatch, "lambda_nm must be array or object",
                        {{"path", path}});
        }
        if (cube.axis_nm.size() != n_lambda) {
            throw Error(ErrorCode::HeaderMismatch, "n_lambda disagrees with lambda_nm",
                        {{"n_lambda", std::to_string(n_lambda)},
                         {"axis_len", std::to_string(cube.axis_nm.size())}});
        }
        cube.pixel_pitch = Length::um(header.at("pixel_pitch_um").get<double>());
        const auto& origin = header.at("origin_um");
        cube.origin_x_um = origin.at(0).get<double>();
        cube.origin_y_um = origin.at(1).get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::HeaderMismatch, std::string("missing header field: ") + e.what(),
                    {{"path", path}});
    }
    const size_t payload_start = nul + 1;
    const size_t payload_bytes = bytes.size() - payload_start;
    const size_t expected =
        static_cast<size_t>(cube.nx) * static_cast<size_t>(cube.ny) * cube.axis_nm.size();
    if (payload_bytes != expected * 4) {
        throw Error(ErrorCode::HeaderMismatch, "payload size disagrees with header",
                    {{"expected_bytes", std::to_string(expected * 4)},
                     {"actual_bytes", std::to_string(payload_bytes)}});
    }
    cube.data.resize(expected);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + payload_start);
    for (size_t i = 0; i < expected; ++i) cube.data[i] = get_f32_le(p + 4 * i);
    cube.validate();
    return cube;
}

void write_cube(const HyperspectralCube& cube, const std::string& path) {
    cube.validate();
    nlohmann::json header;
    header["nx"] = cube.nx;
    header["ny"] = cube.ny;
    header["n_lambda"] = cube.axis_nm.size();
    header["lambda_nm"] = cube.axis_nm;
    header["pixel_pitch_um"] = cube.pixel_pitch.um();
    header["origin_um"] = {cube.origin_x_um, cube.origin_y_um};
    std::string bytes(kCubeMagic, sizeof(kCubeMagic));
    bytes += header.dump();
    bytes.push_back('\0');
    bytes.reserve(bytes.size() + cube.data.size() * 4);
    for (float v : cube.data) put_f32_le(bytes, v);
    write_file_bytes(path, bytes);
}

HyperspectralCube cube_from_long_csv(const std::string& path, Length pixel_pitch,
                                     double origin_x_um, double origin_y_um) {
    ResultTable t = read_table_csv(path);
    auto cx = t.column("x_idx");
    auto cy = t.column("y_idx");
    auto cl = t.column("lambda_nm");
    auto ci = t.column("intensity");
    if (!cx || !cy || !cl || !ci) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "expected columns x_idx, y_idx, lambda_nm, intensity", {{"path", path}});
    }
    int nx = 0, ny = 0;
    std::map<double, size_t> axis_index;
    for (size_t r = 0; r < t.rows(); ++r) {
        nx = std::max(nx, static_cast<int>(t.numeric_at(r, *cx)) + 1);
        ny = std::max(ny, static_cast<int>(t.numeric_at(r, *cy)) + 1);
        axis_index.emplace(t.numeric_at(r, *cl), 0);
    }
    HyperspectralCube cube;
    cube.nx = nx;
    cube.ny = ny;
    cube.pixel_pitch = pixel_pitch;
    cube.origin_x_um = origin_x_um;
    cube.origin_y_um = origin_y_um;
    cube.axis_nm.reserve(axis_index.size());
    for (auto& [nm, idx] : axis_index) {
        idx = cube.axis_nm.size();
        cube.axis_nm.push_back(nm);
    }
    const size_t total =
        static_cast<size_t>(nx) * static_cast<size_t>(ny) * cube.axis_nm.size();
    if (t.rows() != total) {
        throw Error(ErrorCode::HeaderMismatch, "long CSV does not cover the full grid",
                    {{"rows", std::to_string(t.rows())}, {"expected", std::to_string(total)}});
    }
    cube.data.assign(total, std::numeric_limits<float>::quiet_NaN());
    for (size_t r = 0; r < t.rows(); ++r) {
        const int x = static_cast<int>(t.numeric_at(r, *cx));
        const int y = static_cast<int>(t.numeric_at(r, *cy));
        if (x < 0 || x >= nx || y < 0 || y >= ny) {
            throw Error(ErrorCode::HeaderMismatch, "negative pixel index",
                        {{"row", std::to_string(r)}});
        }
        const size_t k = axis_index.at(t.numeric_at(r, *cl));
        float& slot = cube.data[cube.offset(x, y) + k];
        if (!std::isnan(slot)) {
            throw Error(ErrorCode::HeaderMismatch, "duplicate (x, y, lambda) sample",
                        {{"row", std::to_string(r)}});
        }
        slot = static_cast<float>(t.numeric_at(r, *ci));
    }
    for (float v : cube.data) {
        if (std::isnan(v)) {
            throw Error(ErrorCode::HeaderMismatch, "long CSV does not cover the full grid",
                        {{"path", path}});
        }
    }
    cube.validate();
    return cube;
}

// ---- images ----------------------------------------------------------------

namespace {

void apply_sidecar_or_override(GrayImage& img, const std::string& path,
                               std::optional<double> scale_override) {
    if (scale_override) {
        require_positive(*scale_override, "scale_nm_per_px");
        img.scale_nm_per_px = *scale_override;
    }
    const std::string sidecar = path + ".meta.json";
    if (std::filesystem::exists(sidecar)) {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(read_file_bytes(sidecar));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::UnsupportedFormat,
                        std::string("bad sidecar JSON: ") + e.what(), {{"path", sidecar}});
        }
        if (!scale_override && meta.contains("scale_nm_per_px")) {
            img.scale_nm_per_px = meta["scale_nm_per_px"].get<double>();
            require_positive(img.scale_nm_per_px, "scale_nm_per_px");
        }
        if (meta.contains("tilt_deg")) img.tilt_deg = meta["tilt_deg"].get<double>();
    }
    if (!img.has_scale()) {
        throw Error(ErrorCode::MissingScale,
                    "no pixel scale: provide a sidecar or an explicit override",
                    {{"path", path}});
    }
}

GrayImage read_pgm(const std::string& bytes, const std::string& path) {
    size_t pos = 2;  // past "P5"
    auto next_token = [&]() -> std::string {
        while (pos < bytes.size()) {
            char c = bytes[pos];
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                break;
            }
        }
        size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    long long w = 0, h = 0, maxval = 0;
    if (!detail::parse_int(next_token(), w) || !detail::parse_int(next_token(), h) ||
        !detail::parse_int(next_token(), maxval)) {
        throw Error(ErrorCode::UnsupportedFormat, "bad PGM header", {{"path", path}});
    }
    if (w <= 0 || h <= 0) {
        throw Error(ErrorCode::UnsupportedFormat, "bad PGM dimensions", {{"path", path}});
    }
    if (maxval != 255) {
        throw Error(ErrorCode::UnsupportedFormat, "only 8-bit PGM is supported",
                    {{"maxval", std::to_string(maxval)}, {"path", path}});
    }
    ++pos;  // single whitespace after maxval
    const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h);
    if (bytes.size() - pos < need) {
        throw Error(ErrorCode::HeaderMismatch, "PGM payload truncated", {{"path", path}});
    }
    GrayImage img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.pixels.assign(bytes.begin() + static_cast<long>(pos),
                      bytes.begin() + static_cast<long>(pos + need));
    return img;
}

uint32_t get_u32_be(const unsigned char* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void put_u32_be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

GrayImage read_png(const std::string& bytes, const std::string& path) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    size_t pos = 8;
    uint32_t width = 0, height = 0;
    int bit_depth = -1, color_type = -1;
    std::string idat;
    bool saw_iend = false;
    while (pos + 8 <= bytes.size() && !saw_iend) {
        const uint32_t len = get_u32_be(p + pos);
        if (pos + 12 + static_cast<size_t>(len) > bytes.size()) {
            throw Error(ErrorCode::HeaderMismatch, "PNG chunk truncated", {{"path", path}});
        }
        const std::string type(bytes, pos + 4, 4);
        const unsigned char* chunk = p + pos + 8;
        if (type == "IHDR") {
            if (len != 13) {
                throw Error(ErrorCode::HeaderMismatch, "bad IHDR length", {{"path", path}});
            }
            width = get_u32_be(chunk);
            height = get_u32_be(chunk + 4);
            bit_depth = chunk[8];
            color_type = chunk[9];
            const int compression = chunk[10], filter = chunk[11], interlace = chunk[12];
            if (color_type != 0 || bit_depth != 8) {
                throw Error(ErrorCode::UnsupportedFormat,
                            "only 8-bit grayscale PNG is supported",
                            {{"bit_depth", std::to_string(bit_depth)},
                             {"color_type", std::to_string(color_type)},
                             {"path", path}});
            }
            if (compression != 0 || filter != 0 || interlace != 0) {
                throw Error(ErrorCode::UnsupportedFormat, "unsupported PNG encoding",
                            {{"path", path}});
            }
        } else if (type == "IDAT") {
            idat.append(reinterpret_cast<const char*>(chunk), len);
        } else if (type == "IEND") {
            saw_iend = true;
        }
        pos += 12 + static_cast<size_t>(len);
    }
    if (bit_depth < 0 || !saw_iend || width == 0 || height == 0) {
        throw Error(ErrorCode::HeaderMismatch, "incomplete PNG", {{"path", path}});
    }
    const size_t stride = static_cast<size_t>(width) + 1;  // filter byte + row
    std::vector<unsigned char> raw(stride * height);
    uLongf dest_len = static_cast<uLongf>(raw.size());
    const int rc = uncompress(raw.data(), &dest_len,
                              reinterpret_cast<const Bytef*>(idat.data()),
                              static_cast<uLong>(idat.size()));
    if (rc != Z_OK || dest_len != raw.size()) {
        throw Error(ErrorCode::HeaderMismatch, "PNG inflate failed",
                    {{"zlib_rc", std::to_string(rc)}, {"path", path}});
    }
    GrayImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.pixels.resize(static_cast<size_t>(width) * height);
    auto paeth = [](int a, int b, int c) {
        const int pa = std::abs(b - c), pb = std::abs(a - c), pc = std::abs(a + b - 2 * c);
        if (pa <= pb && pa <= pc) return a;
        return pb <= pc ? b : c;
    };
    for (uint32_t y = 0; y < height; ++y) {
        const unsigned char filter = raw[y * stride];
        const unsigned char* src = raw.data() + y * stride + 1;
        unsigned char* dst = img.pixels.data() + static_cast<size_t>(y) * width;
        const unsigned char* up =
            y ? img.pixels.data() + static_cast<size_t>(y - 1) * width : nullptr;
        for (uint32_t x = 0; x < width; ++x) {
            const int a = x ? dst[x - 1] : 0;
            const int b = up ? up[x] : 0;
            const int c = (x && up) ? up[x - 1] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default:
                    throw Error(ErrorCode::UnsupportedFormat, "unknown PNG row filter",
                                {{"filter", std::to_string(filter)}, {"path", path}});
            }
            dst[x] = static_cast<unsigned char>(v & 0xff);
        }
    }
    return img;
}

} // namespace

GrayImage read_gray_image(const std::string& path,
                          std::optional<double> scale_override_nm_per_px) {
    const std::string bytes = read_file_bytes(path);
    GrayImage img;
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
        img = read_pgm(bytes, path);
    } else if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
        img = read_png(bytes, path);
    } else {
        throw Error(ErrorCode::BadMagic, "not a PGM or PNG image", {{"path", path}});
    }
    apply_sidecar_or_override(img, path, scale_override_nm_per_px);
    return img;
}

void write_pgm(const GrayImage& image, const std::string& path) {
    std::string bytes = "P5\n" + std::to_string(image.width) + " " +
                        std::to_string(image.height) + "\n255\n";
    bytes.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    write_file_bytes(path, bytes);
}

void write_png_gray8(const GrayImage& image, const std::string& path) {
    const size_t stride = static_cast<size_t>(image.width) + 1;
    std::vector<unsigned char> raw(stride * image.height, 0);
    for (int y = 0; y < image.height; ++y) {
        std::memcpy(raw.data() + static_cast<size_t>(y) * stride + 1,
                    image.pixels.data() + static_cast<size_t>(y) * image.width,
                    static_cast<size_t>(image.width));
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) !=
        Z_OK) {
        throw Error(ErrorCode::IoFailure, "PNG deflate failed", {{"path", path}});
    }
    compressed.resize(bound);

    std::string out(reinterpret_cast<const char*>(kPngSig), 8);
    auto chunk = [&out](const char* type, const std::string& payload) {
        put_u32_be(out, static_cast<uint32_t>(payload.size()));
        const size_t crc_start = out.size();
        out.append(type, 4);
        out += payload;
        const uLong crc = crc32(0, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                                static_cast<uInt>(out.size() - crc_start));
        put_u32_be(out, static_cast<uint32_t>(crc));
    };
    std::string ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(image.width));
    put_u32_be(ihdr, static_cast<uint32_t>(image.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(0);   // grayscale
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // no interlace
    chunk("IHDR", ihdr);
    chunk("IDAT", std::string(reinterpret_cast<const char*>(compressed.data()),
                              compressed.size()));
    chunk("IEND", "");
    write_file_bytes(path, out);
}

void write_image_sidecar(const GrayImage& image, const std::string& path) {
    nlohmann::json meta;
    meta["scale_nm_per_px"] = image.scale_nm_per_px;
    if (image.tilt_deg) meta["tilt_deg"] = *image.tilt_deg;
    write_file_bytes(path + ".meta.json", meta.dump() + "\n");
}

} // namespace qmc
