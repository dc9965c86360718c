#include <charconv>
#include <cmath>
#include <system_error>

#include "csv_internal.hpp"
#include "qmc/io.hpp"

namespace qmc {

namespace detail {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_open = false;  // true once the current record has any content
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field.push_back(c);
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                field_open = true;
                ++i;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_open = true;
                ++i;
                break;
            case '\r':
                ++i;
                break;
            case '\n':
                if (field_open || !field.empty() || !row.empty()) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                    field_open = false;
                }
                ++i;
                break;
            default:
                field.push_back(c);
                field_open = true;
                ++i;
                break;
        }
    }
    if (field_open || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

bool parse_real(const std::string& text, double& out) {
    const char* b = text.data();
    const char* e = b + text.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

bool parse_int(const std::string& text, long long& out) {
    const char* b = text.data();
    const char* e = b + text.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e;
}

} // namespace detail

std::string format_real17(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                   std::chars_format::general, 17);
    return std::string(buf, ptr);
}

bool parse_real_strict(const std::string& text, double& out) {
    return detail::parse_real(text, out);
}

ResultTable::ResultTable(std::vector<std::pair<std::string, Type>> schema) {
    for (auto& [name, type] : schema) {
        names_.push_back(name);
        types_.push_back(type);
        switch (type) {
            case Type::Int:
                storage_.push_back(int_cols_.size());
                int_cols_.emplace_back();
                break;
            case Type::Real:
                storage_.push_back(real_cols_.size());
                real_cols_.emplace_back();
                break;
            case Type::Text:
                storage_.push_back(text_cols_.size());
                text_cols_.emplace_back();
                break;
        }
    }
}

void ResultTable::append_row(const std::vector<Cell>& cells) {
    if (cells.size() != names_.size()) {
        throw Error(ErrorCode::InvalidArgument, "row width mismatch",
                    {{"expected", std::to_string(names_.size())},
                     {"got", std::to_string(cells.size())}});
    }
    for (size_t c = 0; c < cells.size(); ++c) {
        switch (types_[c]) {
            case Type::Int:
                int_cols_[storage_[c]].push_back(std::get<int64_t>(cells[c]));
                break;
            case Type::Real: {
                // Accept int cells in real columns for convenience.
                double v = std::holds_alternative<int64_t>(cells[c])
                               ? static_cast<double>(std::get<int64_t>(cells[c]))
                               : std::get<double>(cells[c]);
                real_cols_[storage_[c]].push_back(v);
                break;
            }
            case Type::Text:
                text_cols_[storage_[c]].push_back(std::get<std::string>(cells[c]));
                break;
        }
    }
    ++rows_;
}

std::optional<size_t> ResultTable::column(const std::string& name) const {
    for (size_t c = 0; c < names_.size(); ++c) {
        if (names_[c] == name) return c;
    }
    return std::nullopt;
}

int64_t ResultTable::int_at(size_t row, size_t col) const {
    return int_cols_[storage_[col]][row];
}

double ResultTable::real_at(size_t row, size_t col) const {
    return real_cols_[storage_[col]][row];
}

const std::string& ResultTable::text_at(size_t row, size_t col) const {
    return text_cols_[storage_[col]][row];
}

double ResultTable::numeric_at(size_t row, size_t col) const {
    if (types_[col] == Type::Int) return static_cast<double>(int_at(row, col));
    if (types_[col] == Type::Real) return real_at(row, col);
    throw Error(ErrorCode::InvalidArgument, "column is not numeric",
                {{"column", names_[col]}});
}

std::string table_to_csv(const ResultTable& table) {
    std::string out;
    for (size_t c = 0; c < table.cols(); ++c) {
        if (c) out.push_back(',');
        out += detail::csv_escape(table.name(c));
    }
    out.push_back('\n');
    for (size_t r = 0; r < table.rows(); ++r) {
        for (size_t c = 0; c < table.cols(); ++c) {
            if (c) out.push_back(',');
            switch (table.type(c)) {
                case ResultTable::Type::Int:
                    out += std::to_string(table.int_at(r, c));
                    break;
                case ResultTable::Type::Real: {
                    double v = table.real_at(r, c);
                    if (!std::isnan(v)) out += format_real17(v);
                    // null -> empty field
                    break;
                }
                case ResultTable::Type::Text:
                    out += detail::csv_escape(table.text_at(r, c));
                    break;
            }
        }
        out.push_back('\n');
    }
    return out;
}

namespace {

void json_escape_into(std::string& out, const std::string& s) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
}

} // namespace

std::string table_to_json(const ResultTable& table) {
    std::string out = "[";
    for (size_t r = 0; r < table.rows(); ++r) {
        out += r ? ",\n " : "\n ";
        out.push_back('{');
        for (size_t c = 0; c < table.cols(); ++c) {
            if (c) out.push_back(',');
            json_escape_into(out, table.name(c));
            out.push_back(':');
            switch (table.type(c)) {
                case ResultTable::Type::Int:
                    out += std::to_string(table.int_at(r, c));
                    break;
                case ResultTable::Type::Real: {
                    double v = table.real_at(r, c);
                    if (std::isnan(v)) out += "null";
                    else out += format_real17(v);
                    break;
                }
                case ResultTable::Type::Text:
                    json_escape_into(out, table.text_at(r, c));
                    break;
            }
        }
        out.push_back('}');
    }
    out += "\n]\n";
    return out;
}

void write_table_csv(const ResultTable& table, const std::string& path) {
    write_file_bytes(path, table_to_csv(table));
}

void write_table_json(const ResultTable& table, const std::string& path) {
    write_file_bytes(path, table_to_json(table));
}

ResultTable read_table_csv(const std::string& path) {
    auto rows = detail::parse_csv(read_file_bytes(path));
    if (rows.empty()) {
        throw Error(ErrorCode::UnsupportedFormat, "CSV has no header row", {{"path", path}});
    }
    const auto& header = rows.front();
    const size_t ncol = header.size();
    // Infer the narrowest type that fits every non-empty cell of a column.
    std::vector<ResultTable::Type> types(ncol, ResultTable::Type::Int);
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != ncol) {
            throw Error(ErrorCode::UnsupportedFormat, "ragged CSV row",
                        {{"row", std::to_string(r)}, {"path", path}});
        }
        for (size_t c = 0; c < ncol; ++c) {
            const std::string& cell = rows[r][c];
            if (cell.empty()) {
                // Treat empty as a null real unless the column is already text.
                if (types[c] == ResultTable::Type::Int) types[c] = ResultTable::Type::Real;
                continue;
            }
            long long iv;
            double dv;
            if (types[c] == ResultTable::Type::Int && !detail::parse_int(cell, iv)) {
                types[c] = ResultTable::Type::Real;
            }
            if (types[c] == ResultTable::Type::Real && !detail::parse_real(cell, dv)) {
                types[c] = ResultTable::Type::Text;
            }
        }
    }
    std::vector<std::pair<std::string, ResultTable::Type>> schema;
    for (size_t c = 0; c < ncol; ++c) schema.emplace_back(header[c], types[c]);
    ResultTable table(std::move(schema));
    for (size_t r = 1; r < rows.size(); ++r) {
        std::vector<ResultTable::Cell> cells;
        cells.reserve(ncol);
        for (size_t c = 0; c < ncol; ++c) {
            const std::string& cell = rows[r][c];
            switch (types[c]) {
                case ResultTable::Type::Int: {
                    long long iv = 0;
                    detail::parse_int(cell, iv);
                    cells.emplace_back(static_cast<int64_t>(iv));
                    break;
                }
                case ResultTable::Type::Real: {
                    double dv = std::numeric_limits<double>::quiet_NaN();
                    if (!cell.empty()) detail::parse_real(cell, dv);
                    cells.emplace_back(dv);
                    break;
                }
                case ResultTable::Type::Text:
                    cells.emplace_back(cell);
                    break;
            }
        }
        table.append_row(cells);
    }
    return table;
}

Spectrum read_spectrum_csv(const std::string& path) {
    ResultTable t = read_table_csv(path);
    auto wl = t.column("wavelength_nm");
    auto in = t.column("intensity");
    size_t cw = wl ? *wl : 0;
    size_t ci = in ? *in : 1;
    if (t.cols() < 2 || (!wl != !in)) {
        throw Error(ErrorCode::UnsupportedFormat,
                    "expected wavelength_nm and intensity columns", {{"path", path}});
    }
    std::vector<double> nm(t.rows()), y(t.rows());
    for (size_t r = 0; r < t.rows(); ++r) {
        nm[r] = t.numeric_at(r, cw);
        y[r] = t.numeric_at(r, ci);
    }
    return Spectrum::from_nm(nm, std::move(y), {{"source", path}});
}

} // namespace qmc
