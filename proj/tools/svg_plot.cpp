// Deterministic SVG rendering for the command-line front end. No
// timestamps and no locale dependence: every coordinate is fixed-width
// and every data value is shortest-round-trip, so identical inputs give
// identical bytes.

#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cli_util.hpp"

namespace cli {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    double span() const { return hi - lo; }
};

Range finite_range(const std::vector<double>& v) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double t : v) {
        if (!std::isfinite(t)) continue;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    if (lo > hi) return {0.0, 1.0};
    if (lo == hi) return {lo - 0.5, hi + 0.5};
    return {lo, hi};
}

Range padded(Range r, double frac) {
    const double pad = r.span() * frac;
    return {r.lo - pad, r.hi + pad};
}

// 1/2/5 tick steps; ticks land on integer multiples of the step so the
// labels stay short.
double nice_step(double span, int target) {
    const double raw = span / std::max(1, target - 1);
    const int expv = static_cast<int>(std::floor(std::log10(raw)));
    const double base = std::pow(10.0, expv);
    const double f = raw / base;
    double nf = 10.0;
    if (f < 1.5) {
        nf = 1.0;
    } else if (f < 3.0) {
        nf = 2.0;
    } else if (f < 7.0) {
        nf = 5.0;
    }
    return nf * base;
}

struct Ticks {
    std::vector<double> values;
    int places = 0;
};

Ticks make_ticks(const Range& r, int target) {
    Ticks out;
    const double step = nice_step(r.span(), target);
    if (!(step > 0.0) || !std::isfinite(step)) {
        out.values.push_back(r.lo);
        return out;
    }
    out.places = step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step) - 1e-9));
    const auto k0 = static_cast<long long>(std::ceil(r.lo / step - 1e-9));
    const auto k1 = static_cast<long long>(std::floor(r.hi / step + 1e-9));
    for (long long k = k0; k <= k1; ++k) out.values.push_back(step * static_cast<double>(k));
    if (out.values.empty()) out.values.push_back(r.lo);
    return out;
}

// Plot frame in page coordinates; y_down flips the vertical axis for
// image-style rasters.
struct Frame {
    double l, r, t, b;
    Range rx, ry;
    bool y_down = false;

    double px(double x) const { return l + (x - rx.lo) / rx.span() * (r - l); }
    double py(double y) const {
        const double f = (y - ry.lo) / ry.span();
        return y_down ? t + f * (b - t) : b - f * (b - t);
    }
};

std::string pt(double v) { return fmt_fixed(v, 2); }

struct Rgb {
    int r, g, b;
};

std::string hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

// Five-stop approximation of a perceptually ordered dark-to-bright ramp.
Rgb value_color(double t) {
    static constexpr double stop_t[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    static constexpr int stop_c[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    t = std::clamp(t, 0.0, 1.0);
    int i = 0;
    while (i < 3 && t > stop_t[i + 1]) ++i;
    const double f = (t - stop_t[i]) / (stop_t[i + 1] - stop_t[i]);
    auto lerp = [&](int k) {
        return static_cast<int>(std::lround(stop_c[i][k] + f * (stop_c[i + 1][k] - stop_c[i][k])));
    };
    return {lerp(0), lerp(1), lerp(2)};
}

void draw_axes(std::ostringstream& svg, const Frame& fr, const std::string& x_label,
               const std::string& y_label) {
    const Ticks tx = make_ticks(fr.rx, 6);
    const Ticks ty = make_ticks(fr.ry, 6);
    for (double v : tx.values) {
        const std::string x = pt(fr.px(v));
        svg << "<line x1=\"" << x << "\" y1=\"" << pt(fr.t) << "\" x2=\"" << x << "\" y2=\""
            << pt(fr.b) << "\" stroke=\"#e4e4e4\" stroke-width=\"1\"/>\n";
        svg << "<line x1=\"" << x << "\" y1=\"" << pt(fr.b) << "\" x2=\"" << x << "\" y2=\""
            << pt(fr.b + 5) << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << pt(fr.b + 18)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\" "
               "text-anchor=\"middle\">"
            << fmt_fixed(v, tx.places) << "</text>\n";
    }
    for (double v : ty.values) {
        const std::string y = pt(fr.py(v));
        svg << "<line x1=\"" << pt(fr.l) << "\" y1=\"" << y << "\" x2=\"" << pt(fr.r)
            << "\" y2=\"" << y << "\" stroke=\"#e4e4e4\" stroke-width=\"1\"/>\n";
        svg << "<line x1=\"" << pt(fr.l - 5) << "\" y1=\"" << y << "\" x2=\"" << pt(fr.l)
            << "\" y2=\"" << y << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << pt(fr.l - 8) << "\" y=\"" << pt(fr.py(v) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\" "
               "text-anchor=\"end\">"
            << fmt_fixed(v, ty.places) << "</text>\n";
    }
    svg << "<rect x=\"" << pt(fr.l) << "\" y=\"" << pt(fr.t) << "\" width=\"" << pt(fr.r - fr.l)
        << "\" height=\"" << pt(fr.b - fr.t)
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << pt((fr.l + fr.r) / 2) << "\" y=\"" << pt(fr.b + 38)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#111111\" "
           "text-anchor=\"middle\">"
        << xml_escape(x_label) << "</text>\n";
    svg << "<text x=\"16\" y=\"" << pt((fr.t + fr.b) / 2)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#111111\" "
           "text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << pt((fr.t + fr.b) / 2) << ")\">" << xml_escape(y_label) << "</text>\n";
}

// Polyline over consecutive finite points; non-finite values break the
// path into separate segments.
void draw_line(std::ostringstream& svg, const Frame& fr, const std::vector<double>& x,
               const std::vector<double>& y, const char* color) {
    std::string d;
    bool open = false;
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
            open = false;
            continue;
        }
        d += open ? " L " : (d.empty() ? "M " : " M ");
        d += pt(fr.px(x[i]));
        d += ' ';
        d += pt(fr.py(y[i]));
        open = true;
    }
    if (d.empty()) return;
    svg << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
}

void draw_markers(std::ostringstream& svg, const Frame& fr, const std::vector<double>& x,
                  const std::vector<double>& y, double radius, const std::string& fill) {
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        svg << "<circle class=\"mark\" cx=\"" << pt(fr.px(x[i])) << "\" cy=\"" << pt(fr.py(y[i]))
            << "\" r=\"" << fmt_fixed(radius, 1) << "\" fill=\"" << fill
            << "\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
    }
}

void draw_footer(std::ostringstream& svg, const std::string& provenance) {
    const std::string text = xml_escape(provenance);
    constexpr size_t kLine = 110;
    double y = kHeight - 32.0;
    for (size_t off = 0, line = 0; off < text.size() && line < 3; off += kLine, ++line) {
        svg << "<text x=\"16\" y=\"" << pt(y)
            << "\" font-family=\"monospace\" font-size=\"9\" fill=\"#666666\">"
            << text.substr(off, kLine) << "</text>\n";
        y += 11.0;
    }
}

void draw_map(std::ostringstream& svg, Frame& fr, const PlotData& d) {
    fr.y_down = true;
    fr.rx = {0.0, static_cast<double>(d.map_nx)};
    fr.ry = {0.0, static_cast<double>(d.map_ny)};
    Range vr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double v : d.cells) {
        if (!std::isfinite(v)) continue;
        vr.lo = std::min(vr.lo, v);
        vr.hi = std::max(vr.hi, v);
    }
    for (double v : d.mark_value) {
        if (!std::isfinite(v)) continue;
        vr.lo = std::min(vr.lo, v);
        vr.hi = std::max(vr.hi, v);
    }
    const bool has_values = vr.lo <= vr.hi;
    if (!has_values) vr = {0.0, 1.0};
    auto norm = [&](double v) {
        return vr.hi > vr.lo ? (v - vr.lo) / (vr.hi - vr.lo) : 0.5;
    };

    const double cw = (fr.r - fr.l) / d.map_nx;
    const double ch = (fr.b - fr.t) / d.map_ny;
    for (int yy = 0; yy < d.map_ny; ++yy) {
        for (int xx = 0; xx < d.map_nx; ++xx) {
            const double v = d.cells[static_cast<size_t>(yy) * d.map_nx + xx];
            const std::string fill = std::isfinite(v) ? hex(value_color(norm(v))) : "#eeeeee";
            svg << "<rect class=\"cell\" x=\"" << pt(fr.l + xx * cw) << "\" y=\""
                << pt(fr.t + yy * ch) << "\" width=\"" << pt(cw) << "\" height=\"" << pt(ch)
                << "\" fill=\"" << fill << "\"/>\n";
        }
    }
    for (size_t i = 0; i < d.mark_x.size(); ++i) {
        const double v = i < d.mark_value.size() ? d.mark_value[i] : vr.lo;
        svg << "<circle class=\"mark\" cx=\"" << pt(fr.px(d.mark_x[i])) << "\" cy=\""
            << pt(fr.py(d.mark_y[i])) << "\" r=\"2.5\" fill=\"" << hex(value_color(norm(v)))
            << "\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
    }

    // Colorbar: top = max value.
    const double cb_x = fr.r + 20.0;
    const double cb_w = 12.0;
    constexpr int kBands = 32;
    const double band_h = (fr.b - fr.t) / kBands;
    for (int i = 0; i < kBands; ++i) {
        const double tt = 1.0 - (i + 0.5) / kBands;
        svg << "<rect x=\"" << pt(cb_x) << "\" y=\"" << pt(fr.t + i * band_h) << "\" width=\""
            << pt(cb_w) << "\" height=\"" << pt(band_h + 0.5) << "\" fill=\""
            << hex(value_color(tt)) << "\"/>\n";
    }
    svg << "<rect x=\"" << pt(cb_x) << "\" y=\"" << pt(fr.t) << "\" width=\"" << pt(cb_w)
        << "\" height=\"" << pt(fr.b - fr.t)
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    if (has_values) {
        svg << "<text x=\"" << pt(cb_x + cb_w + 4) << "\" y=\"" << pt(fr.t + 10)
            << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333333\">"
            << fmt_sig(vr.hi, 6) << "</text>\n";
        svg << "<text x=\"" << pt(cb_x + cb_w + 4) << "\" y=\"" << pt(fr.b)
            << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333333\">"
            << fmt_sig(vr.lo, 6) << "</text>\n";
    }
    if (!d.value_label.empty()) {
        svg << "<text x=\"" << pt(cb_x) << "\" y=\"" << pt(fr.t - 8)
            << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333333\">"
            << xml_escape(d.value_label) << "</text>\n";
    }
    draw_axes(svg, fr, d.x_label, d.y_label);
}

void draw_histogram(std::ostringstream& svg, Frame& fr, const PlotData& d) {
    std::vector<double> samples;
    samples.reserve(d.x.size());
    for (double v : d.x) {
        if (std::isfinite(v)) samples.push_back(v);
    }
    const Range xr = finite_range(samples);
    const int nb = d.bins > 0
                       ? d.bins
                       : std::max<int>(1, static_cast<int>(std::lround(std::sqrt(
                             static_cast<double>(std::max<size_t>(1, samples.size()))))));
    std::vector<long long> counts(static_cast<size_t>(nb), 0);
    for (double v : samples) {
        auto bin = static_cast<long long>((v - xr.lo) / xr.span() * nb);
        bin = std::clamp<long long>(bin, 0, nb - 1);
        ++counts[static_cast<size_t>(bin)];
    }
    long long peak = 1;
    for (long long c : counts) peak = std::max(peak, c);
    fr.rx = xr;
    fr.ry = {0.0, static_cast<double>(peak) * 1.05};
    draw_axes(svg, fr, d.x_label, d.y_label);
    for (int i = 0; i < nb; ++i) {
        const double e0 = xr.lo + xr.span() * i / nb;
        const double e1 = xr.lo + xr.span() * (i + 1) / nb;
        const double top = fr.py(static_cast<double>(counts[static_cast<size_t>(i)]));
        svg << "<rect class=\"bar\" x=\"" << pt(fr.px(e0)) << "\" y=\"" << pt(top)
            << "\" width=\"" << pt(fr.px(e1) - fr.px(e0)) << "\" height=\"" << pt(fr.b - top)
            << "\" fill=\"#4c78a8\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n";
    }
}

}  // namespace

void emit_plot(const PlotData& d, const std::string& path) {
    const bool is_map = d.kind == PlotKind::Map;
    if (is_map ? (d.map_nx <= 0 || d.map_ny <= 0 ||
                  d.cells.size() != static_cast<size_t>(d.map_nx) * static_cast<size_t>(d.map_ny))
               : d.x.empty()) {
        fail(2, "plot data is empty");
    }

    Frame fr;
    fr.l = 70.0;
    fr.r = kWidth - (is_map ? 96.0 : 24.0);
    fr.t = 44.0;
    fr.b = kHeight - 96.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
           "viewBox=\"0 0 720 480\">\n";
    svg << "<rect width=\"720\" height=\"480\" fill=\"#ffffff\"/>\n";
    svg << "<text x=\"" << pt(kWidth / 2) << "\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"15\" fill=\"#111111\" text-anchor=\"middle\">"
        << xml_escape(d.title) << "</text>\n";

    switch (d.kind) {
        case PlotKind::Map:
            draw_map(svg, fr, d);
            break;
        case PlotKind::Histogram:
            draw_histogram(svg, fr, d);
            break;
        case PlotKind::Variogram: {
            const Range xr = finite_range(d.x);
            const Range yr = finite_range(d.y);
            fr.rx = {0.0, std::max(xr.hi, 0.0) * 1.05};
            fr.ry = {0.0, std::max(yr.hi, 0.0) * 1.05};
            if (fr.rx.span() <= 0.0) fr.rx = {0.0, 1.0};
            if (fr.ry.span() <= 0.0) fr.ry = {0.0, 1.0};
            draw_axes(svg, fr, d.x_label, d.y_label);
            draw_line(svg, fr, d.x, d.y, "#1f77b4");
            draw_markers(svg, fr, d.x, d.y, 3.0, "#1f77b4");
            break;
        }
        case PlotKind::Spectrum:
        case PlotKind::Trajectory: {
            fr.rx = finite_range(d.x);
            fr.ry = padded(finite_range(d.y), 0.05);
            draw_axes(svg, fr, d.x_label, d.y_label);
            draw_line(svg, fr, d.x, d.y, "#1f77b4");
            if (d.kind == PlotKind::Trajectory) {
                draw_markers(svg, fr, d.x, d.y, 2.5, "#1f77b4");
            } else {
                draw_markers(svg, fr, d.mark_x, d.mark_y, 3.0, "#d62728");
            }
            break;
        }
    }

    draw_footer(svg, d.provenance);
    svg << "</svg>\n";

    std::ofstream f(path, std::ios::binary);
    if (!f) fail(3, "cannot open " + path + " for writing");
    f << svg.str();
    f.flush();
    if (!f) fail(3, "failed writing " + path);
}

}  // namespace cli
