#include "qmc/sem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qmc/mc.hpp"

namespace qmc {
namespace {

constexpr double kPi = std::numbers::pi;

void validate_image(const GrayImage& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<size_t>(img.width) * img.height)
        throw Error(ErrorCode::InvalidArgument, "image dimensions do not match pixel buffer",
                    {{"width", std::to_string(img.width)}, {"height", std::to_string(img.height)}});
    if (img.width < 32 || img.height < 32)
        throw Error(ErrorCode::ImageTooSmall, "image smaller than 32x32",
                    {{"width", std::to_string(img.width)}, {"height", std::to_string(img.height)}});
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i / sigma) * (i / sigma));
        k[static_cast<size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

// Separable Gaussian blur with replicate borders.
std::vector<double> blur(const std::vector<double>& src, int w, int h, double sigma) {
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = (static_cast<int>(k.size()) - 1) / 2;
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y) {
        const size_t row = static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += k[static_cast<size_t>(i + radius)] * src[row + xx];
            }
            tmp[row + x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += k[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(yy) * w + x];
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

struct Gradients {
    int w = 0, h = 0;
    std::vector<double> gx, gy, mag;
};

// Gaussian smoothing followed by Scharr derivatives normalized so a unit
// intensity ramp produces a unit gradient.
Gradients smoothed_gradients(const GrayImage& img, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw Error(ErrorCode::InvalidArgument, "denoise_sigma must be positive",
                    {{"sigma", std::to_string(sigma)}});
    const int w = img.width, h = img.height;
    std::vector<double> f(img.pixels.size());
    for (size_t i = 0; i < f.size(); ++i) f[i] = img.pixels[i];
    f = blur(f, w, h, sigma);

    Gradients g;
    g.w = w;
    g.h = h;
    g.gx.resize(f.size());
    g.gy.resize(f.size());
    g.mag.resize(f.size());
    auto at = [&](int x, int y) {
        return f[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx = (3.0 * (at(x + 1, y - 1) - at(x - 1, y - 1)) +
                               10.0 * (at(x + 1, y) - at(x - 1, y)) +
                               3.0 * (at(x + 1, y + 1) - at(x - 1, y + 1))) / 32.0;
            const double gy = (3.0 * (at(x - 1, y + 1) - at(x - 1, y - 1)) +
                               10.0 * (at(x, y + 1) - at(x, y - 1)) +
                               3.0 * (at(x + 1, y + 1) - at(x + 1, y - 1))) / 32.0;
            const size_t i = static_cast<size_t>(y) * w + x;
            g.gx[i] = gx;
            g.gy[i] = gy;
            g.mag[i] = std::hypot(gx, gy);
        }
    }
    return g;
}

// Nearest-rank percentile over the positive magnitudes only: on a quantized
// image, flat regions have exactly zero gradient and would otherwise drag
// every threshold to zero.
std::optional<double> positive_percentile(const std::vector<double>& mag, double pct) {
    std::vector<double> pos;
    pos.reserve(mag.size());
    for (double m : mag)
        if (m > 0.0) pos.push_back(m);
    if (pos.empty()) return std::nullopt;
    std::sort(pos.begin(), pos.end());
    const auto idx = static_cast<size_t>(
        std::llround(pct / 100.0 * static_cast<double>(pos.size() - 1)));
    return pos[std::min(idx, pos.size() - 1)];
}

// One edge pixel as used by the geometry extractors.
struct EdgePoint {
    int x, y;
    double gx, gy, mag;
};

std::vector<EdgePoint> edge_points(const EdgeMap& em) {
    std::vector<EdgePoint> pts;
    for (int y = 0; y < em.height; ++y)
        for (int x = 0; x < em.width; ++x) {
            const size_t i = em.idx(x, y);
            if (em.edges[i])
                pts.push_back({x, y, em.grad_x[i], em.grad_y[i], em.magnitude[i]});
        }
    return pts;
}

double welsch_c_px() { return 2.0; }

} // namespace

EdgeMap preprocess(const GrayImage& image, const PreprocessConfig& cfg) {
    validate_image(image);
    if (!(cfg.canny_low_pct >= 0.0) || !(cfg.canny_high_pct <= 100.0) ||
        !(cfg.canny_low_pct <= cfg.canny_high_pct))
        throw Error(ErrorCode::InvalidArgument, "percentiles must satisfy 0 <= low <= high <= 100",
                    {{"low", std::to_string(cfg.canny_low_pct)},
                     {"high", std::to_string(cfg.canny_high_pct)}});
    const Gradients g = smoothed_gradients(image, cfg.denoise_sigma);
    const int w = g.w, h = g.h;

    EdgeMap em;
    em.width = w;
    em.height = h;
    em.edges.assign(g.mag.size(), 0);
    em.grad_x.resize(g.mag.size());
    em.grad_y.resize(g.mag.size());
    em.magnitude.resize(g.mag.size());
    for (size_t i = 0; i < g.mag.size(); ++i) {
        em.grad_x[i] = static_cast<float>(g.gx[i]);
        em.grad_y[i] = static_cast<float>(g.gy[i]);
        em.magnitude[i] = static_cast<float>(g.mag[i]);
    }

    const auto low = positive_percentile(g.mag, cfg.canny_low_pct);
    if (!low) return em;  // uniform image: no gradient anywhere
    const double lo = *low;
    const double hi = *positive_percentile(g.mag, cfg.canny_high_pct);

    // Non-maximum suppression across the gradient direction, quantized to
    // 4 sectors. A pixel survives if it is no smaller than both directional
    // neighbors and strictly larger than at least one (plateaus keep both
    // boundary pixels, staying within 1 px of the true edge).
    static constexpr int kDx[4] = {1, 1, 0, -1};
    static constexpr int kDy[4] = {0, 1, 1, 1};
    std::vector<uint8_t> crest(g.mag.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const double m = g.mag[i];
            if (m <= 0.0 || m < lo) continue;
            const int sec = ((static_cast<int>(std::lround(std::atan2(g.gy[i], g.gx[i]) /
                                                           (kPi / 4.0))) % 4) + 4) % 4;
            auto neighbor = [&](int sign) {
                const int nx = x + sign * kDx[sec], ny = y + sign * kDy[sec];
                if (nx < 0 || nx >= w || ny < 0 || ny >= h) return 0.0;
                return g.mag[static_cast<size_t>(ny) * w + nx];
            };
            const double a = neighbor(1), b = neighbor(-1);
            if (m >= a && m >= b && (m > a || m > b)) crest[i] = 1;
        }
    }

    // Hysteresis: flood from strong crest pixels through weak ones.
    std::vector<size_t> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (crest[i] && g.mag[i] >= hi && !em.edges[i]) {
                em.edges[i] = 1;
                stack.push_back(i);
                while (!stack.empty()) {
                    const size_t j = stack.back();
                    stack.pop_back();
                    const int jx = static_cast<int>(j % w), jy = static_cast<int>(j / w);
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = jx + dx, ny = jy + dy;
                            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                            const size_t n = static_cast<size_t>(ny) * w + nx;
                            if (!em.edges[n] && crest[n] && g.mag[n] >= lo) {
                                em.edges[n] = 1;
                                stack.push_back(n);
                            }
                        }
                }
            }
        }
    return em;
}

BeamAxis estimate_beam_axis(const GrayImage& image) {
    validate_image(image);
    const Gradients g = smoothed_gradients(image, PreprocessConfig{}.denoise_sigma);
    std::vector<double> jxx(g.mag.size()), jxy(g.mag.size()), jyy(g.mag.size());
    for (size_t i = 0; i < g.mag.size(); ++i) {
        jxx[i] = g.gx[i] * g.gx[i];
        jxy[i] = g.gx[i] * g.gy[i];
        jyy[i] = g.gy[i] * g.gy[i];
    }
    // The tensor window rho sets the scale on which orientations are
    // blended before the global aggregate.
    constexpr double kRho = 8.0;
    jxx = blur(jxx, g.w, g.h, kRho);
    jxy = blur(jxy, g.w, g.h, kRho);
    jyy = blur(jyy, g.w, g.h, kRho);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < jxx.size(); ++i) {
        sxx += jxx[i];
        sxy += jxy[i];
        syy += jyy[i];
    }
    const double trace = sxx + syy;
    const double coherence =
        trace > 0.0 ? std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy) / trace : 0.0;
    if (coherence < 0.2)
        throw Error(ErrorCode::LowCoherence, "no dominant texture orientation",
                    {{"coherence", std::to_string(coherence)}});
    // Major eigenvector = dominant gradient direction; edges run at 90 to it.
    const double phi = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    double axis_deg = phi * 180.0 / kPi + 90.0;
    while (axis_deg > 90.0) axis_deg -= 180.0;
    while (axis_deg <= -90.0) axis_deg += 180.0;
    return {Angle::deg(axis_deg), coherence};
}

WidthMeasurement measure_widths(const GrayImage& image, const BeamAxis& axis,
                                const PreprocessConfig& cfg) {
    validate_image(image);
    if (!image.has_scale())
        throw Error(ErrorCode::MissingScale, "pixel scale required to report widths", {});
    if (!(axis.coherence >= 0.2))
        throw Error(ErrorCode::LowCoherence, "beam axis estimate unreliable",
                    {{"coherence", std::to_string(axis.coherence)}});

    const EdgeMap em = preprocess(image, cfg);
    const std::vector<EdgePoint> pts = edge_points(em);
    if (pts.empty())
        throw Error(ErrorCode::EdgeCountMismatch, "no edges detected", {});

    const double alpha = axis.angle.rad();
    const double nx = -std::sin(alpha), ny = std::cos(alpha);
    std::vector<double> s(pts.size()), gn(pts.size());
    double s_min = std::numeric_limits<double>::infinity();
    double s_max = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pts.size(); ++i) {
        s[i] = pts[i].x * nx + pts[i].y * ny;
        gn[i] = pts[i].gx * nx + pts[i].gy * ny;
        s_min = std::min(s_min, s[i]);
        s_max = std::max(s_max, s[i]);
    }

    // Signed normal gradient binned at 1 px: the four beam edges appear as
    // two positive and two negative extrema.
    const int nbins = static_cast<int>(std::llround(s_max - s_min)) + 1;
    std::vector<double> profile(static_cast<size_t>(nbins), 0.0);
    for (size_t i = 0; i < pts.size(); ++i) {
        const int k = static_cast<int>(std::llround(s[i] - s_min));
        profile[static_cast<size_t>(std::clamp(k, 0, nbins - 1))] += gn[i];
    }

    // Top-2 local maxima per polarity, at least 3 px apart so one physical
    // edge cannot claim both slots. The outermost edges sit in the boundary
    // bins (the s range is spanned by edge pixels), so the scan treats
    // out-of-range neighbors as zero.
    auto pick_two = [&](double sign) {
        std::vector<std::pair<double, int>> cand;
        for (int k = 0; k < nbins; ++k) {
            const double v = sign * profile[static_cast<size_t>(k)];
            const double a = k > 0 ? sign * profile[static_cast<size_t>(k - 1)] : 0.0;
            const double b = k + 1 < nbins ? sign * profile[static_cast<size_t>(k + 1)] : 0.0;
            if (v > 0.0 && v >= a && v >= b) cand.emplace_back(v, k);
        }
        std::sort(cand.begin(), cand.end(), [](const auto& l, const auto& r) {
            if (l.first != r.first) return l.first > r.first;
            return l.second < r.second;
        });
        std::vector<int> out;
        for (const auto& [v, k] : cand) {
            bool clear = true;
            for (int kk : out)
                if (std::abs(kk - k) < 3) clear = false;
            if (clear) out.push_back(k);
            if (out.size() == 2) break;
        }
        return out;
    };
    const std::vector<int> rises = pick_two(1.0);
    const std::vector<int> falls = pick_two(-1.0);
    if (rises.size() != 2 || falls.size() != 2)
        throw Error(ErrorCode::EdgeCountMismatch, "expected two rising and two falling edges",
                    {{"rising", std::to_string(rises.size())},
                     {"falling", std::to_string(falls.size())}});

    struct Edge {
        double pos, sigma, wsum;
        int polarity;
    };
    auto refine = [&](int k, int polarity) {
        double pos = s_min + k;
        for (int iter = 0; iter < 10; ++iter) {
            double wsum = 0.0, swsum = 0.0;
            for (size_t i = 0; i < pts.size(); ++i) {
                if (polarity * gn[i] <= 0.0 || std::abs(s[i] - pos) > 3.0) continue;
                const double w = std::abs(gn[i]);
                wsum += w;
                swsum += w * s[i];
            }
            if (wsum <= 0.0)
                throw Error(ErrorCode::EdgeCountMismatch, "edge lost during refinement", {});
            const double next = swsum / wsum;
            const double step = std::abs(next - pos);
            pos = next;
            if (step < 0.01) break;
        }
        // Weight mass, weighted variance and effective sample count all
        // evaluated in the window around the refined position.
        double wsum = 0.0, var = 0.0, w2 = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (polarity * gn[i] <= 0.0 || std::abs(s[i] - pos) > 3.0) continue;
            const double w = std::abs(gn[i]);
            wsum += w;
            var += w * (s[i] - pos) * (s[i] - pos);
            w2 += w * w;
        }
        if (wsum <= 0.0)
            throw Error(ErrorCode::EdgeCountMismatch, "edge lost during refinement", {});
        const double n_eff = wsum * wsum / std::max(w2, 1e-300);
        const double sigma = std::sqrt(std::max(var / wsum, 0.0) / std::max(n_eff, 1.0));
        return Edge{pos, sigma, wsum, polarity};
    };

    std::vector<Edge> edges;
    for (int k : rises) edges.push_back(refine(k, +1));
    for (int k : falls) edges.push_back(refine(k, -1));
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return a.pos < b.pos; });
    if (edges[0].polarity != 1 || edges[1].polarity != 1 || edges[2].polarity != -1 ||
        edges[3].polarity != -1)
        throw Error(ErrorCode::EdgeCountMismatch,
                    "edge polarity order is not rise, rise, fall, fall", {});

    const double scale = image.scale_nm_per_px;
    const double wt_nm = (edges[2].pos - edges[1].pos) * scale;
    const double wb_nm = (edges[3].pos - edges[0].pos) * scale;
    if (!(wt_nm > 0.0))
        throw Error(ErrorCode::EdgeCountMismatch, "inner edge pair collapsed", {});
    // Unreachable once positions are sorted (inner separation cannot exceed
    // outer), kept as a guard on the published invariant.
    if (wt_nm > wb_nm + scale)
        throw Error(ErrorCode::TrapezoidViolation, "top width exceeds bottom width",
                    {{"w_top_nm", std::to_string(wt_nm)}, {"w_bottom_nm", std::to_string(wb_nm)}});

    WidthMeasurement out;
    out.w_top = Length::nm(wt_nm);
    out.w_bottom = Length::nm(wb_nm);
    for (int i = 0; i < 4; ++i) {
        out.edge_positions_px[static_cast<size_t>(i)] = edges[static_cast<size_t>(i)].pos;
        out.edge_weights[static_cast<size_t>(i)] = edges[static_cast<size_t>(i)].wsum;
    }
    out.sigma_w_top = Length::nm(std::hypot(edges[1].sigma, edges[2].sigma) * scale);
    out.sigma_w_bottom = Length::nm(std::hypot(edges[0].sigma, edges[3].sigma) * scale);
    return out;
}

namespace {

// Welsch IRLS on top of fixed base weights: w_i = base_i * exp(-(e_i/c)^2).
// The base weights let callers favor strong-gradient pixels; the public
// fit uses unit bases.
LineFit welsch_line(const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& base, double c, int max_iters) {
    if (x.size() != y.size() || x.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "need matching x/y with at least 2 points",
                    {{"n", std::to_string(x.size())}});
    if (!(c > 0.0))
        throw Error(ErrorCode::InvalidArgument, "Welsch constant must be positive", {});
    LineFit fit;
    bool have = false;
    std::vector<double> w(base);
    for (int iter = 0; iter <= max_iters; ++iter) {
        double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            sw += w[i];
            sx += w[i] * x[i];
            sy += w[i] * y[i];
            sxx += w[i] * x[i] * x[i];
            sxy += w[i] * x[i] * y[i];
        }
        const double det = sw * sxx - sx * sx;
        if (!(std::abs(det) > 1e-12 * std::max(1.0, sw * sxx))) {
            if (have) break;
            throw Error(ErrorCode::InvalidArgument, "degenerate x spread for line fit", {});
        }
        const double slope = (sw * sxy - sx * sy) / det;
        const double intercept = (sy - slope * sx) / sw;
        if (have && std::abs(slope - fit.slope) < 1e-12 &&
            std::abs(intercept - fit.intercept) < 1e-9) {
            fit = {slope, intercept};
            break;
        }
        fit = {slope, intercept};
        have = true;
        for (size_t i = 0; i < x.size(); ++i) {
            const double e = (y[i] - slope * x[i] - intercept) / c;
            w[i] = base[i] * std::exp(-e * e);
        }
    }
    return fit;
}

} // namespace

LineFit fit_line_welsch(const std::vector<double>& x, const std::vector<double>& y,
                        double c, int max_iters) {
    return welsch_line(x, y, std::vector<double>(x.size(), 1.0), c, max_iters);
}

HoleSet detect_holes(const GrayImage& image, const BeamAxis& axis, const HoleDetectConfig& cfg) {
    validate_image(image);
    if (!image.has_scale())
        throw Error(ErrorCode::MissingScale, "pixel scale required for radius limits", {});
    if (!(axis.coherence >= 0.2))
        throw Error(ErrorCode::LowCoherence, "beam axis estimate unreliable",
                    {{"coherence", std::to_string(axis.coherence)}});
    const double scale = image.scale_nm_per_px;
    const double r_lo_px = cfg.r_lo.nm() / scale;
    const double r_hi_px = cfg.r_hi.nm() / scale;
    if (!(r_lo_px > 0.0) || !(r_hi_px >= r_lo_px))
        throw Error(ErrorCode::InvalidArgument, "hole radius range must satisfy 0 < lo <= hi",
                    {{"r_lo_nm", std::to_string(cfg.r_lo.nm())},
                     {"r_hi_nm", std::to_string(cfg.r_hi.nm())}});
    if (cfg.max_midline_offset.nm() < 0.0 || cfg.min_spacing.nm() < 0.0)
        throw Error(ErrorCode::InvalidArgument, "midline offset and spacing must be >= 0", {});

    const EdgeMap em = preprocess(image);
    const std::vector<EdgePoint> pts = edge_points(em);
    const int w = image.width, h = image.height;

    HoleSet empty;
    empty.mean_radius = Length::nm(0.0);
    empty.std_radius = Length::nm(0.0);
    if (pts.empty()) return empty;

    const double alpha = axis.angle.rad();
    const double nx = -std::sin(alpha), ny = std::cos(alpha);
    const double ax = std::cos(alpha), ay = std::sin(alpha);

    // Beam midline along the normal coordinate, weighted by the normal
    // gradient mass so the two beam edges balance around the center.
    double mid_w = 0.0, mid_s = 0.0;
    for (const EdgePoint& p : pts) {
        const double g = std::abs(p.gx * nx + p.gy * ny);
        mid_w += g;
        mid_s += g * (p.x * nx + p.y * ny);
    }
    const double s_mid = mid_w > 0.0 ? mid_s / mid_w : 0.0;

    // Hough votes along the gradient line at every radius in range: circle
    // centers accumulate the whole circumference, straight edges do not.
    const int rl = std::max(1, static_cast<int>(std::llround(r_lo_px)));
    const int rh = std::max(rl, static_cast<int>(std::llround(r_hi_px)));
    std::vector<int> votes(static_cast<size_t>(w) * h, 0);
    for (const EdgePoint& p : pts) {
        if (p.mag <= 0.0) continue;
        const double ux = p.gx / p.mag, uy = p.gy / p.mag;
        for (int r = rl; r <= rh; ++r)
            for (int sign = -1; sign <= 1; sign += 2) {
                const int vx = static_cast<int>(std::lround(p.x + sign * r * ux));
                const int vy = static_cast<int>(std::lround(p.y + sign * r * uy));
                if (vx >= 0 && vx < w && vy >= 0 && vy < h)
                    ++votes[static_cast<size_t>(vy) * w + vx];
            }
    }
    const int vmax = *std::max_element(votes.begin(), votes.end());
    if (vmax <= 0) return empty;

    struct Candidate {
        int v, x, y;
    };
    std::vector<Candidate> cand;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int v = votes[static_cast<size_t>(y) * w + x];
            if (2 * v < vmax) continue;
            bool peak = true;
            for (int dy = -1; dy <= 1 && peak; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
                    if (votes[static_cast<size_t>(yy) * w + xx] > v) {
                        peak = false;
                        break;
                    }
                }
            if (peak) cand.push_back({v, x, y});
        }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.v != b.v) return a.v > b.v;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    std::vector<Candidate> seeds;
    for (const Candidate& c : cand) {
        bool clear = true;
        for (const Candidate& k : seeds)
            if (std::hypot(double(c.x - k.x), double(c.y - k.y)) < r_lo_px) clear = false;
        if (clear) seeds.push_back(c);
    }

    struct Fitted {
        double cx, cy, r;
        int votes;
    };
    std::vector<Fitted> fitted;
    for (const Candidate& seed : seeds) {
        // Radius from the mode of the edge-distance histogram, using only
        // pixels whose gradient points along the candidate radius (circle
        // contours do, unrelated straight edges do not).
        auto consistent = [&](const EdgePoint& p, double cx, double cy, double d) {
            if (d <= 1e-9 || p.mag <= 0.0) return false;
            const double dot = ((p.x - cx) * p.gx + (p.y - cy) * p.gy) / (d * p.mag);
            return std::abs(dot) >= 0.7;
        };
        std::vector<int> hist(static_cast<size_t>(rh - rl + 1), 0);
        for (const EdgePoint& p : pts) {
            const double d = std::hypot(p.x - double(seed.x), p.y - double(seed.y));
            const int bin = static_cast<int>(std::llround(d));
            if (bin < rl || bin > rh || !consistent(p, seed.x, seed.y, d)) continue;
            ++hist[static_cast<size_t>(bin - rl)];
        }
        int best = 0;
        for (size_t i = 1; i < hist.size(); ++i)
            if (hist[i] > hist[static_cast<size_t>(best)]) best = static_cast<int>(i);
        const double r0 = rl + best;
        std::vector<const EdgePoint*> ring;
        for (const EdgePoint& p : pts) {
            const double d = std::hypot(p.x - double(seed.x), p.y - double(seed.y));
            if (std::abs(d - r0) <= 3.0 && consistent(p, seed.x, seed.y, d)) ring.push_back(&p);
        }
        // A genuine contour supports a sizable fraction of its circumference;
        // scattered clutter in the annulus does not.
        const auto min_support =
            static_cast<size_t>(std::max<long>(8, std::llround(0.5 * kPi * r0)));
        if (ring.size() < min_support) continue;

        // Algebraic circle fit: x^2 + y^2 + D x + E y + F = 0.
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (const EdgePoint* p : ring) {
            const Eigen::Vector3d row(p->x, p->y, 1.0);
            m += row * row.transpose();
            rhs -= (double(p->x) * p->x + double(p->y) * p->y) * row;
        }
        const Eigen::Vector3d def = m.ldlt().solve(rhs);
        double cx = -0.5 * def(0), cy = -0.5 * def(1);
        double r = std::sqrt(std::max(cx * cx + cy * cy - def(2), 0.0));
        if (!std::isfinite(cx) || !std::isfinite(cy) || !(r > 0.0)) continue;

        // One geometric Gauss-Newton step on (cx, cy, r).
        Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
        Eigen::Vector3d jte = Eigen::Vector3d::Zero();
        for (const EdgePoint* p : ring) {
            const double d = std::hypot(p->x - cx, p->y - cy);
            if (d <= 1e-9) continue;
            const Eigen::Vector3d row(-(p->x - cx) / d, -(p->y - cy) / d, -1.0);
            jtj += row * row.transpose();
            jte += row * (d - r);
        }
        const Eigen::Vector3d delta = jtj.ldlt().solve(-jte);
        if (delta.allFinite()) {
            cx += delta(0);
            cy += delta(1);
            r += delta(2);
        }
        if (!(r > 0.0)) continue;
        fitted.push_back({cx, cy, r, seed.v});
    }

    // Filters in order: radius range, midline distance, minimum spacing.
    std::vector<Fitted> in_range;
    for (const Fitted& f : fitted) {
        const double r_nm = f.r * scale;
        if (r_nm < cfg.r_lo.nm() || r_nm > cfg.r_hi.nm()) continue;
        if (f.cx < 0.0 || f.cx > w - 1.0 || f.cy < 0.0 || f.cy > h - 1.0) continue;
        in_range.push_back(f);
    }
    std::vector<Fitted> on_midline;
    const double max_off_px = cfg.max_midline_offset.nm() / scale;
    for (const Fitted& f : in_range) {
        const double s_c = f.cx * nx + f.cy * ny;
        if (std::abs(s_c - s_mid) <= max_off_px) on_midline.push_back(f);
    }
    std::sort(on_midline.begin(), on_midline.end(), [](const Fitted& a, const Fitted& b) {
        if (a.votes != b.votes) return a.votes > b.votes;
        if (a.cy != b.cy) return a.cy < b.cy;
        return a.cx < b.cx;
    });
    const double min_spacing_px = cfg.min_spacing.nm() / scale;
    std::vector<Fitted> kept;
    for (const Fitted& f : on_midline) {
        bool clear = true;
        for (const Fitted& k : kept)
            if (std::hypot(f.cx - k.cx, f.cy - k.cy) < min_spacing_px) clear = false;
        if (clear) kept.push_back(f);
    }
    std::sort(kept.begin(), kept.end(), [&](const Fitted& a, const Fitted& b) {
        return a.cx * ax + a.cy * ay < b.cx * ax + b.cy * ay;
    });

    HoleSet out;
    out.mean_radius = Length::nm(0.0);
    out.std_radius = Length::nm(0.0);
    if (kept.empty()) return out;
    double mean = 0.0;
    for (const Fitted& f : kept) {
        out.holes.push_back({f.cx, f.cy, Length::nm(f.r * scale)});
        mean += f.r * scale;
    }
    mean /= static_cast<double>(kept.size());
    out.mean_radius = Length::nm(mean);
    if (kept.size() >= 2) {
        double ss = 0.0;
        for (const Fitted& f : kept) ss += (f.r * scale - mean) * (f.r * scale - mean);
        out.std_radius = Length::nm(std::sqrt(ss / static_cast<double>(kept.size() - 1)));
    }
    return out;
}

TiltedRidges detect_ridges_tilted(const GrayImage& image, const PreprocessConfig& cfg) {
    validate_image(image);
    const EdgeMap em = preprocess(image, cfg);
    const std::vector<EdgePoint> pts = edge_points(em);
    if (pts.size() < 30)
        throw Error(ErrorCode::RidgeCountMismatch, "too few edge pixels for three ridges",
                    {{"edges", std::to_string(pts.size())}});

    // Shared ridge direction from a full Hough accumulator over
    // near-horizontal angles; ties resolve to the lowest angle.
    const int w = image.width;
    const double theta_lo = -20.0, theta_step = 0.25;
    const int n_theta = 161;
    const int pad = static_cast<int>(std::ceil(0.35 * w)) + 2;
    const int nbins = 2 * pad + image.height + 4;
    int best_count = -1;
    double theta_star = theta_lo;
    std::vector<int> acc(static_cast<size_t>(nbins));
    for (int ti = 0; ti < n_theta; ++ti) {
        const double theta = theta_lo + ti * theta_step;
        const double st = std::sin(theta * kPi / 180.0), ct = std::cos(theta * kPi / 180.0);
        std::fill(acc.begin(), acc.end(), 0);
        int local_best = 0;
        for (const EdgePoint& p : pts) {
            const double rho = -p.x * st + p.y * ct;
            const int k = static_cast<int>(std::llround(rho)) + pad;
            if (k >= 0 && k < nbins) local_best = std::max(local_best, ++acc[static_cast<size_t>(k)]);
        }
        if (local_best > best_count) {
            best_count = local_best;
            theta_star = theta;
        }
    }

    const double st = std::sin(theta_star * kPi / 180.0), ct = std::cos(theta_star * kPi / 180.0);
    std::vector<double> a(pts.size()), b(pts.size()), wgt(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        a[i] = pts[i].x * ct + pts[i].y * st;
        b[i] = -pts[i].x * st + pts[i].y * ct;
        wgt[i] = pts[i].mag;
    }

    // 1-D k-means (k = 3) on the normal offsets, contributions weighted by
    // gradient magnitude so faint clutter cannot outvote the ridges.
    // Centers start on the three strongest well-separated peaks of the
    // weighted offset histogram; fewer than three peaks means fewer than
    // three ridges. Weighted quantiles would misplace centers here because
    // ridge masses are unequal (one ridge can hold over half the weight).
    double b_min = b[0], b_max = b[0];
    for (double v : b) {
        b_min = std::min(b_min, v);
        b_max = std::max(b_max, v);
    }
    const int n_off = static_cast<int>(std::llround(b_max - b_min)) + 1;
    std::vector<double> off_hist(static_cast<size_t>(n_off), 0.0);
    for (size_t i = 0; i < pts.size(); ++i) {
        const int k = std::clamp(static_cast<int>(std::llround(b[i] - b_min)), 0, n_off - 1);
        off_hist[static_cast<size_t>(k)] += wgt[i];
    }
    std::vector<std::pair<double, int>> off_peaks;
    for (int k = 0; k < n_off; ++k) {
        const double v = off_hist[static_cast<size_t>(k)];
        const double l = k > 0 ? off_hist[static_cast<size_t>(k - 1)] : 0.0;
        const double r = k + 1 < n_off ? off_hist[static_cast<size_t>(k + 1)] : 0.0;
        if (v > 0.0 && v >= l && v >= r) off_peaks.emplace_back(v, k);
    }
    std::sort(off_peaks.begin(), off_peaks.end(), [](const auto& l, const auto& r) {
        if (l.first != r.first) return l.first > r.first;
        return l.second < r.second;
    });
    std::array<double, 3> centers{};
    int n_centers = 0;
    for (const auto& [v, k] : off_peaks) {
        if (n_centers > 0 && v < 0.01 * off_peaks.front().first) break;
        bool clear = true;
        for (int c = 0; c < n_centers; ++c)
            if (std::abs((b_min + k) - centers[static_cast<size_t>(c)]) < 5.0) clear = false;
        if (!clear) continue;
        centers[static_cast<size_t>(n_centers++)] = b_min + k;
        if (n_centers == 3) break;
    }
    if (n_centers < 3)
        throw Error(ErrorCode::RidgeCountMismatch,
                    "offset histogram has fewer than three ridge peaks",
                    {{"peaks", std::to_string(n_centers)}});
    std::vector<int> assign(pts.size(), -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        std::array<double, 3> sw{}, sb{};
        for (size_t i = 0; i < pts.size(); ++i) {
            int bestc = 0;
            double bestd = std::abs(b[i] - centers[0]);
            for (int c = 1; c < 3; ++c) {
                const double d = std::abs(b[i] - centers[static_cast<size_t>(c)]);
                if (d < bestd) {
                    bestd = d;
                    bestc = c;
                }
            }
            if (assign[i] != bestc) {
                assign[i] = bestc;
                changed = true;
            }
            sw[static_cast<size_t>(bestc)] += wgt[i];
            sb[static_cast<size_t>(bestc)] += wgt[i] * b[i];
        }
        for (int c = 0; c < 3; ++c) {
            if (!(sw[static_cast<size_t>(c)] > 0.0))
                throw Error(ErrorCode::RidgeCountMismatch,
                            "offset clustering found fewer than three ridges",
                            {{"cluster", std::to_string(c)}});
            centers[static_cast<size_t>(c)] = sb[static_cast<size_t>(c)] / sw[static_cast<size_t>(c)];
        }
        if (!changed) break;
    }

    struct Cluster {
        std::vector<double> a, b, w;
    };
    std::array<Cluster, 3> clusters;
    for (size_t i = 0; i < pts.size(); ++i) {
        Cluster& c = clusters[static_cast<size_t>(assign[i])];
        c.a.push_back(a[i]);
        c.b.push_back(b[i]);
        c.w.push_back(wgt[i]);
    }
    for (const Cluster& c : clusters)
        if (c.a.size() < 8)
            throw Error(ErrorCode::RidgeCountMismatch, "a ridge cluster is too sparse",
                        {{"points", std::to_string(c.a.size())}});

    double a_mean = 0.0;
    for (double v : a) a_mean += v;
    a_mean /= static_cast<double>(a.size());

    struct Line {
        double slope, b_at_mean, angle_deg;
    };
    std::array<Line, 3> fits;
    for (int c = 0; c < 3; ++c) {
        // Gradient magnitude as the base weight keeps the seed fit on the
        // ridge even when faint clutter outnumbers it.
        const Cluster& cl = clusters[static_cast<size_t>(c)];
        const LineFit f = welsch_line(cl.a, cl.b, cl.w, welsch_c_px(), 20);
        fits[static_cast<size_t>(c)] = {f.slope, f.slope * a_mean + f.intercept,
                                        theta_star + std::atan(f.slope) * 180.0 / kPi};
    }
    std::sort(fits.begin(), fits.end(),
              [](const Line& l, const Line& r) { return l.b_at_mean < r.b_at_mean; });
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(fits[static_cast<size_t>(i)].angle_deg -
                         fits[static_cast<size_t>(j)].angle_deg) >= 2.0)
                throw Error(ErrorCode::NonParallelRidges, "ridge angles disagree by 2 deg or more",
                            {{"angle_i", std::to_string(fits[static_cast<size_t>(i)].angle_deg)},
                             {"angle_j", std::to_string(fits[static_cast<size_t>(j)].angle_deg)}});

    const double m_mean = (fits[0].slope + fits[1].slope + fits[2].slope) / 3.0;
    const double norm = std::sqrt(1.0 + m_mean * m_mean);
    const double d_t = (fits[1].b_at_mean - fits[0].b_at_mean) / norm;
    const double d_nb = (fits[2].b_at_mean - fits[1].b_at_mean) / norm;
    if (!(d_t > 0.0) || !(d_nb > 0.0))
        throw Error(ErrorCode::RidgeCountMismatch, "ridge separations are degenerate",
                    {{"d_t_px", std::to_string(d_t)}, {"d_nb_px", std::to_string(d_nb)}});

    TiltedRidges out;
    double psi_sum = 0.0, spread = 0.0;
    for (int i = 0; i < 3; ++i) {
        out.lines[static_cast<size_t>(i)] = {Angle::deg(fits[static_cast<size_t>(i)].angle_deg),
                                             fits[static_cast<size_t>(i)].b_at_mean};
        psi_sum += fits[static_cast<size_t>(i)].angle_deg;
        for (int j = 0; j < 3; ++j)
            spread = std::max(spread, std::abs(fits[static_cast<size_t>(i)].angle_deg -
                                               fits[static_cast<size_t>(j)].angle_deg));
    }
    out.d_t_px = d_t;
    out.d_nb_px = d_nb;
    out.psi = Angle::deg(psi_sum / 3.0);
    out.psi_spread_deg = spread;
    return out;
}

namespace {

// sin of a degree argument; cosine is taken as sin(90 - x) so complementary
// angles share one rounding. At theta = 45 the sine and cosine are then the
// same double and the projection prefactor cancels to exactly 1.
double sin_deg(double deg) { return std::sin(deg * (kPi / 180.0)); }

struct TiltTrig {
    double pref;   // cos^2(theta) cos(psi) / (sin(theta) sqrt(1 - sin^2(theta) cos^2(psi)))
    double denom;  // the guarded denominator magnitude
};

TiltTrig tilt_prefactor(double theta_deg, double psi_deg) {
    const double st = sin_deg(theta_deg);
    const double ct = sin_deg(90.0 - theta_deg);
    const double sp = sin_deg(std::abs(psi_deg)) * (psi_deg < 0.0 ? -1.0 : 1.0);
    const double cp = sin_deg(90.0 - std::abs(psi_deg));
    // 1 - sin^2 cos^2(psi) = cos^2(theta) (1 + tan^2(theta) sin^2(psi))
    const double ts = (st / ct) * sp;
    const double root = std::sqrt(1.0 + ts * ts);
    return {cp * (ct / st) / root, st * ct * root};
}

} // namespace

Length thickness_from_projection(Length w_t, Length w_b, double d_t, double d_nb, Angle theta,
                                 Angle psi) {
    require_positive(w_t.um(), "w_top_um");
    require_positive(w_b.um(), "w_bottom_um");
    require_positive(d_t, "d_top");
    require_positive(d_nb, "d_nb");
    const double theta_deg = theta.deg();
    const double psi_deg = psi.deg();
    if (!(theta_deg > 0.0) || !(theta_deg < 90.0))
        throw Error(ErrorCode::DegenerateTilt, "tilt angle must lie strictly inside (0, 90) deg",
                    {{"theta_deg", std::to_string(theta_deg)}});
    if (!(std::abs(psi_deg) < 90.0))
        throw Error(ErrorCode::DegenerateTilt, "in-plane angle must satisfy |psi| < 90 deg",
                    {{"psi_deg", std::to_string(psi_deg)}});
    const TiltTrig trig = tilt_prefactor(theta_deg, psi_deg);
    if (!(trig.denom >= 1e-300) || !std::isfinite(trig.pref))
        throw Error(ErrorCode::DegenerateTilt, "projection denominator underflows",
                    {{"theta_deg", std::to_string(theta_deg)},
                     {"psi_deg", std::to_string(psi_deg)}});
    const double t_um = trig.pref * (w_t.um() * (d_nb / d_t) - 0.5 * (w_b.um() - w_t.um()));
    if (!(t_um > 0.0))
        throw Error(ErrorCode::InvalidGeometry, "reconstructed thickness is not positive",
                    {{"t_um", std::to_string(t_um)}});
    return Length::um(t_um);
}

ThicknessEstimate thickness_with_uncertainty(const WidthMeasurement& widths,
                                             const TiltedRidges& ridges, Angle theta,
                                             const ThicknessNoise& noise, int n_mc,
                                             uint64_t seed) {
    if (n_mc < 100)
        throw Error(ErrorCode::InvalidArgument, "n_mc must be at least 100",
                    {{"n_mc", std::to_string(n_mc)}});
    require_non_negative(noise.sigma_w_top.um(), "sigma_w_top");
    require_non_negative(noise.sigma_w_bottom.um(), "sigma_w_bottom");
    require_non_negative(noise.sigma_d_top, "sigma_d_top");
    require_non_negative(noise.sigma_d_nb, "sigma_d_nb");

    // Validates the deterministic inputs (angles, base geometry) up front.
    const Length t_point = thickness_from_projection(widths.w_top, widths.w_bottom, ridges.d_t_px,
                                                     ridges.d_nb_px, theta, ridges.psi);
    const double tp = t_point.um();
    const TiltTrig trig = tilt_prefactor(theta.deg(), ridges.psi.deg());

    const CounterRng rng_wt(seed, 0), rng_wb(seed, 1), rng_dt(seed, 2), rng_dnb(seed, 3);
    const double wt0 = widths.w_top.um(), wb0 = widths.w_bottom.um();
    const double dt0 = ridges.d_t_px, dnb0 = ridges.d_nb_px;

    std::vector<double> ts;
    ts.reserve(static_cast<size_t>(n_mc));
    int invalid = 0;
    for (int i = 0; i < n_mc; ++i) {
        const auto idx = static_cast<uint64_t>(i);
        const double wt = wt0 + noise.sigma_w_top.um() * rng_wt.normal(idx);
        const double wb = wb0 + noise.sigma_w_bottom.um() * rng_wb.normal(idx);
        const double dt = dt0 + noise.sigma_d_top * rng_dt.normal(idx);
        const double dnb = dnb0 + noise.sigma_d_nb * rng_dnb.normal(idx);
        if (!(wt > 0.0) || !(wb > 0.0) || !(dt > 0.0) || !(dnb > 0.0)) {
            ++invalid;
            continue;
        }
        const double t = trig.pref * (wt * (dnb / dt) - 0.5 * (wb - wt));
        if (!(t > 0.0) || !std::isfinite(t)) {
            ++invalid;
            continue;
        }
        ts.push_back(t);
    }
    if (invalid * 10 > n_mc || ts.size() < 2)
        throw Error(ErrorCode::UnstableGeometry, "more than 10% of perturbed draws were invalid",
                    {{"invalid", std::to_string(invalid)}, {"n_mc", std::to_string(n_mc)}});

    // Fixed-order compensated mean and (n-1) standard deviation. Summing
    // deviations from the point evaluation keeps the zero-noise case exact.
    double sum = 0.0, comp = 0.0;
    for (double v : ts) {
        const double y = (v - tp) - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    const double mean = tp + sum / static_cast<double>(ts.size());
    double ss = 0.0;
    comp = 0.0;
    for (double v : ts) {
        const double d = (v - mean) * (v - mean);
        const double y = d - comp;
        const double t = ss + y;
        comp = (t - ss) - y;
        ss = t;
    }
    const double sd = std::sqrt(ss / static_cast<double>(ts.size() - 1));

    ThicknessEstimate out;
    out.t = Length::um(mean);
    out.sigma_t = Length::um(sd);
    out.n_mc = n_mc;
    out.w_top = widths.w_top;
    out.w_bottom = widths.w_bottom;
    out.d_t_px = ridges.d_t_px;
    out.d_nb_px = ridges.d_nb_px;
    out.theta = theta;
    out.psi = ridges.psi;
    return out;
}

} // namespace qmc
