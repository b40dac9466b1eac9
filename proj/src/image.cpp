#include "bpa/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_set>

namespace bpa::image {

namespace {

std::int64_t pixel_key(int x, int y) {
    return (static_cast<std::int64_t>(y) << 32) ^ static_cast<std::uint32_t>(x);
}

struct PixelHash {
    std::size_t operator()(std::int64_t k) const noexcept {
        return std::hash<std::int64_t>{}(k * 0x9E3779B97F4A7C15LL);
    }
};

void require_nonempty(int w, int h, const char* what) {
    if (w < 1 || h < 1) throw Error(ErrorCode::Input, "EmptyImage", std::string(what) + " is empty");
}

}  // namespace

ColorImage make_color_image(int width, int height, std::array<double, 3> fill) {
    ColorImage img;
    img.width = width;
    img.height = height;
    img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
        img.rgb[i] = fill[0];
        img.rgb[i + 1] = fill[1];
        img.rgb[i + 2] = fill[2];
    }
    return img;
}

std::size_t BinaryImage::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

void PipelineConfig::validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorCode::Usage, "InvalidConfig", msg); };
    if (background_downsample_factor < 2) bad("background_downsample_factor must be >= 2");
    if (median_window < 1) bad("median_window must be positive");
    if (morph_iterations < 0) bad("morph_iterations must be >= 0");
    if (!(jaccard_dissimilarity_max > 0.0 && jaccard_dissimilarity_max <= 1.0))
        bad("jaccard_dissimilarity_max must lie in (0, 1]");
    if (!(hausdorff_max_px > 0.0)) bad("hausdorff_max_px must be positive");
    if (min_region_area_px < 1) bad("min_region_area_px must be positive");
}

ColorImage load_image(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) {
        throw Error(ErrorCode::Input, "UnreadableImage", "cannot decode " + path.string());
    }
    ColorImage img;
    img.width = m.cols;
    img.height = m.rows;
    img.rgb.resize(static_cast<std::size_t>(m.cols) * m.rows * 3);
    std::size_t i = 0;
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            // OpenCV decodes to BGR.
            img.rgb[i++] = row[x][2] / 255.0;
            img.rgb[i++] = row[x][1] / 255.0;
            img.rgb[i++] = row[x][0] / 255.0;
        }
    }
    return img;
}

void save_image(const ColorImage& img, const std::filesystem::path& path) {
    cv::Mat m(img.height, img.width, CV_8UC3);
    auto to8 = [](double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    std::size_t i = 0;
    for (int y = 0; y < img.height; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width; ++x) {
            row[x][2] = to8(img.rgb[i++]);
            row[x][1] = to8(img.rgb[i++]);
            row[x][0] = to8(img.rgb[i++]);
        }
    }
    if (!cv::imwrite(path.string(), m)) {
        throw Error(ErrorCode::Input, "UnwritableImage", "cannot write " + path.string());
    }
}

GrayImage to_grayscale(const ColorImage& rgb) {
    require_nonempty(rgb.width, rgb.height, "color image");
    GrayImage out(rgb.width, rgb.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const double v = 0.299 * rgb.rgb[3 * i] + 0.587 * rgb.rgb[3 * i + 1] + 0.114 * rgb.rgb[3 * i + 2];
        out.pixels[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

GrayImage estimate_background(const GrayImage& img, const PipelineConfig& cfg) {
    require_nonempty(img.width, img.height, "gray image");
    const int f = cfg.background_downsample_factor;
    if (f < 2 || f >= img.width || f >= img.height) {
        throw Error(ErrorCode::Input, "FactorTooLarge",
                    "downsample factor " + std::to_string(f) + " does not fit a " +
                        std::to_string(img.width) + "x" + std::to_string(img.height) + " image");
    }

    // Block-mean downsampling; the last row/column of blocks may be partial.
    const int dw = (img.width + f - 1) / f;
    const int dh = (img.height + f - 1) / f;
    GrayImage small(dw, dh);
    for (int by = 0; by < dh; ++by) {
        for (int bx = 0; bx < dw; ++bx) {
            double sum = 0.0;
            int n = 0;
            for (int y = by * f; y < std::min((by + 1) * f, img.height); ++y)
                for (int x = bx * f; x < std::min((bx + 1) * f, img.width); ++x) {
                    sum += img.at(x, y);
                    ++n;
                }
            small.at(bx, by) = sum / n;
        }
    }

    // Median filter with replicated borders.
    const int r = cfg.median_window / 2;
    GrayImage filtered(dw, dh);
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1));
    for (int y = 0; y < dh; ++y) {
        for (int x = 0; x < dw; ++x) {
            window.clear();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    window.push_back(small.at(std::clamp(x + dx, 0, dw - 1), std::clamp(y + dy, 0, dh - 1)));
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
            std::nth_element(window.begin(), mid, window.end());
            filtered.at(x, y) = *mid;
        }
    }

    // Bilinear upsampling between block centers, clamped at the edges.
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        const double sy = std::clamp((y + 0.5) / f - 0.5, 0.0, static_cast<double>(dh - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, dh - 1);
        const double ty = sy - y0;
        for (int x = 0; x < img.width; ++x) {
            const double sx = std::clamp((x + 0.5) / f - 0.5, 0.0, static_cast<double>(dw - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, dw - 1);
            const double tx = sx - x0;
            const double top = (1.0 - tx) * filtered.at(x0, y0) + tx * filtered.at(x1, y0);
            const double bot = (1.0 - tx) * filtered.at(x0, y1) + tx * filtered.at(x1, y1);
            out.at(x, y) = std::clamp((1.0 - ty) * top + ty * bot, 0.0, 1.0);
        }
    }
    return out;
}

GrayImage subtract_background(const GrayImage& img, const GrayImage& bg) {
    if (img.width != bg.width || img.height != bg.height) {
        throw Error(ErrorCode::Input, "DimensionMismatch", "image and background sizes differ");
    }
    GrayImage out(img.width, img.height);
    double peak = 0.0;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = std::max(bg.pixels[i] - img.pixels[i], 0.0);
        peak = std::max(peak, out.pixels[i]);
    }
    // Differences at round-off level are not stains.
    constexpr double kNoiseFloor = 1e-9;
    if (peak > kNoiseFloor) {
        for (double& v : out.pixels) v /= peak;
    } else {
        std::fill(out.pixels.begin(), out.pixels.end(), 0.0);
    }
    return out;
}

std::array<std::size_t, 256> histogram256(const GrayImage& img) {
    std::array<std::size_t, 256> hist{};
    for (double v : img.pixels) {
        const long bin = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        ++hist[static_cast<std::size_t>(bin)];
    }
    return hist;
}

int triangle_threshold_bin(const std::array<std::size_t, 256>& hist) {
    int lo = -1, hi = -1, peak = 0, occupied = 0;
    for (int i = 0; i < 256; ++i) {
        if (hist[i] == 0) continue;
        ++occupied;
        if (lo < 0) lo = i;
        hi = i;
        if (hist[i] > hist[peak]) peak = i;
    }
    if (occupied < 2) {
        throw Error(ErrorCode::Input, "DegenerateHistogram", "image has a single intensity level");
    }

    const int tail = (hi - peak >= peak - lo) ? hi : lo;
    const int step = tail > peak ? 1 : -1;
    const double hp = static_cast<double>(hist[peak]);
    const double ht = static_cast<double>(hist[tail]);
    const double span = static_cast<double>(tail - peak);

    // The perpendicular distance to the chord is proportional to the vertical
    // gap, so the vertical gap is maximized directly.
    int best = peak;
    double best_gap = -std::numeric_limits<double>::infinity();
    for (int k = peak; k != tail + step; k += step) {
        const double chord = hp + (ht - hp) * (k - peak) / span;
        const double gap = chord - static_cast<double>(hist[k]);
        if (gap > best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return best;
}

BinaryImage triangle_threshold(const GrayImage& img) {
    require_nonempty(img.width, img.height, "gray image");
    const int t = triangle_threshold_bin(histogram256(img));
    BinaryImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const long bin = std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0);
        out.bits[i] = bin > t ? 1 : 0;
    }
    return out;
}

namespace {

template <class Combine>
BinaryImage apply_element(const BinaryImage& img, StructuringElement se, Combine combine, bool init) {
    static constexpr int cross[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    static constexpr int square[9][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1},
                                         {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    const auto* offs = se == StructuringElement::Cross3x3 ? cross : square;
    const int n = se == StructuringElement::Cross3x3 ? 5 : 9;

    BinaryImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            bool acc = init;
            for (int k = 0; k < n; ++k) acc = combine(acc, img.get(x + offs[k][0], y + offs[k][1]));
            out.set(x, y, acc);
        }
    }
    return out;
}

}  // namespace

BinaryImage erode(const BinaryImage& img, StructuringElement se) {
    return apply_element(img, se, [](bool acc, bool v) { return acc && v; }, true);
}

BinaryImage dilate(const BinaryImage& img, StructuringElement se) {
    return apply_element(img, se, [](bool acc, bool v) { return acc || v; }, false);
}

BinaryImage morph_smooth(const BinaryImage& img, int iterations, StructuringElement se) {
    BinaryImage out = img;
    for (int i = 0; i < iterations; ++i) out = erode(out, se);
    for (int i = 0; i < iterations; ++i) out = dilate(out, se);
    return out;
}

Region make_region(std::vector<Pixel> pixels) {
    std::sort(pixels.begin(), pixels.end());
    pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
    std::unordered_set<std::int64_t, PixelHash> members;
    members.reserve(pixels.size() * 2);
    for (const auto& p : pixels) members.insert(pixel_key(p.x, p.y));

    Region r;
    for (const auto& p : pixels) {
        const bool inner = members.count(pixel_key(p.x + 1, p.y)) && members.count(pixel_key(p.x - 1, p.y)) &&
                           members.count(pixel_key(p.x, p.y + 1)) && members.count(pixel_key(p.x, p.y - 1));
        if (!inner) r.contour.push_back(p);
    }
    r.pixels = std::move(pixels);
    return r;
}

std::vector<Region> label_regions(const BinaryImage& img, const PipelineConfig& cfg) {
    std::vector<std::uint8_t> seen(img.bits.size(), 0);
    std::vector<Region> regions;
    std::vector<Pixel> stack;
    for (int y0 = 0; y0 < img.height; ++y0) {
        for (int x0 = 0; x0 < img.width; ++x0) {
            const std::size_t idx0 = static_cast<std::size_t>(y0) * img.width + x0;
            if (!img.bits[idx0] || seen[idx0]) continue;
            std::vector<Pixel> comp;
            stack.push_back({x0, y0});
            seen[idx0] = 1;
            while (!stack.empty()) {
                const Pixel p = stack.back();
                stack.pop_back();
                comp.push_back(p);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx, ny = p.y + dy;
                        if (!img.get(nx, ny)) continue;
                        const std::size_t idx = static_cast<std::size_t>(ny) * img.width + nx;
                        if (seen[idx]) continue;
                        seen[idx] = 1;
                        stack.push_back({nx, ny});
                    }
                }
            }
            if (comp.size() >= static_cast<std::size_t>(cfg.min_region_area_px)) {
                regions.push_back(make_region(std::move(comp)));
            }
        }
    }
    return regions;
}

Ellipse fit_ellipse_moments(const Region& r) {
    const std::size_t n = r.pixels.size();
    if (n < 3) throw Error(ErrorCode::Numeric, "DegenerateRegion", "region has fewer than 3 pixels");

    // Integer sums relative to the first pixel keep the shape terms identical
    // under integer translation.
    const Pixel origin = r.pixels.front();
    std::int64_t sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : r.pixels) {
        const std::int64_t dx = p.x - origin.x, dy = p.y - origin.y;
        sx += dx;
        sy += dy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double N = static_cast<double>(n);
    const double mx = sx / N, my = sy / N;
    const double cxx = sxx / N - mx * mx;
    const double cyy = syy / N - my * my;
    const double cxy = sxy / N - mx * my;
    if (cxx * cyy - cxy * cxy <= 1e-9 * std::max(1.0, (cxx + cyy) * (cxx + cyy))) {
        throw Error(ErrorCode::Numeric, "DegenerateRegion", "region pixels are collinear");
    }

    const double m20 = cxx + 1.0 / 12.0;
    const double m02 = cyy + 1.0 / 12.0;
    const double m11 = cxy;
    const double mean = 0.5 * (m20 + m02);
    const double half_gap = std::sqrt(0.25 * (m20 - m02) * (m20 - m02) + m11 * m11);
    const double l1 = mean + half_gap;
    const double l2 = std::max(mean - half_gap, 0.0);
    const double phi = 0.5 * std::atan2(2.0 * m11, m20 - m02);
    return make_ellipse(origin.x + mx, origin.y + my, 2.0 * std::sqrt(l1), 2.0 * std::sqrt(l2), phi);
}

std::vector<Pixel> rasterize_ellipse(const Ellipse& e) {
    const double c = std::cos(e.phi), s = std::sin(e.phi);
    const double ex = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
    const double ey = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
    const int x0 = static_cast<int>(std::floor(e.x - ex)), x1 = static_cast<int>(std::ceil(e.x + ex));
    const int y0 = static_cast<int>(std::floor(e.y - ey)), y1 = static_cast<int>(std::ceil(e.y + ey));
    std::vector<Pixel> out;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - e.x, dy = y - e.y;
            const double u = (dx * c + dy * s) / e.a;
            const double v = (-dx * s + dy * c) / e.b;
            if (u * u + v * v <= 1.0) out.push_back({x, y});
        }
    }
    return out;
}

namespace {

// Directed Hausdorff distance with the early-break scan.
double directed_hausdorff(const std::vector<Pixel>& from, const std::vector<Pixel>& to) {
    double cmax = 0.0;
    for (const auto& p : from) {
        double cmin = std::numeric_limits<double>::infinity();
        for (const auto& q : to) {
            const double dx = p.x - q.x, dy = p.y - q.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < cmin) {
                cmin = d2;
                if (cmin <= cmax) break;
            }
        }
        cmax = std::max(cmax, cmin);
    }
    return std::sqrt(cmax);
}

}  // namespace

FitQuality region_fit_quality(const Region& r, const Ellipse& e) {
    const Region ellipse_region = make_region(rasterize_ellipse(e));
    const auto& ep = ellipse_region.pixels;

    std::size_t inter = 0;
    for (auto i = r.pixels.begin(), j = ep.begin(); i != r.pixels.end() && j != ep.end();) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    const std::size_t uni = r.pixels.size() + ep.size() - inter;

    FitQuality q;
    q.jaccard_dissimilarity = uni == 0 ? 0.0 : 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
    if (r.contour.empty() || ellipse_region.contour.empty()) {
        q.hausdorff_px = (r.contour.empty() && ellipse_region.contour.empty())
                             ? 0.0
                             : std::numeric_limits<double>::infinity();
    } else {
        q.hausdorff_px = std::max(directed_hausdorff(r.contour, ellipse_region.contour),
                                  directed_hausdorff(ellipse_region.contour, r.contour));
    }
    return q;
}

bool passes_quality(const FitQuality& q, const PipelineConfig& cfg) {
    const bool jaccard_ok = cfg.jaccard_rule == JaccardRule::Dissimilarity
                                ? q.jaccard_dissimilarity <= cfg.jaccard_dissimilarity_max
                                : (1.0 - q.jaccard_dissimilarity) <= cfg.jaccard_dissimilarity_max;
    return jaccard_ok && q.hausdorff_px <= cfg.hausdorff_max_px;
}

ExtractionResult extract_pattern_detailed(const ColorImage& img, const PipelineConfig& cfg,
                                          const std::string& id) {
    cfg.validate();
    ExtractionResult res;
    res.pattern.id = id;

    const GrayImage gray = to_grayscale(img);
    const GrayImage strength = subtract_background(gray, estimate_background(gray, cfg));
    BinaryImage binary;
    try {
        binary = triangle_threshold(strength);
    } catch (const Error& e) {
        // A featureless image has no stains to segment.
        if (e.kind() == "DegenerateHistogram") return res;
        throw;
    }
    const BinaryImage smooth = morph_smooth(binary, cfg.morph_iterations, cfg.element);

    const auto regions = label_regions(smooth, cfg);
    res.regions_found = regions.size();
    for (const auto& region : regions) {
        Ellipse e;
        try {
            e = fit_ellipse_moments(region);
        } catch (const Error& err) {
            if (err.kind() != "DegenerateRegion") throw;
            ++res.regions_degenerate;
            continue;
        }
        if (!passes_quality(region_fit_quality(region, e), cfg)) {
            ++res.regions_filtered;
            continue;
        }
        res.pattern.ellipses.push_back(e);
    }
    return res;
}

PatternRecord extract_pattern(const ColorImage& img, const PipelineConfig& cfg, const std::string& id) {
    return extract_pattern_detailed(img, cfg, id).pattern;
}

}  // namespace bpa::image
