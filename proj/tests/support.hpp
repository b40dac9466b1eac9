#pragma once

// Test-only generators and independent oracles. Nothing here calls into the
// code paths it is used to check.

#include "bpa/image.hpp"
#include "bpa/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace bpa::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(rng);
}

/// Membership test in general conic form x' Q x <= 1 with
/// Q = R diag(1/a^2, 1/b^2) R', built independently of the library's
/// rotated-coordinate rasterizer.
struct ConicEllipse {
    double cx, cy, qxx, qxy, qyy;

    ConicEllipse(double x, double y, double a, double b, double phi_rad) : cx(x), cy(y) {
        const double c = std::cos(phi_rad), s = std::sin(phi_rad);
        const double ia = 1.0 / (a * a), ib = 1.0 / (b * b);
        qxx = c * c * ia + s * s * ib;
        qyy = s * s * ia + c * c * ib;
        qxy = c * s * (ia - ib);
    }

    bool contains(double px, double py) const {
        const double dx = px - cx, dy = py - cy;
        return qxx * dx * dx + 2.0 * qxy * dx * dy + qyy * dy * dy <= 1.0;
    }
};

inline std::vector<image::Pixel> conic_pixels(const ConicEllipse& e, int radius_bound) {
    std::vector<image::Pixel> out;
    const int x0 = static_cast<int>(e.cx) - radius_bound, x1 = static_cast<int>(e.cx) + radius_bound;
    const int y0 = static_cast<int>(e.cy) - radius_bound, y1 = static_cast<int>(e.cy) + radius_bound;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (e.contains(x, y)) out.push_back({x, y});
    return out;
}

/// Paints a dark filled ellipse onto an RGB image.
inline void paint(image::ColorImage& img, const ConicEllipse& e, int radius_bound, double value = 0.15) {
    for (const auto& p : conic_pixels(e, radius_bound)) {
        if (p.x < 0 || p.y < 0 || p.x >= img.width || p.y >= img.height) continue;
        const std::size_t i = 3 * (static_cast<std::size_t>(p.y) * img.width + p.x);
        img.rgb[i] = value * 1.4;  // reddish stain
        img.rgb[i + 1] = value;
        img.rgb[i + 2] = value;
    }
}

using PixelSet = std::set<std::pair<int, int>>;

inline PixelSet to_set(const image::BinaryImage& img) {
    PixelSet s;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.get(x, y)) s.insert({x, y});
    return s;
}

inline const std::vector<std::pair<int, int>>& cross_offsets() {
    static const std::vector<std::pair<int, int>> o{{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    return o;
}

/// Set-definition erosion: keep p iff p + o is in the set for every offset.
inline PixelSet brute_erode(const PixelSet& s) {
    PixelSet out;
    for (const auto& p : s) {
        bool keep = true;
        for (const auto& [dx, dy] : cross_offsets()) keep = keep && s.count({p.first + dx, p.second + dy});
        if (keep) out.insert(p);
    }
    return out;
}

/// Set-definition dilation, clipped to the image.
inline PixelSet brute_dilate(const PixelSet& s, int w, int h) {
    PixelSet out;
    for (const auto& p : s)
        for (const auto& [dx, dy] : cross_offsets()) {
            const int x = p.first + dx, y = p.second + dy;
            if (x >= 0 && y >= 0 && x < w && y < h) out.insert({x, y});
        }
    return out;
}

/// Number of 8-connected components by union-find.
inline std::size_t brute_component_count(const image::BinaryImage& img) {
    const int n = img.width * img.height;
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (!img.get(x, y)) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (img.get(x + dx, y + dy))
                        parent[find(y * img.width + x)] = find((y + dy) * img.width + (x + dx));
        }
    std::set<int> roots;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.get(x, y)) roots.insert(find(y * img.width + x));
    return roots.size();
}

/// Uniform direction on the sphere, folded into the z <= 0 hemisphere. The
/// fold leaves m m' unchanged.
inline Eigen::Vector3d hemisphere_uniform(Rng& rng) {
    Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
    v.normalize();
    if (v.z() > 0.0) v = -v;
    return v;
}

/// Renormalize to unit length within round-off.
inline Eigen::Vector3d unit(Eigen::Vector3d v) {
    v.normalize();
    return v;
}

/// Extended-precision bivariate normal log-density, straight from the
/// closed form with an explicit 2x2 inverse.
inline long double ld_log_density(long double x, long double y, long double mx, long double my, long double sxx,
                                  long double sxy, long double syy) {
    const long double det = sxx * syy - sxy * sxy;
    const long double dx = x - mx, dy = y - my;
    const long double q = (syy * dx * dx - 2.0L * sxy * dx * dy + sxx * dy * dy) / det;
    return -std::log(2.0L * 3.14159265358979323846264338327950288L) - 0.5L * std::log(det) - 0.5L * q;
}

/// Bayes error under equal priors for two bivariate normals:
/// 0.5 * integral of min(p1, p2), by midpoint quadrature over a box.
struct Normal2 {
    double mx, my, sxx, sxy, syy;
    double pdf(double x, double y) const {
        return std::exp(static_cast<double>(ld_log_density(x, y, mx, my, sxx, sxy, syy)));
    }
};

inline double bayes_error(const Normal2& p, const Normal2& q, double lo, double hi, int cells) {
    const double h = (hi - lo) / cells;
    double acc = 0.0;
    for (int i = 0; i < cells; ++i) {
        const double x = lo + (i + 0.5) * h;
        for (int j = 0; j < cells; ++j) {
            const double y = lo + (j + 0.5) * h;
            acc += std::min(p.pdf(x, y), q.pdf(x, y));
        }
    }
    return 0.5 * acc * h * h;
}

/// Draws from N(mu, S) through a hand-rolled 2x2 Cholesky factor.
inline std::pair<double, double> draw(Rng& rng, const Normal2& n) {
    const double l11 = std::sqrt(n.sxx);
    const double l21 = n.sxy / l11;
    const double l22 = std::sqrt(n.syy - l21 * l21);
    const double z1 = normal(rng), z2 = normal(rng);
    return {n.mx + l11 * z1, n.my + l21 * z1 + l22 * z2};
}

}  // namespace bpa::testing
