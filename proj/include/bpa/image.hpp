#pragma once

#include "bpa/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Scanned pattern image -> ellipse table.
//
// grayscale -> background estimate and subtraction -> triangle threshold ->
// morphological opening -> 8-connected labeling -> moment ellipse per region
// -> Jaccard / Hausdorff quality gate.
namespace bpa::image {

/// Interleaved RGB, channel values in [0, 1].
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;

    double r(int x, int y) const { return rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
    double g(int x, int y) const { return rgb[3 * (static_cast<std::size_t>(y) * width + x) + 1]; }
    double b(int x, int y) const { return rgb[3 * (static_cast<std::size_t>(y) * width + x) + 2]; }
};

ColorImage make_color_image(int width, int height, std::array<double, 3> fill);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct BinaryImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 1 = stain foreground

    BinaryImage() = default;
    BinaryImage(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool get(int x, int y) const {
        if (x < 0 || y < 0 || x >= width || y >= height) return false;
        return bits[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool v = true) {
        bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
    }
    std::size_t count() const;
};

struct Pixel {
    int x = 0;
    int y = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
    // Row-major order.
    friend bool operator<(const Pixel& l, const Pixel& r) {
        return l.y != r.y ? l.y < r.y : l.x < r.x;
    }
};

/// One 8-connected foreground component. `pixels` and `contour` are sorted
/// row-major; the contour holds the pixels with a 4-neighbour outside the
/// region.
struct Region {
    std::vector<Pixel> pixels;
    std::vector<Pixel> contour;

    std::size_t area() const { return pixels.size(); }
};

enum class StructuringElement { Cross3x3, Square3x3 };

enum class JaccardRule {
    // Discard when 1 - JaccardIndex exceeds the bound.
    Dissimilarity,
    // Discard when the raw JaccardIndex exceeds the bound.
    LiteralIndex,
};

struct PipelineConfig {
    int background_downsample_factor = 16;
    int median_window = 5;
    int morph_iterations = 4;
    double jaccard_dissimilarity_max = 0.9;
    double hausdorff_max_px = 5.0;
    int min_region_area_px = 8;
    StructuringElement element = StructuringElement::Cross3x3;
    JaccardRule jaccard_rule = JaccardRule::Dissimilarity;

    /// Throws Error{Usage, "InvalidConfig"} when a field is out of range.
    void validate() const;
};

/// Decodes a PNG/JPEG file. Throws Error{Input, "UnreadableImage"}.
ColorImage load_image(const std::filesystem::path& path);
/// Writes an 8-bit RGB image; used for synthetic fixtures.
void save_image(const ColorImage& img, const std::filesystem::path& path);

GrayImage to_grayscale(const ColorImage& rgb);
GrayImage estimate_background(const GrayImage& img, const PipelineConfig& cfg);
GrayImage subtract_background(const GrayImage& img, const GrayImage& bg);

/// Builds the 256-bin histogram used by triangle_threshold. Values are
/// mapped with round(v * 255).
std::array<std::size_t, 256> histogram256(const GrayImage& img);

/// Triangle (Zack) threshold bin over a 256-bin histogram. Pixels whose bin is
/// strictly greater than the returned bin are foreground. Throws
/// Error{Input, "DegenerateHistogram"} when fewer than two bins are occupied.
int triangle_threshold_bin(const std::array<std::size_t, 256>& hist);
BinaryImage triangle_threshold(const GrayImage& img);

BinaryImage erode(const BinaryImage& img, StructuringElement se = StructuringElement::Cross3x3);
BinaryImage dilate(const BinaryImage& img, StructuringElement se = StructuringElement::Cross3x3);
/// `iterations` erosions followed by `iterations` dilations.
BinaryImage morph_smooth(const BinaryImage& img, int iterations,
                         StructuringElement se = StructuringElement::Cross3x3);

std::vector<Region> label_regions(const BinaryImage& img, const PipelineConfig& cfg);

/// Builds a Region (with contour) from an arbitrary pixel set.
Region make_region(std::vector<Pixel> pixels);

/// Ellipse with the same first and second moments as the region. Pixels are
/// treated as unit squares, so each axis variance carries an extra 1/12.
/// Throws Error{Numeric, "DegenerateRegion"} for fewer than 3 pixels or a
/// collinear region.
Ellipse fit_ellipse_moments(const Region& r);

/// Pixels whose centers fall inside the ellipse, sorted row-major.
std::vector<Pixel> rasterize_ellipse(const Ellipse& e);

struct FitQuality {
    double jaccard_dissimilarity = 1.0;
    double hausdorff_px = 0.0;
};

FitQuality region_fit_quality(const Region& r, const Ellipse& e);

bool passes_quality(const FitQuality& q, const PipelineConfig& cfg);

struct ExtractionResult {
    PatternRecord pattern;
    std::size_t regions_found = 0;
    std::size_t regions_degenerate = 0;
    std::size_t regions_filtered = 0;  // failed the quality gate
};

ExtractionResult extract_pattern_detailed(const ColorImage& img, const PipelineConfig& cfg,
                                          const std::string& id);
PatternRecord extract_pattern(const ColorImage& img, const PipelineConfig& cfg,
                              const std::string& id);

}  // namespace bpa::image
