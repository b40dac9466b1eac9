#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bpa {

/// Error categories. The CLI maps each category onto an exit code.
enum class ErrorCode {
    Usage,
    Input,
    Numeric,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), code_(code), kind_(std::move(kind)) {}

    ErrorCode code() const noexcept { return code_; }
    /// Short machine-readable tag, e.g. "TooFewSamples".
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorCode code_;
    std::string kind_;
};

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// One stain approximated by an ellipse in pixel coordinates (y is the row
/// index, growing downwards). `phi` is the axial orientation of the major axis
/// against the x-axis, stored in radians in [0, pi).
///
/// The fields are public so that tables can be carried around cheaply; use
/// make_ellipse / make_ellipse_deg to get the normalized form. validate_pattern
/// re-checks the invariants for anything built by hand.
struct Ellipse {
    double x = 0.0;
    double y = 0.0;
    double a = 1.0;
    double b = 1.0;
    double phi = 0.0;

    double phi_deg() const { return rad_to_deg(phi); }
};

/// Builds a normalized ellipse: swaps the axes (rotating phi by 90 degrees)
/// when b > a and wraps phi into [0, pi). Throws Error{Input} for non-finite
/// values or non-positive axes.
Ellipse make_ellipse(double x, double y, double a, double b, double phi_rad);
Ellipse make_ellipse_deg(double x, double y, double a, double b, double phi_deg);

/// Wraps an axial angle into [0, pi).
double wrap_axial(double rad);

/// Returns an empty string when the ellipse satisfies a >= b > 0 and
/// phi in [0, pi); otherwise a short reason.
std::string ellipse_invariant_violation(const Ellipse& e);

struct SourceMeta {
    std::optional<double> distance_cm;
    std::optional<std::string> velocity_level;
};

inline constexpr std::string_view kGunshot = "gunshot";
inline constexpr std::string_view kImpact = "impact";

struct PatternRecord {
    std::string id;
    std::vector<Ellipse> ellipses;
    // "gunshot", "impact" or any other mechanism name; empty for casework.
    std::optional<std::string> mechanism;
    std::optional<SourceMeta> source_meta;
};

/// Minimum number of ellipses a pattern needs to be modeled.
inline constexpr std::size_t kMinEllipses = 6;

struct Rejection {
    enum class Rule { TooFewEllipses, InvalidEllipse };
    Rule rule;
    std::size_t index = 0;  // offending ellipse, InvalidEllipse only
    std::string reason;

    std::string describe() const;
};

/// A PatternRecord that passed validate_pattern. Only validate_pattern can
/// build one.
class ValidatedPattern {
public:
    const PatternRecord& record() const noexcept { return record_; }
    const std::string& id() const noexcept { return record_.id; }
    const std::vector<Ellipse>& ellipses() const noexcept { return record_.ellipses; }
    const std::optional<std::string>& mechanism() const noexcept { return record_.mechanism; }

private:
    friend std::variant<ValidatedPattern, Rejection> validate_pattern(const PatternRecord&);
    explicit ValidatedPattern(PatternRecord r) : record_(std::move(r)) {}
    PatternRecord record_;
};

std::variant<ValidatedPattern, Rejection> validate_pattern(const PatternRecord& p);
std::variant<ValidatedPattern, Rejection> validate_pattern(const ValidatedPattern& p);

/// Throws Error{Input, "Rejected"} instead of returning a Rejection.
ValidatedPattern require_valid(const PatternRecord& p);

/// One competing proposition about the mechanism, numbered 1..K.
struct Hypothesis {
    std::string label;
    int index = 1;
};

enum class FeatureKind { Circular, Spherical };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view s);

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

struct FeatureVector {
    FeatureKind kind = FeatureKind::Circular;
    double f1 = 0.0;
    double f2 = 0.0;
    std::string pattern_id;

    Vec2 values() const { return {f1, f2}; }
};

struct GaussianModel {
    Vec2 mu = Vec2::Zero();
    Mat2 sigma = Mat2::Identity();
    std::size_t n_train = 0;
    FeatureKind kind = FeatureKind::Circular;
    std::string hypothesis;
    // True when the ridge term was added to make sigma positive-definite.
    bool regularized = false;
};

}  // namespace bpa
