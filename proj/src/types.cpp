#include "bpa/types.hpp"

#include <cmath>
#include <utility>

namespace bpa {

double wrap_axial(double rad) {
    double w = std::fmod(rad, kPi);
    if (w < 0.0) w += kPi;
    // fmod can land exactly on pi after the shift for tiny negative inputs.
    if (w >= kPi) w = 0.0;
    return w;
}

Ellipse make_ellipse(double x, double y, double a, double b, double phi_rad) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(a) || !std::isfinite(b) ||
        !std::isfinite(phi_rad)) {
        throw Error(ErrorCode::Input, "InvalidEllipse", "non-finite ellipse parameter");
    }
    if (a <= 0.0 || b <= 0.0) {
        throw Error(ErrorCode::Input, "InvalidEllipse", "semi-axes must be positive");
    }
    if (b > a) {
        std::swap(a, b);
        phi_rad += kPi / 2.0;
    }
    return Ellipse{x, y, a, b, wrap_axial(phi_rad)};
}

Ellipse make_ellipse_deg(double x, double y, double a, double b, double phi_deg) {
    return make_ellipse(x, y, a, b, deg_to_rad(phi_deg));
}

std::string ellipse_invariant_violation(const Ellipse& e) {
    if (!std::isfinite(e.x) || !std::isfinite(e.y) || !std::isfinite(e.a) || !std::isfinite(e.b) ||
        !std::isfinite(e.phi))
        return "non-finite parameter";
    if (e.b <= 0.0) return "semi-minor axis must be positive";
    if (e.a < e.b) return "semi-major axis shorter than semi-minor axis";
    if (e.phi < 0.0 || e.phi >= kPi) return "orientation outside [0, 180) degrees";
    return {};
}

std::string Rejection::describe() const {
    switch (rule) {
    case Rule::TooFewEllipses:
        return "TooFewEllipses: " + reason;
    case Rule::InvalidEllipse:
        return "InvalidEllipse(" + std::to_string(index) + "): " + reason;
    }
    return reason;
}

std::variant<ValidatedPattern, Rejection> validate_pattern(const PatternRecord& p) {
    if (p.ellipses.size() < kMinEllipses) {
        return Rejection{Rejection::Rule::TooFewEllipses, 0,
                         std::to_string(p.ellipses.size()) + " ellipses, need at least " +
                             std::to_string(kMinEllipses)};
    }
    for (std::size_t i = 0; i < p.ellipses.size(); ++i) {
        if (auto why = ellipse_invariant_violation(p.ellipses[i]); !why.empty()) {
            return Rejection{Rejection::Rule::InvalidEllipse, i, std::move(why)};
        }
    }
    return ValidatedPattern(p);
}

std::variant<ValidatedPattern, Rejection> validate_pattern(const ValidatedPattern& p) {
    return validate_pattern(p.record());
}

ValidatedPattern require_valid(const PatternRecord& p) {
    auto v = validate_pattern(p);
    if (auto* rej = std::get_if<Rejection>(&v)) {
        throw Error(ErrorCode::Input, "Rejected", "pattern '" + p.id + "': " + rej->describe());
    }
    return std::get<ValidatedPattern>(std::move(v));
}

std::string_view to_string(FeatureKind kind) {
    return kind == FeatureKind::Circular ? "circular" : "spherical";
}

FeatureKind parse_feature_kind(std::string_view s) {
    if (s == "circular") return FeatureKind::Circular;
    if (s == "spherical") return FeatureKind::Spherical;
    throw Error(ErrorCode::Input, "UnknownKind", "unknown feature kind '" + std::string(s) + "'");
}

}  // namespace bpa
