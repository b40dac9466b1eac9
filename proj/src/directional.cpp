#include "bpa/directional.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace bpa::directional {

namespace {

double wrap_circular(double rad) {
    double w = std::fmod(rad, 2.0 * kPi);
    if (w < 0.0) w += 2.0 * kPi;
    if (w >= 2.0 * kPi) w = 0.0;
    return w;
}

}  // namespace

MeanResultant circular_mean_resultant(const AngleSample& s) {
    if (s.values.empty()) throw Error(ErrorCode::Input, "EmptySample", "angle sample is empty");
    const bool axial = s.topology == Topology::Axial;
    std::vector<double> embedded;
    embedded.reserve(s.values.size());
    for (double v : s.values) embedded.push_back(wrap_circular(axial ? 2.0 * v : v));

    MeanResultant m;
    // A constant sample has R = 1 exactly; summing n rounded cosines does not
    // always land there.
    if (std::all_of(embedded.begin(), embedded.end(), [&](double t) { return t == embedded.front(); })) {
        m.r_bar = 1.0;
        m.mean_angle = axial ? wrap_axial(embedded.front() / 2.0) : embedded.front();
        return m;
    }

    double c = 0.0, sn = 0.0;
    for (double t : embedded) {
        c += std::cos(t);
        sn += std::sin(t);
    }
    const double n = static_cast<double>(embedded.size());
    c /= n;
    sn /= n;
    m.r_bar = std::min(std::hypot(c, sn), 1.0);
    const double mean = wrap_circular(std::atan2(sn, c));
    m.mean_angle = axial ? wrap_axial(mean / 2.0) : mean;
    return m;
}

double circular_variance(const AngleSample& s) {
    return 1.0 - circular_mean_resultant(s).r_bar;
}

double impact_angle(const Ellipse& e) {
    return std::asin(std::min(e.b / e.a, 1.0));
}

double slope_variance(std::span<const Ellipse> ellipses) {
    AngleSample s{{}, Topology::Axial};
    s.values.reserve(ellipses.size());
    for (const auto& e : ellipses) s.values.push_back(e.phi);
    return circular_variance(s);
}

double impact_angle_variance(std::span<const Ellipse> ellipses) {
    AngleSample s{{}, Topology::Circular};
    s.values.reserve(ellipses.size());
    for (const auto& e : ellipses) s.values.push_back(impact_angle(e));
    return circular_variance(s);
}

Eigen::Vector3d direction_vector(const Ellipse& e) {
    const double sin_a = std::min(e.b / e.a, 1.0);
    // (a - b)(a + b) keeps cos(alpha) accurate for nearly circular stains.
    const double cos_a = std::sqrt(std::max((e.a - e.b) * (e.a + e.b), 0.0)) / e.a;
    return {-cos_a * std::cos(2.0 * e.phi), -cos_a * std::sin(2.0 * e.phi), -sin_a};
}

DirectionSet DirectionSet::from_vectors(std::vector<Eigen::Vector3d> vectors) {
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const auto& v = vectors[i];
        if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-12) {
            throw Error(ErrorCode::Input, "InvalidDirection", "vector " + std::to_string(i) + " is not unit length");
        }
        if (v.z() > 0.0) {
            throw Error(ErrorCode::Input, "InvalidDirection",
                        "vector " + std::to_string(i) + " points away from the target");
        }
    }
    DirectionSet d;
    d.vectors_ = std::move(vectors);
    return d;
}

DirectionSet DirectionSet::from_ellipses(std::span<const Ellipse> ellipses) {
    std::vector<Eigen::Vector3d> v;
    v.reserve(ellipses.size());
    for (const auto& e : ellipses) v.push_back(direction_vector(e));
    return from_vectors(std::move(v));
}

ScatterMatrix scatter_matrix(const DirectionSet& d) {
    if (d.size() < 2) throw Error(ErrorCode::Input, "TooFewVectors", "scatter matrix needs at least 2 vectors");
    ScatterMatrix sm;
    sm.n = d.size();
    for (const auto& m : d.vectors()) sm.T.noalias() += m * m.transpose();
    // Exact symmetry for the solver.
    sm.T = 0.5 * (sm.T + sm.T.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(sm.T);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::Numeric, "EigenFailure", "scatter matrix eigendecomposition failed");
    }
    // Eigen sorts ascending.
    for (int k = 0; k < 3; ++k) {
        sm.eigenvalues[k] = std::max(solver.eigenvalues()(2 - k), 0.0);
        sm.eigenvectors.col(k) = solver.eigenvectors().col(2 - k);
    }
    return sm;
}

std::string_view to_string(SphericalShape s) {
    switch (s) {
    case SphericalShape::Uniform: return "uniform";
    case SphericalShape::Unimodal: return "unimodal";
    case SphericalShape::Bimodal: return "bimodal";
    case SphericalShape::Girdle: return "girdle";
    }
    return "unknown";
}

ShapeDiagnosis spherical_shape(const ScatterMatrix& sm, const DirectionSet& d, const ShapeThresholds& th) {
    const double n = static_cast<double>(sm.n);
    const double r1 = sm.eigenvalues[0] / n, r2 = sm.eigenvalues[1] / n, r3 = sm.eigenvalues[2] / n;

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& m : d.vectors()) mean += m;
    mean /= static_cast<double>(d.size());

    ShapeDiagnosis out;
    out.mean_resultant_length = std::min(mean.norm(), 1.0);
    const double third = 1.0 / 3.0;
    if (std::abs(r1 - third) < th.uniform_tol && std::abs(r2 - third) < th.uniform_tol &&
        std::abs(r3 - third) < th.uniform_tol) {
        out.category = SphericalShape::Uniform;
    } else if (r3 < th.girdle_small && r2 >= th.girdle_small) {
        out.category = SphericalShape::Girdle;
    } else if (out.mean_resultant_length >= th.unimodal_min_r) {
        out.category = SphericalShape::Unimodal;
    } else {
        out.category = SphericalShape::Bimodal;
    }
    out.rotational_symmetry = sm.eigenvalues[1] > 0.0 && sm.eigenvalues[2] / sm.eigenvalues[1] > th.symmetry_ratio;
    return out;
}

double clamped_logit(double x, double eps) {
    const double c = std::clamp(x, eps, 1.0 - eps);
    return std::log(c / (1.0 - c));
}

FeatureVector circular_features(const ValidatedPattern& p, const FeatureOptions& opt) {
    FeatureVector f;
    f.kind = FeatureKind::Circular;
    f.pattern_id = p.id();
    f.f1 = clamped_logit(slope_variance(p.ellipses()), opt.logit_eps);
    f.f2 = clamped_logit(impact_angle_variance(p.ellipses()), opt.logit_eps);
    return f;
}

std::array<double, 2> spherical_pair(std::array<double, 3> t, std::size_t n, const FeatureOptions& opt) {
    if (opt.normalize_scatter) {
        for (double& v : t) v /= static_cast<double>(n);
    }
    for (double& v : t) v = std::max(v, opt.eigen_floor);
    return {clamped_logit(t[2] / t[1], opt.logit_eps), std::log(t[0] * t[1] * t[2])};
}

FeatureVector spherical_features(const ValidatedPattern& p, const FeatureOptions& opt) {
    const auto sm = scatter_matrix(DirectionSet::from_ellipses(p.ellipses()));
    const auto pair = spherical_pair(sm.eigenvalues, sm.n, opt);
    FeatureVector f;
    f.kind = FeatureKind::Spherical;
    f.pattern_id = p.id();
    f.f1 = pair[0];
    f.f2 = pair[1];
    return f;
}

FeatureVector compute_features(const ValidatedPattern& p, FeatureKind kind, const FeatureOptions& opt) {
    return kind == FeatureKind::Circular ? circular_features(p, opt) : spherical_features(p, opt);
}

}  // namespace bpa::directional
