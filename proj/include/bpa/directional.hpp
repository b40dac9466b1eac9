#pragma once

#include "bpa/types.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace bpa::directional {

enum class Topology {
    Circular,  // angles on [0, 2pi)
    Axial,     // angles on [0, pi); doubled before embedding
};

/// Angles in radians. Values outside the nominal range are wrapped.
struct AngleSample {
    std::vector<double> values;
    Topology topology = Topology::Circular;
};

struct MeanResultant {
    double mean_angle = 0.0;  // radians, in the sample's own range
    double r_bar = 0.0;       // mean resultant length in [0, 1]
};

MeanResultant circular_mean_resultant(const AngleSample& s);

/// 1 - mean resultant length. Throws Error{Input, "EmptySample"}.
double circular_variance(const AngleSample& s);

/// arcsin(b / a), in (0, pi/2].
double impact_angle(const Ellipse& e);

/// Var over the doubled ellipse slopes. Labeled the "variance of gamma angle"
/// in the original feature table, although it is computed from phi.
double slope_variance(std::span<const Ellipse> ellipses);

/// Var over the impact angles, taken on the circle without doubling.
double impact_angle_variance(std::span<const Ellipse> ellipses);

/// Incident direction with the slope standing in for the gamma angle:
/// (-cos a cos 2phi, -cos a sin 2phi, -sin a). The z-component equals -b/a.
Eigen::Vector3d direction_vector(const Ellipse& e);

/// Unit vectors in the target-facing hemisphere (z <= 0).
class DirectionSet {
public:
    /// Throws Error{Input, "InvalidDirection"} if a vector is not unit length
    /// within 1e-12 or points away from the target (z > 0).
    static DirectionSet from_vectors(std::vector<Eigen::Vector3d> vectors);
    static DirectionSet from_ellipses(std::span<const Ellipse> ellipses);

    const std::vector<Eigen::Vector3d>& vectors() const noexcept { return vectors_; }
    std::size_t size() const noexcept { return vectors_.size(); }

private:
    std::vector<Eigen::Vector3d> vectors_;
};

struct ScatterMatrix {
    Eigen::Matrix3d T = Eigen::Matrix3d::Zero();
    std::size_t n = 0;
    std::array<double, 3> eigenvalues{};  // t1 >= t2 >= t3 >= 0
    // Column k pairs with eigenvalues[k].
    Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();
};

/// Sum of outer products plus its sorted eigendecomposition. Throws
/// Error{Input, "TooFewVectors"} for fewer than two vectors.
ScatterMatrix scatter_matrix(const DirectionSet& d);

enum class SphericalShape { Uniform, Unimodal, Bimodal, Girdle };

std::string_view to_string(SphericalShape s);

struct ShapeThresholds {
    double uniform_tol = 0.06;    // |t_k/n - 1/3| below this for all k
    double girdle_small = 0.1;    // t3/n below, t2/n at or above
    double unimodal_min_r = 0.5;  // mean resultant length for unimodal
    double symmetry_ratio = 0.8;  // t3/t2 above => rotational symmetry
};

struct ShapeDiagnosis {
    SphericalShape category = SphericalShape::Uniform;
    bool rotational_symmetry = false;
    double mean_resultant_length = 0.0;
};

ShapeDiagnosis spherical_shape(const ScatterMatrix& sm, const DirectionSet& d,
                               const ShapeThresholds& th = {});

struct FeatureOptions {
    double logit_eps = 1e-6;        // logit inputs clamped to [eps, 1 - eps]
    double eigen_floor = 1e-9;      // eigenvalues floored before ratio / det
    bool normalize_scatter = false; // use T/n for the determinant
};

double clamped_logit(double x, double eps);

FeatureVector circular_features(const ValidatedPattern& p, const FeatureOptions& opt = {});
FeatureVector spherical_features(const ValidatedPattern& p, const FeatureOptions& opt = {});

/// Transformed spherical pair from eigenvalues t1 >= t2 >= t3 of T. `n` is
/// only used when opt.normalize_scatter is set.
std::array<double, 2> spherical_pair(std::array<double, 3> t, std::size_t n, const FeatureOptions& opt = {});

FeatureVector compute_features(const ValidatedPattern& p, FeatureKind kind, const FeatureOptions& opt = {});

}  // namespace bpa::directional
