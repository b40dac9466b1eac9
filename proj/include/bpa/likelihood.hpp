#pragma once

#include "bpa/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bpa::likelihood {

struct FitOptions {
    // Divide by N - 1 instead of N.
    bool unbiased = false;
    // Added to the diagonal when sigma's smallest eigenvalue falls below it.
    double ridge = 1e-8;
};

/// Maximum-likelihood bivariate Gaussian. Throws Error{Input, "TooFewSamples"}
/// for fewer than 3 rows and Error{Input, "NonFiniteInput"} for NaN/inf.
GaussianModel fit_gaussian(std::span<const Vec2> features, FeatureKind kind = FeatureKind::Circular,
                           const std::string& hypothesis = {}, const FitOptions& opt = {});

/// Natural-log density. Throws Error{Numeric, "SingularCovariance"} when sigma
/// is not positive-definite.
double gaussian_log_density(const Vec2& f, const GaussianModel& m);
double gaussian_density(const Vec2& f, const GaussianModel& m);

struct LRResult {
    std::string pattern_id;
    double ln_lr = 0.0;
    double log10_lr = 0.0;
    // exp(ln_lr), saturated to the finite positive doubles.
    double lr = 1.0;
    std::string numerator;
    std::string denominator;
};

LRResult make_lr_result(std::string pattern_id, double ln_lr, std::string numerator, std::string denominator);

/// Two-hypothesis ratio of densities, in log space. Throws
/// Error{Input, "KindMismatch"} if the feature and model kinds differ.
LRResult likelihood_ratio(const FeatureVector& f, const GaussianModel& m1, const GaussianModel& m2);

struct HypothesisSet {
    std::vector<GaussianModel> models;
    // Nonnegative prior weights P(H_i); equal weights when absent.
    std::optional<std::vector<double>> priors;
};

/// Main hypothesis against the prior-weighted mixture of the alternatives.
/// With a single alternative this reduces exactly to likelihood_ratio.
LRResult generalized_lr(const FeatureVector& f, const GaussianModel& main, const HypothesisSet& alternatives);

}  // namespace bpa::likelihood
