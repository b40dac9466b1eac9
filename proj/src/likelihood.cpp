#include "bpa/likelihood.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bpa::likelihood {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2 pi)
constexpr double kLn10 = 2.3025850929940456840;

void require_kind(const FeatureVector& f, const GaussianModel& m) {
    if (f.kind != m.kind) {
        throw Error(ErrorCode::Input, "KindMismatch",
                    "feature is " + std::string(to_string(f.kind)) + " but model '" + m.hypothesis + "' is " +
                        std::string(to_string(m.kind)));
    }
}

}  // namespace

GaussianModel fit_gaussian(std::span<const Vec2> features, FeatureKind kind, const std::string& hypothesis,
                           const FitOptions& opt) {
    if (features.size() < 3) {
        throw Error(ErrorCode::Input, "TooFewSamples",
                    "need at least 3 training rows, got " + std::to_string(features.size()));
    }
    for (const auto& f : features) {
        if (!f.allFinite()) throw Error(ErrorCode::Input, "NonFiniteInput", "training feature is not finite");
    }

    const double n = static_cast<double>(features.size());
    Vec2 mu = Vec2::Zero();
    for (const auto& f : features) mu += f;
    mu /= n;

    Mat2 sigma = Mat2::Zero();
    for (const auto& f : features) {
        const Vec2 d = f - mu;
        sigma.noalias() += d * d.transpose();
    }
    sigma /= opt.unbiased ? n - 1.0 : n;
    sigma(0, 1) = sigma(1, 0) = 0.5 * (sigma(0, 1) + sigma(1, 0));

    GaussianModel m;
    m.mu = mu;
    m.n_train = features.size();
    m.kind = kind;
    m.hypothesis = hypothesis;
    Eigen::SelfAdjointEigenSolver<Mat2> eig(sigma, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()(0) < opt.ridge) {
        sigma += opt.ridge * Mat2::Identity();
        m.regularized = true;
    }
    m.sigma = sigma;
    return m;
}

double gaussian_log_density(const Vec2& f, const GaussianModel& m) {
    Eigen::LLT<Mat2> llt(m.sigma);
    if (llt.info() != Eigen::Success || !(llt.matrixL()(0, 0) > 0.0) || !(llt.matrixL()(1, 1) > 0.0)) {
        throw Error(ErrorCode::Numeric, "SingularCovariance",
                    "covariance of model '" + m.hypothesis + "' is not positive-definite");
    }
    const Mat2 L = llt.matrixL();
    const Vec2 z = L.triangularView<Eigen::Lower>().solve(f - m.mu);
    const double half_log_det = std::log(L(0, 0)) + std::log(L(1, 1));
    return -kLog2Pi - half_log_det - 0.5 * z.squaredNorm();
}

double gaussian_density(const Vec2& f, const GaussianModel& m) {
    return std::exp(gaussian_log_density(f, m));
}

LRResult make_lr_result(std::string pattern_id, double ln_lr, std::string numerator, std::string denominator) {
    LRResult r;
    r.pattern_id = std::move(pattern_id);
    r.ln_lr = ln_lr;
    r.log10_lr = ln_lr / kLn10;
    const double lr = std::exp(ln_lr);
    r.lr = std::clamp(lr, std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max());
    r.numerator = std::move(numerator);
    r.denominator = std::move(denominator);
    return r;
}

LRResult likelihood_ratio(const FeatureVector& f, const GaussianModel& m1, const GaussianModel& m2) {
    require_kind(f, m1);
    require_kind(f, m2);
    const Vec2 x = f.values();
    const double ln_lr = gaussian_log_density(x, m1) - gaussian_log_density(x, m2);
    return make_lr_result(f.pattern_id, ln_lr, m1.hypothesis, m2.hypothesis);
}

LRResult generalized_lr(const FeatureVector& f, const GaussianModel& main, const HypothesisSet& alternatives) {
    const auto& alts = alternatives.models;
    if (alts.empty()) throw Error(ErrorCode::Input, "EmptyAlternatives", "no alternative hypotheses given");

    std::vector<double> w(alts.size(), 1.0);
    if (alternatives.priors) {
        if (alternatives.priors->size() != alts.size()) {
            throw Error(ErrorCode::Input, "NonPositiveWeights", "one prior weight per alternative is required");
        }
        w = *alternatives.priors;
    }
    double total = 0.0;
    for (double v : w) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::Input, "NonPositiveWeights", "prior weights must be finite and nonnegative");
        }
        total += v;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::Input, "NonPositiveWeights", "prior weights sum to zero");

    require_kind(f, main);
    const Vec2 x = f.values();

    // log sum_i w_i p_i(x), by log-sum-exp over the nonzero weights.
    std::vector<double> terms;
    std::string label;
    for (std::size_t i = 0; i < alts.size(); ++i) {
        require_kind(f, alts[i]);
        if (!label.empty()) label += '|';
        label += alts[i].hypothesis;
        if (w[i] == 0.0) continue;
        const double lw = w[i] == total ? 0.0 : std::log(w[i] / total);
        terms.push_back(lw + gaussian_log_density(x, alts[i]));
    }
    const double peak = *std::max_element(terms.begin(), terms.end());
    double log_den = peak;
    if (terms.size() > 1 && std::isfinite(peak)) {
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - peak);
        log_den = peak + std::log(acc);
    }
    return make_lr_result(f.pattern_id, gaussian_log_density(x, main) - log_den, main.hypothesis, label);
}

}  // namespace bpa::likelihood
