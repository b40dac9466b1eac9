#pragma once

#include "bpa/likelihood.hpp"
#include "bpa/types.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bpa::evaluation {

using likelihood::LRResult;

/// A featurized pattern with its ground-truth mechanism.
struct LabeledFeature {
    FeatureVector feature;
    std::string label;
    std::optional<SourceMeta> meta;
};

struct HypothesisPair {
    std::string h1 = std::string(kGunshot);  // numerator
    std::string h2 = std::string(kImpact);   // denominator
};

/// Leave-one-out: each pattern is scored by Gaussian models fit on every other
/// pattern of each class. Throws Error{Input, "InsufficientClassSize"} when a
/// class has fewer than 4 members, and Error{Input, "UnknownLabel"} for labels
/// outside the pair.
std::vector<LRResult> loocv(const std::vector<LabeledFeature>& corpus, const HypothesisPair& hyp,
                            const likelihood::FitOptions& fit = {});

/// Featurizes validated patterns (which must carry a mechanism) and runs loocv.
std::vector<LRResult> loocv(const std::vector<ValidatedPattern>& corpus, FeatureKind kind,
                            const HypothesisPair& hyp, const likelihood::FitOptions& fit = {});

/// Which side an LR of exactly 1 supports.
enum class TieRule { FavorDenominator, FavorNumerator };

/// Rows are true H1 / true H2; columns are "supports H1" / "supports H2".
struct BinaryConfusion {
    std::array<std::array<std::size_t, 2>, 2> counts{};

    std::size_t total() const;
    std::size_t errors() const { return counts[0][1] + counts[1][0]; }
    double error_rate() const;
};

/// Rows are true H1 / true H2; columns are LR > hi, lo <= LR <= hi, LR < lo.
/// Values exactly on a bound fall in the intermediate column.
struct ZoneConfusion {
    double lo = 0.5;
    double hi = 2.0;
    std::array<std::array<std::size_t, 3>, 2> counts{};

    std::size_t total() const;
};

/// Decision of a single LR at threshold 1.
bool supports_numerator(double ln_lr, TieRule tie);

/// Throws Error{Input, "LengthMismatch"} when the two lists differ in length.
BinaryConfusion confusion(const std::vector<LRResult>& results, const std::vector<std::string>& labels,
                          const HypothesisPair& hyp, TieRule tie = TieRule::FavorDenominator);

ZoneConfusion zone_confusion(const std::vector<LRResult>& results, const std::vector<std::string>& labels,
                             const HypothesisPair& hyp, double lo = 0.5, double hi = 2.0);

struct TippettPoint {
    double x = 0.0;          // log10(LR)
    double prop_h1_le = 0.0; // share of true-H1 patterns with log10 LR <= x
    double prop_h2_ge = 0.0; // share of true-H2 patterns with log10 LR >= x
};

struct TippettCurves {
    std::vector<double> h1_log10;  // sorted
    std::vector<double> h2_log10;  // sorted
    std::vector<TippettPoint> points;  // one per distinct observed value

    double h1_le(double x) const;
    double h2_ge(double x) const;
};

/// Throws Error{Input, "EmptyClass"} if either class has no results.
TippettCurves tippett(const std::vector<LRResult>& results, const std::vector<std::string>& labels,
                      const HypothesisPair& hyp);

struct ConfidenceEllipse {
    Vec2 center = Vec2::Zero();
    double semi_major = 0.0;
    double semi_minor = 0.0;
    double orientation = 0.0;  // radians, major axis vs f1 axis, in [0, pi)
};

/// -2 ln(1 - p): the chi-square quantile with two degrees of freedom.
double chi2_2dof_quantile(double p);

/// Model ellipse {x : (x - mu)' sigma^-1 (x - mu) <= q(coverage)}.
ConfidenceEllipse confidence_ellipse(const GaussianModel& m, double coverage = 0.95);

struct BreakdownRow {
    std::string mechanism;
    std::string velocity_level;  // "unknown" when missing
    std::string distance_bucket; // "[30,60)" style, or "unknown"
    std::size_t total = 0;
    std::size_t misclassified = 0;
};

/// Counts misclassifications (threshold 1) per mechanism, velocity level and
/// distance bucket. Patterns without metadata land in "unknown" buckets.
std::vector<BreakdownRow> condition_breakdown(const std::vector<LRResult>& results,
                                              const std::vector<LabeledFeature>& corpus, const HypothesisPair& hyp,
                                              double bucket_cm = 30.0, TieRule tie = TieRule::FavorDenominator);

struct EvaluationConfig {
    HypothesisPair hypotheses;
    TieRule tie = TieRule::FavorDenominator;
    double zone_lo = 0.5;
    double zone_hi = 2.0;
    double coverage = 0.95;
    double bucket_cm = 30.0;
    likelihood::FitOptions fit;
};

struct EvaluationReport {
    FeatureKind kind = FeatureKind::Circular;
    HypothesisPair hypotheses;
    std::vector<LRResult> results;
    std::vector<std::string> labels;
    BinaryConfusion confusion_at_1;
    ZoneConfusion confusion_zone;
    double error_rate = 0.0;
    TippettCurves tippett;
    // Models fit on the full corpus, one per hypothesis.
    std::vector<GaussianModel> models;
    std::vector<ConfidenceEllipse> ellipses;
    std::vector<BreakdownRow> breakdown;
};

/// LOOCV plus every summary derived from it, for a corpus of one feature kind.
EvaluationReport evaluate(const std::vector<LabeledFeature>& corpus, const EvaluationConfig& cfg = {});

/// Summaries for already-scored results (no refitting, no ellipses).
EvaluationReport summarize(const std::vector<LRResult>& results, const std::vector<LabeledFeature>& corpus,
                           const EvaluationConfig& cfg = {});

}  // namespace bpa::evaluation
