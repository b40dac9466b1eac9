#include "bpa/evaluation.hpp"

#include "bpa/directional.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

namespace bpa::evaluation {

namespace {

int class_index(const std::string& label, const HypothesisPair& hyp) {
    if (label == hyp.h1) return 0;
    if (label == hyp.h2) return 1;
    throw Error(ErrorCode::Input, "UnknownLabel",
                "label '" + label + "' is neither '" + hyp.h1 + "' nor '" + hyp.h2 + "'");
}

void require_same_length(std::size_t a, std::size_t b) {
    if (a != b) {
        throw Error(ErrorCode::Input, "LengthMismatch",
                    std::to_string(a) + " results but " + std::to_string(b) + " labels");
    }
}

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

std::vector<LRResult> loocv(const std::vector<LabeledFeature>& corpus, const HypothesisPair& hyp,
                            const likelihood::FitOptions& fit) {
    std::array<std::size_t, 2> sizes{};
    for (const auto& item : corpus) ++sizes[class_index(item.label, hyp)];
    for (int c = 0; c < 2; ++c) {
        if (sizes[c] < 4) {
            throw Error(ErrorCode::Input, "InsufficientClassSize",
                        "class '" + (c == 0 ? hyp.h1 : hyp.h2) + "' has " + std::to_string(sizes[c]) +
                            " patterns, leave-one-out needs at least 4");
        }
    }
    if (!corpus.empty()) {
        const FeatureKind kind = corpus.front().feature.kind;
        for (const auto& item : corpus) {
            if (item.feature.kind != kind) {
                throw Error(ErrorCode::Input, "KindMismatch", "corpus mixes circular and spherical features");
            }
        }
    }

    std::vector<LRResult> out;
    out.reserve(corpus.size());
    std::array<std::vector<Vec2>, 2> train;
    for (std::size_t held = 0; held < corpus.size(); ++held) {
        train[0].clear();
        train[1].clear();
        for (std::size_t j = 0; j < corpus.size(); ++j) {
            if (j == held) continue;
            train[class_index(corpus[j].label, hyp)].push_back(corpus[j].feature.values());
        }
        const FeatureKind kind = corpus[held].feature.kind;
        const auto m1 = likelihood::fit_gaussian(train[0], kind, hyp.h1, fit);
        const auto m2 = likelihood::fit_gaussian(train[1], kind, hyp.h2, fit);
        out.push_back(likelihood::likelihood_ratio(corpus[held].feature, m1, m2));
    }
    return out;
}

std::vector<LRResult> loocv(const std::vector<ValidatedPattern>& corpus, FeatureKind kind, const HypothesisPair& hyp,
                            const likelihood::FitOptions& fit) {
    std::vector<LabeledFeature> features;
    features.reserve(corpus.size());
    for (const auto& p : corpus) {
        if (!p.mechanism()) {
            throw Error(ErrorCode::Input, "UnknownLabel", "pattern '" + p.id() + "' has no mechanism label");
        }
        features.push_back({directional::compute_features(p, kind), *p.mechanism(), p.record().source_meta});
    }
    return loocv(features, hyp, fit);
}

std::size_t BinaryConfusion::total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double BinaryConfusion::error_rate() const {
    const std::size_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(errors()) / static_cast<double>(n);
}

std::size_t ZoneConfusion::total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
        for (std::size_t c : row) n += c;
    return n;
}

bool supports_numerator(double ln_lr, TieRule tie) {
    if (ln_lr == 0.0) return tie == TieRule::FavorNumerator;
    return ln_lr > 0.0;
}

BinaryConfusion confusion(const std::vector<LRResult>& results, const std::vector<std::string>& labels,
                          const HypothesisPair& hyp, TieRule tie) {
    require_same_length(results.size(), labels.size());
    BinaryConfusion m;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const int row = class_index(labels[i], hyp);
        ++m.counts[row][supports_numerator(results[i].ln_lr, tie) ? 0 : 1];
    }
    return m;
}

ZoneConfusion zone_confusion(const std::vector<LRResult>& results, const std::vector<std::string>& labels,
                             const HypothesisPair& hyp, double lo, double hi) {
    require_same_length(results.size(), labels.size());
    if (!(lo > 0.0 && lo <= hi)) {
        throw Error(ErrorCode::Usage, "InvalidThresholds", "zone thresholds must satisfy 0 < lo <= hi");
    }
    ZoneConfusion m;
    m.lo = lo;
    m.hi = hi;
    const double ln_lo = std::log(lo), ln_hi = std::log(hi);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const int row = class_index(labels[i], hyp);
        const double v = results[i].ln_lr;
        const int col = v > ln_hi ? 0 : (v < ln_lo ? 2 : 1);
        ++m.counts[row][col];
    }
    return m;
}

double TippettCurves::h1_le(double x) const {
    const auto it = std::upper_bound(h1_log10.begin(), h1_log10.end(), x);
    return static_cast<double>(it - h1_log10.begin()) / static_cast<double>(h1_log10.size());
}

double TippettCurves::h2_ge(double x) const {
    const auto it = std::lower_bound(h2_log10.begin(), h2_log10.end(), x);
    return static_cast<double>(h2_log10.end() - it) / static_cast<double>(h2_log10.size());
}

TippettCurves tippett(const std::vector<LRResult>& results, const std::vector<std::string>& labels,
                      const HypothesisPair& hyp) {
    require_same_length(results.size(), labels.size());
    TippettCurves t;
    for (std::size_t i = 0; i < results.size(); ++i) {
        (class_index(labels[i], hyp) == 0 ? t.h1_log10 : t.h2_log10).push_back(results[i].log10_lr);
    }
    if (t.h1_log10.empty() || t.h2_log10.empty()) {
        throw Error(ErrorCode::Input, "EmptyClass", "Tippett curves need results from both hypotheses");
    }
    std::sort(t.h1_log10.begin(), t.h1_log10.end());
    std::sort(t.h2_log10.begin(), t.h2_log10.end());

    std::vector<double> xs = t.h1_log10;
    xs.insert(xs.end(), t.h2_log10.begin(), t.h2_log10.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    t.points.reserve(xs.size());
    for (double x : xs) t.points.push_back({x, t.h1_le(x), t.h2_ge(x)});
    return t;
}

double chi2_2dof_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorCode::Usage, "InvalidCoverage", "coverage must lie strictly between 0 and 1");
    }
    return -2.0 * std::log1p(-p);
}

ConfidenceEllipse confidence_ellipse(const GaussianModel& m, double coverage) {
    const double q = chi2_2dof_quantile(coverage);
    Eigen::SelfAdjointEigenSolver<Mat2> eig(m.sigma);
    if (eig.info() != Eigen::Success || eig.eigenvalues()(0) < 0.0) {
        throw Error(ErrorCode::Numeric, "SingularCovariance", "covariance is not positive semi-definite");
    }
    ConfidenceEllipse e;
    e.center = m.mu;
    e.semi_major = std::sqrt(q * eig.eigenvalues()(1));
    e.semi_minor = std::sqrt(q * eig.eigenvalues()(0));
    const Vec2 major = eig.eigenvectors().col(1);
    e.orientation = wrap_axial(std::atan2(major.y(), major.x()));
    return e;
}

std::vector<BreakdownRow> condition_breakdown(const std::vector<LRResult>& results,
                                              const std::vector<LabeledFeature>& corpus, const HypothesisPair& hyp,
                                              double bucket_cm, TieRule tie) {
    require_same_length(results.size(), corpus.size());
    if (!(bucket_cm > 0.0)) throw Error(ErrorCode::Usage, "InvalidBucket", "distance bucket width must be positive");

    using Key = std::tuple<std::string, std::string, double, std::string>;
    std::map<Key, BreakdownRow> rows;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& item = corpus[i];
        std::string velocity = "unknown";
        std::string bucket = "unknown";
        double bucket_lo = std::numeric_limits<double>::infinity();
        if (item.meta) {
            if (item.meta->velocity_level && !item.meta->velocity_level->empty()) velocity = *item.meta->velocity_level;
            if (item.meta->distance_cm) {
                bucket_lo = std::floor(*item.meta->distance_cm / bucket_cm) * bucket_cm;
                bucket = "[" + short_number(bucket_lo) + "," + short_number(bucket_lo + bucket_cm) + ")";
            }
        }
        auto& row = rows[Key{item.label, velocity, bucket_lo, bucket}];
        row.mechanism = item.label;
        row.velocity_level = velocity;
        row.distance_bucket = bucket;
        ++row.total;
        const bool says_h1 = supports_numerator(results[i].ln_lr, tie);
        if (says_h1 != (class_index(item.label, hyp) == 0)) ++row.misclassified;
    }
    std::vector<BreakdownRow> out;
    out.reserve(rows.size());
    for (auto& [key, row] : rows) out.push_back(std::move(row));
    return out;
}

namespace {

std::vector<std::string> labels_of(const std::vector<LabeledFeature>& corpus) {
    std::vector<std::string> labels;
    labels.reserve(corpus.size());
    for (const auto& item : corpus) labels.push_back(item.label);
    return labels;
}

}  // namespace

EvaluationReport summarize(const std::vector<LRResult>& results, const std::vector<LabeledFeature>& corpus,
                           const EvaluationConfig& cfg) {
    EvaluationReport r;
    r.kind = corpus.empty() ? FeatureKind::Circular : corpus.front().feature.kind;
    r.hypotheses = cfg.hypotheses;
    r.results = results;
    r.labels = labels_of(corpus);
    r.confusion_at_1 = confusion(results, r.labels, cfg.hypotheses, cfg.tie);
    r.confusion_zone = zone_confusion(results, r.labels, cfg.hypotheses, cfg.zone_lo, cfg.zone_hi);
    r.error_rate = r.confusion_at_1.error_rate();
    r.tippett = tippett(results, r.labels, cfg.hypotheses);
    r.breakdown = condition_breakdown(results, corpus, cfg.hypotheses, cfg.bucket_cm, cfg.tie);
    return r;
}

EvaluationReport evaluate(const std::vector<LabeledFeature>& corpus, const EvaluationConfig& cfg) {
    EvaluationReport r = summarize(loocv(corpus, cfg.hypotheses, cfg.fit), corpus, cfg);
    for (const auto* label : {&cfg.hypotheses.h1, &cfg.hypotheses.h2}) {
        std::vector<Vec2> rows;
        for (const auto& item : corpus)
            if (item.label == *label) rows.push_back(item.feature.values());
        r.models.push_back(likelihood::fit_gaussian(rows, r.kind, *label, cfg.fit));
        r.ellipses.push_back(confidence_ellipse(r.models.back(), cfg.coverage));
    }
    return r;
}

}  // namespace bpa::evaluation
