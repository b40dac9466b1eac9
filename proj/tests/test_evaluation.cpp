#include "bpa/evaluation.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace bpa;
using namespace bpa::evaluation;
namespace bt = bpa::testing;
using likelihood::LRResult;

namespace {

LabeledFeature lf(double f1, double f2, std::string label, std::string id = "") {
    LabeledFeature x;
    x.feature.f1 = f1;
    x.feature.f2 = f2;
    x.feature.pattern_id = std::move(id);
    x.label = std::move(label);
    return x;
}

std::vector<LabeledFeature> two_clusters(bt::Rng& rng, int n1, int n2, double sep) {
    std::vector<LabeledFeature> c;
    for (int i = 0; i < n1; ++i)
        c.push_back(lf(bt::normal(rng), bt::normal(rng), "gunshot", "g" + std::to_string(i)));
    for (int i = 0; i < n2; ++i)
        c.push_back(lf(sep + bt::normal(rng), bt::normal(rng), "impact", "i" + std::to_string(i)));
    return c;
}

LRResult lr_of(double lr) {
    return likelihood::make_lr_result("", std::log(lr), "gunshot", "impact");
}

}  // namespace

TEST_CASE("loocv") {
    bt::Rng rng(307);
    SUBCASE("well-separated clusters are all classified correctly") {
        const auto c = two_clusters(rng, 12, 15, 20.0);
        const auto res = loocv(c, {});
        REQUIRE(res.size() == c.size());
        std::vector<std::string> labels;
        for (const auto& x : c) labels.push_back(x.label);
        CHECK(confusion(res, labels, {}).errors() == 0);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(res[i].pattern_id == c[i].feature.pattern_id);
    }
    SUBCASE("each fold leaves out the scored pattern") {
        const auto c = two_clusters(rng, 6, 7, 1.5);
        const auto res = loocv(c, {});
        for (std::size_t i = 0; i < c.size(); ++i) {
            std::vector<Vec2> g, m;
            for (std::size_t j = 0; j < c.size(); ++j)
                if (j != i) (c[j].label == "gunshot" ? g : m).push_back(c[j].feature.values());
            const auto want = likelihood::likelihood_ratio(c[i].feature, likelihood::fit_gaussian(g),
                                                           likelihood::fit_gaussian(m));
            CHECK(res[i].ln_lr == doctest::Approx(want.ln_lr).epsilon(1e-12));
        }
    }
    SUBCASE("a duplicate of the held-out pattern changes its score") {
        auto c = two_clusters(rng, 5, 5, 1.0);
        const double before = loocv(c, {})[0].ln_lr;
        c.push_back(c[0]);
        const double after = loocv(c, {})[0].ln_lr;
        CHECK(after > before);
    }
    SUBCASE("deterministic") {
        const auto c = two_clusters(rng, 8, 9, 2.0);
        const auto a = loocv(c, {}), b = loocv(c, {});
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].ln_lr == b[i].ln_lr);
    }
    SUBCASE("errors") {
        CHECK_THROWS_WITH_AS(loocv(two_clusters(rng, 3, 10, 2.0), {}), doctest::Contains("InsufficientClassSize"), Error);
        auto c = two_clusters(rng, 5, 5, 2.0);
        c[2].label = "other";
        CHECK_THROWS_WITH_AS(loocv(c, {}), doctest::Contains("UnknownLabel"), Error);
        c = two_clusters(rng, 5, 5, 2.0);
        c[1].feature.kind = FeatureKind::Spherical;
        CHECK_THROWS_WITH_AS(loocv(c, {}), doctest::Contains("KindMismatch"), Error);
    }
}

TEST_CASE("confusion at threshold 1") {
    const HypothesisPair hyp;
    const auto diag = confusion({lr_of(5), lr_of(0.2)}, {"gunshot", "impact"}, hyp);
    CHECK(diag.counts[0][0] == 1);
    CHECK(diag.counts[1][1] == 1);
    CHECK(diag.errors() == 0);
    CHECK(diag.error_rate() == 0.0);

    SUBCASE("synthetic 44/8, 10/49 table") {
        std::vector<LRResult> r;
        std::vector<std::string> l;
        auto add = [&](int k, double lr, const char* lab) {
            for (int i = 0; i < k; ++i) {
                r.push_back(lr_of(lr));
                l.push_back(lab);
            }
        };
        add(44, 3.0, "gunshot");
        add(8, 0.4, "gunshot");
        add(10, 7.0, "impact");
        add(49, 0.1, "impact");
        const auto c = confusion(r, l, hyp);
        CHECK(c.counts[0][0] == 44);
        CHECK(c.counts[0][1] == 8);
        CHECK(c.counts[1][0] == 10);
        CHECK(c.counts[1][1] == 49);
        CHECK(c.total() == 111);
        CHECK(c.error_rate() == doctest::Approx(18.0 / 111));
    }
    SUBCASE("LR of exactly one") {
        CHECK_FALSE(supports_numerator(0.0, TieRule::FavorDenominator));
        CHECK(supports_numerator(0.0, TieRule::FavorNumerator));
        CHECK(confusion({lr_of(1.0)}, {"gunshot"}, hyp).errors() == 1);
        CHECK(confusion({lr_of(1.0)}, {"gunshot"}, hyp, TieRule::FavorNumerator).errors() == 0);
    }
    SUBCASE("zones") {
        const auto z = zone_confusion({lr_of(1.5), lr_of(2.0), lr_of(0.5), lr_of(3), lr_of(0.1)},
                                      {"gunshot", "gunshot", "impact", "impact", "impact"}, hyp);
        CHECK(z.counts[0][1] == 2);
        CHECK(z.counts[1][1] == 1);
        CHECK(z.counts[1][0] == 1);
        CHECK(z.counts[1][2] == 1);
        CHECK(z.total() == 5);
    }
    CHECK_THROWS_WITH_AS(confusion({lr_of(1)}, {}, hyp), doctest::Contains("LengthMismatch"), Error);
}

TEST_CASE("tippett") {
    const HypothesisPair hyp;
    SUBCASE("single atom per class") {
        const auto t = tippett({lr_of(10), lr_of(0.1)}, {"gunshot", "impact"}, hyp);
        CHECK(t.h1_le(0.999) == 0.0);
        CHECK(t.h1_le(1.0 + 1e-12) == 1.0);
        CHECK(t.h2_ge(-1.0 - 1e-12) == 1.0);
        CHECK(t.h2_ge(-0.999) == 0.0);
        CHECK(t.points.size() == 2);
    }
    SUBCASE("both curves pass through 2/3 at log10 LR = 0") {
        const auto t = tippett({lr_of(0.1), lr_of(1), lr_of(10), lr_of(0.1), lr_of(1), lr_of(10)},
                               {"gunshot", "gunshot", "gunshot", "impact", "impact", "impact"}, hyp);
        CHECK(t.h1_le(0.0) == doctest::Approx(2.0 / 3));
        CHECK(t.h2_ge(0.0) == doctest::Approx(2.0 / 3));
    }
    SUBCASE("monotone with the right endpoints") {
        bt::Rng rng(311);
        std::vector<LRResult> r;
        std::vector<std::string> l;
        for (int i = 0; i < 80; ++i) {
            r.push_back(likelihood::make_lr_result("", bt::normal(rng, i % 2 ? 2 : -2, 3), "g", "i"));
            l.push_back(i % 2 ? "gunshot" : "impact");
        }
        const auto t = tippett(r, l, hyp);
        for (std::size_t k = 1; k < t.points.size(); ++k) {
            CHECK(t.points[k].x > t.points[k - 1].x);
            CHECK(t.points[k].prop_h1_le >= t.points[k - 1].prop_h1_le);
            CHECK(t.points[k].prop_h2_ge <= t.points[k - 1].prop_h2_ge);
        }
        CHECK(t.points.back().prop_h1_le == 1.0);
        CHECK(t.points.front().prop_h2_ge == 1.0);
        CHECK(t.h1_le(-1e9) == 0.0);
        CHECK(t.h2_ge(1e9) == 0.0);
    }
    CHECK_THROWS_WITH_AS(tippett({lr_of(2)}, {"gunshot"}, hyp), doctest::Contains("EmptyClass"), Error);
}

TEST_CASE("confidence_ellipse") {
    CHECK(chi2_2dof_quantile(0.95) == doctest::Approx(5.991465).epsilon(1e-6));
    GaussianModel m;
    m.mu = Vec2(1, 2);
    m.sigma = Mat2::Identity();
    const auto e95 = confidence_ellipse(m, 0.95);
    CHECK(e95.semi_major == doctest::Approx(std::sqrt(5.991465)).epsilon(1e-6));
    CHECK(e95.center == m.mu);
    // 1 - exp(-1/2) coverage is the unit circle.
    const auto e1 = confidence_ellipse(m, 0.393469340287);
    CHECK(e1.semi_major == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(e1.semi_minor == doctest::Approx(1.0).epsilon(1e-9));

    m.sigma << 4, 0, 0, 1;
    const auto e = confidence_ellipse(m, 0.95);
    CHECK(e.semi_major / e.semi_minor == doctest::Approx(2.0));
    CHECK(std::min(e.orientation, kPi - e.orientation) == doctest::Approx(0.0).epsilon(1e-12));

    m.sigma << 1, 0, 0, 4;
    CHECK(confidence_ellipse(m).orientation == doctest::Approx(kPi / 2));

    SUBCASE("empirical coverage") {
        bt::Rng rng(313);
        const bt::Normal2 n{0, 0, 2.0, 0.7, 1.0};
        m.mu = Vec2::Zero();
        m.sigma << n.sxx, n.sxy, n.sxy, n.syy;
        const auto ce = confidence_ellipse(m, 0.9);
        const bt::ConicEllipse conic(0, 0, ce.semi_major, ce.semi_minor, ce.orientation);
        int inside = 0;
        const int N = 20000;
        for (int i = 0; i < N; ++i) {
            const auto [x, y] = bt::draw(rng, n);
            inside += conic.contains(x, y);
        }
        CHECK(std::abs(inside / double(N) - 0.9) < 0.01);
    }
    CHECK_THROWS_AS(chi2_2dof_quantile(1.0), Error);
}

TEST_CASE("condition_breakdown") {
    std::vector<LabeledFeature> corpus;
    std::vector<LRResult> res;
    for (int i = 0; i < 10; ++i) {
        auto x = lf(0, 0, "gunshot");
        x.meta = SourceMeta{45.0, std::string("high")};
        corpus.push_back(x);
        res.push_back(lr_of(i < 8 ? 0.3 : 4.0));
    }
    corpus.push_back(lf(0, 0, "impact"));
    res.push_back(lr_of(0.2));

    const auto rows = condition_breakdown(res, corpus, {});
    REQUIRE(rows.size() == 2);
    const auto g = std::find_if(rows.begin(), rows.end(), [](const BreakdownRow& r) { return r.mechanism == "gunshot"; });
    REQUIRE(g != rows.end());
    CHECK(g->distance_bucket == "[30,60)");
    CHECK(g->velocity_level == "high");
    CHECK(g->total == 10);
    CHECK(g->misclassified == 8);
    const auto u = std::find_if(rows.begin(), rows.end(), [](const BreakdownRow& r) { return r.mechanism == "impact"; });
    CHECK(u->distance_bucket == "unknown");
    CHECK(u->velocity_level == "unknown");
    CHECK(u->misclassified == 0);
}

TEST_CASE("evaluate bundles the summaries") {
    bt::Rng rng(317);
    const auto c = two_clusters(rng, 10, 10, 3.0);
    const auto r = evaluate(c);
    CHECK(r.results.size() == 20);
    CHECK(r.confusion_at_1.total() == 20);
    CHECK(r.error_rate == r.confusion_at_1.error_rate());
    REQUIRE(r.models.size() == 2);
    CHECK(r.models[0].hypothesis == "gunshot");
    CHECK(r.models[0].n_train == 10);
    CHECK(r.ellipses.size() == 2);
}
