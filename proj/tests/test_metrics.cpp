#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <random>

#include "mammo_eval/metrics.hpp"
#include "test_support.hpp"

using namespace mammo;
using testing_support::mann_whitney;

namespace {

struct Dataset {
    std::vector<double> scores;
    std::vector<bool> labels;
};

Dataset random_dataset(std::mt19937_64& rng, std::size_t n, int levels) {
    Dataset d;
    std::uniform_int_distribution<int> lv(0, levels - 1);
    std::bernoulli_distribution pos(0.4);
    for (std::size_t i = 0; i < n; ++i) {
        d.labels.push_back(pos(rng));
        d.scores.push_back(lv(rng) / static_cast<double>(levels));
    }
    d.labels[0] = true;
    d.labels[1] = false;
    return d;
}

/// Upper Clopper-Pearson bound for zero failures has a closed form too.
double zero_success_upper(int n, double level) { return 1 - std::pow((1 - level) / 2, 1.0 / n); }

}  // namespace

TEST(Roc, PerfectSeparationPassesThroughCorner) {
    const auto c = roc_curve({0.9, 0.1}, {true, false});
    EXPECT_EQ(c.points.front(), (RocPoint{0, 0, std::numeric_limits<double>::infinity()}));
    bool corner = false;
    for (const auto& p : c.points) corner |= p.fpr == 0 && p.tpr == 1;
    EXPECT_TRUE(corner);
    EXPECT_EQ(c.points.back().fpr, 1);
    EXPECT_EQ(c.points.back().tpr, 1);
}

TEST(Roc, AllTiedIsDiagonal) {
    const auto c = roc_curve({0.5, 0.5, 0.5, 0.5}, {true, false, true, false});
    ASSERT_EQ(c.points.size(), 2u);
    EXPECT_EQ(c.points[1].fpr, 1);
    EXPECT_EQ(c.points[1].tpr, 1);
    EXPECT_DOUBLE_EQ(auroc(c), 0.5);
}

TEST(Roc, SingleClassIsDegenerate) {
    try {
        roc_curve({0.1, 0.2}, {true, true});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateLabels);
    }
}

TEST(Auroc, PerfectSeparationIsOne) { EXPECT_DOUBLE_EQ(auroc({0.8, 0.9, 0.1, 0.2}, {true, true, false, false}), 1.0); }

TEST(Auroc, PairwiseConcordanceThreeOfFour) {
    EXPECT_DOUBLE_EQ(auroc({0.9, 0.4, 0.6, 0.1}, {true, true, false, false}), 0.75);
}

TEST(Auroc, EqualsMannWhitneyWithTies) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto d = random_dataset(rng, 2 + rng() % 199, 1 + static_cast<int>(rng() % 30));
        EXPECT_NEAR(auroc(d.scores, d.labels), mann_whitney(d.scores, d.labels), 1e-12);
    }
}

TEST(Auroc, InvariantUnderIncreasingTransform) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        auto d = random_dataset(rng, 50, 12);
        const double before = auroc(d.scores, d.labels);
        for (auto& s : d.scores) s = std::exp(3 * s) - 7;
        EXPECT_DOUBLE_EQ(auroc(d.scores, d.labels), before);
    }
}

TEST(ClopperPearson, LargeCountsToThreeDecimals) {
    const auto a = clopper_pearson(737, 883);
    EXPECT_NEAR(a.lower, 0.808, 0.001);
    EXPECT_NEAR(a.upper, 0.859, 0.001);
    const auto b = clopper_pearson(594, 761);
    EXPECT_NEAR(b.lower, 0.749, 0.001);
    EXPECT_NEAR(b.upper, 0.809, 0.001);
}

TEST(ClopperPearson, ZeroSuccessesClosedForm) {
    const auto ci = clopper_pearson(0, 10);
    EXPECT_EQ(ci.lower, 0.0);
    EXPECT_NEAR(ci.upper, zero_success_upper(10, 0.95), 1e-9);
    EXPECT_NEAR(ci.upper, 0.3085, 1e-4);
}

TEST(ClopperPearson, AllSuccessesUpperIsOne) {
    for (int n = 1; n <= 40; ++n) {
        const auto ci = clopper_pearson(n, n);
        EXPECT_EQ(ci.upper, 1.0);
        EXPECT_NEAR(ci.lower, 1 - zero_success_upper(n, 0.95), 1e-9);
    }
}

TEST(ClopperPearson, MatchesBoostBetaQuantiles) {
    for (int n : {1, 2, 7, 30, 100, 883, 5000})
        for (int x = 0; x <= n; x += std::max(1, n / 17)) {
            const auto ci = clopper_pearson(x, n, 0.95);
            const double lo = x == 0 ? 0.0 : boost::math::ibeta_inv(x, n - x + 1, 0.025);
            const double hi = x == n ? 1.0 : boost::math::ibeta_inv(x + 1, n - x, 0.975);
            EXPECT_NEAR(ci.lower, lo, 1e-9) << x << "/" << n;
            EXPECT_NEAR(ci.upper, hi, 1e-9) << x << "/" << n;
            EXPECT_LE(ci.lower, ci.estimate);
            EXPECT_GE(ci.upper, ci.estimate);
        }
}

TEST(ClopperPearson, InvalidCounts) {
    for (auto [x, n] : std::vector<std::pair<int, int>>{{3, 2}, {-1, 5}, {0, 0}}) {
        try {
            clopper_pearson(x, n);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidCounts);
        }
    }
}

TEST(ClopperPearson, CoverageAtLeastNominalSmallN) {
    for (int n = 1; n <= 30; ++n) {
        std::vector<BinomialCI> cis;
        for (int x = 0; x <= n; ++x) cis.push_back(clopper_pearson(x, n));
        for (int k = 1; k <= 99; ++k) {
            const double p = k / 100.0;
            double cover = 0;
            for (int x = 0; x <= n; ++x)
                if (cis[x].lower <= p && p <= cis[x].upper)
                    cover += std::exp(std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) +
                                      x * std::log(p) + (n - x) * std::log1p(-p));
            EXPECT_GE(cover, 0.95 - 1e-12) << "n=" << n << " p=" << p;
        }
    }
}

TEST(SpecialFunctions, IncompleteBetaAgainstBoost) {
    for (double a : {0.5, 1.0, 3.5, 40.0, 700.0})
        for (double b : {0.5, 2.0, 15.0, 300.0})
            for (double x : {0.001, 0.1, 0.5, 0.77, 0.999})
                EXPECT_NEAR(stats::incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-12)
                    << a << " " << b << " " << x;
}

TEST(SpecialFunctions, StudentTQuantileAgainstBoost) {
    for (double dof : {1.0, 2.0, 4.0, 17.0, 21.0, 120.0}) {
        boost::math::students_t dist(dof);
        for (double p : {0.025, 0.5, 0.9, 0.975})
            EXPECT_NEAR(stats::student_t_quantile(p, dof), boost::math::quantile(dist, p), 1e-8) << dof << " " << p;
    }
}

TEST(SpecialFunctions, Type7Quantile) {
    EXPECT_DOUBLE_EQ(stats::quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(stats::quantile({4, 1, 3, 2}, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(stats::quantile({5}, 0.9), 5);
}

TEST(SpecialFunctions, SplitMixStreamsAreReproducible) {
    auto a = stats::SplitMix64::stream(42, 7);
    auto b = stats::SplitMix64::stream(42, 7);
    auto c = stats::SplitMix64::stream(42, 8);
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
    for (int i = 0; i < 1000; ++i) EXPECT_LT(a.below(13), 13u);
}

TEST(OperatingPoint, PerfectSeparationHasUnitJ) {
    const auto c = roc_curve({0.9, 0.8, 0.3, 0.2}, {true, true, false, false});
    const auto op = optimal_operating_point(c);
    EXPECT_DOUBLE_EQ(op.youden, 1.0);
    EXPECT_GT(op.threshold, 0.3);
    EXPECT_LE(op.threshold, 0.8);
}

TEST(OperatingPoint, DiagonalPicksLowestFpr) {
    const auto op = optimal_operating_point(roc_curve({0.5, 0.5}, {true, false}));
    EXPECT_DOUBLE_EQ(op.youden, 0.0);
    EXPECT_EQ(op.fpr, 0.0);
}

TEST(OperatingPoint, UniqueMaximumMatchesExhaustiveSearch) {
    RocCurve c;
    c.points = {{0, 0, 1e9}, {0.1, 0.5, 0.8}, {0.2, 0.9, 0.6}, {0.6, 0.95, 0.4}, {1, 1, 0.1}};
    const auto op = optimal_operating_point(c);
    double best = -1, thr = 0;
    for (const auto& p : c.points)
        if (p.tpr - p.fpr > best) {
            best = p.tpr - p.fpr;
            thr = p.threshold;
        }
    EXPECT_EQ(op.threshold, thr);
    EXPECT_DOUBLE_EQ(op.youden, best);
}

TEST(Rates, SensitivityWithExactInterval) {
    ConfusionCounts c;
    c.tp = 9;
    c.fn = 1;
    c.tn = 5;
    const auto r = rates_from_counts(c);
    ASSERT_TRUE(r.sensitivity);
    EXPECT_DOUBLE_EQ(r.sensitivity->estimate, 0.9);
    EXPECT_EQ(*r.sensitivity, clopper_pearson(9, 10));
}

TEST(Rates, UndefinedPpvIsAbsent) {
    ConfusionCounts c;
    c.fn = 4;
    c.tn = 6;
    const auto r = rates_from_counts(c);
    EXPECT_FALSE(r.ppv.has_value());
    EXPECT_TRUE(r.npv.has_value());
}

TEST(Rates, HighSensitivityInterval) {
    ConfusionCounts c;
    c.tp = 372;
    c.fn = 13;
    const auto r = rates_from_counts(c);
    EXPECT_NEAR(r.sensitivity->estimate, 0.966, 0.0005);
    EXPECT_NEAR(r.sensitivity->lower, 0.943, 0.002);
    EXPECT_NEAR(r.sensitivity->upper, 0.982, 0.002);
}

TEST(Rates, ThresholdIsInclusive) {
    const auto c = confusion_counts({0.5, 0.49, 0.5, 0.2}, {true, true, false, false}, 0.5);
    EXPECT_EQ(c, (ConfusionCounts{1, 1, 1, 1}));
}

TEST(Bootstrap, PerfectSeparationCollapsesToOne) {
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
        const auto ci = bootstrap_auroc_ci({0.9, 0.8, 0.7, 0.1, 0.2}, {true, true, true, false, false}, 500, seed);
        EXPECT_EQ(ci.lower, 1.0);
        EXPECT_EQ(ci.upper, 1.0);
    }
}

TEST(Bootstrap, IntervalShrinksAsDataDoubles) {
    std::mt19937_64 rng(4);
    auto d = random_dataset(rng, 40, 100);
    for (std::size_t i = 0; i < d.scores.size(); ++i)
        if (d.labels[i]) d.scores[i] += 0.3;
    auto width = [](const Dataset& x) {
        const auto ci = bootstrap_auroc_ci(x.scores, x.labels, 2000, 5);
        return ci.upper - ci.lower;
    };
    double prev = width(d);
    for (int k = 0; k < 3; ++k) {
        Dataset big = d;
        big.scores.insert(big.scores.end(), d.scores.begin(), d.scores.end());
        big.labels.insert(big.labels.end(), d.labels.begin(), d.labels.end());
        d = big;
        const double w = width(d);
        EXPECT_LT(w, prev);
        prev = w;
    }
}

TEST(Bootstrap, SinglePositiveDoesNotCrash) {
    const auto ci = bootstrap_auroc_ci({0.9, 0.1, 0.2, 0.3, 0.95}, {true, false, false, false, false}, 1000, 3);
    EXPECT_LE(ci.lower, ci.estimate);
    EXPECT_GE(ci.upper, ci.estimate);
    EXPECT_DOUBLE_EQ(ci.estimate, 0.75);
}

TEST(Bootstrap, SameSeedSameInterval) {
    std::mt19937_64 rng(6);
    const auto d = random_dataset(rng, 60, 10);
    EXPECT_EQ(bootstrap_auroc_ci(d.scores, d.labels, 300, 11), bootstrap_auroc_ci(d.scores, d.labels, 300, 11));
    EXPECT_NE(bootstrap_auroc_ci(d.scores, d.labels, 300, 11), bootstrap_auroc_ci(d.scores, d.labels, 300, 12));
}
