#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ufv/metrics.hpp"

using namespace ufv;

namespace {

BinaryMask rect(int w, int h, int x0, int y0, int x1, int y1) {
    BinaryMask m(w, h);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.set(x, y);
    }
    return m;
}

} // namespace

TEST(RegionJ, HandCases) {
    const BinaryMask a = rect(4, 4, 0, 0, 2, 2);   // 4 pixels
    const BinaryMask b = rect(4, 4, 1, 0, 3, 2);   // overlaps 2
    EXPECT_DOUBLE_EQ(region_j(a, b), 2.0 / 6.0);
    EXPECT_DOUBLE_EQ(region_j(a, a), 1.0);
    EXPECT_DOUBLE_EQ(region_j(BinaryMask(4, 4), BinaryMask(4, 4)), 1.0);
    EXPECT_DOUBLE_EQ(region_j(a, BinaryMask(4, 4)), 0.0);
    EXPECT_THROW(region_j(a, BinaryMask(3, 4)), ShapeError);
}

TEST(ContourF, HandCases) {
    const BinaryMask a = rect(10, 10, 2, 2, 6, 6);
    EXPECT_DOUBLE_EQ(contour_f(a, a, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(contour_f(BinaryMask(10, 10), BinaryMask(10, 10), 1.0), 1.0);
    EXPECT_DOUBLE_EQ(contour_f(a, BinaryMask(10, 10), 1.0), 0.0);
    // shifted by one pixel: every boundary pixel is within distance 1
    const BinaryMask b = rect(10, 10, 3, 2, 7, 6);
    EXPECT_DOUBLE_EQ(contour_f(a, b, 1.0), 1.0);
    EXPECT_LT(contour_f(a, b, 0.0), 1.0);
    EXPECT_THROW(contour_f(a, b, -1.0), DomainError);
}

TEST(ContourF, DefaultToleranceFromDiagonal) {
    // ceil(0.008 * hypot(854, 480)) = ceil(7.84) = 8
    EXPECT_DOUBLE_EQ(default_contour_tolerance(854, 480), 8.0);
    EXPECT_DOUBLE_EQ(default_contour_tolerance(16, 16), 1.0);
}

TEST(MetricsOracle, RegionJEqualsSetArithmetic) {
    SplitMix64 rng(31);
    for (int i = 0; i < 300; ++i) {
        const int w = 1 + static_cast<int>(rng.below(12)), h = 1 + static_cast<int>(rng.below(12));
        const BinaryMask a = oracle::random_mask(rng, w, h, rng.uniform());
        const BinaryMask b = oracle::random_mask(rng, w, h, rng.uniform());
        ASSERT_EQ(region_j(a, b), oracle::region_j(a, b));
    }
}

TEST(MetricsOracle, ContourFEqualsAllPairsDistances) {
    SplitMix64 rng(32);
    for (int i = 0; i < 200; ++i) {
        const int w = 2 + static_cast<int>(rng.below(14)), h = 2 + static_cast<int>(rng.below(14));
        const BinaryMask a = i % 2 ? oracle::random_blob(rng, w, h) : oracle::random_mask(rng, w, h, 0.3);
        const BinaryMask b = oracle::random_blob(rng, w, h);
        const double tol = static_cast<double>(rng.below(4)) + (i % 3 == 0 ? 0.5 : 0.0);
        ASSERT_NEAR(contour_f(a, b, tol), oracle::contour_f(a, b, tol), 1e-12);
    }
}

TEST(MetricsOracle, ExhaustiveSmallMasks) {
    // every 2x3 mask against every other
    for (unsigned p = 0; p < 64; ++p) {
        for (unsigned q = 0; q < 64; ++q) {
            BinaryMask a(3, 2), b(3, 2);
            for (int i = 0; i < 6; ++i) {
                a.set_flat(static_cast<std::size_t>(i), (p >> i) & 1u);
                b.set_flat(static_cast<std::size_t>(i), (q >> i) & 1u);
            }
            ASSERT_EQ(region_j(a, b), oracle::region_j(a, b));
            ASSERT_NEAR(contour_f(a, b, 1.0), oracle::contour_f(a, b, 1.0), 1e-12);
        }
    }
}

TEST(MetricsProperty, SelfAgreementIsPerfect) {
    SplitMix64 rng(33);
    for (int i = 0; i < 100; ++i) {
        const BinaryMask a = oracle::random_blob(rng, 12, 9);
        ASSERT_EQ(region_j(a, a), 1.0);
        ASSERT_EQ(contour_f(a, a, 0.0), 1.0);
    }
}

TEST(MetricsProperty, ScoresLieInTheUnitInterval) {
    SplitMix64 rng(34);
    for (int i = 0; i < 100; ++i) {
        const BinaryMask a = oracle::random_mask(rng, 8, 8, 0.5), b = oracle::random_mask(rng, 8, 8, 0.5);
        const double j = region_j(a, b), f = contour_f(a, b);
        ASSERT_GE(j, 0.0);
        ASSERT_LE(j, 1.0);
        ASSERT_GE(f, 0.0);
        ASSERT_LE(f, 1.0);
        ASSERT_DOUBLE_EQ(jf_mean(j, f), (j + f) / 2.0);
    }
}

TEST(Tiou, HandCases) {
    EXPECT_DOUBLE_EQ(tiou({TimeInterval(0, 10), TimeInterval(0, 10)}), 1.0);
    EXPECT_DOUBLE_EQ(tiou({TimeInterval(0, 2), TimeInterval(0, 10)}), 0.2);
    EXPECT_DOUBLE_EQ(tiou({TimeInterval(0, 4), TimeInterval(2, 6)}), 2.0 / 6.0);
    EXPECT_DOUBLE_EQ(tiou({TimeInterval(0, 1), TimeInterval(2, 3)}), 0.0);
    EXPECT_DOUBLE_EQ(tiou({TimeInterval(3, 3), TimeInterval(3, 3)}), 1.0);
    EXPECT_DOUBLE_EQ(tiou({TimeInterval(3, 3), TimeInterval(4, 4)}), 0.0);
}

TEST(TiouOracle, MatchesDirectIntervalArithmetic) {
    SplitMix64 rng(35);
    for (int i = 0; i < 1000; ++i) {
        double a = rng.uniform(0, 50), b = rng.uniform(0, 50), c = rng.uniform(0, 50), d = rng.uniform(0, 50);
        if (a > b) std::swap(a, b);
        if (c > d) std::swap(c, d);
        const double got = tiou({TimeInterval(a, b), TimeInterval(c, d)});
        ASSERT_NEAR(got, oracle::tiou(a, b, c, d), 1e-12);
        ASSERT_NEAR(got, tiou({TimeInterval(c, d), TimeInterval(a, b)}), 1e-15);
    }
}

TEST(RecallAt, CountsStrictlyGreater) {
    const std::vector<double> v{0.2, 0.4, 0.6, 0.8};
    const auto r = recall_at(v, {0.3, 0.5, 0.7});
    EXPECT_EQ(r.at(0.3), 0.75);
    EXPECT_EQ(r.at(0.5), 0.5);
    EXPECT_EQ(r.at(0.7), 0.25);
    EXPECT_EQ(recall_at({0.5}, {0.5}).at(0.5), 0.0);
    EXPECT_THROW(recall_at({}, {0.5}), DegenerateInputError);
    EXPECT_THROW(recall_at({0.5}, {1.0}), DomainError);
}

TEST(RecallProperty, NonIncreasingInThreshold) {
    SplitMix64 rng(36);
    std::vector<double> v;
    for (int i = 0; i < 200; ++i) v.push_back(rng.uniform());
    std::vector<double> ks;
    for (int i = 1; i < 100; ++i) ks.push_back(i / 100.0);
    const auto r = recall_at(v, ks);
    double prev = 1.0;
    for (double k : ks) {
        ASSERT_LE(r.at(k), prev);
        ASSERT_EQ(r.at(k), oracle::recall(v, k));
        prev = r.at(k);
    }
}

TEST(GatedMasks, ClosedGateScoresZero) {
    const BinaryMask m = rect(4, 4, 0, 0, 2, 2);
    const std::vector<GatedFrame> frames{{1.0, {{m, m}}}};
    const GatedScore s = pixtrqa_gated_masks(TimeInterval(0, 1), TimeInterval(0, 10), frames, 0.5);
    EXPECT_FALSE(s.gate_open);
    EXPECT_EQ(s.j, 0.0);
    EXPECT_EQ(s.f, 0.0);
    EXPECT_DOUBLE_EQ(s.tiou, 0.1);
}

TEST(GatedMasks, ScoresOnlyFramesInsideBothIntervals) {
    const BinaryMask m = rect(4, 4, 0, 0, 2, 2);
    const BinaryMask empty(4, 4);
    // frame at t=9 lies outside the prediction and would score 0
    const std::vector<GatedFrame> frames{{2.0, {{m, m}}}, {5.0, {{m, m}}}, {9.0, {{empty, m}}}};
    const GatedScore s = pixtrqa_gated_masks(TimeInterval(0, 8), TimeInterval(1, 10), frames, 0.5);
    EXPECT_TRUE(s.gate_open);
    EXPECT_EQ(s.frames_scored, 2u);
    EXPECT_EQ(s.j, 1.0);
    EXPECT_EQ(s.f, 1.0);
}

TEST(GatedMasks, OpenGateWithoutFramesIsAnError) {
    const BinaryMask m = rect(4, 4, 0, 0, 2, 2);
    const std::vector<GatedFrame> frames{{9.5, {{m, m}}}};
    EXPECT_THROW(pixtrqa_gated_masks(TimeInterval(0, 8), TimeInterval(0, 8), frames, 0.5), DegenerateInputError);
}

TEST(GatedMasksProperty, RaisingTheThresholdNeverOpensMoreGates) {
    SplitMix64 rng(37);
    const BinaryMask m = rect(4, 4, 0, 0, 2, 2);
    std::vector<std::pair<TimeInterval, TimeInterval>> pairs;
    for (int i = 0; i < 100; ++i) {
        double a = rng.uniform(0, 10), b = rng.uniform(0, 10);
        if (a > b) std::swap(a, b);
        pairs.push_back({TimeInterval(a, b), TimeInterval(2, 8)});
    }
    int prev = 1 << 30;
    for (double k = 0.0; k <= 1.0; k += 0.05) {
        int open = 0;
        for (const auto& [p, t] : pairs) {
            std::vector<GatedFrame> frames;
            for (double ts = 0.0; ts <= 10.0; ts += 0.25) frames.push_back({ts, {{m, m}}});
            try {
                open += pixtrqa_gated_masks(p, t, frames, k).gate_open ? 1 : 0;
            } catch (const DegenerateInputError&) {
                ++open;
            }
        }
        ASSERT_LE(open, prev);
        prev = open;
    }
}

TEST(ChoiceAccuracy, FractionOfExactMatches) {
    EXPECT_DOUBLE_EQ(choice_accuracy({"A", "B", "C", "D"}, {"A", "B", "D", "D"}), 0.75);
    EXPECT_THROW(choice_accuracy({"A"}, {"A", "B"}), ShapeError);
    EXPECT_THROW(choice_accuracy({}, {}), DegenerateInputError);
}

TEST(Savg, MeanOfPerSampleMeans) {
    EXPECT_DOUBLE_EQ(savg_aggregate({{5.0, 3.0}, {1.0, 1.0, 4.0}}), (4.0 + 2.0) / 2.0);
    EXPECT_THROW(savg_aggregate({{6.0}}), DomainError);
    EXPECT_THROW(savg_aggregate({}), DegenerateInputError);
}

TEST(TokenOverlapScorer, PerfectAnswerScoresFive) {
    const TokenOverlapScorer s;
    const auto full = s.score("The cat runs.", "The cat runs.", false);
    ASSERT_EQ(full.size(), 4u);
    for (double v : full) EXPECT_DOUBLE_EQ(v, 5.0);
    EXPECT_EQ(s.score("The cat runs.", "The cat runs.", true).size(), 3u);
    for (double v : s.score("", "The cat runs.", false)) EXPECT_DOUBLE_EQ(v, 0.0);
}
