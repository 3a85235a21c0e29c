#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "ufv/harness.hpp"

using namespace ufv;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures(UFV_FIXTURES);

Manifest corpus_manifest() {
    BuilderConfig c;
    c.seed = 7;
    return build_manifest(load_source_dir(kFixtures / "corpus"), {}, c);
}

std::vector<PredictionRecord> oracle_predictions(const Manifest& m) {
    std::vector<PredictionRecord> out;
    for (const auto& s : m.samples) out.push_back(oracle_prediction(s));
    return out;
}

bool has_flag(const SampleScore& s, const std::string& f) {
    return std::find(s.flags.begin(), s.flags.end(), f) != s.flags.end();
}

} // namespace

TEST(Harness, GroundTruthScoresPerfectly) {
    const Manifest m = corpus_manifest();
    const EvalReport r = evaluate(m, oracle_predictions(m), RunConfig{});
    EXPECT_EQ(r.missing, 0u);
    EXPECT_DOUBLE_EQ(r.overall.mean_j, 1.0);
    EXPECT_DOUBLE_EQ(r.overall.mean_f, 1.0);
    EXPECT_DOUBLE_EQ(r.overall.savg, 5.0);
    ASSERT_TRUE(r.by_task.at("pixtrqa").mean_tiou);
    EXPECT_DOUBLE_EQ(*r.by_task.at("pixtrqa").mean_tiou, 1.0);
    const json h = headline(r.overall);
    EXPECT_EQ(h.at("J&F"), 100.0);
    EXPECT_EQ(h.at("SAvg"), 5.0);
    EXPECT_EQ(h.at("R@0.5"), 100.0);
}

TEST(Harness, NoPredictionsScoreZero) {
    const Manifest m = corpus_manifest();
    const EvalReport r = evaluate(m, {}, RunConfig{});
    EXPECT_EQ(r.missing, m.samples.size());
    EXPECT_DOUBLE_EQ(r.overall.mean_jf, 0.0);
    EXPECT_DOUBLE_EQ(r.overall.savg, 0.0);
    for (const auto& s : r.per_sample) EXPECT_TRUE(has_flag(s, "missing"));
}

TEST(Harness, RecallFixture) {
    const Manifest m = read_manifest(kFixtures / "recall" / "manifest.jsonl");
    const EvalReport r = evaluate(m, read_predictions((kFixtures / "recall" / "predictions.jsonl").string()), RunConfig{});
    // tIoU of [0, 2k] against [0, 10] is k / 5 for k = 1..4
    EXPECT_DOUBLE_EQ(r.overall.r_at.at(0.3), 0.75);
    EXPECT_DOUBLE_EQ(r.overall.r_at.at(0.5), 0.5);
    EXPECT_DOUBLE_EQ(r.overall.r_at.at(0.7), 0.25);
    EXPECT_DOUBLE_EQ(*r.overall.mean_tiou, 0.5);
    EXPECT_TRUE(has_flag(r.per_sample[0], "gate_closed"));
    EXPECT_FALSE(has_flag(r.per_sample[3], "gate_closed"));
}

TEST(Harness, UnknownAndDuplicateIdsAreDataErrors) {
    const Manifest m = corpus_manifest();
    std::vector<PredictionRecord> p = oracle_predictions(m);
    p.push_back(PredictionRecord{"ghost:pixrqa", "", {}, {}});
    try {
        evaluate(m, p, RunConfig{});
        FAIL() << "expected a data error";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("ghost:pixrqa"), std::string::npos);
    }
    p.back() = p.front();
    EXPECT_THROW(evaluate(m, p, RunConfig{}), DataError);
    EXPECT_THROW(evaluate(Manifest{}, {}, RunConfig{}), DataError);
}

TEST(Harness, MalformedIntervalsAreCountedAndScoreZero) {
    const Manifest m = corpus_manifest();
    std::vector<PredictionRecord> p = oracle_predictions(m);
    std::size_t tr = 0;
    for (auto& x : p) {
        if (x.sample_id.find(":pixtrqa") == std::string::npos) continue;
        x.interval = tr++ % 2 ? PredictedInterval{TokenPair{TemporalToken{60}, TemporalToken{20}}}
                              : PredictedInterval{ReversedSeconds{3.0, 1.0}};
    }
    const EvalReport r = evaluate(m, p, RunConfig{});
    EXPECT_EQ(r.malformed_intervals, tr);
    EXPECT_DOUBLE_EQ(*r.by_task.at("pixtrqa").mean_tiou, 0.0);
    EXPECT_DOUBLE_EQ(r.by_task.at("pixtrqa").mean_j, 0.0);
}

TEST(Harness, WrongMaskShapeIsADataError) {
    const Manifest m = corpus_manifest();
    std::vector<PredictionRecord> p = oracle_predictions(m);
    auto& frames = p[0].masks.begin()->second;
    frames.begin()->second = BinaryMask(3, 3);
    EXPECT_THROW(evaluate(m, p, RunConfig{}), DataError);
    p = oracle_predictions(m);
    p[0].masks.begin()->second.emplace(999, BinaryMask(12, 10));
    EXPECT_THROW(evaluate(m, p, RunConfig{}), DataError);
}

TEST(Harness, HqaFlagsRecordTheTemporalMode) {
    const Manifest m = corpus_manifest();
    const EvalReport r = evaluate(m, oracle_predictions(m), RunConfig{});
    for (const auto& s : r.per_sample) {
        if (s.sample_id.ends_with(":pixhqa:point")) {
            EXPECT_TRUE(has_flag(s, "temporal_point"));
        }
        if (s.sample_id.ends_with(":pixhqa:period")) {
            EXPECT_TRUE(has_flag(s, "temporal_period"));
        }
    }
}

TEST(PredictionIo, RoundTripAndErrors) {
    PredictionRecord a{"v:pixtrqa", "it moves", TokenPair{TemporalToken{3}, TemporalToken{9}}, {}};
    BinaryMask mk(2, 2);
    mk.set(1, 1);
    a.masks["1"][4] = mk;
    PredictionRecord b{"w:pixtrqa", "", TimeInterval(1.0, 2.5), {}};
    PredictionRecord c{"x:pixtrqa", "", ReversedSeconds{4.0, 1.0}, {}};
    std::stringstream s;
    write_predictions(s, {a, b, c});
    const auto back = read_predictions(s);
    ASSERT_EQ(back.size(), 3u);
    EXPECT_EQ(std::get<TokenPair>(back[0].interval), std::get<TokenPair>(a.interval));
    EXPECT_EQ(back[0].masks.at("1").at(4), mk);
    EXPECT_EQ(std::get<TimeInterval>(back[1].interval), TimeInterval(1.0, 2.5));
    EXPECT_DOUBLE_EQ(std::get<ReversedSeconds>(back[2].interval).start, 4.0);

    std::istringstream bad("{\"sample_id\":\"a\"}\n{\"sample_id\":\"b\",\"interval\":[-1,2]}\n");
    try {
        read_predictions(bad);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    std::istringstream not_json("{oops\n");
    EXPECT_THROW(read_predictions(not_json), ParseError);
    EXPECT_THROW(read_predictions(std::string("/nonexistent/p.jsonl")), IoError);
}

TEST(Report, JsonCarriesTheDocumentedKeys) {
    const Manifest m = corpus_manifest();
    const json j = to_json(evaluate(m, oracle_predictions(m), RunConfig{}));
    EXPECT_EQ(j.at("schema_version"), 1);
    EXPECT_EQ(j.at("per_sample").size(), m.samples.size());
    EXPECT_TRUE(j.at("aggregates").at("r_at").contains("0.3"));
    EXPECT_TRUE(j.at("by_task").contains("pixrqa"));
    EXPECT_TRUE(j.at("headline").contains("mIoU"));
    EXPECT_EQ(j.at("config").at("codec").at("n_bins"), 100);
}

TEST(Report, HeadlineTable) {
    const Manifest m = corpus_manifest();
    std::ostringstream out;
    print_headline(out, evaluate(m, oracle_predictions(m), RunConfig{}));
    const std::string t = out.str();
    EXPECT_EQ(t.rfind("task        n      J      F    J&F   mIoU  R@0.3  R@0.5  R@0.7   SAvg\n", 0), 0u);
    EXPECT_NE(t.find("all         8  100.0  100.0  100.0  100.0  100.0  100.0  100.0    5.0"), std::string::npos);
    EXPECT_NE(t.find("missing predictions: 0, malformed intervals: 0"), std::string::npos);
}
