// Acceptance checks. Each run evaluates one criterion (or all of them) and
// prints one PASS/FAIL line per criterion; the exit code is non-zero when any
// selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "toy_support.hpp"
#include "ufv/harness.hpp"
#include "ufv/losses.hpp"
#include "ufv/toy_task.hpp"

namespace fs = std::filesystem;
using namespace ufv;

namespace {

struct Options {
    fs::path fixtures;
    std::string tool;
    std::string python;
    std::string schema_check;
    fs::path workdir;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 1 ---------------------------------------------------------------------------------

Outcome codec_round_trip(const Options&) {
    SplitMix64 rng(20240601);
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 10000; ++i) {
        const double duration = rng.uniform(0.5, 600.0);
        pairs.emplace_back(rng.uniform(0.0, duration), duration);
    }
    double worst = 0.0;
    int bad = 0;
    const Stopwatch sw;
    for (const auto& [t, duration] : pairs) {
        const TimelineSpec spec(duration, 100);
        const double err = std::abs(decode_time(encode_time(t, spec), spec) - t);
        worst = std::max(worst, err / duration);
        bad += err <= duration / 200.0 + 1e-9 ? 0 : 1;
    }
    const double secs = sw.seconds();
    return {bad == 0 && secs < 1.0, "10000 pairs, " + std::to_string(bad) + " outside T/200, max error " + fmt(worst) +
                                        " x T, " + fmt(secs) + " s"};
}

// 2 ---------------------------------------------------------------------------------

Outcome metric_oracles(const Options&) {
    SplitMix64 rng(77);
    int j_bad = 0, f_bad = 0, t_bad = 0;
    double f_worst = 0.0, t_worst = 0.0;
    const double tol = std::ceil(0.008 * std::hypot(32.0, 32.0));
    for (int i = 0; i < 500; ++i) {
        const bool blobs = i % 2 == 0;
        const BinaryMask a = blobs ? oracle::random_blob(rng, 32, 32) : oracle::random_mask(rng, 32, 32, rng.uniform(0, 1));
        const BinaryMask b = blobs ? oracle::random_blob(rng, 32, 32) : oracle::random_mask(rng, 32, 32, rng.uniform(0, 1));
        j_bad += region_j(a, b) == oracle::region_j(a, b) ? 0 : 1;
        const double df = std::abs(contour_f(a, b) - oracle::contour_f(a, b, tol));
        f_worst = std::max(f_worst, df);
        f_bad += df <= 1e-12 ? 0 : 1;
    }
    for (int i = 0; i < 1000; ++i) {
        double s1 = rng.uniform(0, 100), e1 = rng.uniform(0, 100), s2 = rng.uniform(0, 100), e2 = rng.uniform(0, 100);
        if (s1 > e1) std::swap(s1, e1);
        if (s2 > e2) std::swap(s2, e2);
        if (i % 10 == 0) {
            s2 = s1;
            e2 = e1;
        }
        const double d = std::abs(tiou({TimeInterval(s1, e1), TimeInterval(s2, e2)}) - oracle::tiou(s1, e1, s2, e2));
        t_worst = std::max(t_worst, d);
        t_bad += d <= 1e-12 ? 0 : 1;
    }
    return {j_bad + f_bad + t_bad == 0, "500 mask pairs: J mismatches " + std::to_string(j_bad) + ", F max diff " +
                                            fmt(f_worst) + "; 1000 intervals: tIoU max diff " + fmt(t_worst)};
}

// 3 ---------------------------------------------------------------------------------

Outcome table_jf_audit(const Options& o) {
    std::ifstream in(o.fixtures / "segmentation_table.csv");
    if (!in) return {false, "cannot open segmentation_table.csv"};
    std::string line;
    std::getline(in, line);
    int complete = 0;
    std::vector<std::string> failures;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream row(line);
        for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
        while (cells.size() < 5) cells.emplace_back();
        if (cells[2].empty() || cells[3].empty() || cells[4].empty()) continue;
        ++complete;
        const double j = std::stod(cells[2]), f = std::stod(cells[3]), printed = std::stod(cells[4]);
        const double mean = jf_mean(j, f);
        if (std::abs(mean - printed) > 0.05 + 1e-9) {
            failures.push_back(cells[0] + " " + cells[1] + ": (" + cells[2] + " + " + cells[3] + ") / 2 = " + fmt(mean, 6) +
                               " vs printed " + cells[4]);
        }
    }
    std::string detail = std::to_string(complete - static_cast<int>(failures.size())) + " of " +
                         std::to_string(complete) + " complete rows within 0.05";
    for (const auto& f : failures) detail += "; off: " + f;
    return {complete > 0 && failures.empty(), detail};
}

// 4 ---------------------------------------------------------------------------------

Outcome gradient_suite(const Options&) {
    const Stopwatch sw;
    SplitMix64 rng(4242);
    double worst_nll = 0, worst_bce = 0, worst_dice = 0, worst_mask = 0, worst_model = 0;
    const LossWeights w{2.0, 0.5, 1.0, 1.0};
    auto numeric_mask = [](MaskLogits x, const std::function<double(const MaskLogits&)>& f) {
        std::vector<double> g;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x.values[i];
            g.push_back(oracle::central_difference(
                [&](double v) {
                    x.values[i] = v;
                    return f(x);
                },
                keep));
            x.values[i] = keep;
        }
        return g;
    };
    for (int trial = 0; trial < 20; ++trial) {
        EmbeddingMatrix logits(5, 7);
        for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-3, 3);
        std::vector<int> targets;
        std::vector<bool> ignore;
        for (int r = 0; r < 5; ++r) {
            targets.push_back(static_cast<int>(rng.below(7)));
            ignore.push_back(r < 2);
        }
        const EmbeddingMatrix g = nll_next_token_grad(logits, targets, ignore);
        std::vector<double> a, n;
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            EmbeddingMatrix x = logits;
            a.push_back(g.data()[i]);
            n.push_back(oracle::central_difference(
                [&](double v) {
                    x.data()[i] = v;
                    return nll_next_token(x, targets, ignore);
                },
                logits.data()[i]));
        }
        worst_nll = std::max(worst_nll, oracle::relative_error(a, n));

        MaskLogits x(6, 5);
        for (double& v : x.values) v = rng.uniform(-3, 3);
        const BinaryMask t = oracle::random_mask(rng, 6, 5, 0.5);
        worst_bce = std::max(worst_bce, oracle::relative_error(bce_mask_grad(x, t).values,
                                                               numeric_mask(x, [&](const MaskLogits& m) { return bce_mask(m, t); })));
        worst_dice = std::max(worst_dice, oracle::relative_error(dice_mask_grad(x, t).values,
                                                                 numeric_mask(x, [&](const MaskLogits& m) { return dice_mask(m, t); })));
        worst_mask = std::max(worst_mask, oracle::relative_error(mask_loss_grad(x, t, w).values,
                                                                 numeric_mask(x, [&](const MaskLogits& m) { return mask_loss(m, t, w); })));

        const toy::ModelParams p = toy::ModelParams::init(toy_support::tiny_config(), 900 + static_cast<std::uint64_t>(trial));
        const std::vector<toy::ToyExample> batch{toy_support::tiny_example(p, rng), toy_support::tiny_example(p, rng, 2)};
        for (const auto& gc : toy_support::check_gradients(p, batch, w)) worst_model = std::max(worst_model, gc.relative_error);
    }
    const double secs = sw.seconds();
    const double worst = std::max({worst_nll, worst_bce, worst_dice, worst_mask, worst_model});
    return {worst < 1e-5 && secs < 30.0, "20 instances each; max relative error nll " + fmt(worst_nll) + ", bce " +
                                             fmt(worst_bce) + ", dice " + fmt(worst_dice) + ", mask " + fmt(worst_mask) +
                                             ", model " + fmt(worst_model) + "; " + fmt(secs) + " s"};
}

// 5 ---------------------------------------------------------------------------------

Outcome toy_training(const Options&) {
    const Stopwatch sw;
    const toy::ToyConfig cfg;
    const std::uint64_t seed = 0;
    const toy::SyntheticTask task = toy::standard_task(cfg, seed);
    const toy::ModelParams init = toy::ModelParams::init(cfg, seed);
    const auto batch = toy::make_batch(task.samples, task.vocab, init);
    const toy::TrainResult res = toy::train(init, batch, cfg.weights, cfg.lr, cfg.steps);
    const double ratio = res.curve.back().total / res.curve.front().total;
    double min_j = 1.0, min_tiou = 1.0;
    int exact = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const toy::Prediction pr = toy::predict(res.params, batch[i], cfg.max_answer_tokens);
        exact += pr.ids == toy::answer_ids(res.params, batch[i]) ? 1 : 0;
        double j = 0.0;
        std::size_t n = 0;
        for (std::size_t o = 0; o < batch[i].target_masks.size(); ++o) {
            for (std::size_t k = 0; k < batch[i].target_masks[o].size(); ++k) {
                const bool have = o < pr.masks.size() && k < pr.masks[o].size();
                j += have ? oracle::region_j(pr.masks[o][k], batch[i].target_masks[o][k]) : 0.0;
                ++n;
            }
        }
        min_j = std::min(min_j, n ? j / static_cast<double>(n) : 0.0);
        const TimeInterval& truth = *task.samples[i].label_interval;
        min_tiou = std::min(min_tiou, pr.interval ? oracle::tiou(pr.interval->start_seconds, pr.interval->end_seconds,
                                                                  truth.start_seconds, truth.end_seconds)
                                                  : 0.0);
    }
    const double secs = sw.seconds();
    const int total = static_cast<int>(batch.size());
    return {ratio < 0.1 && min_j >= 0.9 && min_tiou >= 0.9 && exact == total && secs < 120.0,
            std::to_string(cfg.steps) + " steps: loss " + fmt(res.curve.front().total, 4) + " -> " +
                fmt(res.curve.back().total, 4) + " (" + fmt(100.0 * ratio, 3) + "% of initial); min J " + fmt(min_j) +
                ", min tIoU " + fmt(min_tiou) + ", exact answers " + std::to_string(exact) + "/" +
                std::to_string(total) + "; " + fmt(secs) + " s"};
}

// 6 ---------------------------------------------------------------------------------

Outcome builder_determinism(const Options& o) {
    fs::create_directories(o.workdir);
    const auto records = load_source_dir(o.fixtures / "corpus");
    BuilderConfig cfg;
    cfg.seed = 11;
    const fs::path a = o.workdir / "determinism_a.jsonl", b = o.workdir / "determinism_b.jsonl";
    write_manifest(build_manifest(records, {}, cfg), a);
    write_manifest(build_manifest(load_source_dir(o.fixtures / "corpus"), {}, cfg), b);
    const bool identical = file_bytes(a) == file_bytes(b) && !file_bytes(a).empty();

    const Manifest m = read_manifest(a);
    int trqa = 0, uncovered = 0;
    for (const auto& s : m.samples) {
        if (s.task != Task::PixTRQA) continue;
        ++trqa;
        if (!s.label_interval || s.label_masks.empty()) {
            ++uncovered;
            continue;
        }
        for (const auto& [oid, labels] : s.label_masks) {
            std::set<std::size_t> labelled;
            for (const auto& lf : labels) labelled.insert(lf.frame_index);
            for (std::size_t fi = 0; fi < s.frame_timestamps.size(); ++fi) {
                if ((labelled.count(fi) == 1) != s.label_interval->contains(s.frame_timestamps[fi])) ++uncovered;
            }
        }
    }
    const json& rej = m.provenance.at("rejections");
    const bool rejected = rej.size() == 1 && rej[0].at("video_id") == "park_dog" && rej[0].at("task") == "pixtrqa" &&
                          rej[0].at("reason") == "object '1': gap after index 5";
    return {identical && trqa > 0 && uncovered == 0 && rejected,
            std::string(identical ? "byte-identical" : "DIFFERENT") + " manifests (" + std::to_string(m.samples.size()) +
                " samples); " + std::to_string(trqa) + " PixTRQA samples, " + std::to_string(uncovered) +
                " coverage violations; rejections " + rej.dump()};
}

// 7 ---------------------------------------------------------------------------------

Outcome recall_micro_table(const Options& o) {
    const Manifest m = read_manifest(o.fixtures / "recall" / "manifest.jsonl");
    const auto preds = read_predictions((o.fixtures / "recall" / "predictions.jsonl").string());
    const EvalReport r = evaluate(m, preds, RunConfig{});
    // counting oracle over the fixture's intervals
    std::vector<double> tious;
    for (const auto& p : preds) {
        const TimeInterval& iv = std::get<TimeInterval>(p.interval);
        for (const auto& s : m.samples) {
            if (s.id == p.sample_id) {
                tious.push_back(oracle::tiou(iv.start_seconds, iv.end_seconds, s.label_interval->start_seconds,
                                             s.label_interval->end_seconds));
            }
        }
    }
    double mean = 0.0;
    for (double t : tious) mean += t;
    mean /= static_cast<double>(tious.size());
    bool ok = r.overall.mean_tiou && *r.overall.mean_tiou == mean;
    std::string detail;
    for (double k : {0.3, 0.5, 0.7}) {
        const double want = oracle::recall(tious, k);
        const double got = r.overall.r_at.count(k) ? r.overall.r_at.at(k) : -1.0;
        ok = ok && got == want;
        detail += "R@" + fmt(k) + " = " + fmt(got, 17) + " (oracle " + fmt(want, 17) + "), ";
    }
    const bool matches_table = r.overall.r_at.count(0.3) && r.overall.r_at.at(0.3) == 0.75 && r.overall.r_at.at(0.5) == 0.5 &&
                               r.overall.r_at.at(0.7) == 0.25 && mean == 0.5;
    detail += "mean tIoU = " + fmt(r.overall.mean_tiou.value_or(-1), 17) + " (oracle " + fmt(mean, 17) + ")";
    return {ok && matches_table, detail};
}

// 8 ---------------------------------------------------------------------------------

Outcome template_fidelity(const Options&) {
    struct Case {
        std::string name, got, want;
    };
    const std::vector<std::string> objs{"short description", "short description"};
    const std::vector<Case> cases{
        {"PixRQA question", render_prompt(Task::PixRQA, objs),
         "If object_1 <region> short description, object_2 <region> short description, what is a likely future event? "
         "And please generate the mask in every frames."},
        {"PixRQA answer", render_answer("Long description", 2),
         "Long description. The segmentation mask: object_1[SEG], object_2[SEG]. "},
        {"PixHQA timepoint question", render_prompt(Task::PixHQA, objs, TemporalToken{7}),
         "What object_1 short description, object_2 short description are doing in the <Temp-7>, and generate the masks? "},
        {"PixHQA period question", render_prompt(Task::PixHQA, objs, TokenPair{TemporalToken{12}, TemporalToken{34}}),
         "What object_1 short description, object_2 short description are doing in the {<Temp-12><Temp-34>}, and "
         "generate the masks? "},
        {"PixHQA answer", render_answer("Long description", 2),
         "Long description. The segmentation mask: object_1[SEG], object_2[SEG]. "},
        {"PixTRQA question", render_prompt(Task::PixTRQA, objs),
         "What object_1 <region> short description, object_2 <region> short description are doing? And please generate "
         "the time period and object mask."},
        {"PixTRQA answer", render_answer("Long description", 2, TokenPair{TemporalToken{12}, TemporalToken{34}}),
         "The Time is {<Temp-12><Temp-34>}. Long description. The segmentation mask: object_1[SEG], object_2[SEG]. "},
    };
    std::string detail;
    int ok = 0;
    for (const auto& c : cases) {
        if (c.got == c.want) ++ok;
        else detail += "; " + c.name + " differs: got \"" + c.got + "\"";
    }
    return {ok == static_cast<int>(cases.size()),
            std::to_string(ok) + "/" + std::to_string(cases.size()) + " golden strings match" + detail};
}

// 9 ---------------------------------------------------------------------------------

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

Outcome end_to_end_pipeline(const Options& o) {
    if (o.tool.empty()) return {false, "no --tool given"};
    const fs::path d = o.workdir / "pipeline";
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string tool = quote(o.tool), log = quote((d / "log.txt").string());
    const std::vector<std::pair<std::string, std::string>> steps{
        {"synth", "synth --seed 3 --count 8 --out " + quote((d / "src").string())},
        {"build-bench", "build-bench --task all --seed 3 --src " + quote((d / "src").string()) + " --out " +
                            quote((d / "manifest.jsonl").string())},
        {"train-toy", "train-toy --seed 3 --steps 300 --manifest " + quote((d / "manifest.jsonl").string()) + " --out " +
                          quote((d / "params.bin").string())},
        {"predict", "predict --params " + quote((d / "params.bin").string()) + " --manifest " +
                        quote((d / "manifest.jsonl").string()) + " --out " + quote((d / "predictions.jsonl").string())},
        {"evaluate", "evaluate --manifest " + quote((d / "manifest.jsonl").string()) + " --predictions " +
                         quote((d / "predictions.jsonl").string()) + " --out " + quote((d / "report.json").string())},
    };
    const Stopwatch sw;
    std::string detail;
    for (const auto& [name, args] : steps) {
        const int status = std::system((tool + " " + args + " >> " + log + " 2>&1").c_str());
        if (status != 0) return {false, name + " failed (status " + std::to_string(status) + "), see " + (d / "log.txt").string()};
    }
    if (o.python.empty() || o.schema_check.empty()) return {false, "no schema checker configured"};
    const int schema = std::system((quote(o.python) + " " + quote(o.schema_check) + " " + quote((d / "report.json").string()) +
                                    " >> " + log + " 2>&1")
                                       .c_str());
    const double secs = sw.seconds();
    std::ifstream rep(d / "report.json");
    const json report = json::parse(rep);
    detail = "all steps exit 0; report " + std::string(schema == 0 ? "schema-valid" : "SCHEMA-INVALID") + " (" +
             std::to_string(report.at("per_sample").size()) + " samples, headline " + report.at("headline").dump() +
             "); " + fmt(secs) + " s";
    return {schema == 0 && secs < 300.0, detail};
}

struct Criterion {
    int number;
    const char* slug;
    Outcome (*run)(const Options&);
};

const std::vector<Criterion> kCriteria{
    {1, "codec_round_trip", codec_round_trip},       {2, "metric_oracles", metric_oracles},
    {3, "table_jf_audit", table_jf_audit},           {4, "gradient_suite", gradient_suite},
    {5, "toy_training", toy_training},               {6, "builder_determinism", builder_determinism},
    {7, "recall_micro_table", recall_micro_table},   {8, "template_fidelity", template_fidelity},
    {9, "end_to_end_pipeline", end_to_end_pipeline},
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    Options o;
    int only = 0;
    app.add_option("--criterion", only, "Run one criterion (default: all)")->check(CLI::Range(0, 9));
    app.add_option("--fixtures", o.fixtures, "Fixture directory")->required();
    app.add_option("--tool", o.tool, "Path to the ufv executable");
    app.add_option("--python", o.python, "Python interpreter for the schema check");
    app.add_option("--schema-check", o.schema_check, "Report validator script");
    app.add_option("--workdir", o.workdir, "Scratch directory")->required();
    CLI11_PARSE(app, argc, argv);

    int failed = 0;
    for (const auto& c : kCriteria) {
        if (only && c.number != only) continue;
        Outcome out;
        try {
            out = c.run(o);
        } catch (const std::exception& e) {
            out = {false, std::string("error: ") + e.what()};
        }
        std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.number << " " << c.slug << ": " << out.detail
                  << std::endl;
        failed += out.pass ? 0 : 1;
    }
    return failed ? 1 : 0;
}
