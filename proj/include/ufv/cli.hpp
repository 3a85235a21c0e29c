#pragma once
//! \file
//! Command-line front end. `run_cli` parses arguments, runs one subcommand and
//! maps failures to exit codes:
//!
//!     0 success, 2 usage, 3 I/O, 4 data, 5 numeric failure

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ufv/bench_builder.hpp"
#include "ufv/config.hpp"
#include "ufv/error.hpp"
#include "ufv/harness.hpp"
#include "ufv/temporal_codec.hpp"
#include "ufv/toy_params_io.hpp"
#include "ufv/toy_task.hpp"

namespace ufv::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kData = 4, kNumeric = 5 };

//! Raised for argument combinations CLI11 cannot express.
class UsageError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

inline std::string vocab_path(const std::string& params_path) { return params_path + ".vocab"; }

//! Every mask of the manifest must be G x G for the toy model.
inline void check_grid(const Manifest& m, int grid) {
    auto check = [&](const BenchSample& s, const BinaryMask& mask) {
        if (mask.width() != grid || mask.height() != grid) {
            throw DataError(s.id + ": mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                            " but toy.G is " + std::to_string(grid));
        }
    };
    for (const auto& s : m.samples) {
        for (const auto& [_, labels] : s.label_masks) {
            for (const auto& lf : labels) check(s, lf.mask);
        }
        for (const auto& vp : s.visual_prompts) check(s, vp.mask);
    }
}

} // namespace detail

// --- codec -------------------------------------------------------------------------------

struct CodecArgs {
    std::string config;
    std::optional<int> bins;
    double duration = 0.0;
    std::vector<double> times;
    std::vector<std::string> tokens;
};

//! `codec encode --duration T --time t [--time t2]` prints `<Temp-k>` tokens;
//! `codec decode --duration T --token k [--token k2]` prints seconds.
inline int cmd_codec(const CodecArgs& a, bool encode, std::ostream& out) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    if (a.bins) cfg.codec.n_bins = *a.bins;
    cfg.validate();
    const TimelineSpec spec(a.duration, cfg.codec.n_bins);
    if (encode) {
        if (a.times.empty()) throw UsageError("codec encode: give at least one --time");
        for (std::size_t i = 0; i < a.times.size(); ++i) out << to_string(encode_time(a.times[i], spec));
        out << '\n';
        return kOk;
    }
    if (a.tokens.empty()) throw UsageError("codec decode: give at least one --token");
    std::vector<TemporalToken> toks;
    for (const auto& t : a.tokens) {
        std::string digits = t;
        if (digits.rfind("<Temp-", 0) == 0 && digits.back() == '>') digits = digits.substr(6, digits.size() - 7);
        std::size_t used = 0;
        int k = 0;
        try {
            k = std::stoi(digits, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != digits.size()) throw UsageError("codec decode: bad token '" + t + "'");
        toks.push_back(TemporalToken{k});
    }
    out << std::setprecision(17);
    if (toks.size() == 2) {
        const TimeInterval iv = decode_interval({toks[0], toks[1]}, spec);
        out << iv.start_seconds << ' ' << iv.end_seconds << '\n';
    } else {
        for (std::size_t i = 0; i < toks.size(); ++i) out << (i ? " " : "") << decode_time(toks[i], spec);
        out << '\n';
    }
    return kOk;
}

// --- synth ---------------------------------------------------------------------------------

struct SynthArgs {
    std::string config;
    std::uint64_t seed = 0;
    int count = 8;
    std::string out_dir;
};

//! Writes the synthetic source corpus (one JSON record per file).
inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
    namespace fs = std::filesystem;
    const RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    cfg.validate();
    const auto records = toy::synthetic_records(a.seed, a.count, cfg.toy.G, cfg.toy.K);
    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (ec) throw IoError("cannot create " + a.out_dir + ": " + ec.message());
    for (const auto& r : records) detail::write_text((fs::path(a.out_dir) / (r.video_id + ".json")).string(), to_json(r).dump() + "\n");
    out << json{{"records", records.size()}, {"grid", cfg.toy.G}, {"frames", cfg.toy.K}, {"seed", a.seed}}.dump() << '\n';
    return kOk;
}

// --- build-bench -------------------------------------------------------------------------------

struct BuildArgs {
    std::string config;
    std::string task = "all";
    std::string src;
    std::string out;
    std::optional<std::uint64_t> seed;
};

inline int cmd_build_bench(const BuildArgs& a, std::ostream& out) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    if (a.seed) cfg.builder.seed = *a.seed;
    cfg.validate();
    BuildSelection sel;
    if (a.task != "all") {
        const Task t = task_from_name(a.task);
        sel = BuildSelection{t == Task::PixRQA, t == Task::PixHQA, t == Task::PixTRQA};
    }
    BuilderConfig bc;
    bc.seed = cfg.builder.seed;
    bc.n_bins = cfg.codec.n_bins;
    bc.pixrqa_prompt_window = cfg.builder.pixrqa_prompt_window;
    const Manifest m = build_manifest(load_source_dir(a.src), sel, bc);
    write_manifest(m, std::filesystem::path(a.out));
    json counts = json::object();
    for (const auto& [t, n] : m.provenance.at("counts").items()) {
        if (a.task == "all" || t == a.task) counts[t] = n;
    }
    out << json{{"samples", m.samples.size()},
                {"counts", counts},
                {"rejected", m.provenance.at("rejected")},
                {"rejections", m.provenance.at("rejections")}}
               .dump(2)
        << '\n';
    return kOk;
}

// --- train-toy ------------------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::string manifest;
    std::string curve;
    std::optional<int> steps;
    std::optional<double> lr;
};

//! Trains on the standard synthetic task, or on every sample of `--manifest`.
//! Writes the params file, its `.vocab` word table and the loss curve CSV.
inline int cmd_train_toy(const TrainArgs& a, std::ostream& out) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    if (a.steps) cfg.toy.steps = *a.steps;
    if (a.lr) cfg.toy.lr = *a.lr;
    cfg.validate();
    const toy::ToyConfig tc = cfg.toy_config();

    std::vector<BenchSample> samples;
    WordVocab vocab;
    if (a.manifest.empty()) {
        toy::SyntheticTask task = toy::standard_task(tc, a.seed);
        samples = std::move(task.samples);
        vocab = std::move(task.vocab);
    } else {
        Manifest m = read_manifest(std::filesystem::path(a.manifest));
        if (m.samples.empty()) throw DataError("manifest has no samples");
        detail::check_grid(m, tc.grid);
        for (const auto& s : m.samples) {
            if (s.n_bins != tc.n_bins) throw DataError(s.id + ": built with " + std::to_string(s.n_bins) + " temporal bins, config has " + std::to_string(tc.n_bins));
        }
        samples = std::move(m.samples);
        try {
            vocab = toy::vocab_for(samples, tc.text_vocab);
        } catch (const DomainError& e) {
            throw DataError(e.what());
        }
    }

    const toy::ModelParams init = toy::ModelParams::init(tc, a.seed);
    const std::vector<toy::ToyExample> batch = toy::make_batch(samples, vocab, init);
    const std::string curve_path = a.curve.empty() ? a.out + ".curve.csv" : a.curve;
    auto write_curve = [&](const std::vector<toy::CurveRow>& curve) {
        std::ostringstream csv;
        toy::write_curve_csv(csv, curve);
        detail::write_text(curve_path, csv.str());
    };
    toy::TrainResult res;
    try {
        res = toy::train(init, batch, tc.weights, tc.lr, tc.steps);
    } catch (const toy::TrainingDiverged& e) {
        write_curve(e.curve());
        throw NumericError(std::string(e.what()) + "; loss curve written to " + curve_path);
    }
    toy::save_params(a.out, res.params);
    toy::save_vocab(detail::vocab_path(a.out), vocab);
    write_curve(res.curve);
    const double first = res.curve.front().total, last = res.curve.back().total;
    out << std::setprecision(6) << "samples " << samples.size() << ", steps " << tc.steps << '\n'
        << "initial loss " << first << '\n'
        << "final loss " << last << " (" << std::fixed << std::setprecision(2) << 100.0 * last / first
        << "% of initial)\n";
    return kOk;
}

// --- predict -----------------------------------------------------------------------------------------

struct PredictArgs {
    std::string params;
    std::string manifest;
    std::string out;
    int max_tokens = 64;
};

//! Greedy predictions for every manifest sample. The i-th [SEG] emitted is
//! the mask of the sample's i-th object.
inline std::vector<PredictionRecord> predict_manifest(const toy::ModelParams& p, const WordVocab& vocab, const Manifest& m,
                                                      int max_tokens) {
    detail::check_grid(m, p.grid);
    std::vector<PredictionRecord> preds;
    for (const auto& s : m.samples) {
        const toy::ToyExample prompt = toy::make_example(s, vocab, p, false);
        const toy::Prediction pr = toy::predict(p, prompt, max_tokens);
        PredictionRecord rec;
        rec.sample_id = s.id;
        rec.answer_text = toy::detokenize(pr.tokens, vocab);
        if (pr.temporal_pair) rec.interval = *pr.temporal_pair;
        for (std::size_t o = 0; o < pr.masks.size() && o < s.objects.size(); ++o) {
            for (std::size_t k = 0; k < pr.masks[o].size(); ++k) rec.masks[s.objects[o]].emplace(k, pr.masks[o][k]);
        }
        preds.push_back(std::move(rec));
    }
    return preds;
}

inline int cmd_predict(const PredictArgs& a, std::ostream& out) {
    if (a.max_tokens < 1) throw UsageError("--max-tokens must be >= 1");
    const toy::ModelParams p = toy::load_params(a.params);
    const WordVocab vocab = toy::load_vocab(detail::vocab_path(a.params));
    if (vocab.size() > p.layout.text_vocab) throw DataError("word table is larger than the model's text vocabulary");
    const Manifest m = read_manifest(std::filesystem::path(a.manifest));
    const auto preds = predict_manifest(p, vocab, m, a.max_tokens);
    std::ostringstream text;
    write_predictions(text, preds);
    detail::write_text(a.out, text.str());
    std::size_t with_interval = 0;
    for (const auto& r : preds) with_interval += std::holds_alternative<std::monostate>(r.interval) ? 0 : 1;
    out << json{{"predictions", preds.size()}, {"with_interval", with_interval}}.dump() << '\n';
    return kOk;
}

// --- evaluate ----------------------------------------------------------------------------------------

struct EvalArgs {
    std::string config;
    std::string manifest;
    std::string predictions;
    std::string out;
    std::optional<double> threshold;
};

inline int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
    RunConfig cfg = a.config.empty() ? RunConfig{} : load_config(a.config);
    if (a.threshold) cfg.eval.pixtrqa_threshold = *a.threshold;
    cfg.validate();
    const Manifest m = read_manifest(std::filesystem::path(a.manifest));
    const auto preds = read_predictions(a.predictions);
    const EvalReport r = evaluate(m, preds, cfg);
    detail::write_text(a.out, to_json(r).dump(2) + "\n");
    print_headline(out, r);
    return kOk;
}

// --- dispatch -------------------------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Video understanding toolkit: temporal codec, benchmark builder, toy model and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ufv 1.0");

    CodecArgs codec_args;
    auto* codec = app.add_subcommand("codec", "Convert between seconds and temporal tokens");
    codec->require_subcommand(1);
    auto* enc = codec->add_subcommand("encode", "Seconds to <Temp-k> tokens");
    auto* dec = codec->add_subcommand("decode", "Temporal tokens to seconds");
    for (auto* c : {enc, dec}) {
        c->add_option("--config", codec_args.config, "Config file")->check(CLI::ExistingFile);
        c->add_option("--bins", codec_args.bins, "Number of temporal bins");
        c->add_option("--duration", codec_args.duration, "Video duration in seconds")->required();
    }
    enc->add_option("--time", codec_args.times, "Time in seconds (repeatable)")->required();
    dec->add_option("--token", codec_args.tokens, "Token index or <Temp-k> (repeatable)")->required();

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Write a synthetic source corpus");
    synth->add_option("--config", synth_args.config, "Config file")->check(CLI::ExistingFile);
    synth->add_option("--seed", synth_args.seed, "Corpus seed");
    synth->add_option("--count", synth_args.count, "Number of records")->check(CLI::PositiveNumber);
    synth->add_option("--out", synth_args.out_dir, "Output directory")->required();

    BuildArgs build_args;
    auto* build = app.add_subcommand("build-bench", "Build a benchmark manifest from source records");
    build->add_option("--config", build_args.config, "Config file")->check(CLI::ExistingFile);
    build->add_option("--task", build_args.task, "pixrqa, pixhqa, pixtrqa or all")
        ->check(CLI::IsMember({"pixrqa", "pixhqa", "pixtrqa", "all"}));
    build->add_option("--src", build_args.src, "Source record directory")->required();
    build->add_option("--out", build_args.out, "Manifest path")->required();
    build->add_option("--seed", build_args.seed, "Builder seed");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train-toy", "Train the toy model");
    train->add_option("--config", train_args.config, "Config file")->check(CLI::ExistingFile);
    train->add_option("--seed", train_args.seed, "Task and initialization seed");
    train->add_option("--out", train_args.out, "Params file")->required();
    train->add_option("--manifest", train_args.manifest, "Train on this manifest instead of the standard task");
    train->add_option("--curve", train_args.curve, "Loss curve CSV (default <out>.curve.csv)");
    train->add_option("--steps", train_args.steps, "Gradient steps");
    train->add_option("--lr", train_args.lr, "Learning rate");

    PredictArgs predict_args;
    auto* pred = app.add_subcommand("predict", "Greedy predictions for a manifest");
    pred->add_option("--params", predict_args.params, "Params file")->required();
    pred->add_option("--manifest", predict_args.manifest, "Manifest path")->required();
    pred->add_option("--out", predict_args.out, "Predictions JSONL")->required();
    pred->add_option("--max-tokens", predict_args.max_tokens, "Decoding length cap");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "Score predictions against a manifest");
    eval->add_option("--config", eval_args.config, "Config file")->check(CLI::ExistingFile);
    eval->add_option("--manifest", eval_args.manifest, "Manifest path")->required();
    eval->add_option("--predictions", eval_args.predictions, "Predictions JSONL")->required();
    eval->add_option("--out", eval_args.out, "Report JSON path")->required();
    eval->add_option("--threshold", eval_args.threshold, "PixTRQA tIoU gate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*enc) return cmd_codec(codec_args, true, out);
        if (*dec) return cmd_codec(codec_args, false, out);
        if (*synth) return cmd_synth(synth_args, out);
        if (*build) return cmd_build_bench(build_args, out);
        if (*train) return cmd_train_toy(train_args, out);
        if (*pred) return cmd_predict(predict_args, out);
        if (*eval) return cmd_evaluate(eval_args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}

} // namespace ufv::cli
