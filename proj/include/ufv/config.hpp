#pragma once
//! \file
//! Run configuration: a flat `section.key = value` text file. `#` starts a
//! comment; blank lines are ignored; unknown keys are errors.
//!
//!     codec.n_bins = 100
//!     loss.alpha = 2.0
//!     eval.recall_thresholds = 0.3, 0.5, 0.7
//!     eval.contour_tol_mode = auto

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ufv/error.hpp"
#include "ufv/json_io.hpp"
#include "ufv/losses.hpp"
#include "ufv/metrics.hpp"
#include "ufv/temporal_codec.hpp"
#include "ufv/toy_model.hpp"

namespace ufv {

struct CodecConfig {
    int n_bins = kDefaultTemporalBins;
};

struct BuilderSection {
    double pixrqa_prompt_window = 0.25;
    std::uint64_t seed = 0;
};

struct ToySection {
    int P = 32;
    int G = 16;
    int K = 4;
    int vocab = 128;
    int samples = 8;
    double lr = 0.05;
    int steps = 2000;
};

struct EvalSection {
    double pixtrqa_threshold = kDefaultPixtrqaThreshold;
    std::vector<double> recall_thresholds{0.3, 0.5, 0.7};
    //! "auto" (ceil(0.008 * diagonal)) or a fixed pixel distance.
    std::string contour_tol_mode = "auto";

    //! Tolerance argument for the metric functions: negative means auto.
    double contour_tolerance() const { return contour_tol_mode == "auto" ? -1.0 : std::stod(contour_tol_mode); }
};

struct RunConfig {
    CodecConfig codec;
    LossWeights loss;
    BuilderSection builder;
    ToySection toy;
    EvalSection eval;

    void validate() const {
        if (codec.n_bins < 1) throw DomainError("codec.n_bins must be >= 1");
        loss.validate();
        if (!(builder.pixrqa_prompt_window > 0.0 && builder.pixrqa_prompt_window <= 1.0)) {
            throw DomainError("builder.pixrqa_prompt_window must be in (0, 1]");
        }
        if (!(eval.pixtrqa_threshold >= 0.0 && eval.pixtrqa_threshold <= 1.0)) {
            throw DomainError("eval.pixtrqa_threshold must be in [0, 1]");
        }
        for (double k : eval.recall_thresholds) {
            if (!(k >= 0.0 && k <= 1.0)) throw DomainError("eval.recall_thresholds must lie in [0, 1]");
        }
        if (eval.contour_tol_mode != "auto") {
            const double t = eval.contour_tolerance();
            if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("eval.contour_tol_mode must be auto or a distance >= 0");
        }
        toy_config().validate();
    }

    toy::ToyConfig toy_config() const {
        toy::ToyConfig c;
        c.hidden = toy.P;
        c.grid = toy.G;
        c.frames = toy.K;
        c.text_vocab = toy.vocab;
        c.n_bins = codec.n_bins;
        c.samples = toy.samples;
        c.lr = toy.lr;
        c.steps = toy.steps;
        c.weights = loss;
        return c;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v, std::size_t line) {
    std::istringstream in(v);
    T out{};
    in >> out;
    if (!in || !(in >> std::ws).eof()) throw ParseError(key + ": cannot parse '" + v + "'", line);
    return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v, std::size_t line) {
    std::vector<double> out;
    std::stringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(parse_number<double>(key, trim(item), line));
    if (out.empty()) throw ParseError(key + ": empty list", line);
    return out;
}

} // namespace detail

//! Applies one `key = value` setting. Throws ParseError for unknown keys or
//! unparsable values.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value, std::size_t line = 0) {
    using detail::parse_number;
    const std::map<std::string, std::function<void(const std::string&)>> setters{
        {"codec.n_bins", [&](const std::string& v) { c.codec.n_bins = parse_number<int>(key, v, line); }},
        {"loss.alpha", [&](const std::string& v) { c.loss.alpha = parse_number<double>(key, v, line); }},
        {"loss.beta", [&](const std::string& v) { c.loss.beta = parse_number<double>(key, v, line); }},
        {"loss.gamma", [&](const std::string& v) { c.loss.gamma = parse_number<double>(key, v, line); }},
        {"loss.dice_epsilon", [&](const std::string& v) { c.loss.dice_epsilon = parse_number<double>(key, v, line); }},
        {"builder.pixrqa_prompt_window",
         [&](const std::string& v) { c.builder.pixrqa_prompt_window = parse_number<double>(key, v, line); }},
        {"builder.seed", [&](const std::string& v) { c.builder.seed = parse_number<std::uint64_t>(key, v, line); }},
        {"toy.P", [&](const std::string& v) { c.toy.P = parse_number<int>(key, v, line); }},
        {"toy.G", [&](const std::string& v) { c.toy.G = parse_number<int>(key, v, line); }},
        {"toy.K", [&](const std::string& v) { c.toy.K = parse_number<int>(key, v, line); }},
        {"toy.vocab", [&](const std::string& v) { c.toy.vocab = parse_number<int>(key, v, line); }},
        {"toy.samples", [&](const std::string& v) { c.toy.samples = parse_number<int>(key, v, line); }},
        {"toy.lr", [&](const std::string& v) { c.toy.lr = parse_number<double>(key, v, line); }},
        {"toy.steps", [&](const std::string& v) { c.toy.steps = parse_number<int>(key, v, line); }},
        {"eval.pixtrqa_threshold", [&](const std::string& v) { c.eval.pixtrqa_threshold = parse_number<double>(key, v, line); }},
        {"eval.recall_thresholds", [&](const std::string& v) { c.eval.recall_thresholds = detail::parse_list(key, v, line); }},
        {"eval.contour_tol_mode",
         [&](const std::string& v) {
             if (v != "auto") parse_number<double>(key, v, line);
             c.eval.contour_tol_mode = v;
         }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw ParseError("unknown config key '" + key + "'", line);
    it->second(value);
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string text = detail::trim(raw.substr(0, raw.find('#')));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
        const std::string key = detail::trim(text.substr(0, eq));
        const std::string value = detail::trim(text.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError("expected 'key = value'", line);
        apply_setting(c, key, value, line);
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    return parse_config(in);
}

inline json to_json(const RunConfig& c) {
    return json{
        {"codec", {{"n_bins", c.codec.n_bins}}},
        {"loss",
         {{"alpha", c.loss.alpha}, {"beta", c.loss.beta}, {"gamma", c.loss.gamma}, {"dice_epsilon", c.loss.dice_epsilon}}},
        {"builder", {{"pixrqa_prompt_window", c.builder.pixrqa_prompt_window}, {"seed", c.builder.seed}}},
        {"toy",
         {{"P", c.toy.P},
          {"G", c.toy.G},
          {"K", c.toy.K},
          {"vocab", c.toy.vocab},
          {"samples", c.toy.samples},
          {"lr", c.toy.lr},
          {"steps", c.toy.steps}}},
        {"eval",
         {{"pixtrqa_threshold", c.eval.pixtrqa_threshold},
          {"recall_thresholds", c.eval.recall_thresholds},
          {"contour_tol_mode", c.eval.contour_tol_mode}}},
    };
}

} // namespace ufv
