#pragma once
//! \file
//! Prediction files and manifest evaluation.
//!
//! A predictions file is JSON Lines, one object per sample:
//!
//!     {"sample_id": "v1:pixtrqa", "answer_text": "...",
//!      "interval": [3.0, 7.5] | {"tokens": [12, 30]} | null,
//!      "masks": {"<object id>": {"<frame index>": {"w":..,"h":..,"rle":[..]}}}}

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ufv/bench_builder.hpp"
#include "ufv/config.hpp"
#include "ufv/error.hpp"
#include "ufv/json_io.hpp"
#include "ufv/metrics.hpp"
#include "ufv/temporal_codec.hpp"

namespace ufv {

//! A seconds pair given in the wrong order; kept so it can be reported.
struct ReversedSeconds {
    double start = 0.0;
    double end = 0.0;
};

using PredictedInterval = std::variant<std::monostate, TimeInterval, TokenPair, ReversedSeconds>;

struct PredictionRecord {
    std::string sample_id;
    std::string answer_text;
    PredictedInterval interval;
    //! object id -> frame index -> mask
    std::map<std::string, std::map<std::size_t, BinaryMask>> masks;
};

inline json to_json(const PredictionRecord& p) {
    json j{{"sample_id", p.sample_id}, {"answer_text", p.answer_text}};
    if (const auto* iv = std::get_if<TimeInterval>(&p.interval)) j["interval"] = interval_to_json(*iv);
    else if (const auto* tp = std::get_if<TokenPair>(&p.interval)) j["interval"] = {{"tokens", {tp->first.index, tp->second.index}}};
    else if (const auto* rv = std::get_if<ReversedSeconds>(&p.interval)) j["interval"] = json::array({rv->start, rv->end});
    else j["interval"] = nullptr;
    json masks = json::object();
    for (const auto& [oid, frames] : p.masks) {
        json per = json::object();
        for (const auto& [fi, m] : frames) per[std::to_string(fi)] = mask_to_json(m);
        masks[oid] = per;
    }
    j["masks"] = masks;
    return j;
}

inline PredictionRecord prediction_from_json(const json& j) {
    PredictionRecord p;
    p.sample_id = j.at("sample_id").get<std::string>();
    p.answer_text = j.value("answer_text", std::string{});
    if (j.contains("interval") && !j.at("interval").is_null()) {
        const json& iv = j.at("interval");
        if (iv.is_object()) {
            const json& t = iv.at("tokens");
            if (!t.is_array() || t.size() != 2) throw ParseError("interval tokens must be a two-element array");
            p.interval = TokenPair{TemporalToken{t[0].get<int>()}, TemporalToken{t[1].get<int>()}};
        } else {
            if (!iv.is_array() || iv.size() != 2) throw ParseError("interval must be [start, end] or {\"tokens\": [a, b]}");
            const double a = iv[0].get<double>(), b = iv[1].get<double>();
            if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0) throw ParseError("interval seconds must be finite and >= 0");
            // ordering is judged at scoring time
            if (a > b) p.interval = ReversedSeconds{a, b};
            else p.interval = TimeInterval(a, b);
        }
    }
    if (j.contains("masks")) {
        for (const auto& [oid, frames] : j.at("masks").items()) {
            for (const auto& [fi, m] : frames.items()) {
                std::size_t idx = 0;
                try {
                    idx = static_cast<std::size_t>(std::stoul(fi));
                } catch (const std::exception&) {
                    throw ParseError("frame index '" + fi + "' of object '" + oid + "' is not a number");
                }
                try {
                    p.masks[oid].emplace(idx, mask_from_json(m));
                } catch (const ParseError& e) {
                    throw ParseError("mask of object '" + oid + "' frame " + fi + ": " + e.what());
                }
            }
        }
    }
    return p;
}

inline std::vector<PredictionRecord> read_predictions(std::istream& in) {
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(prediction_from_json(json::parse(line)));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad prediction: ") + e.what(), lineno);
        } catch (const DomainError& e) {
            throw ParseError(std::string("bad prediction: ") + e.what(), lineno);
        }
    }
    return out;
}

inline std::vector<PredictionRecord> read_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open predictions " + path);
    return read_predictions(in);
}

inline void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& preds) {
    for (const auto& p : preds) out << to_json(p).dump() << '\n';
}

//! Ground truth as a prediction: reference answer, label interval, label masks.
inline PredictionRecord oracle_prediction(const BenchSample& s) {
    PredictionRecord p;
    p.sample_id = s.id;
    p.answer_text = s.reference_answer;
    if (s.label_interval) p.interval = *s.label_interval;
    for (const auto& [oid, frames] : s.label_masks) {
        for (const auto& lf : frames) p.masks[oid].emplace(lf.frame_index, lf.mask);
    }
    return p;
}

// --- report ---------------------------------------------------------------------------

struct SampleScore {
    std::string sample_id;
    Task task = Task::PixRQA;
    double j = 0.0;
    double f = 0.0;
    double jf = 0.0;
    std::optional<double> tiou;  // PixTRQA only
    std::vector<double> semantic_scores;
    std::vector<std::string> flags;
};

struct Aggregates {
    double mean_j = 0.0;
    double mean_f = 0.0;
    double mean_jf = 0.0;
    std::optional<double> mean_tiou;
    std::map<double, double> r_at;
    double savg = 0.0;
    std::size_t samples = 0;
};

struct EvalReport {
    std::vector<SampleScore> per_sample;
    Aggregates overall;
    std::map<std::string, Aggregates> by_task;
    std::size_t missing = 0;
    std::size_t malformed_intervals = 0;
    RunConfig config;
};

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline std::string threshold_key(double k) {
    std::ostringstream s;
    s << k;
    return s.str();
}

inline Aggregates aggregate(const std::vector<const SampleScore*>& scores, const std::vector<double>& thresholds) {
    Aggregates a;
    a.samples = scores.size();
    if (scores.empty()) return a;
    std::vector<double> tious;
    std::vector<std::vector<double>> sem;
    for (const SampleScore* s : scores) {
        a.mean_j += s->j;
        a.mean_f += s->f;
        a.mean_jf += s->jf;
        if (s->tiou) tious.push_back(*s->tiou);
        sem.push_back(s->semantic_scores);
    }
    const double n = static_cast<double>(scores.size());
    a.mean_j /= n;
    a.mean_f /= n;
    a.mean_jf /= n;
    if (!tious.empty()) {
        double sum = 0.0;
        for (double t : tious) sum += t;
        a.mean_tiou = sum / static_cast<double>(tious.size());
        a.r_at = recall_at(tious, thresholds);
    }
    a.savg = savg_aggregate(sem);
    return a;
}

inline json to_json(const Aggregates& a) {
    json r = json::object();
    for (const auto& [k, v] : a.r_at) r[threshold_key(k)] = v;
    return json{{"samples", a.samples},
                {"mean_j", a.mean_j},
                {"mean_f", a.mean_f},
                {"mean_jf", a.mean_jf},
                {"mean_tiou", a.mean_tiou ? json(*a.mean_tiou) : json(nullptr)},
                {"r_at", r},
                {"savg", a.savg}};
}

inline double one_decimal(double v) { return std::round(v * 10.0) / 10.0; }

//! Interval of a prediction in seconds; nullopt when absent, flags malformed
//! pairs.
inline std::optional<TimeInterval> resolve_interval(const PredictionRecord& p, const BenchSample& s, SampleScore& out) {
    if (std::holds_alternative<std::monostate>(p.interval)) {
        out.flags.push_back("no_interval");
        return std::nullopt;
    }
    if (const auto* iv = std::get_if<TimeInterval>(&p.interval)) return *iv;
    if (std::holds_alternative<ReversedSeconds>(p.interval)) {
        out.flags.push_back("malformed_interval");
        return std::nullopt;
    }
    const TokenPair& tp = std::get<TokenPair>(p.interval);
    try {
        return decode_interval(tp, s.timeline());
    } catch (const MalformedIntervalError&) {
        out.flags.push_back("malformed_interval");
    } catch (const DomainError&) {
        out.flags.push_back("malformed_interval");
    }
    return std::nullopt;
}

inline BinaryMask predicted_mask(const PredictionRecord* p, const std::string& oid, std::size_t frame,
                                 const BinaryMask& truth) {
    if (p) {
        if (auto it = p->masks.find(oid); it != p->masks.end()) {
            if (auto jt = it->second.find(frame); jt != it->second.end()) {
                if (!jt->second.same_shape(truth)) {
                    throw DataError("mask of object '" + oid + "' frame " + std::to_string(frame) + " is " +
                                    std::to_string(jt->second.width()) + "x" + std::to_string(jt->second.height()) +
                                    ", ground truth is " + std::to_string(truth.width()) + "x" +
                                    std::to_string(truth.height()));
                }
                return jt->second;
            }
        }
    }
    return BinaryMask(truth.width(), truth.height());
}

inline void check_prediction(const PredictionRecord& p, const BenchSample& s) {
    for (const auto& [oid, frames] : p.masks) {
        for (const auto& [fi, _] : frames) {
            if (fi >= s.frame_timestamps.size()) {
                throw DataError(p.sample_id + ": mask for frame " + std::to_string(fi) + " but the sample has " +
                                std::to_string(s.frame_timestamps.size()) + " frames");
            }
        }
    }
}

inline SampleScore score_sample(const BenchSample& s, const PredictionRecord* p, const RunConfig& cfg,
                                const SemanticScorer& scorer) {
    SampleScore out;
    out.sample_id = s.id;
    out.task = s.task;
    if (!p) out.flags.push_back("missing");
    else check_prediction(*p, s);
    const double tol = cfg.eval.contour_tolerance();
    const bool point = s.temporal_mode && *s.temporal_mode == TemporalMode::Point;
    if (s.task == Task::PixHQA && s.temporal_mode) out.flags.push_back(point ? "temporal_point" : "temporal_period");
    out.semantic_scores = scorer.score(p ? p->answer_text : std::string{}, s.reference_answer, point);

    if (s.task == Task::PixTRQA) {
        out.tiou = 0.0;
        std::optional<TimeInterval> iv;
        if (p) iv = resolve_interval(*p, s, out);
        if (iv && s.label_interval) {
            std::map<std::size_t, GatedFrame> frames;
            for (const auto& [oid, labels] : s.label_masks) {
                for (const auto& lf : labels) {
                    GatedFrame& g = frames[lf.frame_index];
                    g.timestamp_seconds = s.frame_timestamps.at(lf.frame_index);
                    g.objects.emplace_back(predicted_mask(p, oid, lf.frame_index, lf.mask), lf.mask);
                }
            }
            std::vector<GatedFrame> list;
            for (auto& [_, g] : frames) list.push_back(std::move(g));
            try {
                const GatedScore g = pixtrqa_gated_masks(*iv, *s.label_interval, list, cfg.eval.pixtrqa_threshold, tol);
                out.tiou = g.tiou;
                out.j = g.j;
                out.f = g.f;
                if (!g.gate_open) out.flags.push_back("gate_closed");
            } catch (const DegenerateInputError&) {
                out.tiou = tiou({*iv, *s.label_interval});
                out.flags.push_back("no_frames_in_intersection");
            }
        }
    } else {
        double j = 0.0, f = 0.0;
        std::size_t pairs = 0;
        for (const auto& [oid, labels] : s.label_masks) {
            for (const auto& lf : labels) {
                const BinaryMask pred = predicted_mask(p, oid, lf.frame_index, lf.mask);
                j += region_j(pred, lf.mask);
                f += tol >= 0.0 ? contour_f(pred, lf.mask, tol) : contour_f(pred, lf.mask);
                ++pairs;
            }
        }
        if (pairs) {
            out.j = j / static_cast<double>(pairs);
            out.f = f / static_cast<double>(pairs);
        }
    }
    out.jf = jf_mean(out.j, out.f);
    return out;
}

} // namespace detail

//! Scores every manifest sample. Predictions for unknown sample ids raise a
//! DataError naming them; samples without a prediction score zero.
inline EvalReport evaluate(const Manifest& manifest, const std::vector<PredictionRecord>& preds, const RunConfig& cfg,
                           const SemanticScorer& scorer = TokenOverlapScorer{}) {
    cfg.validate();
    std::map<std::string, const PredictionRecord*> by_id;
    std::vector<std::string> unknown, duplicate;
    std::set<std::string> known;
    for (const auto& s : manifest.samples) known.insert(s.id);
    for (const auto& p : preds) {
        if (!known.count(p.sample_id)) unknown.push_back(p.sample_id);
        else if (!by_id.emplace(p.sample_id, &p).second) duplicate.push_back(p.sample_id);
    }
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
        return s;
    };
    if (!unknown.empty()) throw DataError("predictions for unknown sample ids: " + join(unknown));
    if (!duplicate.empty()) throw DataError("duplicate predictions for: " + join(duplicate));
    if (manifest.samples.empty()) throw DataError("manifest has no samples");

    EvalReport r;
    r.config = cfg;
    for (const auto& s : manifest.samples) {
        auto it = by_id.find(s.id);
        const PredictionRecord* p = it == by_id.end() ? nullptr : it->second;
        try {
            r.per_sample.push_back(detail::score_sample(s, p, cfg, scorer));
        } catch (const ShapeError& e) {
            throw DataError(s.id + ": " + e.what());
        }
        const SampleScore& sc = r.per_sample.back();
        if (!p) ++r.missing;
        if (std::find(sc.flags.begin(), sc.flags.end(), "malformed_interval") != sc.flags.end()) ++r.malformed_intervals;
    }
    std::vector<const SampleScore*> all;
    std::map<std::string, std::vector<const SampleScore*>> per_task;
    for (const auto& sc : r.per_sample) {
        all.push_back(&sc);
        per_task[task_name(sc.task)].push_back(&sc);
    }
    r.overall = detail::aggregate(all, cfg.eval.recall_thresholds);
    for (const auto& [t, v] : per_task) r.by_task[t] = detail::aggregate(v, cfg.eval.recall_thresholds);
    return r;
}

inline json headline(const Aggregates& a) {
    using detail::one_decimal;
    json h{{"J", one_decimal(100.0 * a.mean_j)}, {"F", one_decimal(100.0 * a.mean_f)}, {"J&F", one_decimal(100.0 * a.mean_jf)},
           {"SAvg", one_decimal(a.savg)}};
    if (a.mean_tiou) h["mIoU"] = one_decimal(100.0 * *a.mean_tiou);
    for (const auto& [k, v] : a.r_at) h["R@" + detail::threshold_key(k)] = one_decimal(100.0 * v);
    return h;
}

inline json to_json(const EvalReport& r) {
    json per = json::array();
    for (const auto& s : r.per_sample) {
        per.push_back({{"sample_id", s.sample_id},
                       {"task", task_name(s.task)},
                       {"j", s.j},
                       {"f", s.f},
                       {"jf", s.jf},
                       {"tiou", s.tiou ? json(*s.tiou) : json(nullptr)},
                       {"semantic_scores", s.semantic_scores},
                       {"flags", s.flags}});
    }
    json by_task = json::object();
    for (const auto& [t, a] : r.by_task) by_task[t] = detail::to_json(a);
    return json{{"schema_version", kReportSchemaVersion},
                {"per_sample", per},
                {"aggregates", detail::to_json(r.overall)},
                {"by_task", by_task},
                {"missing", r.missing},
                {"malformed_intervals", r.malformed_intervals},
                {"headline", headline(r.overall)},
                {"config", to_json(r.config)}};
}

//! Fixed-format summary table: one row per task plus the overall row.
inline void print_headline(std::ostream& out, const EvalReport& r) {
    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (!v) return std::string("     -");
        std::snprintf(buf, sizeof buf, "%6.1f", *v);
        return std::string(buf);
    };
    auto row = [&](const std::string& name, const Aggregates& a) {
        const double r3 = a.r_at.count(0.3) ? a.r_at.at(0.3) : -1, r5 = a.r_at.count(0.5) ? a.r_at.at(0.5) : -1,
                     r7 = a.r_at.count(0.7) ? a.r_at.at(0.7) : -1;
        auto pct = [](double v) { return v < 0 ? std::optional<double>{} : std::optional<double>{100.0 * v}; };
        char buf[32];
        std::snprintf(buf, sizeof buf, "%-8s %4zu", name.c_str(), a.samples);
        out << buf << ' ' << cell(100.0 * a.mean_j) << ' ' << cell(100.0 * a.mean_f) << ' ' << cell(100.0 * a.mean_jf) << ' '
            << cell(a.mean_tiou ? std::optional<double>{100.0 * *a.mean_tiou} : std::nullopt) << ' ' << cell(pct(r3)) << ' '
            << cell(pct(r5)) << ' ' << cell(pct(r7)) << ' ' << cell(a.savg) << '\n';
    };
    out << "task        n      J      F    J&F   mIoU  R@0.3  R@0.5  R@0.7   SAvg\n";
    for (const auto& [t, a] : r.by_task) row(t, a);
    row("all", r.overall);
    out << "missing predictions: " << r.missing << ", malformed intervals: " << r.malformed_intervals << '\n';
}

} // namespace ufv
