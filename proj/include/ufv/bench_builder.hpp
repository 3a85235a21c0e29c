#pragma once
//! \file
//! Benchmark construction for the three cooperative tasks:
//!
//!  - PixRQA: referring QA; one visual-prompt mask per object, every other
//!    annotated frame becomes a label mask.
//!  - PixHQA: QA about a time point or period named by temporal tokens in the
//!    question; every annotated frame is a label.
//!  - PixTRQA: QA that must also retrieve the time segment; only objects whose
//!    annotations form one continuous run are kept.
//!
//! Builders are pure functions of (record, config); randomness comes from a
//! SplitMix64 stream derived from the builder seed and the video id.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ufv/binary_mask.hpp"
#include "ufv/error.hpp"
#include "ufv/json_io.hpp"
#include "ufv/rng.hpp"
#include "ufv/temporal_codec.hpp"

namespace ufv {

// --- source records -----------------------------------------------------------

struct AnnotatedFrame {
    double timestamp_seconds = 0.0;
    //! Sparse: an absent object id means the object is unannotated here.
    std::map<std::string, BinaryMask> masks;

    bool operator==(const AnnotatedFrame&) const = default;
};

struct ObjectInfo {
    std::string short_desc;
    std::string long_desc;

    bool operator==(const ObjectInfo&) const = default;
};

struct SourceRecord {
    std::string video_id;
    double duration_seconds = 0.0;
    std::vector<AnnotatedFrame> frames;
    //! Ordered by id; this order numbers the objects object_1..object_n.
    std::map<std::string, ObjectInfo> objects;
    std::optional<TimeInterval> event_interval;

    bool operator==(const SourceRecord&) const = default;

    void validate() const {
        if (video_id.empty()) throw ParseError("record without video_id");
        if (!(duration_seconds > 0.0)) throw ParseError(video_id + ": duration must be positive");
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const double t = frames[i].timestamp_seconds;
            if (t < 0.0 || t > duration_seconds) {
                throw ParseError(video_id + ": frame " + std::to_string(i) + " timestamp outside [0, duration]");
            }
            if (i > 0 && !(t > frames[i - 1].timestamp_seconds)) {
                throw ParseError(video_id + ": frame timestamps must be strictly increasing");
            }
            for (const auto& [id, _] : frames[i].masks) {
                if (!objects.count(id)) throw ParseError(video_id + ": frame references unknown object '" + id + "'");
            }
        }
        if (event_interval && event_interval->end_seconds > duration_seconds) {
            throw ParseError(video_id + ": event interval past the end of the video");
        }
    }

    //! Indices into `frames` where the object carries a mask.
    std::vector<std::size_t> annotated_frames(const std::string& object_id) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (frames[i].masks.count(object_id)) out.push_back(i);
        }
        return out;
    }

    TimelineSpec timeline(int n_bins) const { return TimelineSpec(duration_seconds, n_bins); }
};

inline json to_json(const SourceRecord& r) {
    json frames = json::array();
    for (const auto& f : r.frames) {
        json masks = json::object();
        for (const auto& [id, m] : f.masks) masks[id] = mask_to_json(m);
        frames.push_back({{"timestamp_seconds", f.timestamp_seconds}, {"masks", masks}});
    }
    json objects = json::object();
    for (const auto& [id, o] : r.objects) objects[id] = {{"short_desc", o.short_desc}, {"long_desc", o.long_desc}};
    json j{{"video_id", r.video_id}, {"duration_seconds", r.duration_seconds}, {"frames", frames}, {"objects", objects}};
    if (r.event_interval) j["event_interval"] = interval_to_json(*r.event_interval);
    return j;
}

//! Frames may carry `timestamp_seconds`, or the record may give `fps`, in
//! which case frame i sits at i / fps.
inline SourceRecord source_record_from_json(const json& j) {
    SourceRecord r;
    try {
        r.video_id = j.at("video_id").get<std::string>();
        r.duration_seconds = j.at("duration_seconds").get<double>();
        for (const auto& [id, o] : j.at("objects").items()) {
            r.objects[id] = ObjectInfo{o.at("short_desc").get<std::string>(), o.value("long_desc", std::string{})};
        }
        // 0 means the record has no fps
        const double fps = j.contains("fps") ? j.at("fps").get<double>() : 0.0;
        std::size_t i = 0;
        for (const auto& f : j.at("frames")) {
            AnnotatedFrame af;
            if (f.contains("timestamp_seconds")) af.timestamp_seconds = f.at("timestamp_seconds").get<double>();
            else if (fps > 0.0) af.timestamp_seconds = static_cast<double>(i) / fps;
            else throw ParseError("frame " + std::to_string(i) + " has no timestamp and the record has no fps");
            for (const auto& [id, m] : f.at("masks").items()) {
                try {
                    af.masks.emplace(id, mask_from_json(m));
                } catch (const ParseError& e) {
                    throw ParseError("frame " + std::to_string(i) + " object '" + id + "': " + e.what());
                }
            }
            r.frames.push_back(std::move(af));
            ++i;
        }
        if (j.contains("event_interval") && !j.at("event_interval").is_null()) {
            r.event_interval = interval_from_json(j.at("event_interval"));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("source record: ") + e.what());
    } catch (const DomainError& e) {
        throw ParseError(std::string("source record: ") + e.what());
    }
    r.validate();
    return r;
}

//! Reads every `*.json` file in `dir`, sorted by file name.
inline std::vector<SourceRecord> load_source_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("source directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SourceRecord> out;
    for (const auto& p : files) {
        std::ifstream in(p);
        if (!in) throw IoError("cannot open " + p.string());
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ParseError(p.filename().string() + ": " + e.what());
        }
        try {
            out.push_back(source_record_from_json(j));
        } catch (const ParseError& e) {
            throw ParseError(p.filename().string() + ": " + e.what());
        }
    }
    return out;
}

// --- samples ----------------------------------------------------------------------

enum class Task { PixRQA, PixHQA, PixTRQA };

inline std::string task_name(Task t) {
    switch (t) {
    case Task::PixRQA: return "pixrqa";
    case Task::PixHQA: return "pixhqa";
    case Task::PixTRQA: return "pixtrqa";
    }
    return "?";
}

inline Task task_from_name(const std::string& s) {
    if (s == "pixrqa") return Task::PixRQA;
    if (s == "pixhqa") return Task::PixHQA;
    if (s == "pixtrqa") return Task::PixTRQA;
    throw ParseError("unknown task '" + s + "'");
}

enum class TemporalMode { Point, Period };

struct VisualPrompt {
    std::string object_id;
    std::size_t frame_index = 0;
    BinaryMask mask;

    bool operator==(const VisualPrompt&) const = default;
};

struct LabelFrame {
    std::size_t frame_index = 0;
    BinaryMask mask;

    bool operator==(const LabelFrame&) const = default;
};

struct BenchSample {
    std::string id;
    Task task = Task::PixRQA;
    std::string video_id;
    std::string question;
    std::string reference_answer;
    double duration_seconds = 0.0;
    int n_bins = kDefaultTemporalBins;
    std::vector<double> frame_timestamps;
    //! object ids in object_1..object_n order
    std::vector<std::string> objects;
    std::vector<VisualPrompt> visual_prompts;
    std::map<std::string, std::vector<LabelFrame>> label_masks;
    std::optional<TimeInterval> label_interval;
    //! Temporal token indices spliced into the question (PixHQA: 1 or 2).
    std::vector<int> temporal_tokens_in_question;
    std::optional<TemporalMode> temporal_mode;
    //! PixHQA point mode: requested time before snapping to a frame.
    std::optional<double> query_time_seconds;

    TimelineSpec timeline() const { return TimelineSpec(duration_seconds, n_bins); }
    bool operator==(const BenchSample&) const = default;
};

struct Rejection {
    std::string video_id;
    Task task = Task::PixRQA;
    std::string reason;

    bool operator==(const Rejection&) const = default;
};

using BuildOutcome = std::variant<BenchSample, Rejection>;

struct BuilderConfig {
    std::uint64_t seed = 0;
    int n_bins = kDefaultTemporalBins;
    //! Fraction of an object's annotated frames eligible as the PixRQA prompt.
    double pixrqa_prompt_window = 0.25;
    //! Replaces the PixRQA question clause "what is a likely future event?".
    std::optional<std::string> question_override;
};

// --- templates ----------------------------------------------------------------------

inline constexpr const char* kPixrqaDefaultAsk = "what is a likely future event?";

using TemporalRef = std::variant<std::monostate, TemporalToken, TokenPair>;

inline std::string temporal_text(const TemporalRef& t) {
    if (const auto* p = std::get_if<TemporalToken>(&t)) return to_string(*p);
    if (const auto* p = std::get_if<TokenPair>(&t)) return "{" + to_string(p->first) + to_string(p->second) + "}";
    return {};
}

//! Question text for `task` with objects numbered object_1..object_n in the
//! given order.
inline std::string render_prompt(Task task, const std::vector<std::string>& short_descs,
                                 const TemporalRef& temporal = {}, const std::optional<std::string>& ask = {}) {
    if (short_descs.empty()) throw ConstructionError("render_prompt: at least one object is required");
    const bool region = task != Task::PixHQA;
    std::string objs;
    for (std::size_t i = 0; i < short_descs.size(); ++i) {
        if (i) objs += ", ";
        objs += "object_" + std::to_string(i + 1) + (region ? " <region> " : " ") + short_descs[i];
    }
    switch (task) {
    case Task::PixRQA:
        return "If " + objs + ", " + ask.value_or(kPixrqaDefaultAsk) + " And please generate the mask in every frames.";
    case Task::PixHQA:
        if (std::holds_alternative<std::monostate>(temporal)) {
            throw ConstructionError("render_prompt: PixHQA needs a temporal token or pair");
        }
        return "What " + objs + " are doing in the " + temporal_text(temporal) + ", and generate the masks? ";
    case Task::PixTRQA:
        return "What " + objs + " are doing? And please generate the time period and object mask.";
    }
    return {};
}

//! Long description without surrounding whitespace and trailing periods.
inline std::string normalize_description(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    while (!s.empty() && (s.back() == '.' || std::isspace(static_cast<unsigned char>(s.back())))) s.pop_back();
    return s;
}

inline std::string seg_tail(std::size_t n_objects) {
    std::string out = "The segmentation mask: ";
    for (std::size_t i = 0; i < n_objects; ++i) {
        if (i) out += ", ";
        out += "object_" + std::to_string(i + 1) + "[SEG]";
    }
    return out + ". ";
}

inline std::string render_answer(const std::string& long_desc, std::size_t n_objects,
                                 const std::optional<TokenPair>& time = {}) {
    std::string out;
    if (time) out += "The Time is " + temporal_text(*time) + ". ";
    return out + normalize_description(long_desc) + ". " + seg_tail(n_objects);
}

// --- builders -----------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> object_ids(const SourceRecord& r) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : r.objects) ids.push_back(id);
    return ids;
}

inline std::vector<std::string> short_descs(const SourceRecord& r) {
    std::vector<std::string> out;
    for (const auto& [_, o] : r.objects) out.push_back(o.short_desc);
    return out;
}

inline std::string combined_long_desc(const SourceRecord& r) {
    std::string out;
    for (const auto& [_, o] : r.objects) {
        const std::string d = normalize_description(o.long_desc);
        if (d.empty()) continue;
        if (!out.empty()) out += ". ";
        out += d;
    }
    return out;
}

inline BenchSample base_sample(const SourceRecord& r, Task task, const BuilderConfig& cfg) {
    BenchSample s;
    s.task = task;
    s.id = r.video_id + ":" + task_name(task);
    s.video_id = r.video_id;
    s.duration_seconds = r.duration_seconds;
    s.n_bins = cfg.n_bins;
    for (const auto& f : r.frames) s.frame_timestamps.push_back(f.timestamp_seconds);
    s.objects = object_ids(r);
    return s;
}

inline void add_labels(BenchSample& s, const SourceRecord& r, const std::string& id,
                       const std::vector<std::size_t>& frames, std::optional<std::size_t> skip = {}) {
    auto& labels = s.label_masks[id];
    for (std::size_t fi : frames) {
        if (skip && *skip == fi) continue;
        labels.push_back(LabelFrame{fi, r.frames[fi].masks.at(id)});
    }
}

} // namespace detail

inline BuildOutcome build_pixrqa(const SourceRecord& r, const BuilderConfig& cfg) {
    if (r.objects.empty()) return Rejection{r.video_id, Task::PixRQA, "record has no objects"};
    BenchSample s = detail::base_sample(r, Task::PixRQA, cfg);
    SplitMix64 rng = stream_for(cfg.seed, r.video_id + "/pixrqa");
    for (const std::string& id : s.objects) {
        const auto frames = r.annotated_frames(id);
        if (frames.size() < 2) {
            return Rejection{r.video_id, Task::PixRQA,
                             "object '" + id + "' has " + std::to_string(frames.size()) + " annotated frame(s), need 2"};
        }
        auto window = static_cast<std::size_t>(std::ceil(cfg.pixrqa_prompt_window * static_cast<double>(frames.size())));
        window = std::clamp<std::size_t>(window, 1, frames.size());
        const std::size_t prompt = frames[rng.below(window)];
        s.visual_prompts.push_back(VisualPrompt{id, prompt, r.frames[prompt].masks.at(id)});
        detail::add_labels(s, r, id, frames, prompt);
    }
    s.question = render_prompt(Task::PixRQA, detail::short_descs(r), {}, cfg.question_override);
    s.reference_answer = render_answer(detail::combined_long_desc(r), s.objects.size());
    return s;
}

//! Point mode asks about `query_time` (default: event midpoint, else the
//! middle annotated frame), snapped to the nearest annotated frame.
inline BuildOutcome build_pixhqa(const SourceRecord& r, TemporalMode mode, const BuilderConfig& cfg,
                                 std::optional<double> query_time = {}) {
    if (r.objects.empty()) return Rejection{r.video_id, Task::PixHQA, "record has no objects"};
    BenchSample s = detail::base_sample(r, Task::PixHQA, cfg);
    s.temporal_mode = mode;
    const TimelineSpec tl = r.timeline(cfg.n_bins);
    TemporalRef temporal;
    std::vector<std::size_t> annotated;
    for (std::size_t i = 0; i < r.frames.size(); ++i) {
        if (!r.frames[i].masks.empty()) annotated.push_back(i);
    }
    if (mode == TemporalMode::Period) {
        if (!r.event_interval) throw ConstructionError(r.video_id + ": PixHQA period mode needs an event interval");
        const TokenPair pair = encode_interval(*r.event_interval, tl);
        temporal = pair;
        s.label_interval = r.event_interval;
        s.temporal_tokens_in_question = {pair.first.index, pair.second.index};
    } else {
        if (annotated.empty()) return Rejection{r.video_id, Task::PixHQA, "no annotated frame to anchor a time point"};
        double t = 0.0;
        if (query_time) t = *query_time;
        else if (r.event_interval) t = (r.event_interval->start_seconds + r.event_interval->end_seconds) / 2.0;
        else t = r.frames[annotated[annotated.size() / 2]].timestamp_seconds;
        std::size_t best = annotated.front();
        for (std::size_t i : annotated) {
            if (std::abs(r.frames[i].timestamp_seconds - t) < std::abs(r.frames[best].timestamp_seconds - t)) best = i;
        }
        const TemporalToken tok = encode_time(r.frames[best].timestamp_seconds, tl);
        temporal = tok;
        s.query_time_seconds = t;
        s.temporal_tokens_in_question = {tok.index};
    }
    s.id += mode == TemporalMode::Point ? ":point" : ":period";
    for (const std::string& id : s.objects) detail::add_labels(s, r, id, r.annotated_frames(id));
    s.question = render_prompt(Task::PixHQA, detail::short_descs(r), temporal);
    s.reference_answer = render_answer(detail::combined_long_desc(r), s.objects.size());
    return s;
}

struct ContinuityVerdict {
    bool accepted = true;
    std::string reason;
};

//! Accepts iff the object's annotated frames form one contiguous run of the
//! record's frame list.
inline ContinuityVerdict continuity_filter(const SourceRecord& r, const std::string& object_id) {
    const auto frames = r.annotated_frames(object_id);
    if (frames.empty()) return {false, "object '" + object_id + "' has no annotated frames"};
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i] != frames[i - 1] + 1) {
            return {false, "gap after index " + std::to_string(frames[i - 1])};
        }
    }
    return {};
}

inline BuildOutcome build_pixtrqa(const SourceRecord& r, const BuilderConfig& cfg) {
    if (r.objects.empty()) return Rejection{r.video_id, Task::PixTRQA, "record has no objects"};
    BenchSample s = detail::base_sample(r, Task::PixTRQA, cfg);
    std::size_t first = r.frames.size(), last = 0;
    std::vector<bool> covered(r.frames.size(), false);
    for (const std::string& id : s.objects) {
        const ContinuityVerdict v = continuity_filter(r, id);
        if (!v.accepted) return Rejection{r.video_id, Task::PixTRQA, "object '" + id + "': " + v.reason};
        const auto frames = r.annotated_frames(id);
        first = std::min(first, frames.front());
        last = std::max(last, frames.back());
        for (std::size_t fi : frames) covered[fi] = true;
        detail::add_labels(s, r, id, frames);
    }
    for (std::size_t fi = first; fi <= last; ++fi) {
        if (!covered[fi]) {
            return Rejection{r.video_id, Task::PixTRQA, "objects leave frame " + std::to_string(fi) + " unannotated"};
        }
    }
    s.label_interval = TimeInterval(r.frames[first].timestamp_seconds, r.frames[last].timestamp_seconds);
    const TokenPair pair = encode_interval(*s.label_interval, r.timeline(cfg.n_bins));
    s.question = render_prompt(Task::PixTRQA, detail::short_descs(r));
    s.reference_answer = render_answer(detail::combined_long_desc(r), s.objects.size(), pair);
    return s;
}

// --- manifest ---------------------------------------------------------------------------

inline constexpr int kManifestSchemaVersion = 1;

struct Manifest {
    int schema_version = kManifestSchemaVersion;
    std::uint64_t builder_seed = 0;
    json provenance = json::object();
    std::vector<BenchSample> samples;

    bool operator==(const Manifest&) const = default;
};

inline json to_json(const BenchSample& s) {
    json prompts = json::array();
    for (const auto& p : s.visual_prompts) {
        prompts.push_back({{"object_id", p.object_id}, {"frame_index", p.frame_index}, {"mask", mask_to_json(p.mask)}});
    }
    json labels = json::object();
    for (const auto& [id, frames] : s.label_masks) {
        json arr = json::array();
        for (const auto& lf : frames) arr.push_back({{"frame_index", lf.frame_index}, {"mask", mask_to_json(lf.mask)}});
        labels[id] = arr;
    }
    json j{{"id", s.id},
           {"task", task_name(s.task)},
           {"video_id", s.video_id},
           {"question", s.question},
           {"reference_answer", s.reference_answer},
           {"duration_seconds", s.duration_seconds},
           {"n_bins", s.n_bins},
           {"frame_timestamps", s.frame_timestamps},
           {"objects", s.objects},
           {"visual_prompts", prompts},
           {"label_masks", labels},
           {"label_interval", s.label_interval ? interval_to_json(*s.label_interval) : json(nullptr)},
           {"temporal_tokens_in_question", s.temporal_tokens_in_question}};
    if (s.temporal_mode) j["temporal_mode"] = *s.temporal_mode == TemporalMode::Point ? "point" : "period";
    if (s.query_time_seconds) j["query_time_seconds"] = *s.query_time_seconds;
    return j;
}

inline BenchSample sample_from_json(const json& j) {
    BenchSample s;
    s.id = j.at("id").get<std::string>();
    s.task = task_from_name(j.at("task").get<std::string>());
    s.video_id = j.at("video_id").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.reference_answer = j.at("reference_answer").get<std::string>();
    s.duration_seconds = j.at("duration_seconds").get<double>();
    s.n_bins = j.at("n_bins").get<int>();
    s.frame_timestamps = j.at("frame_timestamps").get<std::vector<double>>();
    s.objects = j.at("objects").get<std::vector<std::string>>();
    for (const auto& p : j.at("visual_prompts")) {
        const std::string id = p.at("object_id").get<std::string>();
        try {
            s.visual_prompts.push_back(VisualPrompt{id, p.at("frame_index").get<std::size_t>(), mask_from_json(p.at("mask"))});
        } catch (const ParseError& e) {
            throw ParseError("visual prompt of object '" + id + "': " + e.what());
        }
    }
    for (const auto& [id, frames] : j.at("label_masks").items()) {
        auto& dst = s.label_masks[id];
        for (const auto& lf : frames) {
            try {
                dst.push_back(LabelFrame{lf.at("frame_index").get<std::size_t>(), mask_from_json(lf.at("mask"))});
            } catch (const ParseError& e) {
                throw ParseError("label mask of object '" + id + "': " + e.what());
            }
        }
    }
    if (!j.at("label_interval").is_null()) s.label_interval = interval_from_json(j.at("label_interval"));
    s.temporal_tokens_in_question = j.at("temporal_tokens_in_question").get<std::vector<int>>();
    if (j.contains("temporal_mode")) {
        s.temporal_mode = j.at("temporal_mode").get<std::string>() == "point" ? TemporalMode::Point : TemporalMode::Period;
    }
    if (j.contains("query_time_seconds")) s.query_time_seconds = j.at("query_time_seconds").get<double>();
    return s;
}

inline void write_manifest(const Manifest& m, std::ostream& out) {
    json header{{"schema_version", m.schema_version}, {"builder_seed", m.builder_seed}, {"provenance", m.provenance}};
    out << header.dump() << '\n';
    for (const auto& s : m.samples) out << to_json(s).dump() << '\n';
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    write_manifest(m, out);
    if (!out) throw IoError("failed writing manifest " + path.string());
}

inline Manifest read_manifest(std::istream& in) {
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
        }
        if (!have_header) {
            if (!j.is_object() || !j.contains("schema_version")) throw ParseError("missing manifest header", lineno);
            m.schema_version = j.at("schema_version").get<int>();
            if (m.schema_version != kManifestSchemaVersion) {
                throw ParseError("unsupported manifest schema_version " + std::to_string(m.schema_version) +
                                     " (expected " + std::to_string(kManifestSchemaVersion) + ")",
                                 lineno);
            }
            m.builder_seed = j.at("builder_seed").get<std::uint64_t>();
            m.provenance = j.value("provenance", json::object());
            have_header = true;
            continue;
        }
        try {
            m.samples.push_back(sample_from_json(j));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), lineno);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad sample: ") + e.what(), lineno);
        } catch (const DomainError& e) {
            throw ParseError(std::string("bad sample: ") + e.what(), lineno);
        }
    }
    if (!have_header) throw ParseError("empty manifest");
    return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    return read_manifest(in);
}

// --- corpus ----------------------------------------------------------------------------

struct BuildSelection {
    bool pixrqa = true;
    bool pixhqa = true;
    bool pixtrqa = true;
};

//! Builds the selected tasks for every record in input order. PixHQA uses
//! period mode when the record has an event interval, else point mode.
inline Manifest build_manifest(const std::vector<SourceRecord>& records, const BuildSelection& sel,
                               const BuilderConfig& cfg) {
    Manifest m;
    m.builder_seed = cfg.seed;
    json sources = json::array();
    json rejections = json::array();
    std::map<std::string, int> counts{{"pixrqa", 0}, {"pixhqa", 0}, {"pixtrqa", 0}};
    auto take = [&](BuildOutcome&& o) {
        if (auto* s = std::get_if<BenchSample>(&o)) {
            ++counts[task_name(s->task)];
            m.samples.push_back(std::move(*s));
        } else {
            const auto& rj = std::get<Rejection>(o);
            rejections.push_back({{"video_id", rj.video_id}, {"task", task_name(rj.task)}, {"reason", rj.reason}});
        }
    };
    for (const auto& r : records) {
        sources.push_back(r.video_id);
        if (sel.pixrqa) take(build_pixrqa(r, cfg));
        if (sel.pixhqa) take(build_pixhqa(r, r.event_interval ? TemporalMode::Period : TemporalMode::Point, cfg));
        if (sel.pixtrqa) take(build_pixtrqa(r, cfg));
    }
    m.provenance = {{"sources", sources},
                    {"builder_seed", cfg.seed},
                    {"pixrqa_prompt_window", cfg.pixrqa_prompt_window},
                    {"n_bins", cfg.n_bins},
                    {"counts", counts},
                    {"rejected", rejections.size()},
                    {"rejections", rejections}};
    return m;
}

} // namespace ufv
