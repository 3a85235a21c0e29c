#pragma once
//! \file
//! Synthetic corpora for the toy model, conversion of benchmark samples into
//! teacher-forced examples, greedy prediction and full-batch training.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ufv/bench_builder.hpp"
#include "ufv/error.hpp"
#include "ufv/rng.hpp"
#include "ufv/temporal_codec.hpp"
#include "ufv/text_codec.hpp"
#include "ufv/token_stream.hpp"
#include "ufv/toy_model.hpp"

namespace ufv::toy {

// --- synthetic source records -----------------------------------------------------

namespace detail {

inline constexpr std::array<const char*, 6> kColors{"red", "blue", "green", "yellow", "white", "purple"};
inline constexpr std::array<const char*, 2> kShapes{"square", "disk"};
inline constexpr std::array<const char*, 4> kMotions{"slides right", "slides left", "drifts down", "drifts up"};

inline double round_to(double v, double step) { return std::round(v / step) * step; }

} // namespace detail

//! Records with one object (a square or disk) moving across a G x G grid,
//! visible on a contiguous run of at least two of the K sampled frames. Frame
//! k is sampled at (k + 0.4) / K of the duration; the visible run is the
//! record's event interval.
inline std::vector<SourceRecord> synthetic_records(std::uint64_t seed, int count, int grid, int frames) {
    if (count < 1 || grid < 4 || frames < 1) throw DomainError("synthetic corpus: count >= 1, grid >= 4, frames >= 1");
    std::vector<SourceRecord> out;
    SplitMix64 root(seed);
    // colour/shape pairs are dealt without repeats until the deck runs out
    std::vector<std::size_t> deck(detail::kColors.size() * detail::kShapes.size());
    std::iota(deck.begin(), deck.end(), std::size_t{0});
    for (std::size_t i = deck.size(); i > 1; --i) std::swap(deck[i - 1], deck[root.below(i)]);
    const int max_size = std::max(1, grid / 2 - 2);
    for (int r = 0; r < count; ++r) {
        SplitMix64 rng = root.split();
        SourceRecord rec;
        char id[32];
        std::snprintf(id, sizeof id, "synth-%03d", r);
        rec.video_id = id;
        rec.duration_seconds = detail::round_to(rng.uniform(20.0, 120.0), 0.5);
        for (int k = 0; k < frames; ++k) {
            rec.frames.push_back(AnnotatedFrame{(k + 0.4) * rec.duration_seconds / frames, {}});
        }
        const std::size_t card = deck[static_cast<std::size_t>(r) % deck.size()];
        const std::size_t color = card / detail::kShapes.size();
        const std::size_t shape = card % detail::kShapes.size();
        const std::size_t motion = rng.below(detail::kMotions.size());
        const std::string noun = std::string(detail::kColors[color]) + " " + detail::kShapes[shape];
        rec.objects["1"] = ObjectInfo{noun, "The " + noun + " " + detail::kMotions[motion] + " across the frame."};

        const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, frames - 1))));
        const int last = std::min(frames - 1, first + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, frames - first - 1)))));
        const int size = std::min(max_size, 3 + static_cast<int>(rng.below(3)));
        const int cx0 = size + static_cast<int>(rng.below(static_cast<std::uint64_t>(grid - 2 * size)));
        const int cy0 = size + static_cast<int>(rng.below(static_cast<std::uint64_t>(grid - 2 * size)));
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = first; k <= last; ++k) {
            const int cx = std::clamp(cx0 + dx[motion] * (k - first), size, grid - size - 1);
            const int cy = std::clamp(cy0 + dy[motion] * (k - first), size, grid - size - 1);
            BinaryMask m(grid, grid);
            for (int y = 0; y < grid; ++y) {
                for (int x = 0; x < grid; ++x) {
                    const int ux = x - cx, uy = y - cy;
                    const bool in = shape == 0 ? (std::abs(ux) < size && std::abs(uy) < size)
                                               : (ux * ux + uy * uy < size * size);
                    if (in) m.set(x, y);
                }
            }
            rec.frames[static_cast<std::size_t>(k)].masks.emplace("1", std::move(m));
        }
        rec.event_interval = TimeInterval(rec.frames[static_cast<std::size_t>(first)].timestamp_seconds,
                                          rec.frames[static_cast<std::size_t>(last)].timestamp_seconds);
        out.push_back(std::move(rec));
    }
    return out;
}

// --- sample -> example ---------------------------------------------------------------

inline WordVocab vocab_for(const std::vector<BenchSample>& samples, int text_vocab) {
    std::vector<std::string> texts;
    for (const auto& s : samples) {
        texts.push_back(s.question);
        texts.push_back(s.reference_answer);
    }
    return WordVocab::from_texts(texts, text_vocab);
}

//! Pixel grids of a sample: 1 wherever any known mask (label or visual
//! prompt) of any object covers the pixel, else 0.
inline std::vector<FrameGrid> frames_from_sample(const BenchSample& s, int grid) {
    const std::size_t cells = static_cast<std::size_t>(grid) * grid;
    std::vector<FrameGrid> frames(s.frame_timestamps.size(), FrameGrid(cells, 0.0));
    auto paint = [&](std::size_t fi, const BinaryMask& m) {
        if (fi >= frames.size()) throw ShapeError(s.id + ": mask for frame " + std::to_string(fi) + " out of range");
        if (m.width() != grid || m.height() != grid) throw ShapeError(s.id + ": mask is not " + std::to_string(grid) + "x" + std::to_string(grid));
        for (std::size_t i = 0; i < cells; ++i) {
            if (m[i]) frames[fi][i] = 1.0;
        }
    };
    for (const auto& [_, labels] : s.label_masks) {
        for (const auto& lf : labels) paint(lf.frame_index, lf.mask);
    }
    for (const auto& vp : s.visual_prompts) paint(vp.frame_index, vp.mask);
    return frames;
}

namespace detail {

//! Converts rendered text into SequenceParts pieces, appending to `parts`.
//! Region markers become Ref slots, [SEG] markers Seg slots, consecutive
//! temporal markers a pair.
inline void append_rendered(SequenceParts& parts, const std::string& text, const WordVocab& vocab, int& next_ref,
                            int& next_seg) {
    const auto pieces = split_rendered(text);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        const TextPiece& pc = pieces[i];
        const std::size_t pos = parts.text_ids.size();
        switch (pc.kind) {
        case TextPiece::Kind::Word: parts.text_ids.push_back(vocab.id(pc.word)); break;
        case TextPiece::Kind::Region: parts.ref_slots.push_back({next_ref++, pos}); break;
        case TextPiece::Kind::Seg: parts.seg_slots.push_back({next_seg++, pos}); break;
        case TextPiece::Kind::Temp:
            if (i + 1 < pieces.size() && pieces[i + 1].kind == TextPiece::Kind::Temp) {
                parts.temp_pairs.push_back({{TemporalToken{pc.temp_index}, TemporalToken{pieces[i + 1].temp_index}}, pos});
                ++i;
            } else {
                parts.temp_points.push_back({TemporalToken{pc.temp_index}, pos});
            }
            break;
        }
    }
}

inline std::size_t special_count(const SequenceParts& p) {
    return p.ref_slots.size() + p.seg_slots.size() + 2 * p.temp_pairs.size() + p.temp_points.size();
}

//! Masked mean of frame features over each image quadrant (TL, TR, BL, BR).
inline std::array<RowVec, 4> quadrant_pool(const ModelParams& p, const FrameGrid& frame, const BinaryMask& mask) {
    const Mat f = frame_features(p, frame);
    std::array<RowVec, 4> out;
    std::array<int, 4> n{};
    for (auto& v : out) v = RowVec::Zero(p.hidden);
    const int half = p.grid / 2;
    for (int y = 0; y < p.grid; ++y) {
        for (int x = 0; x < p.grid; ++x) {
            if (!mask.at(x, y)) continue;
            const int q = (y >= half ? 2 : 0) + (x >= half ? 1 : 0);
            out[static_cast<std::size_t>(q)] += f.row(static_cast<Eigen::Index>(y) * p.grid + x);
            ++n[static_cast<std::size_t>(q)];
        }
    }
    for (std::size_t q = 0; q < 4; ++q) {
        if (n[q]) out[q] /= static_cast<double>(n[q]);
    }
    return out;
}

} // namespace detail

inline constexpr double kVideoGain = 4.0;

//! One feature row per frame: the max-pooled response of its cells relative
//! to a blank frame, modulated by the frame's position code so the row says
//! which frame the content came from.
inline std::vector<RowVec> video_token_features(const ModelParams& p, const std::vector<FrameGrid>& frames) {
    const Mat codes = positional_encoding(static_cast<Eigen::Index>(frames.size()), p.hidden);
    std::vector<RowVec> out;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Mat response = frame_features(p, frames[k]).rowwise() - p.feat_bias;
        const RowVec pooled = response.colwise().maxCoeff().cwiseMax(0.0);
        out.push_back(kVideoGain * pooled.cwiseProduct(codes.row(static_cast<Eigen::Index>(k))));
    }
    return out;
}

//! Prompt (video patches + question) and, when `with_answer`, the reference
//! answer appended, with Ref placeholders injected as 4 quadrant tokens per
//! object.
inline ToyExample make_example(const BenchSample& s, const WordVocab& vocab, const ModelParams& p,
                               bool with_answer = true) {
    const std::vector<FrameGrid> frames = frames_from_sample(s, p.grid);
    const int n_frames = static_cast<int>(frames.size());

    SequenceParts parts;
    parts.video_patch_count = n_frames;
    parts.timeline = s.timeline();
    parts.text_vocab = p.layout.text_vocab;
    int next_ref = 0, next_seg = 0;
    detail::append_rendered(parts, s.question, vocab, next_ref, next_seg);
    const std::size_t prompt_len = static_cast<std::size_t>(n_frames) + parts.text_ids.size() + detail::special_count(parts);
    if (with_answer) detail::append_rendered(parts, s.reference_answer, vocab, next_ref, next_seg);
    const TokenSequence raw = build_sequence(parts);

    // object tokens: slot * 4 + quadrant
    std::map<int, std::vector<int>> object_tokens;
    std::vector<RowVec> object_features;
    for (int slot = 0; slot < next_ref; ++slot) {
        std::array<RowVec, 4> pooled;
        for (auto& v : pooled) v = RowVec::Zero(p.hidden);
        if (static_cast<std::size_t>(slot) < s.objects.size()) {
            const std::string& oid = s.objects[static_cast<std::size_t>(slot)];
            for (const auto& vp : s.visual_prompts) {
                if (vp.object_id == oid) pooled = detail::quadrant_pool(p, frames[vp.frame_index], vp.mask);
            }
        }
        for (int q = 0; q < 4; ++q) {
            object_tokens[slot].push_back(static_cast<int>(object_features.size()));
            object_features.push_back(pooled[static_cast<std::size_t>(q)]);
        }
    }

    ToyExample ex;
    ex.sequence = inject_ref_tokens(raw, object_tokens);
    ex.prompt_length = prompt_len + static_cast<std::size_t>(next_ref) * 3;
    ex.frames = frames;
    const auto n = static_cast<Eigen::Index>(ex.sequence.size());
    ex.extra = Mat::Zero(n, p.hidden);
    std::vector<RowVec> frame_pooled = video_token_features(p, frames);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Token& t = ex.sequence.tokens[static_cast<std::size_t>(i)];
        if (const auto* v = std::get_if<tok::VideoPatch>(&t)) ex.extra.row(i) = frame_pooled[static_cast<std::size_t>(v->ordinal)];
        if (const auto* o = std::get_if<tok::Object>(&t)) ex.extra.row(i) = object_features[static_cast<std::size_t>(o->embedding_index)];
    }

    if (with_answer) {
        for (int slot = 0; slot < next_seg; ++slot) {
            std::vector<BinaryMask> per_frame(frames.size(), BinaryMask(p.grid, p.grid));
            if (static_cast<std::size_t>(slot) < s.objects.size()) {
                const std::string& oid = s.objects[static_cast<std::size_t>(slot)];
                if (auto it = s.label_masks.find(oid); it != s.label_masks.end()) {
                    for (const auto& lf : it->second) per_frame[lf.frame_index] = lf.mask;
                }
                for (const auto& vp : s.visual_prompts) {
                    if (vp.object_id == oid) per_frame[vp.frame_index] = vp.mask;
                }
            }
            ex.target_masks.push_back(std::move(per_frame));
        }
        if (s.label_interval) ex.target_interval = encode_interval(*s.label_interval, s.timeline());
    }
    return ex;
}

//! The prompt part of a teacher-forced example.
inline ToyExample prompt_of(const ToyExample& ex) {
    ToyExample pr;
    pr.sequence.timeline = ex.sequence.timeline;
    pr.sequence.tokens.assign(ex.sequence.tokens.begin(),
                              ex.sequence.tokens.begin() + static_cast<std::ptrdiff_t>(ex.prompt_length));
    pr.prompt_length = ex.prompt_length;
    pr.extra = ex.extra.topRows(static_cast<Eigen::Index>(ex.prompt_length));
    pr.frames = ex.frames;
    return pr;
}

//! Model ids of the answer part (what greedy decoding should reproduce),
//! terminated by end-of-sequence.
inline std::vector<int> answer_ids(const ModelParams& p, const ToyExample& ex) {
    std::vector<int> ids;
    for (std::size_t i = ex.prompt_length; i < ex.sequence.size(); ++i) ids.push_back(p.layout.model_id(ex.sequence.tokens[i]));
    ids.push_back(p.layout.eos_id());
    return ids;
}

// --- prediction ------------------------------------------------------------------------

//! Index of the first maximal entry, so ties resolve to the lowest id.
inline int argmax_lowest(const Eigen::Ref<const RowVec>& row) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < row.size(); ++i) {
        if (row[i] > row[best]) best = i;
    }
    return static_cast<int>(best);
}

//! Most likely temporal token of a logit row (temporal slice only).
inline TemporalToken predict_time_token(const ModelParams& p, const Eigen::Ref<const RowVec>& logits_row) {
    return TemporalToken{argmax_lowest(logits_row.segment(p.layout.temporal_begin(), p.layout.temporal_count()))};
}

struct Prediction {
    std::vector<int> ids;  // emitted model ids, including end-of-sequence if reached
    std::vector<Token> tokens;
    std::optional<TokenPair> temporal_pair;
    std::optional<TimeInterval> interval;
    bool malformed_interval = false;
    std::vector<std::vector<BinaryMask>> masks;  // [seg object][frame]
};

inline Token token_for_id(const ModelParams& p, int id, int seg_count) {
    const VocabLayout& l = p.layout;
    if (id < l.text_vocab) return tok::Text{id};
    if (l.is_temporal(id)) return tok::Temp{id - l.temporal_begin()};
    if (id == l.seg_id()) return tok::Seg{seg_count};
    if (id == l.vid_id()) return tok::VideoPatch{0};
    return tok::Ref{0};
}

//! Greedy decoding from the prompt of `prompt` (answer tokens, if any, are
//! ignored). Temporal pairs are decoded on the sample's timeline; masks are
//! sigmoid(logit) > 0.5.
inline Prediction predict(const ModelParams& p, const ToyExample& prompt, int max_tokens) {
    ToyExample cur = prompt_of(prompt);
    Prediction pred;
    int seg_count = 0;
    for (int step = 0; step < max_tokens; ++step) {
        const SampleOutput out = forward(p, cur);
        const int id = argmax_lowest(out.logits.row(out.logits.rows() - 1));
        pred.ids.push_back(id);
        if (id == p.layout.eos_id()) break;
        Token t = token_for_id(p, id, seg_count);
        if (is<tok::Seg>(t)) ++seg_count;
        pred.tokens.push_back(t);
        cur.sequence.tokens.push_back(t);
        cur.extra.conservativeResize(cur.extra.rows() + 1, Eigen::NoChange);
        cur.extra.row(cur.extra.rows() - 1).setZero();
    }

    std::vector<int> temps;
    for (const Token& t : pred.tokens) {
        if (const auto* x = std::get_if<tok::Temp>(&t)) temps.push_back(x->index);
    }
    if (temps.size() >= 2) {
        pred.temporal_pair = TokenPair{TemporalToken{temps[0]}, TemporalToken{temps[1]}};
        if (prompt.sequence.timeline) {
            try {
                pred.interval = decode_interval(*pred.temporal_pair, *prompt.sequence.timeline);
            } catch (const MalformedIntervalError&) {
                pred.malformed_interval = true;
            }
        }
    }

    if (seg_count > 0) {
        const SampleOutput out = forward(p, cur);
        for (const auto& per_frame : out.mask_logits) {
            std::vector<BinaryMask> masks;
            for (const auto& ml : per_frame) {
                BinaryMask m(ml.width, ml.height);
                for (std::size_t i = 0; i < ml.size(); ++i) m.set_flat(i, sigmoid(ml.values[i]) > 0.5);
                masks.push_back(std::move(m));
            }
            pred.masks.push_back(std::move(masks));
        }
    }
    return pred;
}

//! Renders emitted tokens back to text: words joined by spaces, temporal
//! tokens as `<Temp-k>`, segmentation tokens as `[SEG]`.
inline std::string detokenize(const std::vector<Token>& tokens, const WordVocab& vocab) {
    std::string out;
    for (const Token& t : tokens) {
        std::string piece;
        if (const auto* x = std::get_if<tok::Text>(&t)) piece = vocab.word(x->vocab_id);
        else if (const auto* x = std::get_if<tok::Temp>(&t)) piece = to_string(TemporalToken{x->index});
        else if (is<tok::Seg>(t)) piece = "[SEG]";
        else if (is<tok::VideoPatch>(t)) piece = "<vid>";
        else piece = "<region>";
        if (!out.empty()) out += ' ';
        out += piece;
    }
    return out;
}

// --- training ---------------------------------------------------------------------------

struct CurveRow {
    int step = 0;
    double total = 0.0;
    double text = 0.0;
    double mask = 0.0;

    bool operator==(const CurveRow&) const = default;
};

struct TrainResult {
    ModelParams params;
    std::vector<CurveRow> curve;
};

class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& what, std::vector<CurveRow> curve)
        : NumericError(what), curve_(std::move(curve)) {}
    const std::vector<CurveRow>& curve() const noexcept { return curve_; }

private:
    std::vector<CurveRow> curve_;
};

inline constexpr double kDivergenceLoss = 1e6;

//! Full-batch gradient descent. The curve has steps + 1 rows: the loss before
//! each update and after the last one.
inline TrainResult train(ModelParams params, const std::vector<ToyExample>& batch, const LossWeights& w, double lr,
                         int steps, const std::function<void(const CurveRow&)>& on_step = {}) {
    if (!(lr > 0.0)) throw DomainError("train: learning rate must be positive");
    TrainResult res;
    for (int step = 0; step <= steps; ++step) {
        LossAndGrad lg = loss_and_grad(params, batch, w);
        const CurveRow row{step, lg.loss.total, lg.loss.text, lg.loss.mask};
        res.curve.push_back(row);
        if (on_step) on_step(row);
        if (!std::isfinite(row.total) || row.total > kDivergenceLoss) {
            throw TrainingDiverged("training diverged at step " + std::to_string(step) + " (loss " +
                                       std::to_string(row.total) + ")",
                                   res.curve);
        }
        if (step == steps) break;
        try {
            params = sgd_step(params, lg.grad, lr);
        } catch (const NumericError& e) {
            throw TrainingDiverged(e.what(), res.curve);
        }
    }
    res.params = std::move(params);
    return res;
}

//! The standard synthetic task: `cfg.samples` one-object records, each asked
//! as a short grounding question whose answer carries the time span, the
//! description and a mask:
//!
//!     when is the red disk ?
//!     <Temp-10><Temp-60> The red disk slides right across the frame. [SEG]
//!
//! Labels, interval and timeline come from the PixTRQA builder; only the
//! wording is shortened.
struct SyntheticTask {
    std::vector<SourceRecord> records;
    std::vector<BenchSample> samples;
    WordVocab vocab;
};

inline BenchSample compact_sample(const SourceRecord& r, const BuilderConfig& bc) {
    BuildOutcome o = build_pixtrqa(r, bc);
    if (auto* rej = std::get_if<Rejection>(&o)) throw ConstructionError("synthetic record rejected: " + rej->reason);
    BenchSample s = std::get<BenchSample>(std::move(o));
    const ObjectInfo& obj = r.objects.at(s.objects.front());
    const TokenPair tp = encode_interval(*s.label_interval, s.timeline());
    s.question = "when is the " + obj.short_desc + " ?";
    s.reference_answer = to_string(tp.first) + to_string(tp.second) + " " + obj.long_desc + " [SEG]";
    return s;
}

inline SyntheticTask standard_task(const ToyConfig& cfg, std::uint64_t seed) {
    SyntheticTask task;
    task.records = synthetic_records(seed, cfg.samples, cfg.grid, cfg.frames);
    BuilderConfig bc;
    bc.seed = seed;
    bc.n_bins = cfg.n_bins;
    for (const auto& r : task.records) task.samples.push_back(compact_sample(r, bc));
    task.vocab = vocab_for(task.samples, cfg.text_vocab);
    return task;
}

inline std::vector<ToyExample> make_batch(const std::vector<BenchSample>& samples, const WordVocab& vocab,
                                          const ModelParams& p) {
    std::vector<ToyExample> batch;
    for (const auto& s : samples) batch.push_back(make_example(s, vocab, p));
    return batch;
}

} // namespace ufv::toy
