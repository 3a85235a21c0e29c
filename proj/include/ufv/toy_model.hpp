#pragma once
//! \file
//! Desk-scale differentiable reference model for the unified token path.
//!
//! One pre-norm causal self-attention block with a tanh MLP stands in for the
//! language model; the output head scores the whole vocabulary (text, temporal and
//! special tokens) so time prediction is ordinary next-token prediction. Rows
//! of the final hidden state at `<Seg>` positions are projected and decoded
//! into per-pixel mask logits by an inner product with frozen per-cell frame
//! features:
//!
//!     X  = embed[ids] + extra + pos
//!     A  = softmax(causal(n(X) Wq (n(X) Wk)^T / sqrt(P)))
//!     R  = X + A n(X) Wv Wo
//!     H  = n(R + tanh(n(R) W1) W2)
//!     logits = H Wout
//!     q_o = H[seg_o] Wseg,   mask[o][k] = F_k q_o^T,   F_k = v_k a + 1 b
//!
//! n() is a parameter-free RMS normalization of each row. Row-vector
//! convention throughout; all matrices are row-major doubles.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ufv/binary_mask.hpp"
#include "ufv/error.hpp"
#include "ufv/losses.hpp"
#include "ufv/rng.hpp"
#include "ufv/temporal_codec.hpp"
#include "ufv/token_stream.hpp"

namespace ufv::toy {

using Mat = EmbeddingMatrix;
using RowVec = Eigen::RowVectorXd;

//! Id layout of the model vocabulary: text ids, then N+1 temporal ids, then
//! the four specials.
struct VocabLayout {
    static constexpr int kSpecials = 4;

    int text_vocab = 128;
    int n_bins = kDefaultTemporalBins;

    int temporal_begin() const noexcept { return text_vocab; }
    int temporal_count() const noexcept { return n_bins + 1; }
    int ref_id() const noexcept { return text_vocab + n_bins + 1; }
    int seg_id() const noexcept { return ref_id() + 1; }
    int vid_id() const noexcept { return ref_id() + 2; }
    int eos_id() const noexcept { return ref_id() + 3; }
    int total() const noexcept { return text_vocab + n_bins + 1 + kSpecials; }

    bool is_temporal(int id) const noexcept { return id >= temporal_begin() && id < temporal_begin() + temporal_count(); }

    int model_id(const Token& t) const {
        if (const auto* x = std::get_if<tok::Text>(&t)) {
            if (x->vocab_id < 0 || x->vocab_id >= text_vocab) {
                throw DomainError("text id " + std::to_string(x->vocab_id) + " outside the model vocabulary");
            }
            return x->vocab_id;
        }
        if (const auto* x = std::get_if<tok::Temp>(&t)) {
            if (x->index < 0 || x->index > n_bins) throw DomainError("temporal index outside the model vocabulary");
            return temporal_begin() + x->index;
        }
        if (is<tok::Seg>(t)) return seg_id();
        if (is<tok::VideoPatch>(t)) return vid_id();
        return ref_id();  // Ref placeholder or injected object token
    }

    bool operator==(const VocabLayout&) const = default;
};

struct ToyConfig {
    int hidden = 32;  // P
    int grid = 16;    // G
    int frames = 4;   // K
    int text_vocab = 128;
    int n_bins = kDefaultTemporalBins;
    int samples = 8;
    double lr = 0.05;
    int steps = 2000;
    int tokens_per_object = kDefaultTokensPerObject;  // U
    double init_scale = 0.1;
    int max_answer_tokens = 64;
    LossWeights weights;

    VocabLayout layout() const { return VocabLayout{text_vocab, n_bins}; }

    void validate() const {
        if (hidden < 1 || grid < 2 || frames < 1 || text_vocab < 2 || n_bins < 1 || samples < 1 || steps < 0) {
            throw DomainError("toy config: sizes must be positive");
        }
        if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("toy config: learning rate must be positive");
        if (tokens_per_object != 4) throw DomainError("toy config: object tokens come from 4 spatial quadrants");
        weights.validate();
    }
};

struct ModelParams {
    int hidden = 0;
    int grid = 0;
    VocabLayout layout;

    Mat embed;     // vocab_total x P
    Mat wq, wk, wv, wo;  // P x P
    Mat w1;        // P x 4P
    Mat w2;        // 4P x P
    Mat out_head;  // P x vocab_total
    Mat seg_proj;  // P x P
    // Frozen frame featurizer: cell feature = pixel * feat_scale + feat_bias.
    RowVec feat_scale;
    RowVec feat_bias;

    static ModelParams zeros(int hidden, int grid, VocabLayout layout) {
        ModelParams p;
        p.hidden = hidden;
        p.grid = grid;
        p.layout = layout;
        const int v = layout.total();
        p.embed = Mat::Zero(v, hidden);
        p.wq = p.wk = p.wv = p.wo = p.seg_proj = Mat::Zero(hidden, hidden);
        p.w1 = Mat::Zero(hidden, 4 * hidden);
        p.w2 = Mat::Zero(4 * hidden, hidden);
        p.out_head = Mat::Zero(hidden, v);
        p.feat_scale = RowVec::Zero(hidden);
        p.feat_bias = RowVec::Zero(hidden);
        return p;
    }

    //! Trainable tensors uniform in [-scale, scale]; featurizer uniform in [-1, 1].
    static ModelParams init(const ToyConfig& cfg, std::uint64_t seed) {
        ModelParams p = zeros(cfg.hidden, cfg.grid, cfg.layout());
        SplitMix64 rng(seed);
        p.for_each_trainable([&](const char*, Mat& m) {
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-cfg.init_scale, cfg.init_scale);
        });
        for (Eigen::Index i = 0; i < p.feat_scale.size(); ++i) p.feat_scale[i] = rng.uniform(-1.0, 1.0);
        for (Eigen::Index i = 0; i < p.feat_bias.size(); ++i) p.feat_bias[i] = rng.uniform(-1.0, 1.0);
        return p;
    }

    //! Gradient-shaped zero copy (featurizer zeroed, it is frozen).
    ModelParams zeros_like() const { return zeros(hidden, grid, layout); }

    template <typename F>
    void for_each_trainable(F&& f) {
        f("embed", embed);
        f("wq", wq);
        f("wk", wk);
        f("wv", wv);
        f("wo", wo);
        f("w1", w1);
        f("w2", w2);
        f("out_head", out_head);
        f("seg_proj", seg_proj);
    }

    template <typename F>
    void for_each_trainable(F&& f) const {
        const_cast<ModelParams*>(this)->for_each_trainable(
            [&](const char* name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
    }

    bool operator==(const ModelParams& o) const {
        bool eq = hidden == o.hidden && grid == o.grid && layout == o.layout && feat_scale == o.feat_scale &&
                  feat_bias == o.feat_bias;
        if (!eq) return false;
        std::vector<const Mat*> mine, theirs;
        for_each_trainable([&](const char*, const Mat& m) { mine.push_back(&m); });
        o.for_each_trainable([&](const char*, const Mat& m) { theirs.push_back(&m); });
        for (std::size_t i = 0; i < mine.size(); ++i) {
            if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols() || *mine[i] != *theirs[i]) {
                return false;
            }
        }
        return true;
    }
};

//! Amplitude of the position code added to token inputs.
inline constexpr double kPositionScale = 0.25;

//! Fixed sinusoidal position code, n x P.
inline Mat positional_encoding(Eigen::Index n, int hidden) {
    Mat pe(n, hidden);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int c = 0; c < hidden; ++c) {
            const double freq = std::pow(10000.0, -static_cast<double>(c - c % 2) / hidden);
            pe(i, c) = c % 2 == 0 ? std::sin(static_cast<double>(i) * freq) : std::cos(static_cast<double>(i) * freq);
        }
    }
    return pe;
}

//! One G x G frame, row-major pixel values.
using FrameGrid = std::vector<double>;

inline Mat frame_features(const ModelParams& p, const FrameGrid& frame) {
    const auto cells = static_cast<Eigen::Index>(frame.size());
    Mat f(cells, p.hidden);
    for (Eigen::Index c = 0; c < cells; ++c) f.row(c) = frame[static_cast<std::size_t>(c)] * p.feat_scale + p.feat_bias;
    return f;
}

//! One teacher-forced training / evaluation example.
struct ToyExample {
    //! Prompt followed by the answer, Ref placeholders already injected.
    TokenSequence sequence;
    //! Number of leading prompt tokens; the answer starts here.
    std::size_t prompt_length = 0;
    //! Continuous input added to the embedding row (video patch / object
    //! features); n x P, zero rows for plain tokens.
    Mat extra;
    std::vector<FrameGrid> frames;
    //! Per Seg token, in sequence order: one target mask per frame.
    std::vector<std::vector<BinaryMask>> target_masks;
    std::optional<TokenPair> target_interval;
};

struct SampleOutput {
    Mat hidden;
    Mat logits;
    Mat seg_embeddings;
    std::vector<std::vector<MaskLogits>> mask_logits;  // [object][frame]
    Mat time_logits;  // logits restricted to the temporal slice
};

namespace detail {

struct Cache {
    std::vector<int> ids;
    Mat x, xn, q, k, v, a, z, r, rn, t, h, hn;
    std::vector<Eigen::Index> seg_rows;
    std::vector<Mat> features;  // per frame
};

inline std::vector<int> model_ids(const ModelParams& p, const TokenSequence& seq) {
    std::vector<int> ids;
    ids.reserve(seq.size());
    for (const Token& t : seq.tokens) ids.push_back(p.layout.model_id(t));
    return ids;
}

inline void check_example(const ModelParams& p, const ToyExample& ex) {
    const auto n = static_cast<Eigen::Index>(ex.sequence.size());
    if (n == 0) throw ShapeError("toy example with an empty sequence");
    if (ex.extra.rows() != n || ex.extra.cols() != p.hidden) {
        throw ShapeError("toy example extra inputs must be " + std::to_string(n) + "x" + std::to_string(p.hidden));
    }
    if (ex.prompt_length > ex.sequence.size()) throw ShapeError("prompt longer than the sequence");
    const std::size_t cells = static_cast<std::size_t>(p.grid) * p.grid;
    for (const auto& f : ex.frames) {
        if (f.size() != cells) throw ShapeError("frame grid size does not match G x G");
    }
    const std::size_t n_seg = seg_position_mask(ex.sequence).popcount();
    if (!ex.target_masks.empty() && ex.target_masks.size() != n_seg) {
        throw ShapeError("seg token count " + std::to_string(n_seg) + " != target mask objects " +
                         std::to_string(ex.target_masks.size()));
    }
    for (const auto& per_obj : ex.target_masks) {
        if (per_obj.size() != ex.frames.size()) throw ShapeError("one target mask per frame is required");
        for (const auto& m : per_obj) {
            if (m.width() != p.grid || m.height() != p.grid) throw ShapeError("target mask is not G x G");
        }
    }
}

inline Mat row_softmax_causal(const Mat& scores) {
    Mat a = Mat::Zero(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const auto row = scores.row(i).head(i + 1);
        const double m = row.maxCoeff();
        const auto e = (row.array() - m).exp();
        a.row(i).head(i + 1) = e / e.sum();
    }
    return a;
}

inline constexpr double kRmsEpsilon = 1e-8;

inline Mat rms_rows(const Mat& x) {
    Mat y = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) y.row(i) /= std::sqrt(x.row(i).squaredNorm() / x.cols() + kRmsEpsilon);
    return y;
}

//! Backward of rms_rows given its input x, output y and output gradient dy.
inline Mat rms_back(const Mat& x, const Mat& y, const Mat& dy) {
    Mat dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double r = std::sqrt(x.row(i).squaredNorm() / x.cols() + kRmsEpsilon);
        dx.row(i) = (dy.row(i) - y.row(i) * (y.row(i).dot(dy.row(i)) / x.cols())) / r;
    }
    return dx;
}

inline SampleOutput forward_cached(const ModelParams& p, const ToyExample& ex, Cache& c) {
    check_example(p, ex);
    c.ids = model_ids(p, ex.sequence);
    const auto n = static_cast<Eigen::Index>(c.ids.size());
    c.x = positional_encoding(n, p.hidden) * kPositionScale;
    for (Eigen::Index i = 0; i < n; ++i) c.x.row(i) += p.embed.row(c.ids[static_cast<std::size_t>(i)]) + ex.extra.row(i);

    const double scale = 1.0 / std::sqrt(static_cast<double>(p.hidden));
    c.xn = rms_rows(c.x);
    c.q = c.xn * p.wq;
    c.k = c.xn * p.wk;
    c.v = c.xn * p.wv;
    c.a = row_softmax_causal((c.q * c.k.transpose()) * scale);
    c.z = c.a * c.v;
    c.r = c.x + c.z * p.wo;
    c.rn = rms_rows(c.r);
    c.t = (c.rn * p.w1).array().tanh().matrix();
    c.h = c.r + c.t * p.w2;
    c.hn = rms_rows(c.h);

    SampleOutput out;
    out.hidden = c.hn;
    out.logits = c.hn * p.out_head;
    out.time_logits = out.logits.middleCols(p.layout.temporal_begin(), p.layout.temporal_count());

    const PositionMask seg_mask = seg_position_mask(ex.sequence);
    c.seg_rows.clear();
    for (std::size_t i = 0; i < seg_mask.size(); ++i) {
        if (seg_mask.flags[i]) c.seg_rows.push_back(static_cast<Eigen::Index>(i));
    }
    out.seg_embeddings = gather_seg_embeddings(c.hn, seg_mask);

    c.features.clear();
    for (const auto& f : ex.frames) c.features.push_back(frame_features(p, f));
    const Mat queries = out.seg_embeddings * p.seg_proj;
    out.mask_logits.resize(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index o = 0; o < queries.rows(); ++o) {
        for (const Mat& f : c.features) {
            MaskLogits ml(p.grid, p.grid);
            Eigen::Map<Eigen::VectorXd>(ml.values.data(), static_cast<Eigen::Index>(ml.size())) = f * queries.row(o).transpose();
            out.mask_logits[static_cast<std::size_t>(o)].push_back(std::move(ml));
        }
    }
    return out;
}

//! Next-token targets: position i predicts token i + 1, the last position
//! predicts end-of-sequence. Only answer predictions count.
inline void text_targets(const ModelParams& p, const ToyExample& ex, const std::vector<int>& ids,
                         std::vector<int>& targets, std::vector<bool>& ignore) {
    const std::size_t n = ids.size();
    targets.assign(n, 0);
    ignore.assign(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        targets[i] = i + 1 < n ? ids[i + 1] : p.layout.eos_id();
        ignore[i] = i + 1 < ex.prompt_length;
    }
}

} // namespace detail

inline SampleOutput forward(const ModelParams& p, const ToyExample& ex) {
    detail::Cache c;
    return detail::forward_cached(p, ex, c);
}

inline std::vector<SampleOutput> forward(const ModelParams& p, const std::vector<ToyExample>& batch) {
    std::vector<SampleOutput> out;
    out.reserve(batch.size());
    for (const auto& ex : batch) out.push_back(forward(p, ex));
    return out;
}

struct LossBreakdown {
    double total = 0.0;
    double text = 0.0;  // batch mean of per-sample NLL
    double mask = 0.0;  // batch mean of per-sample (object, frame)-averaged mask loss
};

namespace detail {

//! Loss of one example and, when `grad` is set, accumulation of
//! `weight` * d(loss)/d(params) into it.
inline LossBreakdown sample_loss(const ModelParams& p, const ToyExample& ex, const LossWeights& w, ModelParams* grad,
                                 double weight) {
    Cache c;
    const SampleOutput out = forward_cached(p, ex, c);
    std::vector<int> targets;
    std::vector<bool> ignore;
    text_targets(p, ex, c.ids, targets, ignore);

    LossBreakdown lb;
    lb.text = nll_next_token(out.logits, targets, ignore);

    std::size_t pairs = 0;
    for (std::size_t o = 0; o < ex.target_masks.size(); ++o) {
        for (std::size_t k = 0; k < ex.target_masks[o].size(); ++k) {
            lb.mask += mask_loss(out.mask_logits[o][k], ex.target_masks[o][k], w);
            ++pairs;
        }
    }
    if (pairs) lb.mask /= static_cast<double>(pairs);
    lb.total = total_loss(lb.text, lb.mask, w);
    if (!grad) return lb;

    ModelParams& g = *grad;
    const auto n = static_cast<Eigen::Index>(c.ids.size());

    Mat d_logits = nll_next_token_grad(out.logits, targets, ignore) * (w.gamma * weight);
    g.out_head.noalias() += c.hn.transpose() * d_logits;
    Mat d_h = d_logits * p.out_head.transpose();

    if (pairs) {
        const Mat queries = out.seg_embeddings * p.seg_proj;
        Mat d_queries = Mat::Zero(queries.rows(), queries.cols());
        const double pair_weight = weight / static_cast<double>(pairs);
        for (std::size_t o = 0; o < ex.target_masks.size(); ++o) {
            for (std::size_t k = 0; k < ex.target_masks[o].size(); ++k) {
                const MaskLogits gm = mask_loss_grad(out.mask_logits[o][k], ex.target_masks[o][k], w);
                const Eigen::Map<const Eigen::VectorXd> gv(gm.values.data(), static_cast<Eigen::Index>(gm.size()));
                d_queries.row(static_cast<Eigen::Index>(o)).noalias() += (c.features[k].transpose() * gv).transpose() * pair_weight;
            }
        }
        g.seg_proj.noalias() += out.seg_embeddings.transpose() * d_queries;
        const Mat d_seg = d_queries * p.seg_proj.transpose();
        for (std::size_t o = 0; o < c.seg_rows.size(); ++o) d_h.row(c.seg_rows[o]) += d_seg.row(static_cast<Eigen::Index>(o));
    }

    d_h = rms_back(c.h, c.hn, d_h);
    // H = R + tanh(R W1) W2
    Mat d_r = d_h;
    g.w2.noalias() += c.t.transpose() * d_h;
    const Mat d_u = ((d_h * p.w2.transpose()).array() * (1.0 - c.t.array().square())).matrix();
    g.w1.noalias() += c.rn.transpose() * d_u;
    d_r.noalias() += rms_back(c.r, c.rn, d_u * p.w1.transpose());

    // R = X + Z Wo
    Mat d_x = d_r;
    g.wo.noalias() += c.z.transpose() * d_r;
    const Mat d_z = d_r * p.wo.transpose();

    // Z = A V
    const Mat d_a = d_z * c.v.transpose();
    const Mat d_v = c.a.transpose() * d_z;

    // A = softmax(S) row-wise; masked entries have A = 0 and drop out.
    Mat d_s = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double dot = (d_a.row(i).head(i + 1).array() * c.a.row(i).head(i + 1).array()).sum();
        d_s.row(i).head(i + 1) = (c.a.row(i).head(i + 1).array() * (d_a.row(i).head(i + 1).array() - dot)).matrix();
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.hidden));
    const Mat d_q = (d_s * c.k) * scale;
    const Mat d_k = (d_s.transpose() * c.q) * scale;

    g.wq.noalias() += c.xn.transpose() * d_q;
    g.wk.noalias() += c.xn.transpose() * d_k;
    g.wv.noalias() += c.xn.transpose() * d_v;
    d_x.noalias() += rms_back(c.x, c.xn, d_q * p.wq.transpose() + d_k * p.wk.transpose() + d_v * p.wv.transpose());

    for (Eigen::Index i = 0; i < n; ++i) g.embed.row(c.ids[static_cast<std::size_t>(i)]) += d_x.row(i);
    return lb;
}

} // namespace detail

//! Batch objective: mean over examples of gamma * text + mask.
inline LossBreakdown loss(const ModelParams& p, const std::vector<ToyExample>& batch, const LossWeights& w) {
    if (batch.empty()) throw DegenerateInputError("toy loss: empty batch");
    LossBreakdown sum;
    for (const auto& ex : batch) {
        const LossBreakdown lb = detail::sample_loss(p, ex, w, nullptr, 0.0);
        sum.text += lb.text;
        sum.mask += lb.mask;
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    sum.text *= inv_b;
    sum.mask *= inv_b;
    sum.total = total_loss(sum.text, sum.mask, w);
    return sum;
}

struct LossAndGrad {
    LossBreakdown loss;
    ModelParams grad;
};

inline LossAndGrad loss_and_grad(const ModelParams& p, const std::vector<ToyExample>& batch, const LossWeights& w) {
    if (batch.empty()) throw DegenerateInputError("toy loss: empty batch");
    LossAndGrad out{{}, p.zeros_like()};
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        const LossBreakdown lb = detail::sample_loss(p, ex, w, &out.grad, inv_b);
        out.loss.text += lb.text * inv_b;
        out.loss.mask += lb.mask * inv_b;
    }
    out.loss.total = total_loss(out.loss.text, out.loss.mask, w);
    return out;
}

inline ModelParams backward(const ModelParams& p, const std::vector<ToyExample>& batch, const LossWeights& w) {
    return loss_and_grad(p, batch, w).grad;
}

//! params - lr * grads over the trainable tensors; aborts on non-finite
//! gradients.
inline ModelParams sgd_step(const ModelParams& p, const ModelParams& grads, double lr) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("sgd_step: learning rate must be finite and >= 0");
    std::vector<const Mat*> gs;
    grads.for_each_trainable([&](const char*, const Mat& m) { gs.push_back(&m); });
    ModelParams next = p;
    std::size_t i = 0;
    next.for_each_trainable([&](const char* name, Mat& m) {
        const Mat& g = *gs[i++];
        if (g.rows() != m.rows() || g.cols() != m.cols()) throw ShapeError(std::string("sgd_step: shape mismatch in ") + name);
        if (!g.allFinite()) {
            throw NumericError(std::string("non-finite gradient in ") + name + " (max |g| = " +
                               std::to_string(g.cwiseAbs().maxCoeff()) + ")");
        }
        m.noalias() -= lr * g;
    });
    return next;
}

} // namespace ufv::toy
