#pragma once
//! \file
//! Evaluation protocol: region similarity J, boundary F-measure, J&F, temporal
//! IoU, R@k, tIoU-gated mask scoring, choice accuracy and semantic-score
//! aggregation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ufv/binary_mask.hpp"
#include "ufv/error.hpp"
#include "ufv/temporal_codec.hpp"

namespace ufv {

// --- region similarity ------------------------------------------------------

//! |pred & truth| / |pred | truth|; two empty masks agree perfectly (1.0).
inline double region_j(const BinaryMask& pred, const BinaryMask& truth) {
    require_same_shape(pred, truth, "region_j");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i], b = truth[i];
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// --- contour accuracy -------------------------------------------------------

//! Mask pixels with at least one 4-neighbour outside the mask; the image
//! border counts as outside.
inline BinaryMask mask_boundary(const BinaryMask& m) {
    BinaryMask b(m.width(), m.height());
    const int w = m.width(), h = m.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!m.at(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !m.at(x - 1, y) || !m.at(x + 1, y) ||
                              !m.at(x, y - 1) || !m.at(x, y + 1);
            if (edge) b.set(x, y);
        }
    }
    return b;
}

//! ceil(0.008 * image diagonal), the usual video-segmentation default.
inline double default_contour_tolerance(int width, int height) {
    return std::ceil(0.008 * std::hypot(static_cast<double>(width), static_cast<double>(height)));
}

namespace detail {

//! Fraction of set pixels in `from` that have a set pixel of `to` within
//! Euclidean distance `tol`.
inline double boundary_hit_rate(const BinaryMask& from, const BinaryMask& to, double tol) {
    const int reach = static_cast<int>(std::floor(tol));
    const double tol2 = tol * tol;
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
            if (static_cast<double>(dx * dx + dy * dy) <= tol2) offsets.emplace_back(dx, dy);
        }
    }
    std::size_t total = 0, hit = 0;
    for (int y = 0; y < from.height(); ++y) {
        for (int x = 0; x < from.width(); ++x) {
            if (!from.at(x, y)) continue;
            ++total;
            for (auto [dx, dy] : offsets) {
                const int u = x + dx, v = y + dy;
                if (u >= 0 && v >= 0 && u < to.width() && v < to.height() && to.at(u, v)) {
                    ++hit;
                    break;
                }
            }
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

} // namespace detail

struct ContourScore {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

inline ContourScore contour_score(const BinaryMask& pred, const BinaryMask& truth, double tol_radius) {
    require_same_shape(pred, truth, "contour_f");
    if (!(tol_radius >= 0.0)) throw DomainError("contour_f: tolerance must be non-negative");
    const BinaryMask pb = mask_boundary(pred);
    const BinaryMask tb = mask_boundary(truth);
    const std::size_t np = pb.count(), nt = tb.count();
    if (np == 0 && nt == 0) return {1.0, 1.0, 1.0};
    if (np == 0 || nt == 0) return {};
    ContourScore s;
    s.precision = detail::boundary_hit_rate(pb, tb, tol_radius);
    s.recall = detail::boundary_hit_rate(tb, pb, tol_radius);
    const double sum = s.precision + s.recall;
    s.f = sum > 0.0 ? 2.0 * s.precision * s.recall / sum : 0.0;
    return s;
}

inline double contour_f(const BinaryMask& pred, const BinaryMask& truth, double tol_radius) {
    return contour_score(pred, truth, tol_radius).f;
}

inline double contour_f(const BinaryMask& pred, const BinaryMask& truth) {
    return contour_f(pred, truth, default_contour_tolerance(truth.width(), truth.height()));
}

inline double jf_mean(double j, double f) { return (j + f) / 2.0; }

// --- temporal ---------------------------------------------------------------

struct IntervalPair {
    TimeInterval predicted;
    TimeInterval truth;
};

inline double tiou(const IntervalPair& pair) {
    const TimeInterval& a = pair.predicted;
    const TimeInterval& b = pair.truth;
    const double inter = std::max(0.0, std::min(a.end_seconds, b.end_seconds) - std::max(a.start_seconds, b.start_seconds));
    const double uni = a.length() + b.length() - inter;
    if (uni <= 0.0) return a == b ? 1.0 : 0.0;
    return inter / uni;
}

//! For each threshold k, fraction of tIoU values strictly greater than k.
inline std::map<double, double> recall_at(const std::vector<double>& tious, const std::vector<double>& thresholds) {
    if (tious.empty()) throw DegenerateInputError("recall_at: no tIoU values");
    std::map<double, double> out;
    for (double k : thresholds) {
        if (!(k > 0.0 && k < 1.0)) throw DomainError("recall_at: threshold must lie in (0, 1)");
        const auto n = std::count_if(tious.begin(), tious.end(), [k](double v) { return v > k; });
        out[k] = static_cast<double>(n) / static_cast<double>(tious.size());
    }
    return out;
}

// --- tIoU-gated mask scoring --------------------------------------------------

inline constexpr double kDefaultPixtrqaThreshold = 0.5;

//! All (prediction, truth) mask pairs of one frame.
struct GatedFrame {
    double timestamp_seconds = 0.0;
    std::vector<std::pair<BinaryMask, BinaryMask>> objects;
};

struct GatedScore {
    bool gate_open = false;
    double tiou = 0.0;
    double j = 0.0;
    double f = 0.0;
    std::size_t frames_scored = 0;
};

//! Masks count only if the predicted interval reaches `threshold` tIoU; then
//! J and F are averaged over every object mask of the frames lying inside
//! both intervals. A closed gate scores (0, 0).
inline GatedScore pixtrqa_gated_masks(const TimeInterval& predicted, const TimeInterval& truth,
                                      const std::vector<GatedFrame>& frames,
                                      double threshold = kDefaultPixtrqaThreshold, double tol_radius = -1.0) {
    GatedScore s;
    s.tiou = tiou({predicted, truth});
    if (s.tiou < threshold) return s;
    s.gate_open = true;
    const double lo = std::max(predicted.start_seconds, truth.start_seconds);
    const double hi = std::min(predicted.end_seconds, truth.end_seconds);
    double j_sum = 0.0, f_sum = 0.0;
    std::size_t pairs = 0;
    for (const GatedFrame& fr : frames) {
        if (fr.timestamp_seconds < lo || fr.timestamp_seconds > hi) continue;
        ++s.frames_scored;
        for (const auto& [pred, gt] : fr.objects) {
            const double tol = tol_radius >= 0.0 ? tol_radius : default_contour_tolerance(gt.width(), gt.height());
            j_sum += region_j(pred, gt);
            f_sum += contour_f(pred, gt, tol);
            ++pairs;
        }
    }
    if (s.frames_scored == 0 || pairs == 0) {
        throw DegenerateInputError("pixtrqa gate passed but no annotated frame lies in the interval intersection");
    }
    s.j = j_sum / static_cast<double>(pairs);
    s.f = f_sum / static_cast<double>(pairs);
    return s;
}

// --- question answering --------------------------------------------------------

inline double choice_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& truths) {
    if (preds.size() != truths.size()) {
        throw ShapeError("choice_accuracy: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(truths.size()) + " answers");
    }
    if (preds.empty()) throw DegenerateInputError("choice_accuracy: no answers");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == truths[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(preds.size());
}

//! Mean over dimensions per sample, then mean over samples. Scores lie in [0, 5].
inline double savg_aggregate(const std::vector<std::vector<double>>& scores) {
    if (scores.empty()) throw DegenerateInputError("savg: no samples");
    double total = 0.0;
    for (const auto& dims : scores) {
        if (dims.empty()) throw DegenerateInputError("savg: sample without dimension scores");
        double s = 0.0;
        for (double v : dims) {
            if (!(v >= 0.0 && v <= 5.0)) throw DomainError("savg: score " + std::to_string(v) + " outside [0, 5]");
            s += v;
        }
        total += s / static_cast<double>(dims.size());
    }
    return total / static_cast<double>(scores.size());
}

//! Judge interface producing per-dimension scores in [0, 5] for one answer.
class SemanticScorer {
public:
    virtual ~SemanticScorer() = default;
    //! `temporal_point` drops the temporal-description dimension.
    virtual std::vector<double> score(const std::string& answer, const std::string& reference,
                                      bool temporal_point) const = 0;
};

//! Deterministic stand-in for a judge model: bag-of-words overlap between
//! answer and reference. Dimensions: subject correspondence (recall),
//! appearance description (precision), temporal description (F1),
//! hallucination detection (F1).
class TokenOverlapScorer final : public SemanticScorer {
public:
    std::vector<double> score(const std::string& answer, const std::string& reference,
                              bool temporal_point) const override {
        const auto a = words(answer);
        const auto r = words(reference);
        std::size_t common = 0;
        for (const auto& w : a) common += r.count(w) ? 1 : 0;
        const double precision = a.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(a.size());
        const double recall = r.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(r.size());
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        std::vector<double> dims{5.0 * recall, 5.0 * precision};
        if (!temporal_point) dims.push_back(5.0 * f1);
        dims.push_back(5.0 * f1);
        return dims;
    }

private:
    static std::set<std::string> words(const std::string& s) {
        std::set<std::string> out;
        std::string cur;
        for (char c : s) {
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
                cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            } else if (!cur.empty()) {
                out.insert(cur);
                cur.clear();
            }
        }
        if (!cur.empty()) out.insert(cur);
        return out;
    }
};

} // namespace ufv
