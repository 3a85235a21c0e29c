#pragma once
//! \file
//! Training objective: next-token NLL, BCE + soft-Dice mask loss and their
//! weighted sum, each with a closed-form gradient with respect to its logits.
//! Everything is double precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ufv/binary_mask.hpp"
#include "ufv/error.hpp"
#include "ufv/token_stream.hpp"

namespace ufv {

struct LossWeights {
    double alpha = 2.0;  // BCE
    double beta = 0.5;   // Dice
    double gamma = 1.0;  // text
    double dice_epsilon = 1.0;

    void validate() const {
        for (double w : {alpha, beta, gamma}) {
            if (!std::isfinite(w) || w < 0.0) throw DomainError("loss weights must be finite and non-negative");
        }
        if (!(dice_epsilon > 0.0) || !std::isfinite(dice_epsilon)) throw DomainError("dice epsilon must be positive");
    }
};

//! Pre-sigmoid per-pixel scores for one object in one frame, row-major like
//! BinaryMask.
struct MaskLogits {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    MaskLogits() = default;
    MaskLogits(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

    std::size_t size() const noexcept { return values.size(); }
    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace detail {

inline void require_mask_shape(const MaskLogits& pred, const BinaryMask& target, const char* op) {
    if (pred.width != target.width() || pred.height != target.height() || pred.size() != target.size()) {
        throw ShapeError(std::string(op) + ": logits " + std::to_string(pred.width) + "x" +
                         std::to_string(pred.height) + " vs target " + std::to_string(target.width()) + "x" +
                         std::to_string(target.height()));
    }
    if (pred.size() == 0) throw ShapeError(std::string(op) + ": empty mask");
}

inline void check_nll_inputs(const EmbeddingMatrix& logits, std::span<const int> targets,
                             const std::vector<bool>& ignore) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size() || ignore.size() != targets.size()) {
        throw ShapeError("nll: " + std::to_string(logits.rows()) + " logit rows, " +
                         std::to_string(targets.size()) + " targets, " + std::to_string(ignore.size()) +
                         " ignore flags");
    }
    std::size_t active = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (ignore[i]) continue;
        ++active;
        if (targets[i] < 0 || targets[i] >= logits.cols()) {
            throw DomainError("nll: target id " + std::to_string(targets[i]) + " outside vocabulary of " +
                              std::to_string(logits.cols()));
        }
    }
    if (active == 0) throw DegenerateInputError("nll: every position is ignored");
}

inline double log_sum_exp(const auto& row) {
    const double m = row.maxCoeff();
    return m + std::log((row.array() - m).exp().sum());
}

} // namespace detail

// --- next-token NLL ----------------------------------------------------------

//! Mean of -log softmax(row)[target] over positions not flagged in `ignore`.
inline double nll_next_token(const EmbeddingMatrix& logits, std::span<const int> targets,
                             const std::vector<bool>& ignore) {
    detail::check_nll_inputs(logits, targets, ignore);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (ignore[i]) continue;
        const auto row = logits.row(static_cast<Eigen::Index>(i));
        sum += detail::log_sum_exp(row) - row(targets[i]);
        ++n;
    }
    return sum / static_cast<double>(n);
}

//! d nll / d logits = (softmax - onehot) / N on active rows, zero elsewhere.
inline EmbeddingMatrix nll_next_token_grad(const EmbeddingMatrix& logits, std::span<const int> targets,
                                           const std::vector<bool>& ignore) {
    detail::check_nll_inputs(logits, targets, ignore);
    std::size_t n = 0;
    for (bool ig : ignore) n += ig ? 0 : 1;
    EmbeddingMatrix grad = EmbeddingMatrix::Zero(logits.rows(), logits.cols());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (ignore[i]) continue;
        const auto r = static_cast<Eigen::Index>(i);
        const double lse = detail::log_sum_exp(logits.row(r));
        grad.row(r) = (logits.row(r).array() - lse).exp() * inv_n;
        grad(r, targets[i]) -= inv_n;
    }
    return grad;
}

// --- BCE ----------------------------------------------------------------------

inline double bce_mask(const MaskLogits& pred, const BinaryMask& target) {
    detail::require_mask_shape(pred, target, "bce_mask");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double x = pred.values[i];
        const double t = target[i] ? 1.0 : 0.0;
        sum += std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    return sum / static_cast<double>(pred.size());
}

inline MaskLogits bce_mask_grad(const MaskLogits& pred, const BinaryMask& target) {
    detail::require_mask_shape(pred, target, "bce_mask");
    MaskLogits g(pred.width, pred.height);
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        g.values[i] = (sigmoid(pred.values[i]) - (target[i] ? 1.0 : 0.0)) * inv_n;
    }
    return g;
}

// --- soft Dice ------------------------------------------------------------------

//! 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps) with p = sigmoid(logits).
inline double dice_mask(const MaskLogits& pred, const BinaryMask& target, double epsilon = 1.0) {
    detail::require_mask_shape(pred, target, "dice_mask");
    if (!(epsilon > 0.0)) throw DomainError("dice_mask: epsilon must be positive");
    double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = sigmoid(pred.values[i]);
        const double t = target[i] ? 1.0 : 0.0;
        inter += p * t;
        sum_p += p;
        sum_t += t;
    }
    return 1.0 - (2.0 * inter + epsilon) / (sum_p + sum_t + epsilon);
}

inline MaskLogits dice_mask_grad(const MaskLogits& pred, const BinaryMask& target, double epsilon = 1.0) {
    detail::require_mask_shape(pred, target, "dice_mask");
    if (!(epsilon > 0.0)) throw DomainError("dice_mask: epsilon must be positive");
    std::vector<double> p(pred.size());
    double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        p[i] = sigmoid(pred.values[i]);
        const double t = target[i] ? 1.0 : 0.0;
        inter += p[i] * t;
        sum_p += p[i];
        sum_t += t;
    }
    const double num = 2.0 * inter + epsilon;
    const double den = sum_p + sum_t + epsilon;
    MaskLogits g(pred.width, pred.height);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double t = target[i] ? 1.0 : 0.0;
        const double d_dp = -(2.0 * t * den - num) / (den * den);
        g.values[i] = d_dp * p[i] * (1.0 - p[i]);
    }
    return g;
}

// --- composites -----------------------------------------------------------------

inline double mask_loss(const MaskLogits& pred, const BinaryMask& target, const LossWeights& w = {}) {
    double loss = 0.0;
    if (w.alpha != 0.0) loss += w.alpha * bce_mask(pred, target);
    if (w.beta != 0.0) loss += w.beta * dice_mask(pred, target, w.dice_epsilon);
    if (w.alpha == 0.0 && w.beta == 0.0) detail::require_mask_shape(pred, target, "mask_loss");
    return loss;
}

inline MaskLogits mask_loss_grad(const MaskLogits& pred, const BinaryMask& target, const LossWeights& w = {}) {
    const MaskLogits gb = bce_mask_grad(pred, target);
    const MaskLogits gd = dice_mask_grad(pred, target, w.dice_epsilon);
    MaskLogits g(pred.width, pred.height);
    for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = w.alpha * gb.values[i] + w.beta * gd.values[i];
    return g;
}

inline double total_loss(double text_loss, double mask_loss_value, const LossWeights& w = {}) {
    return w.gamma * text_loss + mask_loss_value;
}

} // namespace ufv
