#pragma once

#include <cstdint>
#include <vector>

#include "cog/mstr.hpp"
#include "cog/ops.hpp"
#include "cog/tensor.hpp"

namespace cog {

struct LossConfig {
    double smooth_lambda = 0.15;
    double log_eps = 1e-8;
};

// Majority vote over non-overlapping windows, ties counting as error;
// trailing remainder frames are dropped.
inline std::vector<std::uint8_t> downsample_labels(const std::vector<std::uint8_t>& labels,
                                                   std::int64_t factor) {
    if (factor < 1) throw ShapeError("downsample_labels: factor must be >= 1");
    const std::int64_t t_len = static_cast<std::int64_t>(labels.size());
    const std::int64_t out_len = t_len / factor;
    std::vector<std::uint8_t> out(static_cast<std::size_t>(out_len));
    for (std::int64_t s = 0; s < out_len; ++s) {
        std::int64_t errors = 0;
        for (std::int64_t i = 0; i < factor; ++i) errors += labels[s * factor + i] != 0;
        out[s] = (2 * errors >= factor) ? 1 : 0;
    }
    return out;
}

// Ground truth aligned to every pyramid level's native resolution.
struct LabelPyramid {
    std::vector<std::vector<std::uint8_t>> slow;
    std::vector<std::vector<std::uint8_t>> fast;
};

template <typename T>
LabelPyramid make_label_pyramid(const std::vector<std::uint8_t>& labels,
                                const PredictionPyramid<T>& pyr) {
    LabelPyramid out;
    for (std::size_t i = 0; i < pyr.slow.size(); ++i) {
        auto y = downsample_labels(labels, pyr.slow_strides[i]);
        if (static_cast<std::int64_t>(y.size()) != pyr.slow[i].dim(0)) {
            throw ShapeError("label pyramid: slow level length mismatch");
        }
        out.slow.push_back(std::move(y));
    }
    for (std::size_t j = 0; j < pyr.fast.size(); ++j) {
        auto y = downsample_labels(labels, pyr.fast_stride);
        if (static_cast<std::int64_t>(y.size()) != pyr.fast[j].dim(0)) {
            throw ShapeError("label pyramid: fast level length mismatch");
        }
        out.fast.push_back(std::move(y));
    }
    return out;
}

namespace detail {

template <typename T>
Tensor<T> mean_over_levels(std::vector<Tensor<T>> terms) {
    if (terms.empty()) return Tensor<T>::scalar(T(0));
    Tensor<T> acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = ops::add(acc, terms[i]);
    return ops::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace detail

// Cross-entropy at every pyramid level: per-level mean over time, averaged
// over levels within each path, the two path terms summed.
template <typename T>
Tensor<T> ce_multiscale(const PredictionPyramid<T>& pyr, const LabelPyramid& labels,
                        const LossConfig& cfg = {}) {
    const T eps = static_cast<T>(cfg.log_eps);
    std::vector<Tensor<T>> slow_terms, fast_terms;
    for (std::size_t i = 0; i < pyr.slow.size(); ++i) {
        slow_terms.push_back(ops::nll_mean(pyr.slow[i], labels.slow[i], eps));
    }
    for (std::size_t j = 0; j < pyr.fast.size(); ++j) {
        fast_terms.push_back(ops::nll_mean(pyr.fast[j], labels.fast[j], eps));
    }
    return ops::add(detail::mean_over_levels(std::move(slow_terms)),
                    detail::mean_over_levels(std::move(fast_terms)));
}

// Adjacent-step squared difference of the error probability at every level,
// same per-path averaging as the cross-entropy term.
template <typename T>
Tensor<T> mse_smooth(const PredictionPyramid<T>& pyr) {
    std::vector<Tensor<T>> slow_terms, fast_terms;
    for (const auto& p : pyr.slow) slow_terms.push_back(ops::smooth_mse(p));
    for (const auto& p : pyr.fast) fast_terms.push_back(ops::smooth_mse(p));
    return ops::add(detail::mean_over_levels(std::move(slow_terms)),
                    detail::mean_over_levels(std::move(fast_terms)));
}

template <typename T>
Tensor<T> total_loss(const PredictionPyramid<T>& pyr, const LabelPyramid& labels,
                     const LossConfig& cfg = {}) {
    return ops::add(ce_multiscale(pyr, labels, cfg),
                    ops::scale(mse_smooth(pyr), cfg.smooth_lambda));
}

}  // namespace cog
