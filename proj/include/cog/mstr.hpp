#pragma once

#include <cstdint>
#include <vector>

#include "cog/config.hpp"
#include "cog/ops.hpp"
#include "cog/tensor.hpp"

namespace cog {

template <typename T>
struct TcnLayerParams {
    Tensor<T> conv_w, conv_b;    // dilated causal conv [width x width x w]
    Tensor<T> point_w, point_b;  // 1x1 conv feeding the residual update
};

// Stack of residual dilated causal conv layers; dilation doubles per layer.
template <typename T>
struct TcnStageParams {
    Tensor<T> proj_w, proj_b;  // optional 1x1 input projection (Cin != width)
    bool has_proj = false;
    std::vector<TcnLayerParams<T>> layers;
};

template <typename T>
Tensor<T> tcn_stage(const Tensor<T>& input, const TcnStageParams<T>& p) {
    Tensor<T> x = input;
    if (p.has_proj) x = ops::conv1d_causal(x, p.proj_w, p.proj_b, 1);
    std::int64_t dilation = 1;
    for (const auto& layer : p.layers) {
        auto z = ops::relu(ops::conv1d_causal(x, layer.conv_w, layer.conv_b, dilation));
        x = ops::add(x, ops::conv1d_causal(z, layer.point_w, layer.point_b, 1));
        dilation *= 2;
    }
    return x;
}

template <typename T>
struct MstrParams {
    TcnStageParams<T> slow_initial;              // cohesive -> width
    std::vector<TcnStageParams<T>> slow_pooled;  // M stages, width -> width
    std::vector<Tensor<T>> lateral_w, lateral_b; // pyramid laterals, levels 0..M-1
    std::vector<Tensor<T>> head_w, head_b;       // prediction heads, levels 0..M
    TcnStageParams<T> fast_initial;              // cohesive -> width
    std::vector<TcnStageParams<T>> fast_refine;  // N stages, 2 -> width
    std::vector<Tensor<T>> fast_head_w, fast_head_b;  // stages 0..N
};

// Per-stage probability sequences at their native temporal resolutions.
// Entries are [L x 2] row-per-step matrices; slow level 0 is frame rate.
template <typename T>
struct PredictionPyramid {
    std::vector<Tensor<T>> slow;
    std::vector<std::int64_t> slow_strides;
    std::vector<Tensor<T>> fast;
    std::int64_t fast_stride = 0;
    bool fast_empty = true;
    std::int64_t frame_count = 0;
};

namespace detail {

template <typename T>
Tensor<T> prediction_head(const Tensor<T>& features, const Tensor<T>& w, const Tensor<T>& b) {
    return ops::softmax_lastdim(ops::transpose(ops::conv1d_causal(features, w, b, 1)));
}

}  // namespace detail

// Slow path: stage features at progressively coarser resolution (Eqs. 6-7
// style recursion), combined by a causal feature pyramid into per-level
// predictions. The hold-style upsampling only replicates pooled windows that
// are already complete, which keeps every level causal.
template <typename T>
void slow_path(const Tensor<T>& cohesive, const MstrParams<T>& p, const ModelConfig& cfg,
               std::vector<Tensor<T>>& features, std::vector<Tensor<T>>& predictions) {
    features.clear();
    predictions.clear();
    features.push_back(tcn_stage(cohesive, p.slow_initial));
    for (std::int64_t i = 0; i < cfg.slow_stages; ++i) {
        if (features.back().dim(1) / cfg.pool_k < 1) break;  // level would floor to empty
        features.push_back(
            ops::avg_pool1d_cols(tcn_stage(features.back(), p.slow_pooled[i]), cfg.pool_k));
    }
    // Uniform wiring regardless of how many levels materialized: the
    // configured top level enters the pyramid as-is, every other level gets
    // its lateral plus the (possibly never-emitted, hence zero) coarser hold.
    // A stream that does not know the final length sees the same structure.
    const std::size_t top = features.size() - 1;
    std::vector<Tensor<T>> fpn(features.size());
    if (top == static_cast<std::size_t>(cfg.slow_stages)) {
        fpn[top] = features[top];
    } else {
        fpn[top] = ops::conv1d_causal(features[top], p.lateral_w[top], p.lateral_b[top], 1);
    }
    for (std::size_t i = top; i-- > 0;) {
        auto up = ops::latched_upsample_cols(fpn[i + 1], cfg.pool_k, features[i].dim(1));
        fpn[i] = ops::add(up, ops::conv1d_causal(features[i], p.lateral_w[i], p.lateral_b[i], 1));
    }
    predictions.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        predictions.push_back(detail::prediction_head(fpn[i], p.head_w[i], p.head_b[i]));
    }
}

// Fast path: 16x pooled multi-stage refinement; each refinement stage reads
// the previous stage's probabilities.
template <typename T>
std::vector<Tensor<T>> fast_path(const Tensor<T>& cohesive, const MstrParams<T>& p,
                                 const ModelConfig& cfg) {
    std::vector<Tensor<T>> predictions;
    if (cohesive.dim(1) / cfg.fast_pool < 1) return predictions;  // flagged empty by caller
    auto pooled = ops::avg_pool1d_cols(cohesive, cfg.fast_pool);
    auto h = tcn_stage(pooled, p.fast_initial);
    predictions.push_back(detail::prediction_head(h, p.fast_head_w[0], p.fast_head_b[0]));
    for (std::int64_t j = 0; j < cfg.fast_stages; ++j) {
        auto hj = tcn_stage(ops::transpose(predictions.back()), p.fast_refine[j]);
        predictions.push_back(
            detail::prediction_head(hj, p.fast_head_w[j + 1], p.fast_head_b[j + 1]));
    }
    return predictions;
}

template <typename T>
PredictionPyramid<T> mstr_forward(const Tensor<T>& cohesive, const MstrParams<T>& p,
                                  const ModelConfig& cfg) {
    PredictionPyramid<T> pyr;
    pyr.frame_count = cohesive.dim(1);
    if (cfg.use_slow) {
        std::vector<Tensor<T>> features;
        slow_path(cohesive, p, cfg, features, pyr.slow);
        std::int64_t stride = 1;
        for (std::size_t i = 0; i < pyr.slow.size(); ++i) {
            pyr.slow_strides.push_back(stride);
            stride *= cfg.pool_k;
        }
    }
    if (cfg.use_fast) {
        pyr.fast = fast_path(cohesive, p, cfg);
        pyr.fast_stride = cfg.fast_pool;
    }
    pyr.fast_empty = pyr.fast.empty();
    return pyr;
}

}  // namespace cog
