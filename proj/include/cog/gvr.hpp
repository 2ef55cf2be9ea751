#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cog/config.hpp"
#include "cog/ops.hpp"
#include "cog/tensor.hpp"

namespace cog {

// Fixed bank of gesture prompt vectors with their source texts. Vectors are
// produced offline (or by the synthetic pipeline) and are never trained.
struct GesturePromptBank {
    std::int64_t count = 0;   // J
    std::int64_t d_text = 0;
    std::vector<std::string> texts;       // J entries
    std::vector<float> vectors;           // row-major [J x d_text]

    void validate() const {
        if (count < 1) throw ConfigError("prompt bank: need at least one prompt");
        if (static_cast<std::int64_t>(texts.size()) != count ||
            static_cast<std::int64_t>(vectors.size()) != count * d_text) {
            throw ConfigError("prompt bank: inconsistent sizes");
        }
    }
};

inline std::string render_prompt(const std::string& gesture_text) {
    if (gesture_text.empty()) throw std::invalid_argument("render_prompt: empty gesture text");
    return "A surgeon is " + gesture_text + " in the surgery";
}

template <typename T>
struct GvrParams {
    Tensor<T> w_vis, b_vis;  // d_vis -> d
    Tensor<T> w_txt, b_txt;  // d_text -> d
    // transformer layer (multi-head attention + feed-forward, post-norm)
    Tensor<T> w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
    Tensor<T> ln1_gain, ln1_offset, ln2_gain, ln2_offset;
    Tensor<T> w_ff1, b_ff1, w_ff2, b_ff2;  // d -> 4d -> d
};

template <typename T>
Tensor<T> project_prompts(const Tensor<T>& bank, const GvrParams<T>& p) {
    return ops::linear(bank, p.w_txt, p.b_txt);
}

namespace detail {

// Transformer layer on projected prompts with precomputed key/value rows for
// the visual window. Post-norm with residuals around both sublayers.
template <typename T>
Tensor<T> refine_from_kv(const Tensor<T>& prompts_proj, const Tensor<T>& q,
                         const Tensor<T>& k_win, const Tensor<T>& v_win,
                         const GvrParams<T>& p, std::int64_t heads) {
    const std::int64_t d = prompts_proj.dim(1);
    const std::int64_t dh = d / heads;
    std::vector<Tensor<T>> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (std::int64_t h = 0; h < heads; ++h) {
        auto qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
        auto kh = ops::slice_cols(k_win, h * dh, (h + 1) * dh);
        auto vh = ops::slice_cols(v_win, h * dh, (h + 1) * dh);
        head_outs.push_back(ops::attention_block(qh, kh, vh));
    }
    auto att = ops::linear(ops::concat_cols(head_outs), p.w_o, p.b_o);
    auto h1 = ops::layer_norm_rows(ops::add(prompts_proj, att), p.ln1_gain, p.ln1_offset);
    auto ff = ops::linear(ops::relu(ops::linear(h1, p.w_ff1, p.b_ff1)), p.w_ff2, p.b_ff2);
    return ops::layer_norm_rows(ops::add(h1, ff), p.ln2_gain, p.ln2_offset);
}

}  // namespace detail

// Refined prompt features for one visual window [m x d_vis], m <= n.
// Warm-up prefixes (m < n) are valid windows.
template <typename T>
Tensor<T> refine_prompts(const Tensor<T>& window, const Tensor<T>& bank, const GvrParams<T>& p,
                         std::int64_t heads) {
    auto xp = ops::linear(window, p.w_vis, p.b_vis);
    auto gp = project_prompts(bank, p);
    auto q = ops::linear(gp, p.w_q, p.b_q);
    auto k = ops::linear(xp, p.w_k, p.b_k);
    auto v = ops::linear(xp, p.w_v, p.b_v);
    return detail::refine_from_kv(gp, q, k, v, p, heads);
}

// Spatial-aware prompt features: refined prompts attend over the projected
// prompt bank (bank rows as both key and value).
template <typename T>
Tensor<T> attend_prompts(const Tensor<T>& refined, const Tensor<T>& bank_proj) {
    return ops::attention_block(refined, bank_proj, bank_proj);
}

// Row-major concatenation of the J prompt feature rows into one vector.
template <typename T>
Tensor<T> cohesive_feature(const Tensor<T>& spatial_prompts) {
    return ops::reshape(spatial_prompts, {spatial_prompts.numel()});
}

// Cohesive feature sequence for a whole video: one column per frame, each
// computed from the causal window of up to `cfg.window` frames ending there.
// Frame projections and key/value rows are shared across windows.
template <typename T>
Tensor<T> gvr_cohesive_sequence(const Tensor<T>& frames /*[T x d_vis]*/, const Tensor<T>& bank,
                                const GvrParams<T>& p, const ModelConfig& cfg) {
    const std::int64_t t_len = frames.dim(0);
    const std::int64_t d = cfg.width;
    const std::int64_t heads = cfg.heads;
    const std::int64_t dh = d / heads;

    auto xp = ops::linear(frames, p.w_vis, p.b_vis);
    auto gp = project_prompts(bank, p);
    auto q = ops::linear(gp, p.w_q, p.b_q);
    auto kf = ops::linear(xp, p.w_k, p.b_k);
    auto vf = ops::linear(xp, p.w_v, p.b_v);

    std::vector<Tensor<T>> qh(heads), kfh(heads), vfh(heads);
    for (std::int64_t h = 0; h < heads; ++h) {
        qh[h] = ops::slice_cols(q, h * dh, (h + 1) * dh);
        kfh[h] = ops::slice_cols(kf, h * dh, (h + 1) * dh);
        vfh[h] = ops::slice_cols(vf, h * dh, (h + 1) * dh);
    }

    std::vector<Tensor<T>> cols;
    cols.reserve(static_cast<std::size_t>(t_len));
    for (std::int64_t t = 0; t < t_len; ++t) {
        const std::int64_t a = t + 1 > cfg.window ? t + 1 - cfg.window : 0;
        std::vector<Tensor<T>> head_outs;
        head_outs.reserve(static_cast<std::size_t>(heads));
        for (std::int64_t h = 0; h < heads; ++h) {
            auto kh = ops::slice_rows(kfh[h], a, t + 1);
            auto vh = ops::slice_rows(vfh[h], a, t + 1);
            head_outs.push_back(ops::attention_block(qh[h], kh, vh));
        }
        auto att = ops::linear(ops::concat_cols(head_outs), p.w_o, p.b_o);
        auto h1 = ops::layer_norm_rows(ops::add(gp, att), p.ln1_gain, p.ln1_offset);
        auto ff = ops::linear(ops::relu(ops::linear(h1, p.w_ff1, p.b_ff1)), p.w_ff2, p.b_ff2);
        auto refined = ops::layer_norm_rows(ops::add(h1, ff), p.ln2_gain, p.ln2_offset);
        cols.push_back(cohesive_feature(attend_prompts(refined, gp)));
    }
    return ops::stack_cols(cols);
}

}  // namespace cog
