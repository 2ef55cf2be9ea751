#pragma once

#include <cstdint>
#include <string>

#include "cog/errors.hpp"

namespace cog {

// Architecture knobs for the full model. Defaults follow the published COG
// configuration; every field is serialized into checkpoints.
struct ModelConfig {
    std::int64_t d_vis = 2048;        // spatial embedding dimension
    std::int64_t d_text = 512;        // gesture prompt embedding dimension
    std::int64_t num_prompts = 15;    // J, size of the gesture prompt bank
    std::int64_t window = 40;         // n, visual frames seen by prompt refinement
    std::int64_t width = 64;          // d, model width (prompt features and TCN channels)
    std::int64_t heads = 4;           // attention heads in the prompt-refinement layer
    std::int64_t slow_stages = 3;     // M, pooled slow-path stages beyond the first
    std::int64_t fast_stages = 3;     // N, fast-path refinement stages
    std::int64_t pool_k = 4;          // slow-path pooling kernel and stride
    std::int64_t fast_pool = 16;      // fast-path input pooling window
    std::int64_t slow_layers = 10;    // TCN depth per slow stage
    std::int64_t fast_initial_layers = 10;
    std::int64_t fast_refine_layers = 11;
    std::int64_t conv_width = 3;      // dilated conv kernel width
    double smooth_lambda = 0.15;      // weight of the smoothing loss term
    double fps = 5.0;                 // frame rate the model operates at

    // Ablation switches (config, not code forks).
    bool use_gvr = true;   // off: cohesive features replaced by a learned projection
    bool use_mstr = true;  // off: single frame-level head on the cohesive features
    bool use_slow = true;
    bool use_fast = true;

    std::int64_t cohesive_dim() const { return num_prompts * width; }

    void validate() const {
        if (d_vis < 1 || d_text < 1 || num_prompts < 1 || window < 1 || width < 1)
            throw ConfigError("model config: dimensions must be positive");
        if (heads < 1 || width % heads != 0)
            throw ConfigError("model config: width must be divisible by head count");
        if (slow_stages < 1 || fast_stages < 1)
            throw ConfigError("model config: stage counts must be >= 1");
        if (pool_k < 1 || fast_pool < 1 || conv_width < 1)
            throw ConfigError("model config: pooling/conv sizes must be >= 1");
        if (slow_layers < 1 || fast_initial_layers < 1 || fast_refine_layers < 1)
            throw ConfigError("model config: layer counts must be >= 1");
        if (smooth_lambda < 0) throw ConfigError("model config: lambda must be >= 0");
        if (!use_mstr && (!use_slow || !use_fast))
            throw ConfigError("model config: path ablations require the temporal module");
        if (use_mstr && !use_slow && !use_fast)
            throw ConfigError("model config: at least one temporal path must be enabled");
    }
};

struct TrainConfig {
    double learning_rate = 5e-4;
    std::int64_t epochs = 50;
    std::uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("train config: learning rate must be > 0");
        if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
    }
};

inline ModelConfig apply_ablation(ModelConfig cfg, const std::string& which) {
    if (which == "gvr") {
        cfg.use_gvr = false;
    } else if (which == "mstr") {
        cfg.use_mstr = false;
    } else if (which == "slow") {
        cfg.use_slow = false;
    } else if (which == "fast") {
        cfg.use_fast = false;
    } else if (!which.empty()) {
        throw ConfigError("unknown ablation '" + which + "' (expected gvr|mstr|slow|fast)");
    }
    return cfg;
}

}  // namespace cog
