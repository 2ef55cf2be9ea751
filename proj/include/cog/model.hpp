#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cog/config.hpp"
#include "cog/gvr.hpp"
#include "cog/mstr.hpp"
#include "cog/ops.hpp"
#include "cog/tensor.hpp"

namespace cog {

enum class ParamInit { FanIn, Zero, One, HeadZero };

template <typename T>
struct ParamDef {
    std::string name;
    Tensor<T> tensor;
    ParamInit init;
    std::int64_t fan_in;
};

// Full COG model: prompt-conditioned feature extraction plus two-path
// temporal reasoning. Parameters are registered in a fixed order so
// initialization, optimizer state, and checkpoints are deterministic.
template <typename T>
class CogModel {
public:
    explicit CogModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build();
    }

    const ModelConfig& config() const { return cfg_; }
    const GvrParams<T>& gvr() const { return gvr_; }
    const MstrParams<T>& mstr() const { return mstr_; }
    const std::vector<ParamDef<T>>& params() const { return params_; }
    std::vector<ParamDef<T>>& params() { return params_; }

    // Fan-in-scaled uniform init; prediction heads stay zero so an untrained
    // model emits uniform probabilities (unless randomize_heads, for gradient
    // checking where zero heads would block upstream flow).
    void init_params(std::uint64_t seed, bool randomize_heads = false) {
        std::mt19937_64 rng(seed);
        for (auto& def : params_) {
            auto& data = def.tensor.mutable_data();
            ParamInit mode = def.init;
            if (mode == ParamInit::HeadZero) mode = randomize_heads ? ParamInit::FanIn : ParamInit::Zero;
            switch (mode) {
                case ParamInit::FanIn: {
                    const double s = 1.0 / std::sqrt(static_cast<double>(def.fan_in));
                    std::uniform_real_distribution<double> dist(-s, s);
                    for (auto& v : data) v = static_cast<T>(dist(rng));
                    break;
                }
                case ParamInit::Zero:
                    for (auto& v : data) v = T(0);
                    break;
                case ParamInit::One:
                    for (auto& v : data) v = T(1);
                    break;
                default:
                    break;
            }
        }
    }

    void zero_grad() {
        for (auto& def : params_) def.tensor.zero_grad();
    }

    // Cohesive feature sequence [cohesive_dim x T] for a video.
    Tensor<T> cohesive_sequence(const Tensor<T>& frames, const Tensor<T>& bank) const {
        if (frames.dim(1) != cfg_.d_vis) {
            throw ConfigError("forward: embedding dimension " + std::to_string(frames.dim(1)) +
                              " does not match configured d_vis " + std::to_string(cfg_.d_vis));
        }
        if (cfg_.use_gvr) {
            if (bank.dim(0) != cfg_.num_prompts || bank.dim(1) != cfg_.d_text) {
                throw ConfigError("forward: prompt bank shape mismatch");
            }
            return gvr_cohesive_sequence(frames, bank, gvr_, cfg_);
        }
        return ops::transpose(ops::linear(frames, abl_proj_w_, abl_proj_b_));
    }

    PredictionPyramid<T> forward(const Tensor<T>& frames, const Tensor<T>& bank) const {
        auto c = cohesive_sequence(frames, bank);
        if (cfg_.use_mstr) return mstr_forward(c, mstr_, cfg_);
        PredictionPyramid<T> pyr;
        pyr.frame_count = c.dim(1);
        pyr.slow.push_back(
            ops::softmax_lastdim(ops::transpose(ops::conv1d_causal(c, direct_head_w_, direct_head_b_, 1))));
        pyr.slow_strides.push_back(1);
        pyr.fast_empty = true;
        return pyr;
    }

    // Frame-rate error probability per frame. With the slow path ablated the
    // latest complete fast-path window is held; before the first one the
    // prediction is uniform.
    static std::vector<T> final_frame_error_probs(const PredictionPyramid<T>& pyr,
                                                  const ModelConfig& cfg) {
        std::vector<T> out(static_cast<std::size_t>(pyr.frame_count), T(0.5));
        if (!pyr.slow.empty()) {
            const auto& p0 = pyr.slow[0];
            for (std::int64_t t = 0; t < pyr.frame_count; ++t) out[t] = p0.data()[t * 2 + 1];
            return out;
        }
        if (!pyr.fast.empty()) {
            const auto& pn = pyr.fast.back();
            const std::int64_t lf = pn.dim(0);
            for (std::int64_t t = 0; t < pyr.frame_count; ++t) {
                const std::int64_t j = (t + 1) / cfg.fast_pool - 1;
                if (j >= 0 && j < lf) out[t] = pn.data()[j * 2 + 1];
            }
        }
        return out;
    }

    Tensor<T> find_param(const std::string& name) const {
        for (const auto& def : params_) {
            if (def.name == name) return def.tensor;
        }
        throw ConfigError("unknown parameter '" + name + "'");
    }

private:
    Tensor<T> reg(const std::string& name, Shape shape, ParamInit init, std::int64_t fan_in = 1) {
        Tensor<T> t = Tensor<T>::zeros(std::move(shape), true);
        params_.push_back({name, t, init, fan_in});
        return t;
    }

    TcnStageParams<T> make_stage(const std::string& prefix, std::int64_t cin,
                                 std::int64_t layer_count) {
        TcnStageParams<T> stage;
        const std::int64_t d = cfg_.width;
        const std::int64_t w = cfg_.conv_width;
        if (cin != d) {
            stage.has_proj = true;
            stage.proj_w = reg(prefix + ".proj_w", {d, cin, 1}, ParamInit::FanIn, cin);
            stage.proj_b = reg(prefix + ".proj_b", {d}, ParamInit::Zero);
        }
        for (std::int64_t l = 0; l < layer_count; ++l) {
            const std::string lp = prefix + ".layer" + std::to_string(l);
            TcnLayerParams<T> layer;
            layer.conv_w = reg(lp + ".conv_w", {d, d, w}, ParamInit::FanIn, d * w);
            layer.conv_b = reg(lp + ".conv_b", {d}, ParamInit::Zero);
            layer.point_w = reg(lp + ".point_w", {d, d, 1}, ParamInit::FanIn, d);
            layer.point_b = reg(lp + ".point_b", {d}, ParamInit::Zero);
            stage.layers.push_back(layer);
        }
        return stage;
    }

    void build() {
        const std::int64_t d = cfg_.width;
        const std::int64_t cdim = cfg_.cohesive_dim();
        if (cfg_.use_gvr) {
            gvr_.w_vis = reg("gvr.w_vis", {cfg_.d_vis, d}, ParamInit::FanIn, cfg_.d_vis);
            gvr_.b_vis = reg("gvr.b_vis", {d}, ParamInit::Zero);
            gvr_.w_txt = reg("gvr.w_txt", {cfg_.d_text, d}, ParamInit::FanIn, cfg_.d_text);
            gvr_.b_txt = reg("gvr.b_txt", {d}, ParamInit::Zero);
            gvr_.w_q = reg("gvr.w_q", {d, d}, ParamInit::FanIn, d);
            gvr_.b_q = reg("gvr.b_q", {d}, ParamInit::Zero);
            gvr_.w_k = reg("gvr.w_k", {d, d}, ParamInit::FanIn, d);
            gvr_.b_k = reg("gvr.b_k", {d}, ParamInit::Zero);
            gvr_.w_v = reg("gvr.w_v", {d, d}, ParamInit::FanIn, d);
            gvr_.b_v = reg("gvr.b_v", {d}, ParamInit::Zero);
            gvr_.w_o = reg("gvr.w_o", {d, d}, ParamInit::FanIn, d);
            gvr_.b_o = reg("gvr.b_o", {d}, ParamInit::Zero);
            gvr_.ln1_gain = reg("gvr.ln1_gain", {d}, ParamInit::One);
            gvr_.ln1_offset = reg("gvr.ln1_offset", {d}, ParamInit::Zero);
            gvr_.w_ff1 = reg("gvr.w_ff1", {d, 4 * d}, ParamInit::FanIn, d);
            gvr_.b_ff1 = reg("gvr.b_ff1", {4 * d}, ParamInit::Zero);
            gvr_.w_ff2 = reg("gvr.w_ff2", {4 * d, d}, ParamInit::FanIn, 4 * d);
            gvr_.b_ff2 = reg("gvr.b_ff2", {d}, ParamInit::Zero);
            gvr_.ln2_gain = reg("gvr.ln2_gain", {d}, ParamInit::One);
            gvr_.ln2_offset = reg("gvr.ln2_offset", {d}, ParamInit::Zero);
        } else {
            abl_proj_w_ = reg("abl.proj_w", {cfg_.d_vis, cdim}, ParamInit::FanIn, cfg_.d_vis);
            abl_proj_b_ = reg("abl.proj_b", {cdim}, ParamInit::Zero);
        }
        if (!cfg_.use_mstr) {
            direct_head_w_ = reg("direct.head_w", {2, cdim, 1}, ParamInit::HeadZero, cdim);
            direct_head_b_ = reg("direct.head_b", {2}, ParamInit::HeadZero);
            return;
        }
        if (cfg_.use_slow) {
            mstr_.slow_initial = make_stage("mstr.slow0", cdim, cfg_.slow_layers);
            for (std::int64_t i = 0; i < cfg_.slow_stages; ++i) {
                mstr_.slow_pooled.push_back(
                    make_stage("mstr.slow" + std::to_string(i + 1), d, cfg_.slow_layers));
            }
            for (std::int64_t i = 0; i < cfg_.slow_stages; ++i) {
                mstr_.lateral_w.push_back(
                    reg("mstr.lateral" + std::to_string(i) + "_w", {d, d, 1}, ParamInit::FanIn, d));
                mstr_.lateral_b.push_back(
                    reg("mstr.lateral" + std::to_string(i) + "_b", {d}, ParamInit::Zero));
            }
            for (std::int64_t i = 0; i <= cfg_.slow_stages; ++i) {
                mstr_.head_w.push_back(
                    reg("mstr.head" + std::to_string(i) + "_w", {2, d, 1}, ParamInit::HeadZero, d));
                mstr_.head_b.push_back(
                    reg("mstr.head" + std::to_string(i) + "_b", {2}, ParamInit::HeadZero));
            }
        }
        if (cfg_.use_fast) {
            mstr_.fast_initial = make_stage("mstr.fast0", cdim, cfg_.fast_initial_layers);
            for (std::int64_t j = 0; j < cfg_.fast_stages; ++j) {
                mstr_.fast_refine.push_back(
                    make_stage("mstr.fast" + std::to_string(j + 1), 2, cfg_.fast_refine_layers));
            }
            for (std::int64_t j = 0; j <= cfg_.fast_stages; ++j) {
                mstr_.fast_head_w.push_back(reg("mstr.fast_head" + std::to_string(j) + "_w",
                                                {2, d, 1}, ParamInit::HeadZero, d));
                mstr_.fast_head_b.push_back(
                    reg("mstr.fast_head" + std::to_string(j) + "_b", {2}, ParamInit::HeadZero));
            }
        }
    }

    ModelConfig cfg_;
    GvrParams<T> gvr_;
    MstrParams<T> mstr_;
    Tensor<T> abl_proj_w_, abl_proj_b_;
    Tensor<T> direct_head_w_, direct_head_b_;
    std::vector<ParamDef<T>> params_;
};

// Prompt bank rows as a constant tensor in the model's scalar type.
template <typename T>
Tensor<T> bank_tensor(const GesturePromptBank& bank) {
    std::vector<T> data(bank.vectors.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(bank.vectors[i]);
    return Tensor<T>::from({bank.count, bank.d_text}, std::move(data));
}

}  // namespace cog
