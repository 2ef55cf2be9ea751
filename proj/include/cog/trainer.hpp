#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "cog/config.hpp"
#include "cog/dataio.hpp"
#include "cog/model.hpp"
#include "cog/objective.hpp"
#include "cog/serialize.hpp"

namespace cog {

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    std::int64_t step = 0;

    template <typename ParamList>
    void ensure_sized(const ParamList& params) {
        if (!m.empty()) return;
        m.resize(params.size());
        v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i].assign(params[i].tensor.data().size(), T(0));
            v[i].assign(params[i].tensor.data().size(), T(0));
        }
    }
};

// Bias-corrected Adam update over the whole parameter list. Aborts without
// touching any parameter if a gradient is non-finite.
template <typename T>
void adam_step(std::vector<ParamDef<T>>& params, AdamState<T>& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    state.ensure_sized(params);
    for (const auto& def : params) {
        for (const T g : def.tensor.grad()) {
            if (!std::isfinite(static_cast<double>(g))) {
                throw NumericError("non-finite gradient in parameter '" + def.name + "'");
            }
        }
    }
    ++state.step;
    const T b1 = static_cast<T>(beta1);
    const T b2 = static_cast<T>(beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(beta1, static_cast<double>(state.step)));
    const T bc2 = static_cast<T>(1.0 - std::pow(beta2, static_cast<double>(state.step)));
    const T lr_t = static_cast<T>(lr);
    const T eps_t = static_cast<T>(eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& data = params[i].tensor.mutable_data();
        const auto& grad = params[i].tensor.grad();
        auto& mi = state.m[i];
        auto& vi = state.v[i];
        for (std::size_t e = 0; e < data.size(); ++e) {
            const T g = grad.empty() ? T(0) : grad[e];
            mi[e] = b1 * mi[e] + (T(1) - b1) * g;
            vi[e] = b2 * vi[e] + (T(1) - b2) * g * g;
            const T mhat = mi[e] / bc1;
            const T vhat = vi[e] / bc2;
            data[e] -= lr_t * mhat / (std::sqrt(vhat) + eps_t);
        }
    }
}

template <typename T>
Tensor<T> frames_tensor(const EmbeddingSequence& seq) {
    std::vector<T> data(seq.frames.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(seq.frames[i]);
    return Tensor<T>::from({seq.length(), seq.d_vis}, std::move(data));
}

// One optimization step on a full video sequence; returns the loss value.
template <typename T>
double train_step(CogModel<T>& model, AdamState<T>& adam, const TrainConfig& tc,
                  const Tensor<T>& frames, const std::vector<std::uint8_t>& labels,
                  const Tensor<T>& bank) {
    auto pyramid = model.forward(frames, bank);
    LossConfig lc;
    lc.smooth_lambda = model.config().smooth_lambda;
    auto loss = total_loss(pyramid, make_label_pyramid(labels, pyramid), lc);
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) throw NumericError("non-finite training loss");
    model.zero_grad();
    backward(loss);
    adam_step(model.params(), adam, tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps);
    return value;
}

// Epoch loop: one step per video, fixed order, per-epoch mean loss appended
// to `history`. Resumable: pass the checkpointed state and remaining epochs.
template <typename T>
void train_epochs(CogModel<T>& model, AdamState<T>& adam, const TrainConfig& tc,
                  const std::vector<EmbeddingSequence>& videos, const GesturePromptBank& bank,
                  std::int64_t epochs_to_run, std::vector<double>& history,
                  const std::function<void(std::int64_t, double)>& log = {}) {
    if (videos.empty()) throw ConfigError("training requires a non-empty dataset");
    std::vector<Tensor<T>> inputs;
    std::vector<std::vector<std::uint8_t>> labels;
    for (const auto& v : videos) {
        if (v.length() < 1) throw ConfigError("video '" + v.id + "' is empty");
        if (!v.has_labels || static_cast<std::int64_t>(v.labels.size()) != v.length()) {
            throw ConfigError("video '" + v.id + "' has no frame labels");
        }
        inputs.push_back(frames_tensor<T>(v));
        labels.push_back(v.labels);
    }
    const auto bank_t = model.config().use_gvr ? bank_tensor<T>(bank) : Tensor<T>::zeros({1, 1});
    for (std::int64_t e = 0; e < epochs_to_run; ++e) {
        double total = 0;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            total += train_step(model, adam, tc, inputs[i], labels[i], bank_t);
        }
        const double mean = total / static_cast<double>(inputs.size());
        history.push_back(mean);
        if (log) log(static_cast<std::int64_t>(history.size()), mean);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint container: "COG1", config block, named parameter blobs with
// optimizer moments, 64-bit little-endian lengths, 32-bit float payloads.

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct ParamBlob {
    std::string name;
    Shape shape;
    std::vector<float> value, m, v;
};

struct Checkpoint {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    std::int64_t epoch = 0;
    std::int64_t adam_step_count = 0;
    bool has_bank = false;
    GesturePromptBank bank;  // fixed prompts travel with the model
    std::vector<ParamBlob> params;
    std::vector<double> loss_history;
};

template <typename T>
Checkpoint make_checkpoint(const CogModel<T>& model, const AdamState<T>& adam,
                           const TrainConfig& tc, std::int64_t epoch,
                           const std::vector<double>& history,
                           const GesturePromptBank* bank = nullptr) {
    Checkpoint ck;
    ck.model_cfg = model.config();
    ck.train_cfg = tc;
    ck.epoch = epoch;
    ck.adam_step_count = adam.step;
    ck.loss_history = history;
    if (bank) {
        ck.has_bank = true;
        ck.bank = *bank;
    }
    const auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamBlob blob;
        blob.name = params[i].name;
        blob.shape = params[i].tensor.shape();
        const auto& data = params[i].tensor.data();
        blob.value.resize(data.size());
        for (std::size_t e = 0; e < data.size(); ++e) blob.value[e] = static_cast<float>(data[e]);
        blob.m.assign(data.size(), 0.0f);
        blob.v.assign(data.size(), 0.0f);
        if (!adam.m.empty()) {
            for (std::size_t e = 0; e < data.size(); ++e) {
                blob.m[e] = static_cast<float>(adam.m[i][e]);
                blob.v[e] = static_cast<float>(adam.v[i][e]);
            }
        }
        ck.params.push_back(std::move(blob));
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "' for writing");
    io::write_bytes(out, "COG1", 4);
    io::write_u16(out, kCheckpointVersion);
    const auto& mc = ck.model_cfg;
    io::write_i64(out, mc.d_vis);
    io::write_i64(out, mc.d_text);
    io::write_i64(out, mc.num_prompts);
    io::write_i64(out, mc.window);
    io::write_i64(out, mc.width);
    io::write_i64(out, mc.heads);
    io::write_i64(out, mc.slow_stages);
    io::write_i64(out, mc.fast_stages);
    io::write_i64(out, mc.pool_k);
    io::write_i64(out, mc.fast_pool);
    io::write_i64(out, mc.slow_layers);
    io::write_i64(out, mc.fast_initial_layers);
    io::write_i64(out, mc.fast_refine_layers);
    io::write_i64(out, mc.conv_width);
    io::write_f64(out, mc.smooth_lambda);
    io::write_f64(out, mc.fps);
    io::write_u8(out, mc.use_gvr);
    io::write_u8(out, mc.use_mstr);
    io::write_u8(out, mc.use_slow);
    io::write_u8(out, mc.use_fast);
    const auto& tc = ck.train_cfg;
    io::write_f64(out, tc.learning_rate);
    io::write_i64(out, tc.epochs);
    io::write_u64(out, tc.seed);
    io::write_f64(out, tc.adam_beta1);
    io::write_f64(out, tc.adam_beta2);
    io::write_f64(out, tc.adam_eps);
    io::write_u8(out, ck.has_bank);
    if (ck.has_bank) {
        io::write_u32(out, static_cast<std::uint32_t>(ck.bank.count));
        io::write_u32(out, static_cast<std::uint32_t>(ck.bank.d_text));
        for (const auto& text : ck.bank.texts) io::write_string(out, text);
        io::write_bytes(out, ck.bank.vectors.data(), ck.bank.vectors.size() * sizeof(float));
    }
    io::write_i64(out, ck.epoch);
    io::write_i64(out, ck.adam_step_count);
    io::write_u32(out, static_cast<std::uint32_t>(ck.params.size()));
    for (const auto& blob : ck.params) {
        io::write_string(out, blob.name);
        io::write_u8(out, static_cast<std::uint8_t>(blob.shape.size()));
        for (const auto d : blob.shape) io::write_u64(out, static_cast<std::uint64_t>(d));
        io::write_u64(out, blob.value.size() * sizeof(float));
        io::write_bytes(out, blob.value.data(), blob.value.size() * sizeof(float));
        io::write_bytes(out, blob.m.data(), blob.m.size() * sizeof(float));
        io::write_bytes(out, blob.v.data(), blob.v.size() * sizeof(float));
    }
    io::write_u64(out, ck.loss_history.size());
    for (const double v : ck.loss_history) io::write_f64(out, v);
    if (!out) throw IoError(IoError::Kind::WriteFailed, "failed writing checkpoint");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "'");
    io::expect_magic(in, "COG1", "checkpoint");
    const auto version = io::read_u16(in, "version");
    if (version != kCheckpointVersion) {
        throw IoError(IoError::Kind::VersionMismatch,
                      "unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    auto& mc = ck.model_cfg;
    mc.d_vis = io::read_i64(in, "config");
    mc.d_text = io::read_i64(in, "config");
    mc.num_prompts = io::read_i64(in, "config");
    mc.window = io::read_i64(in, "config");
    mc.width = io::read_i64(in, "config");
    mc.heads = io::read_i64(in, "config");
    mc.slow_stages = io::read_i64(in, "config");
    mc.fast_stages = io::read_i64(in, "config");
    mc.pool_k = io::read_i64(in, "config");
    mc.fast_pool = io::read_i64(in, "config");
    mc.slow_layers = io::read_i64(in, "config");
    mc.fast_initial_layers = io::read_i64(in, "config");
    mc.fast_refine_layers = io::read_i64(in, "config");
    mc.conv_width = io::read_i64(in, "config");
    mc.smooth_lambda = io::read_f64(in, "config");
    mc.fps = io::read_f64(in, "config");
    mc.use_gvr = io::read_u8(in, "config") != 0;
    mc.use_mstr = io::read_u8(in, "config") != 0;
    mc.use_slow = io::read_u8(in, "config") != 0;
    mc.use_fast = io::read_u8(in, "config") != 0;
    auto& tc = ck.train_cfg;
    tc.learning_rate = io::read_f64(in, "config");
    tc.epochs = io::read_i64(in, "config");
    tc.seed = io::read_u64(in, "config");
    tc.adam_beta1 = io::read_f64(in, "config");
    tc.adam_beta2 = io::read_f64(in, "config");
    tc.adam_eps = io::read_f64(in, "config");
    ck.has_bank = io::read_u8(in, "bank flag") != 0;
    if (ck.has_bank) {
        ck.bank.count = io::read_u32(in, "bank count");
        ck.bank.d_text = io::read_u32(in, "bank dimension");
        for (std::int64_t j = 0; j < ck.bank.count; ++j) {
            ck.bank.texts.push_back(io::read_string(in, "bank text"));
        }
        ck.bank.vectors.resize(static_cast<std::size_t>(ck.bank.count * ck.bank.d_text));
        io::read_exact(in, ck.bank.vectors.data(), ck.bank.vectors.size() * sizeof(float),
                       "bank payload");
    }
    ck.epoch = io::read_i64(in, "epoch");
    ck.adam_step_count = io::read_i64(in, "adam step");
    const auto count = io::read_u32(in, "param count");
    for (std::uint32_t i = 0; i < count; ++i) {
        ParamBlob blob;
        blob.name = io::read_string(in, "param name");
        const auto ndim = io::read_u8(in, "param rank");
        for (std::uint8_t d = 0; d < ndim; ++d) {
            blob.shape.push_back(static_cast<std::int64_t>(io::read_u64(in, "param dims")));
        }
        const auto bytes = io::read_u64(in, "param byte length");
        if (bytes % sizeof(float) != 0 ||
            static_cast<std::int64_t>(bytes / sizeof(float)) != numel(blob.shape)) {
            throw IoError(IoError::Kind::BadValue,
                          "parameter '" + blob.name + "' payload length mismatch");
        }
        blob.value.resize(bytes / sizeof(float));
        blob.m.resize(blob.value.size());
        blob.v.resize(blob.value.size());
        io::read_exact(in, blob.value.data(), bytes, "param payload");
        io::read_exact(in, blob.m.data(), bytes, "optimizer payload");
        io::read_exact(in, blob.v.data(), bytes, "optimizer payload");
        ck.params.push_back(std::move(blob));
    }
    const auto hist = io::read_u64(in, "loss history length");
    ck.loss_history.resize(hist);
    for (auto& v : ck.loss_history) v = io::read_f64(in, "loss history");
    return ck;
}

// Load blob values into a model built from the same config. Names and shapes
// must match the registry exactly.
template <typename T>
void apply_checkpoint(const Checkpoint& ck, CogModel<T>& model, AdamState<T>* adam = nullptr) {
    auto& params = model.params();
    if (params.size() != ck.params.size()) {
        throw ConfigError("checkpoint parameter count does not match model");
    }
    if (adam) {
        adam->m.assign(params.size(), {});
        adam->v.assign(params.size(), {});
        adam->step = ck.adam_step_count;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& blob = ck.params[i];
        if (blob.name != params[i].name || blob.shape != params[i].tensor.shape()) {
            throw ConfigError("checkpoint parameter '" + blob.name + "' does not match model");
        }
        auto& data = params[i].tensor.mutable_data();
        for (std::size_t e = 0; e < data.size(); ++e) data[e] = static_cast<T>(blob.value[e]);
        if (adam) {
            adam->m[i].resize(data.size());
            adam->v[i].resize(data.size());
            for (std::size_t e = 0; e < data.size(); ++e) {
                adam->m[i][e] = static_cast<T>(blob.m[e]);
                adam->v[i][e] = static_cast<T>(blob.v[e]);
            }
        }
    }
}

}  // namespace cog
