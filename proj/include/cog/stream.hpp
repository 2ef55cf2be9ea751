#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cog/config.hpp"
#include "cog/kernels.hpp"
#include "cog/model.hpp"

namespace cog {

struct FrameResult {
    std::int64_t frame_index = 0;
    double p_error = 0.5;
    bool decision = false;
    double latency_us = 0;
};

namespace stream_detail {

template <typename T>
std::vector<T> flat(const Tensor<T>& t) {
    return t.data();
}

template <typename T>
struct Ring {
    std::int64_t dim = 0, capacity = 0;
    std::vector<T> buf;

    void init(std::int64_t d, std::int64_t cap) {
        dim = d;
        capacity = cap;
        buf.assign(static_cast<std::size_t>(d * cap), T(0));
    }
    void clear() { std::fill(buf.begin(), buf.end(), T(0)); }
    T* col(std::int64_t t) { return buf.data() + (t % capacity) * dim; }
    const T* col(std::int64_t t) const { return buf.data() + (t % capacity) * dim; }
};

}  // namespace stream_detail

// Frame-incremental inference engine. Accepts one spatial embedding at a
// time and emits the current frame's error probability; after t pushes the
// outputs equal the batch forward on the t-frame prefix. All state is ring
// buffers, pooled-window accumulators, and latched pyramid columns, so
// per-frame work and memory are independent of t.
template <typename T>
class StreamEngine {
public:
    StreamEngine(const CogModel<T>& model, const GesturePromptBank& bank,
                 double threshold = 0.5)
        : cfg_(model.config()), threshold_(threshold) {
        build(model, bank);
        reset();
    }

    const ModelConfig& config() const { return cfg_; }
    std::int64_t frames_pushed() const { return t_; }
    void set_recording(bool on) { recording_ = on; }

    void reset() {
        t_ = 0;
        closed_ = false;
        for (auto& st : slow_stages_) st.clear();
        for (auto& st : fast_stages_) st.clear();
        kv_ring_k_.clear();
        kv_ring_v_.clear();
        for (auto& u : latched_u_) std::fill(u.begin(), u.end(), T(0));
        for (auto& acc : slow_pool_acc_) std::fill(acc.begin(), acc.end(), T(0));
        std::fill(slow_pool_count_.begin(), slow_pool_count_.end(), 0);
        std::fill(fast_pool_acc_.begin(), fast_pool_acc_.end(), T(0));
        fast_pool_count_ = 0;
        fast_t_ = 0;
        std::fill(slow_t_.begin(), slow_t_.end(), 0);
        fast_latched_p_.assign(2, T(0.5));
        rec_slow_.assign(cfg_.use_mstr ? latched_u_.size() : 1, {});
        rec_fast_.assign(fast_stages_.empty() ? 0 : cfg_.fast_stages + 1, {});
    }

    void close() { closed_ = true; }

    FrameResult push_frame(const T* embedding, std::int64_t dim) {
        const auto start = std::chrono::steady_clock::now();
        if (closed_) throw ConfigError("push_frame after close()");
        if (dim != cfg_.d_vis) {
            throw ConfigError("push_frame: embedding dimension " + std::to_string(dim) +
                              " does not match configured d_vis " + std::to_string(cfg_.d_vis));
        }
        compute_cohesive(embedding);
        T p_err = T(0.5);
        if (cfg_.use_mstr) {
            if (cfg_.use_fast) run_fast();
            if (cfg_.use_slow) {
                p_err = run_slow();
            } else {
                p_err = fast_latched_p_[1];
            }
        } else {
            kern::conv1x1_col(direct_head_w_.data(), direct_head_b_.data(), 2,
                              cfg_.cohesive_dim(), c_col_.data(), head_buf_.data());
            kern::softmax_inplace(head_buf_.data(), 2);
            p_err = head_buf_[1];
            if (recording_) {
                rec_slow_[0].push_back(head_buf_[0]);
                rec_slow_[0].push_back(head_buf_[1]);
            }
        }
        if (!std::isfinite(static_cast<double>(p_err))) {
            throw NumericError("non-finite streaming prediction");
        }
        FrameResult r;
        r.frame_index = t_;
        r.p_error = static_cast<double>(p_err);
        r.decision = r.p_error >= threshold_;
        ++t_;
        r.latency_us = std::chrono::duration<double, std::micro>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        if (recording_) rec_frame_probs_.push_back(p_err);
        return r;
    }

    FrameResult push_frame(const std::vector<T>& embedding) {
        return push_frame(embedding.data(), static_cast<std::int64_t>(embedding.size()));
    }

    // Recorded per-level probability columns (flattened pairs), test hook.
    const std::vector<T>& recorded_slow(std::size_t level) const { return rec_slow_.at(level); }
    const std::vector<T>& recorded_fast(std::size_t stage) const { return rec_fast_.at(stage); }
    const std::vector<T>& recorded_frame_probs() const { return rec_frame_probs_; }

private:
    struct Layer {
        std::vector<T> conv_w, conv_b, point_w, point_b;
        std::int64_t dilation = 1;
        stream_detail::Ring<T> ring;
    };

    struct Stage {
        bool has_proj = false;
        std::vector<T> proj_w, proj_b;  // [width x in_dim]
        std::int64_t in_dim = 0;
        std::vector<Layer> layers;
        std::vector<T> buf_a, buf_b, buf_z;

        void clear() {
            for (auto& l : layers) l.ring.clear();
        }
    };

    void load_stage(Stage& out, const TcnStageParams<T>& p, std::int64_t in_dim,
                    std::int64_t width, std::int64_t w) {
        out.in_dim = in_dim;
        out.has_proj = p.has_proj;
        if (p.has_proj) {
            out.proj_w = stream_detail::flat(p.proj_w);  // [width x in_dim x 1]
            out.proj_b = stream_detail::flat(p.proj_b);
        }
        std::int64_t dil = 1;
        for (const auto& lp : p.layers) {
            Layer layer;
            layer.conv_w = stream_detail::flat(lp.conv_w);
            layer.conv_b = stream_detail::flat(lp.conv_b);
            layer.point_w = stream_detail::flat(lp.point_w);
            layer.point_b = stream_detail::flat(lp.point_b);
            layer.dilation = dil;
            layer.ring.init(width, dil * (w - 1) + 1);
            out.layers.push_back(std::move(layer));
            dil *= 2;
        }
        out.buf_a.assign(static_cast<std::size_t>(width), T(0));
        out.buf_b.assign(static_cast<std::size_t>(width), T(0));
        out.buf_z.assign(static_cast<std::size_t>(width), T(0));
    }

    // Same tap and channel accumulation order as the batch convolution.
    void layer_push(Layer& layer, std::int64_t t, const T* in, T* z, T* out) const {
        const std::int64_t d = cfg_.width;
        const std::int64_t w = cfg_.conv_width;
        std::copy(in, in + d, layer.ring.col(t));
        for (std::int64_t c = 0; c < d; ++c) {
            T acc = layer.conv_b[c];
            const T* kc = layer.conv_w.data() + c * d * w;
            for (std::int64_t j = 0; j < w; ++j) {
                const std::int64_t src = t - layer.dilation * (w - 1 - j);
                if (src < 0) continue;
                const T* col = layer.ring.col(src);
                for (std::int64_t ci = 0; ci < d; ++ci) acc += kc[ci * w + j] * col[ci];
            }
            z[c] = acc > T(0) ? acc : T(0);
        }
        for (std::int64_t c = 0; c < d; ++c) {
            T acc = layer.point_b[c];
            const T* pc = layer.point_w.data() + c * d;
            for (std::int64_t ci = 0; ci < d; ++ci) acc += pc[ci] * z[ci];
            out[c] = in[c] + acc;
        }
    }

    // Push one column through a stage; result lands in stage.buf_a.
    void stage_push(Stage& stage, std::int64_t t, const T* in) const {
        const std::int64_t d = cfg_.width;
        T* cur = stage.buf_a.data();
        if (stage.has_proj) {
            kern::conv1x1_col(stage.proj_w.data(), stage.proj_b.data(), d, stage.in_dim, in, cur);
        } else {
            std::copy(in, in + d, cur);
        }
        T* next = stage.buf_b.data();
        for (auto& layer : stage.layers) {
            layer_push(layer, t, cur, stage.buf_z.data(), next);
            std::swap(cur, next);
        }
        if (cur != stage.buf_a.data()) std::copy(cur, cur + d, stage.buf_a.data());
    }

    void head_probs(const std::vector<T>& w, const std::vector<T>& b, const T* col,
                    std::int64_t dim, T* out2) const {
        kern::conv1x1_col(w.data(), b.data(), 2, dim, col, out2);
        kern::softmax_inplace(out2, 2);
    }

    void build(const CogModel<T>& model, const GesturePromptBank& bank) {
        using stream_detail::flat;
        const std::int64_t d = cfg_.width;
        const std::int64_t j_count = cfg_.num_prompts;
        if (cfg_.use_gvr) {
            const auto& g = model.gvr();
            gvr_w_vis_ = flat(g.w_vis);
            gvr_b_vis_ = flat(g.b_vis);
            gvr_w_k_ = flat(g.w_k);
            gvr_b_k_ = flat(g.b_k);
            gvr_w_v_ = flat(g.w_v);
            gvr_b_v_ = flat(g.b_v);
            gvr_w_o_ = flat(g.w_o);
            gvr_b_o_ = flat(g.b_o);
            gvr_ln1_g_ = flat(g.ln1_gain);
            gvr_ln1_b_ = flat(g.ln1_offset);
            gvr_ln2_g_ = flat(g.ln2_gain);
            gvr_ln2_b_ = flat(g.ln2_offset);
            gvr_w_ff1_ = flat(g.w_ff1);
            gvr_b_ff1_ = flat(g.b_ff1);
            gvr_w_ff2_ = flat(g.w_ff2);
            gvr_b_ff2_ = flat(g.b_ff2);
            // fixed prompts: project once, precompute transformer queries
            {
                NoGradGuard ng;
                auto bank_t = bank_tensor<T>(bank);
                auto gp = project_prompts(bank_t, g);
                prompts_proj_ = gp.data();
                prompt_q_ = ops::linear(gp, g.w_q, g.b_q).data();
            }
            kv_ring_k_.init(d, cfg_.window);
            kv_ring_v_.init(d, cfg_.window);
            xp_buf_.assign(static_cast<std::size_t>(d), T(0));
            att_buf_.assign(static_cast<std::size_t>(j_count * d), T(0));
            row_buf_.assign(static_cast<std::size_t>(4 * d), T(0));
            row_buf2_.assign(static_cast<std::size_t>(d), T(0));
            logits_buf_.assign(static_cast<std::size_t>(std::max(cfg_.window, j_count)), T(0));
            qe_buf_.assign(static_cast<std::size_t>(j_count * d), T(0));
        } else {
            abl_w_ = flat(model.find_param("abl.proj_w"));
            abl_b_ = flat(model.find_param("abl.proj_b"));
        }
        c_col_.assign(static_cast<std::size_t>(cfg_.cohesive_dim()), T(0));
        head_buf_.assign(2, T(0));
        if (!cfg_.use_mstr) {
            direct_head_w_ = flat(model.find_param("direct.head_w"));
            direct_head_b_ = flat(model.find_param("direct.head_b"));
            return;
        }
        const auto& m = model.mstr();
        if (cfg_.use_slow) {
            slow_stages_.resize(static_cast<std::size_t>(cfg_.slow_stages + 1));
            load_stage(slow_stages_[0], m.slow_initial, cfg_.cohesive_dim(), d, cfg_.conv_width);
            for (std::int64_t i = 0; i < cfg_.slow_stages; ++i) {
                load_stage(slow_stages_[i + 1], m.slow_pooled[i], d, d, cfg_.conv_width);
            }
            for (std::int64_t i = 0; i < cfg_.slow_stages; ++i) {
                lateral_w_.push_back(flat(m.lateral_w[i]));
                lateral_b_.push_back(flat(m.lateral_b[i]));
            }
            for (std::int64_t i = 0; i <= cfg_.slow_stages; ++i) {
                head_w_.push_back(flat(m.head_w[i]));
                head_b_.push_back(flat(m.head_b[i]));
            }
            latched_u_.assign(static_cast<std::size_t>(cfg_.slow_stages + 1),
                              std::vector<T>(static_cast<std::size_t>(d), T(0)));
            slow_pool_acc_.assign(static_cast<std::size_t>(cfg_.slow_stages),
                                  std::vector<T>(static_cast<std::size_t>(d), T(0)));
            slow_pool_count_.assign(static_cast<std::size_t>(cfg_.slow_stages), 0);
            slow_t_.assign(static_cast<std::size_t>(cfg_.slow_stages + 1), 0);
            u_buf_.assign(static_cast<std::size_t>(d), T(0));
            f_buf_.assign(static_cast<std::size_t>(d), T(0));
        }
        if (cfg_.use_fast) {
            fast_stages_.resize(static_cast<std::size_t>(cfg_.fast_stages + 1));
            load_stage(fast_stages_[0], m.fast_initial, cfg_.cohesive_dim(), d, cfg_.conv_width);
            for (std::int64_t j = 0; j < cfg_.fast_stages; ++j) {
                load_stage(fast_stages_[j + 1], m.fast_refine[j], 2, d, cfg_.conv_width);
            }
            for (std::int64_t j = 0; j <= cfg_.fast_stages; ++j) {
                fast_head_w_.push_back(flat(m.fast_head_w[j]));
                fast_head_b_.push_back(flat(m.fast_head_b[j]));
            }
            fast_pool_acc_.assign(static_cast<std::size_t>(cfg_.cohesive_dim()), T(0));
            fast_p_buf_.assign(2, T(0));
        }
    }

    void compute_cohesive(const T* embedding) {
        const std::int64_t d = cfg_.width;
        const std::int64_t j_count = cfg_.num_prompts;
        if (!cfg_.use_gvr) {
            kern::vecmat(embedding, abl_w_.data(), cfg_.d_vis, cfg_.cohesive_dim(), c_col_.data(),
                         abl_b_.data());
            return;
        }
        kern::vecmat(embedding, gvr_w_vis_.data(), cfg_.d_vis, d, xp_buf_.data(),
                     gvr_b_vis_.data());
        kern::vecmat(xp_buf_.data(), gvr_w_k_.data(), d, d, kv_ring_k_.col(t_), gvr_b_k_.data());
        kern::vecmat(xp_buf_.data(), gvr_w_v_.data(), d, d, kv_ring_v_.col(t_), gvr_b_v_.data());

        const std::int64_t a = t_ + 1 > cfg_.window ? t_ + 1 - cfg_.window : 0;
        const std::int64_t m = t_ + 1 - a;
        const std::int64_t heads = cfg_.heads;
        const std::int64_t dh = d / heads;
        const T scale_h = kern::attn_scale<T>(dh);
        // multi-head attention of prompt queries over the window
        for (std::int64_t h = 0; h < heads; ++h) {
            const std::int64_t off = h * dh;
            for (std::int64_t j = 0; j < j_count; ++j) {
                const T* qrow = prompt_q_.data() + j * d + off;
                for (std::int64_t s = 0; s < m; ++s) {
                    const T* krow = kv_ring_k_.col(a + s) + off;
                    T acc = T(0);
                    for (std::int64_t e = 0; e < dh; ++e) acc += qrow[e] * krow[e];
                    logits_buf_[s] = acc * scale_h;
                }
                kern::softmax_inplace(logits_buf_.data(), m);
                T* out = att_buf_.data() + j * d + off;
                for (std::int64_t e = 0; e < dh; ++e) out[e] = T(0);
                for (std::int64_t s = 0; s < m; ++s) {
                    const T wgt = logits_buf_[s];
                    const T* vrow = kv_ring_v_.col(a + s) + off;
                    for (std::int64_t e = 0; e < dh; ++e) out[e] += wgt * vrow[e];
                }
            }
        }
        // output projection, residual, norms, feed-forward
        for (std::int64_t j = 0; j < j_count; ++j) {
            kern::vecmat(att_buf_.data() + j * d, gvr_w_o_.data(), d, d, row_buf_.data(),
                         gvr_b_o_.data());
            const T* gp = prompts_proj_.data() + j * d;
            for (std::int64_t e = 0; e < d; ++e) row_buf_[e] = gp[e] + row_buf_[e];
            kern::layer_norm_row(row_buf_.data(), gvr_ln1_g_.data(), gvr_ln1_b_.data(), d,
                                 static_cast<T>(1e-5), row_buf2_.data());
            kern::vecmat(row_buf2_.data(), gvr_w_ff1_.data(), d, 4 * d, row_buf_.data(),
                         gvr_b_ff1_.data());
            for (std::int64_t e = 0; e < 4 * d; ++e) {
                row_buf_[e] = row_buf_[e] > T(0) ? row_buf_[e] : T(0);
            }
            T* qe = qe_buf_.data() + j * d;
            kern::vecmat(row_buf_.data(), gvr_w_ff2_.data(), 4 * d, d, qe, gvr_b_ff2_.data());
            for (std::int64_t e = 0; e < d; ++e) qe[e] = row_buf2_[e] + qe[e];
            kern::layer_norm_row(qe, gvr_ln2_g_.data(), gvr_ln2_b_.data(), d,
                                 static_cast<T>(1e-5), row_buf2_.data());
            std::copy(row_buf2_.begin(), row_buf2_.begin() + d, qe);
        }
        // prompt re-attention (single head over the projected bank)
        const T scale_d = kern::attn_scale<T>(d);
        for (std::int64_t j = 0; j < j_count; ++j) {
            const T* qe = qe_buf_.data() + j * d;
            for (std::int64_t j2 = 0; j2 < j_count; ++j2) {
                const T* gp = prompts_proj_.data() + j2 * d;
                T acc = T(0);
                for (std::int64_t e = 0; e < d; ++e) acc += qe[e] * gp[e];
                logits_buf_[j2] = acc * scale_d;
            }
            kern::softmax_inplace(logits_buf_.data(), j_count);
            T* out = c_col_.data() + j * d;
            for (std::int64_t e = 0; e < d; ++e) out[e] = T(0);
            for (std::int64_t j2 = 0; j2 < j_count; ++j2) {
                const T wgt = logits_buf_[j2];
                const T* gp = prompts_proj_.data() + j2 * d;
                for (std::int64_t e = 0; e < d; ++e) out[e] += wgt * gp[e];
            }
        }
    }

    void emit_slow_level(std::size_t level, const T* col) {
        const std::int64_t d = cfg_.width;
        const std::int64_t k = cfg_.pool_k;
        const std::int64_t t_here = slow_t_[level]++;
        // propagate to the next pooled stage first so coarser holds are fresh
        if (level < static_cast<std::size_t>(cfg_.slow_stages)) {
            auto& stage = slow_stages_[level + 1];
            stage_push(stage, t_here, col);
            auto& acc = slow_pool_acc_[level];
            for (std::int64_t e = 0; e < d; ++e) acc[e] += stage.buf_a[e];
            if (++slow_pool_count_[level] == k) {
                const T invk = T(1) / static_cast<T>(k);
                for (std::int64_t e = 0; e < d; ++e) f_buf_[e] = acc[e] * invk;
                std::fill(acc.begin(), acc.end(), T(0));
                slow_pool_count_[level] = 0;
                std::vector<T> pooled(f_buf_);  // emit chain may reuse f_buf_
                emit_slow_level(level + 1, pooled.data());
            }
        }
        auto& u = latched_u_[level];
        if (level == static_cast<std::size_t>(cfg_.slow_stages)) {
            std::copy(col, col + d, u.data());
        } else {
            kern::conv1x1_col(lateral_w_[level].data(), lateral_b_[level].data(), d, d, col,
                              u_buf_.data());
            const auto& coarser = latched_u_[level + 1];
            for (std::int64_t e = 0; e < d; ++e) u[e] = coarser[e] + u_buf_[e];
        }
        if (recording_ && level > 0) {
            head_probs(head_w_[level], head_b_[level], u.data(), d, head_buf_.data());
            rec_slow_[level].push_back(head_buf_[0]);
            rec_slow_[level].push_back(head_buf_[1]);
        }
    }

    T run_slow() {
        stage_push(slow_stages_[0], t_, c_col_.data());
        emit_slow_level(0, slow_stages_[0].buf_a.data());
        head_probs(head_w_[0], head_b_[0], latched_u_[0].data(), cfg_.width, head_buf_.data());
        if (recording_) {
            rec_slow_[0].push_back(head_buf_[0]);
            rec_slow_[0].push_back(head_buf_[1]);
        }
        return head_buf_[1];
    }

    void run_fast() {
        const std::int64_t cdim = cfg_.cohesive_dim();
        for (std::int64_t e = 0; e < cdim; ++e) fast_pool_acc_[e] += c_col_[e];
        if (++fast_pool_count_ < cfg_.fast_pool) return;
        const T invk = T(1) / static_cast<T>(cfg_.fast_pool);
        std::vector<T> pooled(static_cast<std::size_t>(cdim));
        for (std::int64_t e = 0; e < cdim; ++e) pooled[e] = fast_pool_acc_[e] * invk;
        std::fill(fast_pool_acc_.begin(), fast_pool_acc_.end(), T(0));
        fast_pool_count_ = 0;
        const std::int64_t tf = fast_t_++;
        stage_push(fast_stages_[0], tf, pooled.data());
        head_probs(fast_head_w_[0], fast_head_b_[0], fast_stages_[0].buf_a.data(), cfg_.width,
                   fast_p_buf_.data());
        if (recording_) {
            rec_fast_[0].push_back(fast_p_buf_[0]);
            rec_fast_[0].push_back(fast_p_buf_[1]);
        }
        for (std::int64_t j = 0; j < cfg_.fast_stages; ++j) {
            stage_push(fast_stages_[j + 1], tf, fast_p_buf_.data());
            head_probs(fast_head_w_[j + 1], fast_head_b_[j + 1], fast_stages_[j + 1].buf_a.data(),
                       cfg_.width, fast_p_buf_.data());
            if (recording_) {
                rec_fast_[j + 1].push_back(fast_p_buf_[0]);
                rec_fast_[j + 1].push_back(fast_p_buf_[1]);
            }
        }
        fast_latched_p_ = fast_p_buf_;
    }

    ModelConfig cfg_;
    double threshold_;
    std::int64_t t_ = 0;
    bool closed_ = false;
    bool recording_ = false;

    // GVR
    std::vector<T> gvr_w_vis_, gvr_b_vis_, gvr_w_k_, gvr_b_k_, gvr_w_v_, gvr_b_v_;
    std::vector<T> gvr_w_o_, gvr_b_o_, gvr_ln1_g_, gvr_ln1_b_, gvr_ln2_g_, gvr_ln2_b_;
    std::vector<T> gvr_w_ff1_, gvr_b_ff1_, gvr_w_ff2_, gvr_b_ff2_;
    std::vector<T> prompts_proj_, prompt_q_;
    stream_detail::Ring<T> kv_ring_k_, kv_ring_v_;
    std::vector<T> xp_buf_, att_buf_, row_buf_, row_buf2_, logits_buf_, qe_buf_, c_col_;
    std::vector<T> abl_w_, abl_b_;

    // MSTR
    std::vector<Stage> slow_stages_, fast_stages_;
    std::vector<std::vector<T>> lateral_w_, lateral_b_, head_w_, head_b_;
    std::vector<std::vector<T>> fast_head_w_, fast_head_b_;
    std::vector<std::vector<T>> latched_u_, slow_pool_acc_;
    std::vector<std::int64_t> slow_pool_count_, slow_t_;
    std::vector<T> fast_pool_acc_, fast_p_buf_, fast_latched_p_;
    std::int64_t fast_pool_count_ = 0, fast_t_ = 0;
    std::vector<T> u_buf_, f_buf_, head_buf_;
    std::vector<T> direct_head_w_, direct_head_b_;

    std::vector<std::vector<T>> rec_slow_, rec_fast_;
    std::vector<T> rec_frame_probs_;
};

struct LatencyStats {
    double mean_us = 0, p50_us = 0, p99_us = 0;
    double p99_first_100_us = 0, p99_last_100_us = 0;
    std::int64_t frames = 0;
};

// Wall-clock per-push latency over synthetic frames; count >= 100 required.
template <typename T>
LatencyStats bench_stream(StreamEngine<T>& engine, std::int64_t count, std::uint64_t seed = 1) {
    if (count < 100) throw ConfigError("bench: need at least 100 frames");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const std::int64_t d = engine.config().d_vis;
    std::vector<T> frame(static_cast<std::size_t>(d));
    std::vector<double> lat(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        for (auto& v : frame) v = static_cast<T>(dist(rng));
        lat[i] = engine.push_frame(frame).latency_us;
    }
    auto pct = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        const std::size_t idx = std::min(v.size() - 1,
                                         static_cast<std::size_t>(q * static_cast<double>(v.size())));
        return v[idx];
    };
    LatencyStats st;
    st.frames = count;
    double total = 0;
    for (const double v : lat) total += v;
    st.mean_us = total / static_cast<double>(count);
    st.p50_us = pct(lat, 0.50);
    st.p99_us = pct(lat, 0.99);
    st.p99_first_100_us = pct({lat.begin(), lat.begin() + 100}, 0.99);
    st.p99_last_100_us = pct({lat.end() - 100, lat.end()}, 0.99);
    return st;
}

}  // namespace cog
