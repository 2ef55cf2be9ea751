#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cog/kernels.hpp"
#include "cog/tensor.hpp"

namespace cog::ops {

namespace detail {

template <typename T>
inline Tensor<T> make_op(const char* op, Shape shape, std::vector<T> value,
                         std::vector<Tensor<T>> inputs,
                         std::function<void(Node<T>&)> backward_fn) {
    check_finite(value, op);
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->op = op;
    n->id = cog::detail::next_node_id();
    bool rg = false;
    if (grad_mode_enabled()) {
        for (const auto& in : inputs) rg = rg || in.requires_grad();
    }
    n->requires_grad = rg;
    if (rg) {
        n->parents.reserve(inputs.size());
        for (auto& in : inputs) n->parents.push_back(in.node());
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor<T>(n);
}

template <typename T>
inline void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

template <typename T>
inline void require_2d(const Tensor<T>& x, const char* op) {
    if (x.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + shape_str(x.shape()));
    }
}

// Accumulate src into parent grad if it participates in the sweep.
template <typename T>
inline bool wants_grad(Node<T>& self, std::size_t i) {
    return self.parents[i]->requires_grad;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<T> out(a.data());
    const auto& bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return detail::make_op<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (!detail::wants_grad(self, p)) continue;
            auto& pg = self.parents[p]->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<T> out(a.data());
    const auto& bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return detail::make_op<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        if (detail::wants_grad(self, 0)) {
            auto& pg = self.parents[0]->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i];
        }
        if (detail::wants_grad(self, 1)) {
            auto& pg = self.parents[1]->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] -= self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<T> out(a.data());
    const auto& bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return detail::make_op<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv2 = self.parents[1]->value;
        if (detail::wants_grad(self, 0)) {
            auto& pg = self.parents[0]->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * bv2[i];
        }
        if (detail::wants_grad(self, 1)) {
            auto& pg = self.parents[1]->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * av[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, double s) {
    const T sv = static_cast<T>(s);
    std::vector<T> out(a.data());
    for (auto& v : out) v *= sv;
    return detail::make_op<T>("scale", a.shape(), std::move(out), {a}, [sv](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        auto& pg = self.parents[0]->grad;
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += self.grad[i] * sv;
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> out(a.data());
    for (auto& v : out) v = v > T(0) ? v : T(0);
    return detail::make_op<T>("relu", a.shape(), std::move(out), {a}, [](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        const auto& x = self.parents[0]->value;
        auto& pg = self.parents[0]->grad;
        for (std::size_t i = 0; i < pg.size(); ++i) {
            if (x[i] > T(0)) pg[i] += self.grad[i];
        }
    });
}

// C = A[m x k] * B[k x n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimension mismatch " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(m * n));
    kern::matmul_nn(a.data().data(), b.data().data(), m, k, n, out.data());
    return detail::make_op<T>("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
        const T* g = self.grad.data();
        if (detail::wants_grad(self, 0)) {
            kern::matmul_nt_acc(g, self.parents[1]->value.data(), m, n, k,
                                self.parents[0]->grad.data());
        }
        if (detail::wants_grad(self, 1)) {
            kern::matmul_tn_acc(self.parents[0]->value.data(), g, m, k, n,
                                self.parents[1]->grad.data());
        }
    });
}

// C = A[m x k] * B[n x k]^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_2d(a, "matmul_nt");
    detail::require_2d(b, "matmul_nt");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) {
        throw ShapeError("matmul_nt: inner dimension mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(m * n));
    kern::matmul_nt(a.data().data(), b.data().data(), m, k, n, out.data());
    return detail::make_op<T>("matmul_nt", {m, n}, std::move(out), {a, b},
                              [m, k, n](Node<T>& self) {
                                  const T* g = self.grad.data();
                                  if (detail::wants_grad(self, 0)) {
                                      kern::matmul_nn_acc(g, self.parents[1]->value.data(), m, n,
                                                          k, self.parents[0]->grad.data());
                                  }
                                  if (detail::wants_grad(self, 1)) {
                                      kern::matmul_tn_acc(g, self.parents[0]->value.data(), m, n,
                                                          k, self.parents[1]->grad.data());
                                  }
                              });
}

// X[m x k] * W[k x n] + row-broadcast b[n]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require_2d(x, "linear");
    detail::require_2d(w, "linear");
    const std::int64_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
    if (w.dim(0) != k || b.numel() != n) {
        throw ShapeError("linear: shape mismatch " + shape_str(x.shape()) + " * " +
                         shape_str(w.shape()) + " + " + shape_str(b.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(m * n));
    kern::matmul_nn(x.data().data(), w.data().data(), m, k, n, out.data(), b.data().data());
    return detail::make_op<T>(
        "linear", {m, n}, std::move(out), {x, w, b}, [m, k, n](Node<T>& self) {
            const T* g = self.grad.data();
            if (detail::wants_grad(self, 0)) {
                kern::matmul_nt_acc(g, self.parents[1]->value.data(), m, n, k,
                                    self.parents[0]->grad.data());
            }
            if (detail::wants_grad(self, 1)) {
                kern::matmul_tn_acc(self.parents[0]->value.data(), g, m, k, n,
                                    self.parents[1]->grad.data());
            }
            if (detail::wants_grad(self, 2)) {
                auto& bg = self.parents[2]->grad;
                for (std::int64_t i = 0; i < m; ++i) {
                    for (std::int64_t j = 0; j < n; ++j) bg[j] += g[i * n + j];
                }
            }
        });
}

// Row-wise normalization over the feature axis with learnable gain/offset.
template <typename T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& offset,
                          T eps = static_cast<T>(1e-5)) {
    detail::require_2d(x, "layer_norm");
    const std::int64_t m = x.dim(0), d = x.dim(1);
    if (gain.numel() != d || offset.numel() != d) {
        throw ShapeError("layer_norm: gain/offset length must equal feature dim " +
                         std::to_string(d));
    }
    std::vector<T> out(static_cast<std::size_t>(m * d));
    for (std::int64_t i = 0; i < m; ++i) {
        kern::layer_norm_row(x.data().data() + i * d, gain.data().data(), offset.data().data(),
                             d, eps, out.data() + i * d);
    }
    return detail::make_op<T>(
        "layer_norm", x.shape(), std::move(out), {x, gain, offset}, [m, d, eps](Node<T>& self) {
            const auto& xv = self.parents[0]->value;
            const auto& gv = self.parents[1]->value;
            std::vector<T> xhat(static_cast<std::size_t>(d));
            for (std::int64_t i = 0; i < m; ++i) {
                const T* xr = xv.data() + i * d;
                const T* gr = self.grad.data() + i * d;
                T mean = T(0);
                for (std::int64_t j = 0; j < d; ++j) mean += xr[j];
                mean /= static_cast<T>(d);
                T var = T(0);
                for (std::int64_t j = 0; j < d; ++j) {
                    const T c = xr[j] - mean;
                    var += c * c;
                }
                var /= static_cast<T>(d);
                const T inv = T(1) / std::sqrt(var + eps);
                for (std::int64_t j = 0; j < d; ++j) xhat[j] = (xr[j] - mean) * inv;

                if (detail::wants_grad(self, 1)) {
                    auto& gg = self.parents[1]->grad;
                    for (std::int64_t j = 0; j < d; ++j) gg[j] += gr[j] * xhat[j];
                }
                if (detail::wants_grad(self, 2)) {
                    auto& og = self.parents[2]->grad;
                    for (std::int64_t j = 0; j < d; ++j) og[j] += gr[j];
                }
                if (detail::wants_grad(self, 0)) {
                    T m1 = T(0), m2 = T(0);
                    for (std::int64_t j = 0; j < d; ++j) {
                        const T gh = gr[j] * gv[j];
                        m1 += gh;
                        m2 += gh * xhat[j];
                    }
                    m1 /= static_cast<T>(d);
                    m2 /= static_cast<T>(d);
                    auto& xg = self.parents[0]->grad;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const T gh = gr[j] * gv[j];
                        xg[i * d + j] += inv * (gh - m1 - xhat[j] * m2);
                    }
                }
            }
        });
}

// Softmax over the last axis (rows of a 2-D tensor, or the whole 1-D tensor).
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    if (x.rank() != 1 && x.rank() != 2) {
        throw ShapeError("softmax_lastdim: expected 1-D or 2-D tensor");
    }
    const std::int64_t n = x.shape().back();
    const std::int64_t rows = x.numel() / n;
    std::vector<T> out(x.data());
    for (std::int64_t i = 0; i < rows; ++i) kern::softmax_inplace(out.data() + i * n, n);
    return detail::make_op<T>("softmax", x.shape(), std::move(out), {x}, [rows, n](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        auto& xg = self.parents[0]->grad;
        for (std::int64_t i = 0; i < rows; ++i) {
            const T* y = self.value.data() + i * n;
            const T* g = self.grad.data() + i * n;
            T dot = T(0);
            for (std::int64_t j = 0; j < n; ++j) dot += g[j] * y[j];
            for (std::int64_t j = 0; j < n; ++j) xg[i * n + j] += y[j] * (g[j] - dot);
        }
    });
}

// Causal dilated 1-D convolution with zero left-padding; length preserved.
// input [Cin x t_len], kernel [Cout x Cin x w], bias [Cout].
template <typename T>
Tensor<T> conv1d_causal(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                        std::int64_t dilation) {
    if (dilation < 1) throw ShapeError("conv1d_causal: dilation must be >= 1");
    detail::require_2d(input, "conv1d_causal");
    if (kernel.rank() != 3) throw ShapeError("conv1d_causal: kernel must be [Cout x Cin x w]");
    const std::int64_t cin = input.dim(0), t_len = input.dim(1);
    const std::int64_t cout = kernel.dim(0), w = kernel.dim(2);
    if (kernel.dim(1) != cin || bias.numel() != cout) {
        throw ShapeError("conv1d_causal: kernel " + shape_str(kernel.shape()) +
                         " incompatible with input " + shape_str(input.shape()));
    }
    std::vector<T> out(static_cast<std::size_t>(cout * t_len));
    const T* in = input.data().data();
    const T* kd = kernel.data().data();
    const T* bd = bias.data().data();
    // time-inner loops keep rows contiguous; per-element accumulation order
    // stays (tap, channel), identical to the streaming engine's
    for (std::int64_t c = 0; c < cout; ++c) {
        T* orow = out.data() + c * t_len;
        for (std::int64_t t = 0; t < t_len; ++t) orow[t] = bd[c];
        for (std::int64_t j = 0; j < w; ++j) {
            const std::int64_t off = dilation * (w - 1 - j);
            for (std::int64_t ci = 0; ci < cin; ++ci) {
                const T kv = kd[(c * cin + ci) * w + j];
                const T* irow = in + ci * t_len;
                for (std::int64_t t = off; t < t_len; ++t) orow[t] += kv * irow[t - off];
            }
        }
    }
    return detail::make_op<T>(
        "conv1d_causal", {cout, t_len}, std::move(out), {input, kernel, bias},
        [cin, t_len, cout, w, dilation](Node<T>& self) {
            const T* g = self.grad.data();
            const T* in2 = self.parents[0]->value.data();
            const T* kd2 = self.parents[1]->value.data();
            const bool want_in = detail::wants_grad(self, 0);
            const bool want_k = detail::wants_grad(self, 1);
            const bool want_b = detail::wants_grad(self, 2);
            T* ig = want_in ? self.parents[0]->grad.data() : nullptr;
            T* kg = want_k ? self.parents[1]->grad.data() : nullptr;
            T* bg = want_b ? self.parents[2]->grad.data() : nullptr;
            for (std::int64_t c = 0; c < cout; ++c) {
                const T* grow = g + c * t_len;
                if (want_b) {
                    T acc = T(0);
                    for (std::int64_t t = 0; t < t_len; ++t) acc += grow[t];
                    bg[c] += acc;
                }
                for (std::int64_t j = 0; j < w; ++j) {
                    const std::int64_t off = dilation * (w - 1 - j);
                    for (std::int64_t ci = 0; ci < cin; ++ci) {
                        const T kv = kd2[(c * cin + ci) * w + j];
                        const T* irow = in2 + ci * t_len;
                        T kacc = T(0);
                        for (std::int64_t t = off; t < t_len; ++t) {
                            const T gt = grow[t];
                            kacc += gt * irow[t - off];
                            if (want_in) ig[ci * t_len + t - off] += kv * gt;
                        }
                        if (want_k) kg[(c * cin + ci) * w + j] += kacc;
                    }
                }
            }
        });
}

// Non-overlapping left-aligned mean pooling over columns; remainder dropped.
template <typename T>
Tensor<T> avg_pool1d_cols(const Tensor<T>& x, std::int64_t k) {
    if (k < 1) throw ShapeError("avg_pool1d: k must be >= 1");
    detail::require_2d(x, "avg_pool1d");
    const std::int64_t c = x.dim(0), t_len = x.dim(1);
    const std::int64_t out_len = t_len / k;
    std::vector<T> out(static_cast<std::size_t>(c * out_len), T(0));
    const T* in = x.data().data();
    const T invk = T(1) / static_cast<T>(k);
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t s = 0; s < out_len; ++s) {
            T acc = T(0);
            for (std::int64_t i = 0; i < k; ++i) acc += in[ci * t_len + s * k + i];
            out[ci * out_len + s] = acc * invk;
        }
    }
    return detail::make_op<T>("avg_pool1d", {c, out_len}, std::move(out), {x},
                              [c, t_len, out_len, k, invk](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  auto& xg = self.parents[0]->grad;
                                  for (std::int64_t ci = 0; ci < c; ++ci) {
                                      for (std::int64_t s = 0; s < out_len; ++s) {
                                          const T gs = self.grad[ci * out_len + s] * invk;
                                          for (std::int64_t i = 0; i < k; ++i) {
                                              xg[ci * t_len + s * k + i] += gs;
                                          }
                                      }
                                  }
                              });
}

// Plain zero-order-hold upsampling: each column repeated k times.
template <typename T>
Tensor<T> zero_order_hold_upsample_cols(const Tensor<T>& x, std::int64_t k) {
    if (k < 1) throw ShapeError("zero_order_hold_upsample: k must be >= 1");
    detail::require_2d(x, "zero_order_hold_upsample");
    const std::int64_t c = x.dim(0), in_len = x.dim(1);
    const std::int64_t out_len = in_len * k;
    std::vector<T> out(static_cast<std::size_t>(c * out_len));
    const T* in = x.data().data();
    for (std::int64_t ci = 0; ci < c; ++ci) {
        for (std::int64_t t = 0; t < out_len; ++t) out[ci * out_len + t] = in[ci * in_len + t / k];
    }
    return detail::make_op<T>("zoh_upsample", {c, out_len}, std::move(out), {x},
                              [c, in_len, out_len, k](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  auto& xg = self.parents[0]->grad;
                                  for (std::int64_t ci = 0; ci < c; ++ci) {
                                      for (std::int64_t t = 0; t < out_len; ++t) {
                                          xg[ci * in_len + t / k] += self.grad[ci * out_len + t];
                                      }
                                  }
                              });
}

// Causal hold upsampling: position t carries the most recent column of x whose
// source window of k fine steps is already complete, or zero before the first
// one. out[:, t] = x[:, floor((t+1)/k) - 1].
template <typename T>
Tensor<T> latched_upsample_cols(const Tensor<T>& x, std::int64_t k, std::int64_t out_len) {
    if (k < 1) throw ShapeError("latched_upsample: k must be >= 1");
    detail::require_2d(x, "latched_upsample");
    const std::int64_t c = x.dim(0), in_len = x.dim(1);
    if (out_len / k != in_len) {
        throw ShapeError("latched_upsample: out_len " + std::to_string(out_len) +
                         " inconsistent with input length " + std::to_string(in_len));
    }
    std::vector<T> out(static_cast<std::size_t>(c * out_len), T(0));
    const T* in = x.data().data();
    for (std::int64_t t = 0; t < out_len; ++t) {
        const std::int64_t j = (t + 1) / k - 1;
        if (j < 0) continue;
        for (std::int64_t ci = 0; ci < c; ++ci) out[ci * out_len + t] = in[ci * in_len + j];
    }
    return detail::make_op<T>("latched_upsample", {c, out_len}, std::move(out), {x},
                              [c, in_len, out_len, k](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  auto& xg = self.parents[0]->grad;
                                  for (std::int64_t t = 0; t < out_len; ++t) {
                                      const std::int64_t j = (t + 1) / k - 1;
                                      if (j < 0) continue;
                                      for (std::int64_t ci = 0; ci < c; ++ci) {
                                          xg[ci * in_len + j] += self.grad[ci * out_len + t];
                                      }
                                  }
                              });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    detail::require_2d(x, "transpose");
    const std::int64_t m = x.dim(0), n = x.dim(1);
    std::vector<T> out(static_cast<std::size_t>(m * n));
    const T* in = x.data().data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
    }
    return detail::make_op<T>("transpose", {n, m}, std::move(out), {x}, [m, n](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        auto& xg = self.parents[0]->grad;
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < n; ++j) xg[i * n + j] += self.grad[j * m + i];
        }
    });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                         shape_str(shape));
    }
    std::vector<T> out(x.data());
    return detail::make_op<T>("reshape", std::move(shape), std::move(out), {x},
                              [](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  auto& xg = self.parents[0]->grad;
                                  for (std::size_t i = 0; i < xg.size(); ++i) {
                                      xg[i] += self.grad[i];
                                  }
                              });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::int64_t r0, std::int64_t r1) {
    detail::require_2d(x, "slice_rows");
    const std::int64_t m = x.dim(0), n = x.dim(1);
    if (r0 < 0 || r1 > m || r0 >= r1) throw ShapeError("slice_rows: invalid range");
    const std::int64_t rows = r1 - r0;
    std::vector<T> out(x.data().begin() + r0 * n, x.data().begin() + r1 * n);
    return detail::make_op<T>("slice_rows", {rows, n}, std::move(out), {x},
                              [r0, rows, n](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  auto& xg = self.parents[0]->grad;
                                  for (std::int64_t i = 0; i < rows * n; ++i) {
                                      xg[r0 * n + i] += self.grad[i];
                                  }
                              });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::int64_t c0, std::int64_t c1) {
    detail::require_2d(x, "slice_cols");
    const std::int64_t m = x.dim(0), n = x.dim(1);
    if (c0 < 0 || c1 > n || c0 >= c1) throw ShapeError("slice_cols: invalid range");
    const std::int64_t cols = c1 - c0;
    std::vector<T> out(static_cast<std::size_t>(m * cols));
    const T* in = x.data().data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) out[i * cols + j] = in[i * n + c0 + j];
    }
    return detail::make_op<T>("slice_cols", {m, cols}, std::move(out), {x},
                              [m, n, c0, cols](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  auto& xg = self.parents[0]->grad;
                                  for (std::int64_t i = 0; i < m; ++i) {
                                      for (std::int64_t j = 0; j < cols; ++j) {
                                          xg[i * n + c0 + j] += self.grad[i * cols + j];
                                      }
                                  }
                              });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty input");
    const std::int64_t m = parts[0].dim(0);
    std::int64_t total = 0;
    for (const auto& p : parts) {
        detail::require_2d(p, "concat_cols");
        if (p.dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
        total += p.dim(1);
    }
    std::vector<T> out(static_cast<std::size_t>(m * total));
    std::vector<std::int64_t> widths;
    widths.reserve(parts.size());
    std::int64_t col = 0;
    for (const auto& p : parts) {
        const std::int64_t n = p.dim(1);
        const T* in = p.data().data();
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < n; ++j) out[i * total + col + j] = in[i * n + j];
        }
        widths.push_back(n);
        col += n;
    }
    return detail::make_op<T>("concat_cols", {m, total}, std::move(out), parts,
                              [m, total, widths](Node<T>& self) {
                                  std::int64_t c0 = 0;
                                  for (std::size_t p = 0; p < widths.size(); ++p) {
                                      const std::int64_t n = widths[p];
                                      if (detail::wants_grad(self, p)) {
                                          auto& pg = self.parents[p]->grad;
                                          for (std::int64_t i = 0; i < m; ++i) {
                                              for (std::int64_t j = 0; j < n; ++j) {
                                                  pg[i * n + j] += self.grad[i * total + c0 + j];
                                              }
                                          }
                                      }
                                      c0 += n;
                                  }
                              });
}

// Pack per-step vectors [c] into a [c x t_len] matrix, one column per step.
template <typename T>
Tensor<T> stack_cols(const std::vector<Tensor<T>>& cols) {
    if (cols.empty()) throw ShapeError("stack_cols: empty input");
    const std::int64_t c = cols[0].numel();
    const std::int64_t t_len = static_cast<std::int64_t>(cols.size());
    std::vector<T> out(static_cast<std::size_t>(c * t_len));
    for (std::int64_t t = 0; t < t_len; ++t) {
        if (cols[t].numel() != c) throw ShapeError("stack_cols: length mismatch");
        const auto& v = cols[t].data();
        for (std::int64_t i = 0; i < c; ++i) out[i * t_len + t] = v[i];
    }
    return detail::make_op<T>("stack_cols", {c, t_len}, std::move(out), cols,
                              [c, t_len](Node<T>& self) {
                                  for (std::int64_t t = 0; t < t_len; ++t) {
                                      if (!detail::wants_grad(self, t)) continue;
                                      auto& pg = self.parents[t]->grad;
                                      for (std::int64_t i = 0; i < c; ++i) {
                                          pg[i] += self.grad[i * t_len + t];
                                      }
                                  }
                              });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    for (const T v : x.data()) acc += v;
    return detail::make_op<T>("sum", {1}, {acc}, {x}, [](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        auto& xg = self.parents[0]->grad;
        const T g = self.grad[0];
        for (auto& v : xg) v += g;
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    const std::int64_t n = x.numel();
    T acc = T(0);
    for (const T v : x.data()) acc += v;
    acc /= static_cast<T>(n);
    return detail::make_op<T>("mean", {1}, {acc}, {x}, [n](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        auto& xg = self.parents[0]->grad;
        const T g = self.grad[0] / static_cast<T>(n);
        for (auto& v : xg) v += g;
    });
}

// Mean negative log-likelihood of the true class over rows of P [t_len x 2],
// with the probability clamped below at eps before the log.
template <typename T>
Tensor<T> nll_mean(const Tensor<T>& probs, const std::vector<std::uint8_t>& labels, T eps) {
    detail::require_2d(probs, "nll_mean");
    const std::int64_t t_len = probs.dim(0), c = probs.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != t_len) {
        throw ShapeError("nll_mean: label length mismatch");
    }
    for (const auto y : labels) {
        if (y >= c) throw ShapeError("nll_mean: label out of class range");
    }
    T acc = T(0);
    const T* p = probs.data().data();
    for (std::int64_t t = 0; t < t_len; ++t) {
        const T pt = p[t * c + labels[t]];
        acc += -std::log(pt > eps ? pt : eps);
    }
    acc /= static_cast<T>(t_len);
    return detail::make_op<T>("nll_mean", {1}, {acc}, {probs},
                              [t_len, c, labels, eps](Node<T>& self) {
                                  if (!detail::wants_grad(self, 0)) return;
                                  const auto& pv = self.parents[0]->value;
                                  auto& pg = self.parents[0]->grad;
                                  const T g = self.grad[0] / static_cast<T>(t_len);
                                  for (std::int64_t t = 0; t < t_len; ++t) {
                                      const T pt = pv[t * c + labels[t]];
                                      if (pt > eps) pg[t * c + labels[t]] -= g / pt;
                                  }
                              });
}

// Mean squared difference of the error-class probability (column 1) between
// adjacent rows of P [t_len x 2], normalized by t_len.
template <typename T>
Tensor<T> smooth_mse(const Tensor<T>& probs) {
    detail::require_2d(probs, "smooth_mse");
    const std::int64_t t_len = probs.dim(0), c = probs.dim(1);
    if (c < 2) throw ShapeError("smooth_mse: expected at least 2 classes");
    T acc = T(0);
    const T* p = probs.data().data();
    for (std::int64_t t = 1; t < t_len; ++t) {
        const T d = p[t * c + 1] - p[(t - 1) * c + 1];
        acc += d * d;
    }
    acc /= static_cast<T>(t_len);
    return detail::make_op<T>("smooth_mse", {1}, {acc}, {probs}, [t_len, c](Node<T>& self) {
        if (!detail::wants_grad(self, 0)) return;
        const auto& pv = self.parents[0]->value;
        auto& pg = self.parents[0]->grad;
        const T g = self.grad[0] * T(2) / static_cast<T>(t_len);
        for (std::int64_t t = 1; t < t_len; ++t) {
            const T d = pv[t * c + 1] - pv[(t - 1) * c + 1];
            pg[t * c + 1] += g * d;
            pg[(t - 1) * c + 1] -= g * d;
        }
    });
}

// Scaled dot-product attention: softmax(Q K^T / sqrt(d)) V.
template <typename T>
Tensor<T> attention_block(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
    detail::require_2d(q, "attention_block");
    detail::require_2d(k, "attention_block");
    detail::require_2d(v, "attention_block");
    if (q.dim(1) != k.dim(1)) {
        throw ShapeError("attention_block: query/key dimension mismatch " +
                         shape_str(q.shape()) + " vs " + shape_str(k.shape()));
    }
    if (k.dim(0) != v.dim(0)) {
        throw ShapeError("attention_block: key/value row count mismatch");
    }
    Tensor<T> logits = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
    return matmul(softmax_lastdim(logits), v);
}

}  // namespace cog::ops
