#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cog/model.hpp"
#include "cog/objective.hpp"
#include "cog/trainer.hpp"

namespace cog {

struct GradCheckResult {
    double max_rel_error = 0;
    std::int64_t coords_checked = 0;
};

// End-to-end central-difference check of the full model gradient on a small
// random instance (64-bit). Prediction heads are randomly initialized here;
// zero heads would zero out every upstream gradient. Relative error uses a
// 1e-4 denominator floor, so tiny gradients are compared absolutely.
inline GradCheckResult run_grad_check(std::uint64_t seed, double h = 1e-5,
                                      std::int64_t coords_per_param = 4) {
    ModelConfig mc;
    mc.d_vis = 16;
    mc.d_text = 12;
    mc.num_prompts = 3;
    mc.window = 5;
    mc.width = 8;
    mc.heads = 2;
    mc.slow_stages = 1;
    mc.fast_stages = 1;
    const std::int64_t t_len = 20;

    CogModel<double> model(mc);
    model.init_params(seed, /*randomize_heads=*/true);

    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> frames(static_cast<std::size_t>(t_len * mc.d_vis));
    for (auto& v : frames) v = dist(rng);
    auto frames_t = Tensor<double>::from({t_len, mc.d_vis}, std::move(frames));
    std::vector<double> bank_data(static_cast<std::size_t>(mc.num_prompts * mc.d_text));
    for (auto& v : bank_data) v = dist(rng);
    auto bank_t = Tensor<double>::from({mc.num_prompts, mc.d_text}, std::move(bank_data));
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(t_len));
    std::bernoulli_distribution coin(0.5);
    for (auto& y : labels) y = coin(rng) ? 1 : 0;

    LossConfig lc;
    lc.smooth_lambda = mc.smooth_lambda;
    auto loss_value = [&]() {
        NoGradGuard ng;
        auto pyr = model.forward(frames_t, bank_t);
        return total_loss(pyr, make_label_pyramid(labels, pyr), lc).item();
    };

    model.zero_grad();
    {
        auto pyr = model.forward(frames_t, bank_t);
        backward(total_loss(pyr, make_label_pyramid(labels, pyr), lc));
    }

    GradCheckResult result;
    for (auto& def : model.params()) {
        auto& data = def.tensor.mutable_data();
        const auto& grad = def.tensor.grad();
        const std::int64_t n = static_cast<std::int64_t>(data.size());
        const std::int64_t step = std::max<std::int64_t>(1, n / coords_per_param);
        for (std::int64_t i = 0; i < n; i += step) {
            const double saved = data[i];
            data[i] = saved + h;
            const double up = loss_value();
            data[i] = saved - h;
            const double down = loss_value();
            data[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double ad = grad.empty() ? 0.0 : grad[i];
            const double denom = std::max({std::abs(ad), std::abs(fd), 1e-4});
            result.max_rel_error = std::max(result.max_rel_error, std::abs(ad - fd) / denom);
            ++result.coords_checked;
        }
    }
    return result;
}

}  // namespace cog
