#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cog/model.hpp"
#include "cog/mstr.hpp"
#include "test_support.hpp"

using cog::Tensor;
namespace ops = cog::ops;

namespace {

cog::ModelConfig tiny_cfg(std::int64_t stages = 2, std::int64_t layers = 2,
                          std::int64_t pool_k = 4) {
    cog::ModelConfig cfg;
    cfg.d_vis = 6;
    cfg.d_text = 5;
    cfg.num_prompts = 2;
    cfg.window = 4;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.slow_stages = stages;
    cfg.fast_stages = stages;
    cfg.pool_k = pool_k;
    cfg.slow_layers = layers;
    cfg.fast_initial_layers = layers;
    cfg.fast_refine_layers = layers;
    return cfg;
}

template <typename T>
cog::PredictionPyramid<T> forward_cohesive(const cog::CogModel<T>& model,
                                           const Tensor<T>& cohesive) {
    return cog::mstr_forward(cohesive, model.mstr(), model.config());
}

}  // namespace

TEST_CASE("tcn_stage with zero residual updates is a pass-through") {
    auto cfg = tiny_cfg();
    cog::CogModel<double> model(cfg);
    model.init_params(21);
    // stage without input projection: slow_pooled[0] takes width channels
    auto stage = model.mstr().slow_pooled[0];
    for (auto& layer : stage.layers) {
        std::fill(layer.point_w.mutable_data().begin(), layer.point_w.mutable_data().end(), 0.0);
        std::fill(layer.point_b.mutable_data().begin(), layer.point_b.mutable_data().end(), 0.0);
    }
    std::mt19937_64 rng(22);
    auto x = testsup::random_tensor(rng, {cfg.width, 9});
    auto out = cog::tcn_stage(x, stage);
    CHECK(out.data() == x.data());
}

TEST_CASE("tcn_stage output shape is width x T for any T") {
    auto cfg = tiny_cfg();
    cog::CogModel<double> model(cfg);
    model.init_params(23);
    std::mt19937_64 rng(24);
    for (const std::int64_t t_len : {1, 2, 5, 17}) {
        auto x = testsup::random_tensor(rng, {cfg.cohesive_dim(), t_len});
        auto out = cog::tcn_stage(x, model.mstr().slow_initial);
        CHECK(out.shape() == cog::Shape{cfg.width, t_len});
    }
}

TEST_CASE("10-layer doubling stage has a 2047-frame receptive field") {
    cog::ModelConfig cfg = tiny_cfg(1, 10);
    cfg.width = 4;
    cog::CogModel<double> model(cfg);
    model.init_params(25);
    auto stage = model.mstr().slow_pooled[0];
    const std::int64_t field = 1 + 2 * (1024 - 1);  // 1 + 2*(2^10 - 1) with w=3
    CHECK(field == 2047);
    const std::int64_t t_len = field + 5;
    std::mt19937_64 rng(26);
    auto x = testsup::random_tensor(rng, {cfg.width, t_len}, false, 0.5);
    auto base = cog::tcn_stage(x, stage);

    // perturbing a frame exactly `field` steps in the past leaves the output
    // at the last position unchanged; `field - 1` steps back changes it
    auto data = x.data();
    const std::int64_t last = t_len - 1;
    data[0 * t_len + (last - field)] += 10.0;
    auto out1 = cog::tcn_stage(Tensor<double>::from({cfg.width, t_len}, data), stage);
    for (std::int64_t c = 0; c < cfg.width; ++c) {
        REQUIRE(out1.data()[c * t_len + last] == base.data()[c * t_len + last]);
    }
    data = x.data();
    data[0 * t_len + (last - (field - 1))] += 10.0;
    auto out2 = cog::tcn_stage(Tensor<double>::from({cfg.width, t_len}, data), stage);
    bool changed = false;
    for (std::int64_t c = 0; c < cfg.width; ++c) {
        changed = changed || out2.data()[c * t_len + last] != base.data()[c * t_len + last];
    }
    CHECK(changed);
}

TEST_CASE("slow path lengths follow the floor recurrence") {
    auto cfg = tiny_cfg(3, 1, 4);
    cog::CogModel<double> model(cfg);
    model.init_params(27);
    std::mt19937_64 rng(28);

    SECTION("T=64 with k=4 gives 64,16,4,1") {
        auto c = testsup::random_tensor(rng, {cfg.cohesive_dim(), 64});
        auto pyr = forward_cohesive(model, c);
        REQUIRE(pyr.slow.size() == 4);
        CHECK(pyr.slow[0].dim(0) == 64);
        CHECK(pyr.slow[1].dim(0) == 16);
        CHECK(pyr.slow[2].dim(0) == 4);
        CHECK(pyr.slow[3].dim(0) == 1);
    }

    SECTION("T=538 gives 538,134,33,8 and fast 33") {
        auto c = testsup::random_tensor(rng, {cfg.cohesive_dim(), 538});
        auto pyr = forward_cohesive(model, c);
        REQUIRE(pyr.slow.size() == 4);
        CHECK(pyr.slow[0].dim(0) == 538);
        CHECK(pyr.slow[1].dim(0) == 134);
        CHECK(pyr.slow[2].dim(0) == 33);
        CHECK(pyr.slow[3].dim(0) == 8);
        REQUIRE(pyr.fast.size() == 4);
        for (const auto& p : pyr.fast) CHECK(p.dim(0) == 33);
    }
}

TEST_CASE("fast path flooring and stage count") {
    auto cfg = tiny_cfg(3, 1);
    cog::CogModel<double> model(cfg);
    model.init_params(29);
    std::mt19937_64 rng(30);

    SECTION("T=160 gives fast length 10") {
        auto pyr = forward_cohesive(model,
                                    testsup::random_tensor(rng, {cfg.cohesive_dim(), 160}));
        REQUIRE(pyr.fast.size() == 4);  // N=3 refinements plus the initial stage
        for (const auto& p : pyr.fast) CHECK(p.dim(0) == 10);
        CHECK_FALSE(pyr.fast_empty);
    }

    SECTION("T=15 floors to an empty, flagged fast path") {
        auto pyr = forward_cohesive(model,
                                    testsup::random_tensor(rng, {cfg.cohesive_dim(), 15}));
        CHECK(pyr.fast.empty());
        CHECK(pyr.fast_empty);
    }
}

TEST_CASE("degenerate T=1 input gives a single slow level") {
    auto cfg = tiny_cfg(2, 1);
    cog::CogModel<double> model(cfg);
    model.init_params(31);
    std::mt19937_64 rng(32);
    auto pyr = forward_cohesive(model, testsup::random_tensor(rng, {cfg.cohesive_dim(), 1}));
    REQUIRE(pyr.slow.size() == 1);
    CHECK(pyr.slow[0].dim(0) == 1);
    CHECK(pyr.fast_empty);
}

TEST_CASE("zero-initialized heads yield uniform predictions at every level") {
    auto cfg = tiny_cfg(2, 1);
    cog::CogModel<double> model(cfg);
    model.init_params(33);  // heads stay zero
    auto pyr = forward_cohesive(model, Tensor<double>::zeros({cfg.cohesive_dim(), 40}));
    for (const auto& level : pyr.slow) {
        for (const double v : level.data()) CHECK(v == 0.5);
    }
    for (const auto& level : pyr.fast) {
        for (const double v : level.data()) CHECK(v == 0.5);
    }
}

TEST_CASE("probability pairs sum to one at every level and step") {
    auto cfg = tiny_cfg(2, 2);
    cog::CogModel<double> model(cfg);
    model.init_params(34, /*randomize_heads=*/true);
    std::mt19937_64 rng(35);
    auto pyr = forward_cohesive(model, testsup::random_tensor(rng, {cfg.cohesive_dim(), 70}));
    auto check_level = [](const Tensor<double>& p) {
        for (std::int64_t t = 0; t < p.dim(0); ++t) {
            CHECK(p.data()[t * 2] + p.data()[t * 2 + 1] == Catch::Approx(1.0).margin(1e-6));
        }
    };
    for (const auto& p : pyr.slow) check_level(p);
    for (const auto& p : pyr.fast) check_level(p);
}

TEST_CASE("every pyramid level is causal under future perturbation") {
    auto cfg = tiny_cfg(2, 2, 2);
    cog::CogModel<double> model(cfg);
    model.init_params(36, /*randomize_heads=*/true);
    std::mt19937_64 rng(37);
    const std::int64_t t_len = 41;
    auto c = testsup::random_tensor(rng, {cfg.cohesive_dim(), t_len});
    auto base = forward_cohesive(model, c);

    const std::int64_t cut = 19;  // perturb frames > cut
    auto data = c.data();
    for (std::int64_t e = 0; e < cfg.cohesive_dim(); ++e) {
        for (std::int64_t t = cut + 1; t < t_len; ++t) data[e * t_len + t] += 1.0 + e;
    }
    auto pert = forward_cohesive(model, Tensor<double>::from({cfg.cohesive_dim(), t_len}, data));

    REQUIRE(base.slow.size() == pert.slow.size());
    for (std::size_t lvl = 0; lvl < base.slow.size(); ++lvl) {
        const std::int64_t stride = base.slow_strides[lvl];
        const std::int64_t safe = (cut + 1) / stride;  // indices with (s+1)*stride <= cut+1
        for (std::int64_t s = 0; s < safe; ++s) {
            REQUIRE(pert.slow[lvl].data()[s * 2] == base.slow[lvl].data()[s * 2]);
            REQUIRE(pert.slow[lvl].data()[s * 2 + 1] == base.slow[lvl].data()[s * 2 + 1]);
        }
    }
    REQUIRE(base.fast.size() == pert.fast.size());
    const std::int64_t safe_fast = (cut + 1) / cfg.fast_pool;
    for (std::size_t j = 0; j < base.fast.size(); ++j) {
        for (std::int64_t s = 0; s < safe_fast; ++s) {
            REQUIRE(pert.fast[j].data()[s * 2] == base.fast[j].data()[s * 2]);
            REQUIRE(pert.fast[j].data()[s * 2 + 1] == base.fast[j].data()[s * 2 + 1]);
        }
    }
}

TEST_CASE("mstr gradients match central differences") {
    auto cfg = tiny_cfg(1, 1);
    cfg.width = 4;
    cog::CogModel<double> model(cfg);
    model.init_params(38, /*randomize_heads=*/true);
    std::mt19937_64 rng(39);
    auto c = testsup::random_tensor(rng, {cfg.cohesive_dim(), 20});

    auto make_loss = [&]() {
        auto pyr = forward_cohesive(model, c);
        cog::Tensor<double> acc = ops::mean(ops::mul(pyr.slow[0], pyr.slow[0]));
        for (std::size_t i = 1; i < pyr.slow.size(); ++i) {
            acc = ops::add(acc, ops::mean(ops::mul(pyr.slow[i], pyr.slow[i])));
        }
        for (const auto& p : pyr.fast) {
            acc = ops::add(acc, ops::mean(ops::mul(p, p)));
        }
        return acc;
    };
    std::vector<Tensor<double>> leaves;
    for (const auto& def : model.params()) {
        if (def.name.rfind("mstr.", 0) == 0) leaves.push_back(def.tensor);
    }
    CHECK(testsup::max_grad_rel_error(leaves, make_loss, 1e-5, 3) < 1e-4);
}
