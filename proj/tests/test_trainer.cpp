#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cog/dataio.hpp"
#include "cog/trainer.hpp"
#include "test_support.hpp"

using cog::Tensor;

namespace {

cog::ModelConfig trainer_cfg() {
    cog::ModelConfig cfg;
    cfg.d_vis = 10;
    cfg.d_text = 8;
    cfg.num_prompts = 3;
    cfg.window = 5;
    cfg.width = 8;
    cfg.heads = 2;
    cfg.slow_stages = 1;
    cfg.fast_stages = 1;
    cfg.slow_layers = 2;
    cfg.fast_initial_layers = 2;
    cfg.fast_refine_layers = 2;
    return cfg;
}

cog::SynthConfig trainer_data_cfg() {
    cog::SynthConfig cfg;
    cfg.seed = 50;
    cfg.num_videos = 2;
    cfg.min_length = 40;
    cfg.max_length = 48;
    cfg.num_gestures = 3;
    cfg.d_vis = 10;
    cfg.d_text = 8;
    cfg.noise_sigma = 0.2;
    cfg.transition = cog::default_transition(3);
    cfg.exec_error_rates = {0.3, 0.1, 0.2};
    cfg.exec_dur_min = 1;
    cfg.exec_dur_max = 3;
    cfg.proc_error_rate = 0.1;
    cfg.proc_dur_min = 4;
    cfg.proc_dur_max = 8;
    return cfg;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("first Adam step moves parameters by about lr in gradient direction") {
    auto p = Tensor<float>::from({3}, {1.0f, 2.0f, 3.0f}, true);
    std::vector<cog::ParamDef<float>> params{{"p", p, cog::ParamInit::FanIn, 1}};
    // plant a gradient by hand
    p.node()->grad = {0.5f, -2.0f, 0.0f};
    cog::AdamState<float> st;
    cog::adam_step(params, st, 1e-3);
    CHECK(p.data()[0] == Catch::Approx(1.0 - 1e-3).epsilon(1e-4));
    CHECK(p.data()[1] == Catch::Approx(2.0 + 1e-3).epsilon(1e-4));
    CHECK(p.data()[2] == Catch::Approx(3.0).margin(1e-9));
}

TEST_CASE("zero gradients leave parameters unchanged across steps") {
    auto p = Tensor<float>::from({2}, {4.0f, -1.0f}, true);
    p.node()->grad = {0.0f, 0.0f};
    std::vector<cog::ParamDef<float>> params{{"p", p, cog::ParamInit::FanIn, 1}};
    cog::AdamState<float> st;
    for (int i = 0; i < 5; ++i) cog::adam_step(params, st, 1e-2);
    CHECK(p.data() == std::vector<float>{4.0f, -1.0f});
}

TEST_CASE("non-finite gradients abort the step before any update") {
    auto p = Tensor<float>::from({2}, {1.0f, 1.0f}, true);
    p.node()->grad = {1.0f, std::numeric_limits<float>::quiet_NaN()};
    std::vector<cog::ParamDef<float>> params{{"p", p, cog::ParamInit::FanIn, 1}};
    cog::AdamState<float> st;
    CHECK_THROWS_AS(cog::adam_step(params, st, 1e-2), cog::NumericError);
    CHECK(p.data() == std::vector<float>{1.0f, 1.0f});
    CHECK(st.step == 0);
}

TEST_CASE("init_params is seed-deterministic and seed-sensitive") {
    auto cfg = trainer_cfg();
    cog::CogModel<float> a(cfg), b(cfg), c(cfg);
    a.init_params(7);
    b.init_params(7);
    c.init_params(8);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.params().size(); ++i) {
        same = same && a.params()[i].tensor.data() == b.params()[i].tensor.data();
        differ = differ || a.params()[i].tensor.data() != c.params()[i].tensor.data();
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("zero-initialized heads give uniform initial predictions") {
    auto cfg = trainer_cfg();
    cog::CogModel<float> model(cfg);
    model.init_params(9);
    std::mt19937_64 rng(10);
    std::vector<float> fr(20 * cfg.d_vis);
    std::uniform_real_distribution<float> dist(-1.f, 1.f);
    for (auto& v : fr) v = dist(rng);
    std::vector<float> bk(cfg.num_prompts * cfg.d_text);
    for (auto& v : bk) v = dist(rng);
    cog::NoGradGuard ng;
    auto pyr = model.forward(Tensor<float>::from({20, cfg.d_vis}, fr),
                             Tensor<float>::from({cfg.num_prompts, cfg.d_text}, bk));
    for (const auto& level : pyr.slow) {
        for (const float v : level.data()) CHECK(v == 0.5f);
    }
}

TEST_CASE("a small-lr Adam step decreases the loss on a frozen batch") {
    auto data = cog::synth_generate(trainer_data_cfg());
    auto cfg = trainer_cfg();
    cog::CogModel<double> model(cfg);
    model.init_params(11, /*randomize_heads=*/true);
    auto frames = cog::frames_tensor<double>(data.videos[0]);
    auto bank = cog::bank_tensor<double>(data.prompts);
    cog::TrainConfig tc;
    tc.learning_rate = 1e-6;

    cog::LossConfig lc;
    auto loss_of = [&]() {
        cog::NoGradGuard ng;
        auto pyr = model.forward(frames, bank);
        return cog::total_loss(pyr, cog::make_label_pyramid(data.videos[0].labels, pyr), lc)
            .item();
    };
    const double before = loss_of();
    cog::AdamState<double> adam;
    cog::train_step(model, adam, tc, frames, data.videos[0].labels, bank);
    CHECK(loss_of() < before);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
    auto data = cog::synth_generate(trainer_data_cfg());
    auto run = [&](std::uint64_t seed) {
        auto cfg = trainer_cfg();
        cog::CogModel<float> model(cfg);
        model.init_params(seed);
        cog::AdamState<float> adam;
        cog::TrainConfig tc;
        tc.seed = seed;
        std::vector<double> history;
        cog::train_epochs(model, adam, tc, data.videos, data.prompts, 2, history);
        return std::make_pair(history, cog::make_checkpoint(model, adam, tc, 2, history));
    };
    auto [h1, ck1] = run(21);
    auto [h2, ck2] = run(21);
    CHECK(h1 == h2);
    REQUIRE(ck1.params.size() == ck2.params.size());
    for (std::size_t i = 0; i < ck1.params.size(); ++i) {
        CHECK(ck1.params[i].value == ck2.params[i].value);
        CHECK(ck1.params[i].m == ck2.params[i].m);
        CHECK(ck1.params[i].v == ck2.params[i].v);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly through files") {
    auto data = cog::synth_generate(trainer_data_cfg());
    auto cfg = trainer_cfg();
    cog::CogModel<float> model(cfg);
    model.init_params(31);
    cog::AdamState<float> adam;
    cog::TrainConfig tc;
    std::vector<double> history;
    cog::train_epochs(model, adam, tc, data.videos, data.prompts, 1, history);
    auto ck = cog::make_checkpoint(model, adam, tc, 1, history, &data.prompts);

    const auto path = temp_path("cog_test_ck.bin");
    cog::save_checkpoint(ck, path);
    const auto path2 = temp_path("cog_test_ck2.bin");
    cog::save_checkpoint(cog::load_checkpoint(path), path2);

    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("checkpoint load restores bit-identical forward outputs") {
    auto data = cog::synth_generate(trainer_data_cfg());
    auto cfg = trainer_cfg();
    cog::CogModel<float> model(cfg);
    model.init_params(33);
    cog::AdamState<float> adam;
    cog::TrainConfig tc;
    std::vector<double> history;
    cog::train_epochs(model, adam, tc, data.videos, data.prompts, 1, history);

    auto frames = cog::frames_tensor<float>(data.videos[0]);
    auto bank = cog::bank_tensor<float>(data.prompts);
    cog::NoGradGuard ng;
    auto before = model.forward(frames, bank).slow[0].data();

    const auto path = temp_path("cog_test_ck3.bin");
    cog::save_checkpoint(cog::make_checkpoint(model, adam, tc, 1, history), path);
    auto ck = cog::load_checkpoint(path);
    cog::CogModel<float> restored(ck.model_cfg);
    cog::apply_checkpoint(ck, restored);
    auto after = restored.forward(frames, bank).slow[0].data();
    CHECK(before == after);
    std::filesystem::remove(path);
}

TEST_CASE("resume from checkpoint reproduces the uninterrupted trajectory") {
    auto data = cog::synth_generate(trainer_data_cfg());
    auto cfg = trainer_cfg();
    cog::TrainConfig tc;

    // uninterrupted: 4 epochs
    cog::CogModel<float> full(cfg);
    full.init_params(41);
    cog::AdamState<float> adam_full;
    std::vector<double> hist_full;
    cog::train_epochs(full, adam_full, tc, data.videos, data.prompts, 4, hist_full);

    // interrupted: 2 epochs, checkpoint, reload, 2 more
    cog::CogModel<float> part(cfg);
    part.init_params(41);
    cog::AdamState<float> adam_part;
    std::vector<double> hist_part;
    cog::train_epochs(part, adam_part, tc, data.videos, data.prompts, 2, hist_part);
    const auto path = temp_path("cog_test_resume.bin");
    cog::save_checkpoint(cog::make_checkpoint(part, adam_part, tc, 2, hist_part), path);

    auto ck = cog::load_checkpoint(path);
    cog::CogModel<float> resumed(ck.model_cfg);
    cog::AdamState<float> adam_resumed;
    cog::apply_checkpoint(ck, resumed, &adam_resumed);
    auto hist_resumed = ck.loss_history;
    cog::train_epochs(resumed, adam_resumed, tc, data.videos, data.prompts, 2, hist_resumed);

    CHECK(hist_resumed == hist_full);
    for (std::size_t i = 0; i < full.params().size(); ++i) {
        CHECK(full.params()[i].tensor.data() == resumed.params()[i].tensor.data());
    }
    std::filesystem::remove(path);
}

TEST_CASE("zero epochs yields an initialized checkpoint with empty history") {
    auto cfg = trainer_cfg();
    cog::CogModel<float> model(cfg);
    model.init_params(51);
    cog::AdamState<float> adam;
    cog::TrainConfig tc;
    auto ck = cog::make_checkpoint(model, adam, tc, 0, {});
    CHECK(ck.loss_history.empty());
    CHECK(ck.epoch == 0);
    CHECK(ck.params.size() == model.params().size());
}

TEST_CASE("training rejects videos without labels") {
    auto data = cog::synth_generate(trainer_data_cfg());
    data.videos[0].has_labels = false;
    auto cfg = trainer_cfg();
    cog::CogModel<float> model(cfg);
    model.init_params(52);
    cog::AdamState<float> adam;
    cog::TrainConfig tc;
    std::vector<double> history;
    CHECK_THROWS_AS(cog::train_epochs(model, adam, tc, data.videos, data.prompts, 1, history),
                    cog::ConfigError);
}
