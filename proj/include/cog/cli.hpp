#pragma once

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cog/dataio.hpp"
#include "cog/eval.hpp"
#include "cog/gradcheck.hpp"
#include "cog/model.hpp"
#include "cog/stream.hpp"
#include "cog/trainer.hpp"

namespace cog::cli {

inline int env_threads(std::size_t jobs) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("COG_THREADS")) {
        try {
            n = std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw ConfigError("COG_THREADS must be a positive integer");
        }
    }
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), jobs));
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.num_videos = j.value("num_videos", cfg.num_videos);
    cfg.min_length = j.value("min_length", cfg.min_length);
    cfg.max_length = j.value("max_length", cfg.max_length);
    cfg.num_gestures = j.value("num_gestures", cfg.num_gestures);
    cfg.d_vis = j.value("d_vis", cfg.d_vis);
    cfg.d_text = j.value("d_text", cfg.d_text);
    cfg.fps = j.value("fps", cfg.fps);
    cfg.cluster_separation = j.value("cluster_separation", cfg.cluster_separation);
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.proc_error_rate = j.value("proc_error_rate", cfg.proc_error_rate);
    cfg.error_offset = j.value("error_offset", cfg.error_offset);
    cfg.prompt_noise = j.value("prompt_noise", cfg.prompt_noise);
    if (j.contains("exec_duration")) {
        cfg.exec_dur_min = j["exec_duration"].at(0).get<std::int64_t>();
        cfg.exec_dur_max = j["exec_duration"].at(1).get<std::int64_t>();
    }
    if (j.contains("proc_duration")) {
        cfg.proc_dur_min = j["proc_duration"].at(0).get<std::int64_t>();
        cfg.proc_dur_max = j["proc_duration"].at(1).get<std::int64_t>();
    }
    if (j.contains("exec_error_rates")) {
        cfg.exec_error_rates = j["exec_error_rates"].get<std::vector<double>>();
    } else {
        cfg.exec_error_rates.assign(static_cast<std::size_t>(cfg.num_gestures), 0.2);
    }
    if (j.contains("transition")) {
        cfg.transition.clear();
        for (const auto& row : j["transition"]) {
            for (const auto& v : row) cfg.transition.push_back(v.get<double>());
        }
    } else {
        cfg.transition = default_transition(cfg.num_gestures);
    }
    return cfg;
}

namespace detail {

struct TrainFlags {
    std::string data, prompts, out, ablate;
    double lr = 5e-4, lambda = 0.15;
    std::int64_t epochs = 50, window = 40, stages = 3, pool_k = 4;
    std::int64_t width = 64, heads = 4;
    std::uint64_t seed = 1;
};

inline ModelConfig model_config_from(const TrainFlags& f, std::int64_t d_vis,
                                     std::int64_t d_text, std::int64_t j_count) {
    ModelConfig mc;
    mc.d_vis = d_vis;
    mc.d_text = d_text;
    mc.num_prompts = j_count;
    mc.window = f.window;
    mc.width = f.width;
    mc.heads = f.heads;
    mc.slow_stages = f.stages;
    mc.fast_stages = f.stages;
    mc.pool_k = f.pool_k;
    mc.smooth_lambda = f.lambda;
    return apply_ablation(mc, f.ablate);
}

inline int cmd_train(const TrainFlags& f) {
    auto videos = load_dataset(f.data);
    const std::int64_t d_vis = videos[0].d_vis;
    for (const auto& v : videos) {
        if (v.d_vis != d_vis) {
            throw ConfigError("dataset mixes embedding dimensions (" + std::to_string(d_vis) +
                              " vs " + std::to_string(v.d_vis) + " in '" + v.id + "')");
        }
    }
    GesturePromptBank bank;
    const bool needs_bank = f.ablate != "gvr";
    if (needs_bank) {
        if (f.prompts.empty()) {
            throw ConfigError("train: --prompts is required unless --ablate gvr");
        }
        bank = read_prompt_bank(f.prompts);
    } else {
        bank.count = 1;
        bank.d_text = 1;
        bank.texts = {render_prompt("idle")};
        bank.vectors = {0.0f};
    }
    ModelConfig mc = model_config_from(f, d_vis, needs_bank ? bank.d_text : 512,
                                       needs_bank ? bank.count : 15);
    TrainConfig tc;
    tc.learning_rate = f.lr;
    tc.epochs = f.epochs;
    tc.seed = f.seed;
    tc.validate();

    CogModel<float> model(mc);
    model.init_params(tc.seed);
    AdamState<float> adam;
    std::vector<double> history;
    if (f.epochs > 0) {
        train_epochs(model, adam, tc, videos, bank, f.epochs, history,
                     [](std::int64_t epoch, double loss) {
                         std::printf("epoch %3lld  mean loss %.6f\n",
                                     static_cast<long long>(epoch), loss);
                         std::fflush(stdout);
                     });
    }
    auto ck = make_checkpoint(model, adam, tc, f.epochs, history, needs_bank ? &bank : nullptr);
    save_checkpoint(ck, f.out);
    std::printf("checkpoint written to %s (%zu parameters, %zu epochs)\n", f.out.c_str(),
                ck.params.size(), history.size());
    return 0;
}

struct LoadedModel {
    Checkpoint ck;
    std::unique_ptr<CogModel<float>> model;
    GesturePromptBank bank;
};

inline LoadedModel load_model(const std::string& ckpt_path, const std::string& prompts_path) {
    LoadedModel lm;
    lm.ck = load_checkpoint(ckpt_path);
    lm.model = std::make_unique<CogModel<float>>(lm.ck.model_cfg);
    apply_checkpoint(lm.ck, *lm.model);
    if (!prompts_path.empty()) {
        lm.bank = read_prompt_bank(prompts_path);
    } else if (lm.ck.has_bank) {
        lm.bank = lm.ck.bank;
    } else if (lm.ck.model_cfg.use_gvr) {
        throw ConfigError("checkpoint carries no prompt bank; pass --prompts");
    }
    return lm;
}

inline std::vector<std::vector<std::uint8_t>> predict_videos(
    const CogModel<float>& model, const GesturePromptBank& bank,
    const std::vector<EmbeddingSequence>& videos, double threshold) {
    std::vector<std::vector<std::uint8_t>> preds(videos.size());
    const auto bank_t =
        model.config().use_gvr ? bank_tensor<float>(bank) : Tensor<float>::zeros({1, 1});
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        NoGradGuard ng;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= videos.size()) return;
            auto frames = frames_tensor<float>(videos[i]);
            auto pyr = model.forward(frames, bank_t);
            auto probs = CogModel<float>::final_frame_error_probs(pyr, model.config());
            std::vector<std::uint8_t> pred(probs.size());
            for (std::size_t t = 0; t < probs.size(); ++t) {
                pred[t] = static_cast<double>(probs[t]) >= threshold ? 1 : 0;
            }
            preds[i] = std::move(pred);
        }
    };
    const int n_threads = env_threads(videos.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return preds;
}

struct EvalFlags {
    std::string ckpt, data, report, prompts, ribbon_dir;
    bool loso = false;
    double threshold = 0.5;
};

inline int cmd_eval(const EvalFlags& f) {
    auto lm = load_model(f.ckpt, f.prompts);
    auto videos = load_dataset(f.data);
    for (const auto& v : videos) {
        if (v.d_vis != lm.ck.model_cfg.d_vis) {
            throw ConfigError("config mismatch: checkpoint expects d_vis " +
                              std::to_string(lm.ck.model_cfg.d_vis) + " but '" + v.id +
                              "' has " + std::to_string(v.d_vis));
        }
        if (!v.has_labels) {
            throw ConfigError("eval: video '" + v.id + "' has no frame labels");
        }
    }
    if (f.loso) {
        for (const auto& v : videos) {
            if (v.surgeon < 0 || v.trial < 1) {
                throw ConfigError("--loso requires surgeon/trial metadata for every video");
            }
        }
    }
    const auto preds = predict_videos(*lm.model, lm.bank, videos, f.threshold);

    if (!f.ribbon_dir.empty()) {
        std::filesystem::create_directories(f.ribbon_dir);
        for (std::size_t i = 0; i < videos.size(); ++i) {
            ribbon_export(preds[i], videos[i].labels,
                          (std::filesystem::path(f.ribbon_dir) / (videos[i].id + "_ribbon.csv"))
                              .string());
        }
    }

    const auto& mc = lm.ck.model_cfg;
    auto row_for = [&](const std::string& scope, const std::vector<std::size_t>& idx) {
        ReportRow row;
        row.scope = scope;
        ConfusionCounts frame_c, window_c;
        bool any_window = false;
        for (const auto i : idx) {
            frame_c.add(count_confusion(preds[i], videos[i].labels));
            const auto windows = windowize(videos[i].length(), mc.fps);
            if (!windows.empty()) {
                any_window = true;
                window_c.add(count_confusion(window_labels(preds[i], windows),
                                             window_labels(videos[i].labels, windows)));
            }
        }
        row.frame = metrics_from_counts(frame_c);
        if (any_window) {
            row.has_window = true;
            row.window = metrics_from_counts(window_c);
        }
        return row;
    };

    EvalReport report;
    for (std::size_t i = 0; i < videos.size(); ++i) {
        report.rows.push_back(row_for(videos[i].id, {i}));
    }
    if (f.loso) {
        std::vector<VideoKey> keys;
        for (const auto& v : videos) keys.push_back({v.id, v.surgeon, v.trial});
        auto folds = loso_folds(keys);
        std::vector<ReportRow> fold_rows;
        for (const auto& fold : folds) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < videos.size(); ++i) {
                if (videos[i].trial == fold.held_out_trial) idx.push_back(i);
            }
            fold_rows.push_back(
                row_for("trial" + std::to_string(fold.held_out_trial) + "_out", idx));
        }
        for (const auto& r : fold_rows) report.rows.push_back(r);
        cog::detail::append_stats_rows(report, fold_rows);
    } else {
        std::vector<std::size_t> all(videos.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        report.rows.push_back(row_for("all", all));
    }
    write_report_csv(report, f.report);
    std::fputs(render_report_table(report).c_str(), stdout);
    return 0;
}

struct StreamFlags {
    std::string ckpt, in, out, prompts;
    double threshold = 0.5;
};

inline int cmd_stream(const StreamFlags& f) {
    auto lm = load_model(f.ckpt, f.prompts);
    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (f.in != "-") {
        file_in.open(f.in, std::ios::binary);
        if (!file_in) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + f.in + "'");
        in = &file_in;
    }
    std::ofstream file_out;
    std::ostream* out = &std::cout;
    if (f.out != "-") {
        file_out.open(f.out);
        if (!file_out) {
            throw IoError(IoError::Kind::OpenFailed, "cannot open '" + f.out + "' for writing");
        }
        out = &file_out;
    }
    EmbeddingStreamReader reader(*in);
    if (reader.d_vis() != lm.ck.model_cfg.d_vis) {
        throw ConfigError("config mismatch: checkpoint expects d_vis " +
                          std::to_string(lm.ck.model_cfg.d_vis) + " but stream has " +
                          std::to_string(reader.d_vis()));
    }
    StreamEngine<float> engine(*lm.model, lm.bank, f.threshold);
    (*out) << "index,p_error,decision,latency_us\n";
    std::vector<float> frame;
    double total_us = 0;
    std::int64_t frames = 0;
    char line[128];
    while (reader.next_frame(frame)) {
        const auto r = engine.push_frame(frame);
        std::snprintf(line, sizeof(line), "%lld,%.9g,%d,%.2f\n",
                      static_cast<long long>(r.frame_index), r.p_error,
                      r.decision ? 1 : 0, r.latency_us);
        (*out) << line;
        total_us += r.latency_us;
        ++frames;
    }
    engine.close();
    if (!*out) throw IoError(IoError::Kind::WriteFailed, "failed writing stream output");
    if (f.out != "-") {
        std::printf("streamed %lld frames, mean latency %.1f us\n",
                    static_cast<long long>(frames), frames ? total_us / frames : 0.0);
    }
    return 0;
}

inline int cmd_bench(const std::string& ckpt_path, std::int64_t frames) {
    auto lm = load_model(ckpt_path, "");
    StreamEngine<float> engine(*lm.model, lm.bank);
    const auto st = bench_stream(engine, frames, 1);
    std::printf("frames          %lld\n", static_cast<long long>(st.frames));
    std::printf("mean latency    %.3f ms\n", st.mean_us / 1000.0);
    std::printf("p50 latency     %.3f ms\n", st.p50_us / 1000.0);
    std::printf("p99 latency     %.3f ms\n", st.p99_us / 1000.0);
    std::printf("p99 first 100   %.3f ms\n", st.p99_first_100_us / 1000.0);
    std::printf("p99 last 100    %.3f ms\n", st.p99_last_100_us / 1000.0);
    return 0;
}

inline int cmd_grad_check(std::uint64_t seed) {
    const auto r = run_grad_check(seed);
    std::printf("max relative gradient error: %.3e (%lld coordinates)\n", r.max_rel_error,
                static_cast<long long>(r.coords_checked));
    return r.max_rel_error < 1e-4 ? 0 : 4;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args) {
    CLI::App app{"Chain-of-gesture surgical error detection on embedding streams"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic gesture-structured dataset");
    std::string synth_config, synth_out;
    synth->add_option("--config", synth_config, "synthesis config JSON (artifact format)")
        ->required();
    synth->add_option("--out", synth_out, "output dataset directory")->required();

    auto* train = app.add_subcommand("train", "Train a model on a labeled dataset");
    detail::TrainFlags tf;
    train->add_option("--data", tf.data, "dataset directory (meta.csv + .coge files)")->required();
    train->add_option("--prompts", tf.prompts, "gesture prompt bank (.cogp)");
    train->add_option("--out", tf.out, "output checkpoint path")->required();
    train->add_option("--lr", tf.lr, "Adam learning rate [default 5e-4, reference configuration]");
    train->add_option("--epochs", tf.epochs, "training epochs [default 50, reference configuration]");
    train->add_option("--lambda", tf.lambda,
                      "smoothing loss weight [default 0.15, reference configuration]");
    train->add_option("--n", tf.window,
                      "visual window length [default 40, reference configuration]");
    train->add_option("--stages", tf.stages,
                      "pooled slow stages M = fast refinements N [default 3, reference configuration]");
    train->add_option("--k", tf.pool_k,
                      "slow-path pooling factor [default 4, reference configuration]");
    train->add_option("--seed", tf.seed, "RNG seed [default 1, artifact default]");
    train->add_option("--width", tf.width,
                      "model width [default 64, reference configuration]");
    train->add_option("--heads", tf.heads,
                      "attention heads [default 4, artifact default]");
    train->add_option("--ablate", tf.ablate, "drop a module: gvr|mstr|slow|fast")
        ->check(CLI::IsMember({"gvr", "mstr", "slow", "fast"}));

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled dataset");
    detail::EvalFlags ef;
    eval_cmd->add_option("--ckpt", ef.ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", ef.data, "dataset directory")->required();
    eval_cmd->add_option("--report", ef.report, "output report CSV")->required();
    eval_cmd->add_option("--prompts", ef.prompts, "prompt bank override (.cogp)");
    eval_cmd->add_option("--ribbon", ef.ribbon_dir, "directory for per-video ribbon CSVs");
    eval_cmd->add_option("--threshold", ef.threshold,
                         "decision threshold [default 0.5, artifact default]");
    eval_cmd->add_flag("--loso", ef.loso, "leave-one-supertrial-out fold reporting");

    auto* stream_cmd = app.add_subcommand("stream", "Frame-incremental inference on a stream");
    detail::StreamFlags sf;
    stream_cmd->add_option("--ckpt", sf.ckpt, "checkpoint path")->required();
    stream_cmd->add_option("--in", sf.in, "input embedding stream (.coge path or '-')")
        ->required();
    stream_cmd->add_option("--out", sf.out, "output CSV path or '-'")->required();
    stream_cmd->add_option("--prompts", sf.prompts, "prompt bank override (.cogp)");
    stream_cmd->add_option("--threshold", sf.threshold,
                           "decision threshold [default 0.5, artifact default]");

    auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient verification");
    std::uint64_t grad_seed = 1;
    grad->add_option("--seed", grad_seed, "RNG seed [default 1, artifact default]");

    auto* bench = app.add_subcommand("bench", "Per-frame latency benchmark");
    std::string bench_ckpt;
    std::int64_t bench_frames = 10000;
    bench->add_option("--ckpt", bench_ckpt, "checkpoint path")->required();
    bench->add_option("--frames", bench_frames, "frames to push [default 10000, artifact default]");

    std::vector<char*> argv;
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.push_back("cog");
    for (const auto& a : args) storage.push_back(a);
    for (auto& s : storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) {
            std::ifstream in(synth_config);
            if (!in) {
                throw IoError(IoError::Kind::OpenFailed, "cannot open '" + synth_config + "'");
            }
            nlohmann::json j;
            in >> j;
            auto ds = synth_generate(synth_config_from_json(j));
            save_dataset(ds, synth_out);
            std::int64_t frames = 0, errors = 0;
            for (const auto& v : ds.videos) {
                frames += v.length();
                for (const auto y : v.labels) errors += y;
            }
            std::printf("wrote %zu videos, %lld frames (%.1f%% erroneous) to %s\n",
                        ds.videos.size(), static_cast<long long>(frames),
                        frames ? 100.0 * static_cast<double>(errors) / static_cast<double>(frames)
                               : 0.0,
                        synth_out.c_str());
            return 0;
        }
        if (*train) return detail::cmd_train(tf);
        if (*eval_cmd) return detail::cmd_eval(ef);
        if (*stream_cmd) return detail::cmd_stream(sf);
        if (*grad) return detail::cmd_grad_check(grad_seed);
        if (*bench) return detail::cmd_bench(bench_ckpt, bench_frames);
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 0;
}

}  // namespace cog::cli
