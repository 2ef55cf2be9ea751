#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "cog/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& child = "") const {
        return child.empty() ? path.string() : (path / child).string();
    }
};

void write_synth_config(const std::string& path, int num_videos = 5) {
    std::ofstream out(path);
    out << R"({
  "seed": 11,
  "num_videos": )" << num_videos
        << R"(,
  "min_length": 40,
  "max_length": 50,
  "num_gestures": 3,
  "d_vis": 12,
  "d_text": 8,
  "noise_sigma": 0.2,
  "exec_error_rates": [0.3, 0.1, 0.2],
  "exec_duration": [1, 3],
  "proc_error_rate": 0.1,
  "proc_duration": [4, 8]
})";
}

int run_cli(std::vector<std::string> args) { return cog::cli::run(args); }

}  // namespace

TEST_CASE("cli end-to-end: synth, train, eval, stream, bench") {
    TempDir dir("cog_cli_e2e");
    const auto cfg_path = dir.str("synth.json");
    write_synth_config(cfg_path);
    const auto data_dir = dir.str("data");

    REQUIRE(run_cli({"synth", "--config", cfg_path, "--out", data_dir}) == 0);
    REQUIRE(fs::exists(fs::path(data_dir) / "meta.csv"));
    REQUIRE(fs::exists(fs::path(data_dir) / "prompts.cogp"));

    const auto ckpt = dir.str("model.ckpt");
    REQUIRE(run_cli({"train", "--data", data_dir, "--prompts",
                     (fs::path(data_dir) / "prompts.cogp").string(), "--out", ckpt, "--epochs",
                     "1", "--n", "4", "--stages", "1", "--width", "8", "--heads", "2", "--seed",
                     "3"}) == 0);
    REQUIRE(fs::exists(ckpt));

    const auto report = dir.str("report.csv");
    REQUIRE(run_cli({"eval", "--ckpt", ckpt, "--data", data_dir, "--report", report,
                     "--loso"}) == 0);
    REQUIRE(fs::exists(report));
    std::ifstream rin(report);
    std::string line;
    bool has_mean = false;
    while (std::getline(rin, line)) has_mean = has_mean || line.rfind("mean,", 0) == 0;
    CHECK(has_mean);

    const auto stream_out = dir.str("stream.csv");
    REQUIRE(run_cli({"stream", "--ckpt", ckpt, "--in",
                     (fs::path(data_dir) / "video_000.coge").string(), "--out", stream_out}) ==
            0);
    std::ifstream sin(stream_out);
    std::getline(sin, line);
    CHECK(line == "index,p_error,decision,latency_us");
    int rows = 0;
    while (std::getline(sin, line)) rows += !line.empty();
    CHECK(rows >= 40);

    REQUIRE(run_cli({"bench", "--ckpt", ckpt, "--frames", "120"}) == 0);
}

TEST_CASE("cli train with zero epochs writes an initialized checkpoint") {
    TempDir dir("cog_cli_zero");
    const auto cfg_path = dir.str("synth.json");
    write_synth_config(cfg_path, 2);
    const auto data_dir = dir.str("data");
    REQUIRE(run_cli({"synth", "--config", cfg_path, "--out", data_dir}) == 0);
    const auto ckpt = dir.str("init.ckpt");
    REQUIRE(run_cli({"train", "--data", data_dir, "--prompts",
                     (fs::path(data_dir) / "prompts.cogp").string(), "--out", ckpt, "--epochs",
                     "0", "--width", "8", "--heads", "2", "--stages", "1", "--n", "4"}) == 0);
    auto ck = cog::load_checkpoint(ckpt);
    CHECK(ck.loss_history.empty());
    CHECK(ck.epoch == 0);
}

TEST_CASE("cli rejects unknown flags and missing subcommands with usage errors") {
    CHECK(run_cli({"train", "--data", "x", "--out", "y", "--bogus"}) == 2);
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"no-such-command"}) == 2);
}

TEST_CASE("cli maps failure classes to typed exit codes") {
    TempDir dir("cog_cli_err");
    SECTION("missing files exit 3") {
        CHECK(run_cli({"eval", "--ckpt", dir.str("nope.ckpt"), "--data", dir.str("no_data"),
                       "--report", dir.str("r.csv")}) == 3);
        CHECK(run_cli({"synth", "--config", dir.str("absent.json"), "--out", dir.str("d")}) ==
              3);
    }
    SECTION("config mismatch exits 2") {
        const auto cfg_path = dir.str("synth.json");
        write_synth_config(cfg_path, 2);
        const auto data_dir = dir.str("data");
        REQUIRE(run_cli({"synth", "--config", cfg_path, "--out", data_dir}) == 0);
        const auto ckpt = dir.str("m.ckpt");
        REQUIRE(run_cli({"train", "--data", data_dir, "--prompts",
                         (fs::path(data_dir) / "prompts.cogp").string(), "--out", ckpt,
                         "--epochs", "0", "--width", "8", "--heads", "2", "--stages", "1",
                         "--n", "4"}) == 0);
        // second dataset with a different embedding dimension
        const auto cfg2 = dir.str("synth2.json");
        {
            std::ofstream out(cfg2);
            out << R"({"seed": 5, "num_videos": 2, "min_length": 30, "max_length": 30,
                       "num_gestures": 3, "d_vis": 6, "d_text": 8,
                       "exec_error_rates": [0.2, 0.2, 0.2]})";
        }
        const auto data2 = dir.str("data2");
        REQUIRE(run_cli({"synth", "--config", cfg2, "--out", data2}) == 0);
        CHECK(run_cli({"eval", "--ckpt", ckpt, "--data", data2, "--report",
                       dir.str("r2.csv")}) == 2);
    }
}

TEST_CASE("cli grad-check reports a small maximal error") {
    CHECK(run_cli({"grad-check", "--seed", "1"}) == 0);
}
