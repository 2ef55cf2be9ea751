#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cog/dataio.hpp"

namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

cog::EmbeddingSequence random_sequence(std::uint64_t seed, std::int64_t t_len,
                                       std::int64_t d_vis, bool labels) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-2.f, 2.f);
    cog::EmbeddingSequence seq;
    seq.d_vis = d_vis;
    seq.fps = 5.0f;
    seq.frames.resize(static_cast<std::size_t>(t_len * d_vis));
    for (auto& v : seq.frames) v = dist(rng);
    if (labels) {
        seq.has_labels = true;
        std::bernoulli_distribution coin(0.4);
        seq.labels.resize(static_cast<std::size_t>(t_len));
        for (auto& y : seq.labels) y = coin(rng) ? 1 : 0;
    }
    return seq;
}

}  // namespace

TEST_CASE("embedding files round-trip bit-exactly") {
    auto seq = random_sequence(61, 7, 2048, true);
    const auto p1 = temp_path("cog_emb1.coge");
    const auto p2 = temp_path("cog_emb2.coge");
    cog::write_embeddings(seq, p1);
    auto back = cog::read_embeddings(p1);
    CHECK(back.frames == seq.frames);
    CHECK(back.labels == seq.labels);
    CHECK(back.has_labels);
    CHECK(back.d_vis == seq.d_vis);
    cog::write_embeddings(back, p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("empty embedding sequences are valid") {
    cog::EmbeddingSequence seq;
    seq.d_vis = 16;
    const auto p = temp_path("cog_empty.coge");
    cog::write_embeddings(seq, p);
    auto back = cog::read_embeddings(p);
    CHECK(back.length() == 0);
    CHECK_FALSE(back.has_labels);
    fs::remove(p);
}

TEST_CASE("embedding corruption yields distinct typed errors") {
    auto seq = random_sequence(62, 5, 12, true);
    const auto p = temp_path("cog_corrupt.coge");
    cog::write_embeddings(seq, p);
    const std::string good = file_bytes(p);

    auto write_variant = [&](const std::string& bytes) {
        std::ofstream out(p, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    };

    SECTION("bad magic") {
        auto bad = good;
        bad[0] = 'X';
        write_variant(bad);
        try {
            cog::read_embeddings(p);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::BadMagic);
        }
    }
    SECTION("version mismatch") {
        auto bad = good;
        bad[4] = 9;
        write_variant(bad);
        try {
            cog::read_embeddings(p);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::VersionMismatch);
        }
    }
    SECTION("truncated payload") {
        write_variant(good.substr(0, good.size() / 2));
        try {
            cog::read_embeddings(p);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::Truncated);
        }
    }
    SECTION("unknown trailing marker") {
        auto bad = good;
        bad[18 + 5 * 12 * 4] = 0x7f;  // label marker follows the 18-byte header + payload
        write_variant(bad);
        try {
            cog::read_embeddings(p);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::BadHeader);
        }
    }
    fs::remove(p);
}

TEST_CASE("prompt banks round-trip and enforce the template") {
    cog::GesturePromptBank bank;
    bank.count = 3;
    bank.d_text = 6;
    for (int j = 0; j < 3; ++j) bank.texts.push_back(cog::render_prompt(cog::gesture_text(j)));
    bank.vectors.resize(18);
    for (std::size_t i = 0; i < bank.vectors.size(); ++i) {
        bank.vectors[i] = static_cast<float>(i) * 0.25f;
    }
    const auto p = temp_path("cog_bank.cogp");
    cog::write_prompt_bank(bank, p);
    auto back = cog::read_prompt_bank(p);
    CHECK(back.texts == bank.texts);
    CHECK(back.vectors == bank.vectors);

    SECTION("non-template text is rejected") {
        cog::GesturePromptBank bad = bank;
        bad.texts[1] = "random text";
        cog::write_prompt_bank(bad, p);
        try {
            cog::read_prompt_bank(p);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::BadValue);
        }
    }
    fs::remove(p);
}

TEST_CASE("csv import parses rows and reports malformed lines") {
    const auto p = temp_path("cog_import.csv");
    SECTION("three valid rows with labels") {
        std::ofstream out(p);
        out << "1.0,2.0,0\n-1.5,0.25,1\n3.0,4.0,0\n";
        out.close();
        auto seq = cog::import_csv(p, 2);
        CHECK(seq.length() == 3);
        CHECK(seq.has_labels);
        CHECK(seq.labels == std::vector<std::uint8_t>{0, 1, 0});
        CHECK(seq.frames[2] == -1.5f);
    }
    SECTION("wrong column count names the line") {
        std::ofstream out(p);
        out << "1.0,2.0\n1.0\n";
        out.close();
        try {
            cog::import_csv(p, 2);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::ParseError);
            CHECK(e.line == 2);
        }
    }
    SECTION("non-numeric cell names the line") {
        std::ofstream out(p);
        out << "1.0,2.0\nfoo,3.0\n";
        out.close();
        try {
            cog::import_csv(p, 2);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::ParseError);
            CHECK(e.line == 2);
        }
    }
    SECTION("labels outside {0,1} are rejected") {
        std::ofstream out(p);
        out << "1.0,2.0,2\n";
        out.close();
        try {
            cog::import_csv(p, 2);
            FAIL("expected IoError");
        } catch (const cog::IoError& e) {
            CHECK(e.kind == cog::IoError::Kind::BadValue);
        }
    }
    fs::remove(p);
}

namespace {

cog::SynthConfig synth_cfg() {
    cog::SynthConfig cfg;
    cfg.seed = 70;
    cfg.num_videos = 3;
    cfg.min_length = 50;
    cfg.max_length = 60;
    cfg.num_gestures = 4;
    cfg.d_vis = 12;
    cfg.d_text = 8;
    cfg.transition = cog::default_transition(4);
    cfg.exec_error_rates = {0.3, 0.1, 0.0, 0.2};
    cfg.exec_dur_min = 1;
    cfg.exec_dur_max = 3;
    cfg.proc_error_rate = 0.1;
    cfg.proc_dur_min = 5;
    cfg.proc_dur_max = 10;
    return cfg;
}

}  // namespace

TEST_CASE("synthetic generation is seed-deterministic") {
    auto a = cog::synth_generate(synth_cfg());
    auto b = cog::synth_generate(synth_cfg());
    REQUIRE(a.videos.size() == b.videos.size());
    for (std::size_t i = 0; i < a.videos.size(); ++i) {
        CHECK(a.videos[i].frames == b.videos[i].frames);
        CHECK(a.videos[i].labels == b.videos[i].labels);
    }
    CHECK(a.prompts.vectors == b.prompts.vectors);
    CHECK(a.prompts.texts == b.prompts.texts);
}

TEST_CASE("noiseless full-rate errors label exactly one gesture's frames") {
    auto cfg = synth_cfg();
    cfg.noise_sigma = 0.0;
    cfg.exec_error_rates = {1.0, 0.0, 0.0, 0.0};
    cfg.exec_dur_min = cfg.exec_dur_max = 1;
    cfg.proc_error_rate = 0.0;
    auto ds = cog::synth_generate(cfg);
    for (std::size_t v = 0; v < ds.videos.size(); ++v) {
        for (std::int64_t t = 0; t < ds.videos[v].length(); ++t) {
            CHECK(static_cast<int>(ds.videos[v].labels[t]) == (ds.gestures[v][t] == 0 ? 1 : 0));
        }
    }
}

TEST_CASE("identity transition keeps each video in a single gesture") {
    auto cfg = synth_cfg();
    cfg.proc_error_rate = 0.0;
    cfg.transition.assign(16, 0.0);
    for (int j = 0; j < 4; ++j) cfg.transition[j * 4 + j] = 1.0;
    auto ds = cog::synth_generate(cfg);
    for (const auto& chain : ds.gestures) {
        for (const int g : chain) CHECK(g == chain[0]);
    }
}

TEST_CASE("generated error prevalence tracks the configured rates") {
    auto cfg = synth_cfg();
    cfg.num_videos = 4;
    cfg.min_length = 3000;
    cfg.max_length = 3000;
    cfg.proc_error_rate = 0.0;
    cfg.exec_error_rates = {0.3, 0.3, 0.3, 0.3};
    auto ds = cog::synth_generate(cfg);
    std::int64_t frames = 0, errors = 0;
    for (const auto& v : ds.videos) {
        frames += v.length();
        for (const auto y : v.labels) errors += y;
    }
    REQUIRE(frames >= 10000);
    const double prevalence = static_cast<double>(errors) / static_cast<double>(frames);
    CHECK(prevalence == Catch::Approx(0.3).margin(0.05));
}

TEST_CASE("invalid transition matrices are rejected") {
    auto cfg = synth_cfg();
    cfg.transition[0] += 0.5;
    CHECK_THROWS_AS(cog::synth_generate(cfg), cog::ConfigError);
}

TEST_CASE("datasets save and load through a directory") {
    auto ds = cog::synth_generate(synth_cfg());
    const auto dir = temp_path("cog_ds_dir");
    cog::save_dataset(ds, dir);
    auto videos = cog::load_dataset(dir);
    REQUIRE(videos.size() == ds.videos.size());
    for (std::size_t i = 0; i < videos.size(); ++i) {
        CHECK(videos[i].frames == ds.videos[i].frames);
        CHECK(videos[i].labels == ds.videos[i].labels);
        CHECK(videos[i].surgeon == ds.videos[i].surgeon);
        CHECK(videos[i].trial == ds.videos[i].trial);
    }
    auto bank = cog::read_prompt_bank((fs::path(dir) / "prompts.cogp").string());
    CHECK(bank.vectors == ds.prompts.vectors);
    fs::remove_all(dir);
}
