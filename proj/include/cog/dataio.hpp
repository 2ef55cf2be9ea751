#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cog/errors.hpp"
#include "cog/gvr.hpp"
#include "cog/serialize.hpp"

namespace cog {

// Per-frame spatial embedding stream with optional frame labels.
struct EmbeddingSequence {
    std::string id;
    int surgeon = -1;
    int trial = -1;
    float fps = 5.0f;
    std::int64_t d_vis = 0;
    std::vector<float> frames;  // row-major [T x d_vis]
    std::vector<std::uint8_t> labels;
    bool has_labels = false;

    std::int64_t length() const {
        return d_vis == 0 ? 0 : static_cast<std::int64_t>(frames.size()) / d_vis;
    }
};

inline constexpr std::uint16_t kEmbeddingVersion = 1;
inline constexpr std::uint8_t kLabelMarker = 0x01;

inline void write_embeddings(const EmbeddingSequence& seq, std::ostream& out) {
    io::write_bytes(out, "COGE", 4);
    io::write_u16(out, kEmbeddingVersion);
    io::write_u32(out, static_cast<std::uint32_t>(seq.length()));
    io::write_u32(out, static_cast<std::uint32_t>(seq.d_vis));
    io::write_f32(out, seq.fps);
    io::write_bytes(out, seq.frames.data(), seq.frames.size() * sizeof(float));
    if (seq.has_labels) {
        if (static_cast<std::int64_t>(seq.labels.size()) != seq.length()) {
            throw IoError(IoError::Kind::BadValue, "label block length must equal frame count");
        }
        io::write_u8(out, kLabelMarker);
        io::write_bytes(out, seq.labels.data(), seq.labels.size());
    }
    if (!out) throw IoError(IoError::Kind::WriteFailed, "failed writing embedding stream");
}

inline void write_embeddings(const EmbeddingSequence& seq, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "' for writing");
    write_embeddings(seq, out);
}

// Header + incremental frame access; the stream CLI consumes stdin this way.
class EmbeddingStreamReader {
public:
    explicit EmbeddingStreamReader(std::istream& in) : in_(in) {
        io::expect_magic(in_, "COGE", "embedding");
        const auto version = io::read_u16(in_, "version");
        if (version != kEmbeddingVersion) {
            throw IoError(IoError::Kind::VersionMismatch,
                          "unsupported embedding format version " + std::to_string(version));
        }
        t_len_ = io::read_u32(in_, "frame count");
        d_vis_ = io::read_u32(in_, "embedding dimension");
        fps_ = io::read_f32(in_, "fps");
    }

    std::int64_t length() const { return t_len_; }
    std::int64_t d_vis() const { return d_vis_; }
    float fps() const { return fps_; }

    bool next_frame(std::vector<float>& frame) {
        if (read_ >= t_len_) return false;
        frame.resize(static_cast<std::size_t>(d_vis_));
        io::read_exact(in_, frame.data(), frame.size() * sizeof(float), "embedding payload");
        ++read_;
        return true;
    }

    // Optional trailing label block; call after all frames were consumed.
    bool read_labels(std::vector<std::uint8_t>& labels) {
        const int c = in_.peek();
        if (c == std::char_traits<char>::eof()) return false;
        const auto marker = io::read_u8(in_, "label marker");
        if (marker != kLabelMarker) {
            throw IoError(IoError::Kind::BadHeader, "unknown trailing block marker");
        }
        labels.resize(static_cast<std::size_t>(t_len_));
        if (t_len_) io::read_exact(in_, labels.data(), labels.size(), "label block");
        for (const auto y : labels) {
            if (y > 1) throw IoError(IoError::Kind::BadValue, "label byte outside {0,1}");
        }
        return true;
    }

private:
    std::istream& in_;
    std::int64_t t_len_ = 0;
    std::int64_t d_vis_ = 0;
    float fps_ = 5.0f;
    std::int64_t read_ = 0;
};

inline EmbeddingSequence read_embeddings(std::istream& in) {
    EmbeddingStreamReader reader(in);
    EmbeddingSequence seq;
    seq.d_vis = reader.d_vis();
    seq.fps = reader.fps();
    seq.frames.resize(static_cast<std::size_t>(reader.length() * reader.d_vis()));
    std::vector<float> frame;
    std::size_t off = 0;
    while (reader.next_frame(frame)) {
        std::copy(frame.begin(), frame.end(), seq.frames.begin() + off);
        off += frame.size();
    }
    seq.has_labels = reader.read_labels(seq.labels);
    return seq;
}

inline EmbeddingSequence read_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "'");
    auto seq = read_embeddings(in);
    seq.id = std::filesystem::path(path).stem().string();
    return seq;
}

inline void write_prompt_bank(const GesturePromptBank& bank, const std::string& path) {
    bank.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "' for writing");
    io::write_bytes(out, "COGP", 4);
    io::write_u32(out, static_cast<std::uint32_t>(bank.count));
    io::write_u32(out, static_cast<std::uint32_t>(bank.d_text));
    for (const auto& text : bank.texts) {
        io::write_bytes(out, text.c_str(), text.size() + 1);  // null-terminated
    }
    io::write_bytes(out, bank.vectors.data(), bank.vectors.size() * sizeof(float));
    if (!out) throw IoError(IoError::Kind::WriteFailed, "failed writing prompt bank");
}

inline GesturePromptBank read_prompt_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "'");
    io::expect_magic(in, "COGP", "prompt bank");
    GesturePromptBank bank;
    bank.count = io::read_u32(in, "prompt count");
    bank.d_text = io::read_u32(in, "prompt dimension");
    if (bank.count < 1) throw IoError(IoError::Kind::BadHeader, "prompt bank must hold J >= 1");
    for (std::int64_t j = 0; j < bank.count; ++j) {
        std::string text;
        for (;;) {
            const int c = in.get();
            if (c == std::char_traits<char>::eof()) {
                throw IoError(IoError::Kind::Truncated, "truncated prompt string");
            }
            if (c == '\0') break;
            text.push_back(static_cast<char>(c));
        }
        if (text.rfind("A surgeon is ", 0) != 0 ||
            text.size() < 14 + 15 ||
            text.substr(text.size() - 15) != " in the surgery") {
            throw IoError(IoError::Kind::BadValue,
                          "prompt text does not follow the gesture prompt template");
        }
        bank.texts.push_back(std::move(text));
    }
    bank.vectors.resize(static_cast<std::size_t>(bank.count * bank.d_text));
    io::read_exact(in, bank.vectors.data(), bank.vectors.size() * sizeof(float),
                   "prompt payload");
    bank.validate();
    return bank;
}

// CSV escape hatch for externally precomputed features: one frame per row,
// d_vis float cells plus an optional trailing 0/1 label column.
inline EmbeddingSequence import_csv(const std::string& path, std::int64_t d_vis) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "'");
    EmbeddingSequence seq;
    seq.d_vis = d_vis;
    std::string line;
    std::int64_t line_no = 0;
    int labeled = -1;  // undecided until the first row
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v = 0;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw IoError(IoError::Kind::ParseError,
                              "non-numeric cell in '" + path + "' line " +
                                  std::to_string(line_no),
                              line_no);
            }
            while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
            if (pos != cell.size()) {
                throw IoError(IoError::Kind::ParseError,
                              "non-numeric cell in '" + path + "' line " + std::to_string(line_no),
                              line_no);
            }
            cells.push_back(v);
        }
        const std::int64_t n = static_cast<std::int64_t>(cells.size());
        if (n != d_vis && n != d_vis + 1) {
            throw IoError(IoError::Kind::ParseError,
                          "expected " + std::to_string(d_vis) + " or " +
                              std::to_string(d_vis + 1) + " columns, got " + std::to_string(n) +
                              " in '" + path + "' line " + std::to_string(line_no),
                          line_no);
        }
        const int row_labeled = n == d_vis + 1;
        if (labeled == -1) labeled = row_labeled;
        if (labeled != row_labeled) {
            throw IoError(IoError::Kind::ParseError,
                          "inconsistent column count in '" + path + "' line " +
                              std::to_string(line_no),
                          line_no);
        }
        for (std::int64_t i = 0; i < d_vis; ++i) seq.frames.push_back(static_cast<float>(cells[i]));
        if (row_labeled) {
            const double y = cells[d_vis];
            if (y != 0.0 && y != 1.0) {
                throw IoError(IoError::Kind::BadValue,
                              "label outside {0,1} in '" + path + "' line " +
                                  std::to_string(line_no),
                              line_no);
            }
            seq.labels.push_back(static_cast<std::uint8_t>(y));
        }
    }
    seq.has_labels = labeled == 1;
    seq.id = std::filesystem::path(path).stem().string();
    return seq;
}

// ---------------------------------------------------------------------------
// Synthetic data generation

inline const std::vector<std::string>& gesture_vocabulary() {
    static const std::vector<std::string> vocab = {
        "reaching for needle with right hand",
        "positioning needle",
        "pushing needle through tissue",
        "transferring needle from left to right",
        "moving to center with needle in grip",
        "pulling suture with left hand",
        "pulling suture with right hand",
        "orienting needle",
        "using right hand to help tighten suture",
        "loosening more suture",
        "dropping suture at end and moving to end points",
        "reaching for needle with left hand",
        "making C loop around right hand",
        "reaching for suture with right hand",
        "pulling suture with both hands",
    };
    return vocab;
}

inline std::string gesture_text(std::int64_t j) {
    const auto& vocab = gesture_vocabulary();
    if (j < static_cast<std::int64_t>(vocab.size())) return vocab[static_cast<std::size_t>(j)];
    return "performing step " + std::to_string(j + 1);
}

struct SynthConfig {
    std::uint64_t seed = 7;
    std::int64_t num_videos = 5;
    std::int64_t min_length = 280;
    std::int64_t max_length = 320;
    std::int64_t num_gestures = 5;
    std::int64_t d_vis = 128;
    std::int64_t d_text = 64;
    double fps = 5.0;
    double cluster_separation = 4.0;
    double noise_sigma = 0.3;
    std::vector<double> transition;        // row-major [J x J]; rows sum to 1
    std::vector<double> exec_error_rates;  // per-gesture target error occupancy
    std::int64_t exec_dur_min = 2;
    std::int64_t exec_dur_max = 6;
    double proc_error_rate = 0.15;  // wrong-order probability per gesture change
    std::int64_t proc_dur_min = 20;
    std::int64_t proc_dur_max = 60;
    double error_offset = 1.0;   // embedding signature of executional errors
    double prompt_noise = 0.02;

    void validate() const {
        if (num_videos < 1 || num_gestures < 1 || d_vis < 1 || d_text < 1) {
            throw ConfigError("synth config: counts and dimensions must be positive");
        }
        if (min_length < 1 || max_length < min_length) {
            throw ConfigError("synth config: invalid length range");
        }
        if (exec_dur_min < 1 || exec_dur_max < exec_dur_min || proc_dur_min < 1 ||
            proc_dur_max < proc_dur_min) {
            throw ConfigError("synth config: invalid error duration range");
        }
        if (proc_error_rate < 0 || proc_error_rate > 1) {
            throw ConfigError("synth config: proc_error_rate must be in [0,1]");
        }
        if (static_cast<std::int64_t>(exec_error_rates.size()) != num_gestures) {
            throw ConfigError("synth config: need one exec error rate per gesture");
        }
        for (const double r : exec_error_rates) {
            if (r < 0 || r > 1) throw ConfigError("synth config: error rates must be in [0,1]");
        }
        if (static_cast<std::int64_t>(transition.size()) != num_gestures * num_gestures) {
            throw ConfigError("synth config: transition matrix must be J x J");
        }
        for (std::int64_t i = 0; i < num_gestures; ++i) {
            double row = 0;
            for (std::int64_t j = 0; j < num_gestures; ++j) {
                const double p = transition[i * num_gestures + j];
                if (p < 0) throw ConfigError("synth config: negative transition probability");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-9) {
                throw ConfigError("synth config: transition row " + std::to_string(i) +
                                  " does not sum to 1");
            }
        }
    }
};

// Self-loop chain with a dominant canonical successor (j+1 mod J).
inline std::vector<double> default_transition(std::int64_t j_count, double self_p = 0.9,
                                              double next_p = 0.08) {
    std::vector<double> m(static_cast<std::size_t>(j_count * j_count), 0.0);
    if (j_count == 1) {
        m[0] = 1.0;
        return m;
    }
    const double rest = (1.0 - self_p - next_p) / (j_count > 2 ? j_count - 2 : 1);
    for (std::int64_t i = 0; i < j_count; ++i) {
        for (std::int64_t j = 0; j < j_count; ++j) {
            if (j == i) {
                m[i * j_count + j] = self_p;
            } else if (j == (i + 1) % j_count) {
                m[i * j_count + j] = j_count == 2 ? 1.0 - self_p : next_p;
            } else {
                m[i * j_count + j] = rest;
            }
        }
    }
    return m;
}

struct SynthDataset {
    std::vector<EmbeddingSequence> videos;
    GesturePromptBank prompts;
    std::vector<std::vector<int>> gestures;  // hidden chain per video, for diagnostics
};

// Hidden gesture Markov chain -> Gaussian cluster embeddings. Executional
// errors are short bursts with an embedding offset; procedural errors are
// out-of-order gesture segments whose only evidence is the gesture sequence
// itself. Prompt vectors are projections of the same cluster centers, so they
// genuinely carry gesture information.
inline SynthDataset synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::int64_t j_count = cfg.num_gestures;

    // cluster centers and per-gesture executional-error directions
    std::vector<double> centers(static_cast<std::size_t>(j_count * cfg.d_vis));
    const double center_scale = cfg.cluster_separation / std::sqrt(static_cast<double>(cfg.d_vis));
    for (auto& v : centers) v = normal(rng) * center_scale;
    std::vector<double> edirs(static_cast<std::size_t>(j_count * cfg.d_vis));
    for (std::int64_t j = 0; j < j_count; ++j) {
        double norm = 0;
        for (std::int64_t i = 0; i < cfg.d_vis; ++i) {
            const double v = normal(rng);
            edirs[j * cfg.d_vis + i] = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (std::int64_t i = 0; i < cfg.d_vis; ++i) edirs[j * cfg.d_vis + i] /= norm;
    }

    // prompt bank: random projection of the centers into text space
    SynthDataset ds;
    ds.prompts.count = j_count;
    ds.prompts.d_text = cfg.d_text;
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_vis));
    std::vector<double> proj(static_cast<std::size_t>(cfg.d_text * cfg.d_vis));
    for (auto& v : proj) v = normal(rng) * proj_scale;
    ds.prompts.vectors.resize(static_cast<std::size_t>(j_count * cfg.d_text));
    for (std::int64_t j = 0; j < j_count; ++j) {
        ds.prompts.texts.push_back(render_prompt(gesture_text(j)));
        for (std::int64_t i = 0; i < cfg.d_text; ++i) {
            double acc = 0;
            for (std::int64_t v = 0; v < cfg.d_vis; ++v) {
                acc += proj[i * cfg.d_vis + v] * centers[j * cfg.d_vis + v];
            }
            ds.prompts.vectors[j * cfg.d_text + i] =
                static_cast<float>(acc + cfg.prompt_noise * normal(rng));
        }
    }

    auto sample_row = [&](int g) {
        double u = unit(rng);
        for (std::int64_t j = 0; j < j_count; ++j) {
            const double p = cfg.transition[g * j_count + j];
            if (u < p) return static_cast<int>(j);
            u -= p;
        }
        return static_cast<int>(j_count - 1);
    };
    // canonical successor: most likely non-self transition
    auto canonical = [&](int g) {
        int best = g;
        double best_p = -1;
        for (std::int64_t j = 0; j < j_count; ++j) {
            if (static_cast<int>(j) == g) continue;
            const double p = cfg.transition[g * j_count + j];
            if (p > best_p) {
                best_p = p;
                best = static_cast<int>(j);
            }
        }
        return best;
    };

    std::uniform_int_distribution<std::int64_t> len_dist(cfg.min_length, cfg.max_length);
    std::uniform_int_distribution<std::int64_t> proc_dur(cfg.proc_dur_min, cfg.proc_dur_max);
    std::uniform_int_distribution<std::int64_t> exec_dur(cfg.exec_dur_min, cfg.exec_dur_max);
    std::uniform_int_distribution<int> gesture_dist(0, static_cast<int>(j_count - 1));

    for (std::int64_t v = 0; v < cfg.num_videos; ++v) {
        const std::int64_t t_len = len_dist(rng);
        std::vector<int> gest(static_cast<std::size_t>(t_len));
        std::vector<std::uint8_t> proc_err(static_cast<std::size_t>(t_len), 0);
        int g = gesture_dist(rng);
        std::int64_t proc_left = 0;
        for (std::int64_t t = 0; t < t_len; ++t) {
            gest[t] = g;
            if (proc_left > 0) {
                proc_err[t] = 1;
                --proc_left;
                continue;  // hold the out-of-order gesture for its duration
            }
            int next = sample_row(g);
            if (next != g && j_count > 2 && unit(rng) < cfg.proc_error_rate) {
                const int canon = canonical(g);
                int wrong = canon;
                while (wrong == canon || wrong == g) wrong = gesture_dist(rng);
                next = wrong;
                proc_left = proc_dur(rng);
            }
            g = next;
        }

        // executional bursts: alternating renewal tuned to the target occupancy
        std::vector<std::uint8_t> exec_err(static_cast<std::size_t>(t_len), 0);
        const double mean_dur = 0.5 * static_cast<double>(cfg.exec_dur_min + cfg.exec_dur_max);
        std::int64_t burst_left = 0;
        for (std::int64_t t = 0; t < t_len; ++t) {
            if (t > 0 && gest[t] != gest[t - 1]) burst_left = 0;  // bursts stay in-gesture
            if (burst_left > 0) {
                exec_err[t] = 1;
                --burst_left;
                continue;
            }
            const double rate = cfg.exec_error_rates[static_cast<std::size_t>(gest[t])];
            double start_p;
            if (rate >= 1.0) {
                start_p = 1.0;
            } else if (rate <= 0.0) {
                start_p = 0.0;
            } else {
                start_p = std::min(1.0, rate / ((1.0 - rate) * mean_dur));
            }
            if (unit(rng) < start_p) {
                exec_err[t] = 1;
                burst_left = exec_dur(rng) - 1;
            }
        }

        EmbeddingSequence seq;
        seq.id = "video_" + std::to_string(v);
        seq.surgeon = static_cast<int>(v / 5);
        seq.trial = static_cast<int>(v % 5) + 1;
        seq.fps = static_cast<float>(cfg.fps);
        seq.d_vis = cfg.d_vis;
        seq.frames.resize(static_cast<std::size_t>(t_len * cfg.d_vis));
        seq.labels.resize(static_cast<std::size_t>(t_len));
        seq.has_labels = true;
        for (std::int64_t t = 0; t < t_len; ++t) {
            const int gt = gest[t];
            const bool ex = exec_err[t] != 0;
            seq.labels[t] = (ex || proc_err[t]) ? 1 : 0;
            for (std::int64_t i = 0; i < cfg.d_vis; ++i) {
                double x = centers[gt * cfg.d_vis + i] + cfg.noise_sigma * normal(rng);
                if (ex) x += cfg.error_offset * edirs[gt * cfg.d_vis + i];
                seq.frames[t * cfg.d_vis + i] = static_cast<float>(x);
            }
        }
        ds.videos.push_back(std::move(seq));
        ds.gestures.push_back(std::move(gest));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset directory layout: video_NNN.coge + meta.csv (+ prompts.cogp)

inline void save_dataset(const SynthDataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir);
    std::ofstream meta(base / "meta.csv");
    if (!meta) throw IoError(IoError::Kind::OpenFailed, "cannot write meta.csv in '" + dir + "'");
    meta << "id,surgeon,trial,file\n";
    for (std::size_t i = 0; i < ds.videos.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "video_%03zu.coge", i);
        write_embeddings(ds.videos[i], (base / name).string());
        meta << ds.videos[i].id << "," << ds.videos[i].surgeon << "," << ds.videos[i].trial << ","
             << name << "\n";
    }
    if (!meta) throw IoError(IoError::Kind::WriteFailed, "failed writing meta.csv");
    write_prompt_bank(ds.prompts, (base / "prompts.cogp").string());
}

inline std::vector<EmbeddingSequence> load_dataset(const std::string& dir) {
    const auto base = std::filesystem::path(dir);
    std::ifstream meta(base / "meta.csv");
    if (!meta) {
        throw IoError(IoError::Kind::OpenFailed, "missing meta.csv in dataset dir '" + dir + "'");
    }
    std::string line;
    if (!std::getline(meta, line) || line != "id,surgeon,trial,file") {
        throw IoError(IoError::Kind::BadHeader, "meta.csv must start with id,surgeon,trial,file");
    }
    std::vector<EmbeddingSequence> videos;
    std::int64_t line_no = 1;
    while (std::getline(meta, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, surgeon, trial, file;
        if (!std::getline(ss, id, ',') || !std::getline(ss, surgeon, ',') ||
            !std::getline(ss, trial, ',') || !std::getline(ss, file)) {
            throw IoError(IoError::Kind::ParseError,
                          "malformed meta.csv line " + std::to_string(line_no), line_no);
        }
        auto seq = read_embeddings((base / file).string());
        seq.id = id;
        try {
            seq.surgeon = std::stoi(surgeon);
            seq.trial = std::stoi(trial);
        } catch (const std::exception&) {
            throw IoError(IoError::Kind::ParseError,
                          "non-numeric surgeon/trial in meta.csv line " + std::to_string(line_no),
                          line_no);
        }
        videos.push_back(std::move(seq));
    }
    if (videos.empty()) throw IoError(IoError::Kind::BadValue, "dataset '" + dir + "' is empty");
    return videos;
}

}  // namespace cog
