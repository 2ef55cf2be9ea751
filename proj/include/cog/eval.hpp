#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cog/errors.hpp"

namespace cog {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::int64_t total() const { return tp + fp + tn + fn; }

    void add(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
    }
};

// Error class is positive. F1 and Jaccard report 0 (flagged) when their
// denominators are empty.
struct Metrics {
    double f1 = 0, accuracy = 0, jaccard = 0;
    ConfusionCounts counts;
    bool degenerate = false;  // no positives in either prediction or truth
};

inline ConfusionCounts count_confusion(const std::vector<std::uint8_t>& pred,
                                       const std::vector<std::uint8_t>& truth) {
    if (pred.size() != truth.size()) {
        throw ShapeError("metrics: prediction/truth length mismatch");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, t = truth[i] != 0;
        if (p && t) ++c.tp;
        else if (p && !t) ++c.fp;
        else if (!p && t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline Metrics metrics_from_counts(const ConfusionCounts& c) {
    Metrics m;
    m.counts = c;
    const std::int64_t f1_den = 2 * c.tp + c.fp + c.fn;
    const std::int64_t jac_den = c.tp + c.fp + c.fn;
    m.f1 = f1_den > 0 ? 2.0 * static_cast<double>(c.tp) / static_cast<double>(f1_den) : 0.0;
    m.jaccard = jac_den > 0 ? static_cast<double>(c.tp) / static_cast<double>(jac_den) : 0.0;
    m.accuracy = c.total() > 0
                     ? static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total())
                     : 0.0;
    m.degenerate = f1_den == 0;
    return m;
}

inline Metrics frame_metrics(const std::vector<std::uint8_t>& pred,
                             const std::vector<std::uint8_t>& truth) {
    if (pred.empty()) throw ShapeError("metrics: empty sequences");
    return metrics_from_counts(count_confusion(pred, truth));
}

// Sliding-window index ranges: full windows only, window w covers
// [w*stride, w*stride + len). Frame counts must be integral.
inline std::vector<std::pair<std::int64_t, std::int64_t>> windowize(std::int64_t t_len,
                                                                    double fps = 5.0,
                                                                    double window_s = 2.0,
                                                                    double stride_s = 1.2) {
    const double wf = fps * window_s;
    const double sf = fps * stride_s;
    if (std::abs(wf - std::round(wf)) > 1e-9 || std::abs(sf - std::round(sf)) > 1e-9) {
        throw ConfigError("windowize: fps*window and fps*stride must be whole frame counts");
    }
    const std::int64_t len = static_cast<std::int64_t>(std::llround(wf));
    const std::int64_t stride = static_cast<std::int64_t>(std::llround(sf));
    if (len < 1 || stride < 1) throw ConfigError("windowize: window and stride must be >= 1 frame");
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (std::int64_t start = 0; start + len <= t_len; start += stride) {
        out.emplace_back(start, len);
    }
    return out;
}

// Majority vote with ties counting as error, applied per window.
inline std::vector<std::uint8_t> window_labels(
    const std::vector<std::uint8_t>& seq,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& windows) {
    std::vector<std::uint8_t> out;
    out.reserve(windows.size());
    for (const auto& [start, len] : windows) {
        std::int64_t errors = 0;
        for (std::int64_t i = 0; i < len; ++i) errors += seq[start + i] != 0;
        out.push_back(2 * errors >= len ? 1 : 0);
    }
    return out;
}

inline std::optional<Metrics> window_metrics(const std::vector<std::uint8_t>& pred,
                                             const std::vector<std::uint8_t>& truth,
                                             double fps = 5.0, double window_s = 2.0,
                                             double stride_s = 1.2) {
    if (pred.size() != truth.size()) {
        throw ShapeError("metrics: prediction/truth length mismatch");
    }
    const auto windows = windowize(static_cast<std::int64_t>(pred.size()), fps, window_s, stride_s);
    if (windows.empty()) return std::nullopt;
    return metrics_from_counts(
        count_confusion(window_labels(pred, windows), window_labels(truth, windows)));
}

// ---------------------------------------------------------------------------
// Leave-one-supertrial-out folds

struct VideoKey {
    std::string id;
    int surgeon = -1;
    int trial = -1;
};

struct Fold {
    int held_out_trial = 0;
    std::vector<std::string> train_ids, test_ids;
};

// Fold i holds out trial i of every surgeon. Every surgeon must contribute
// exactly trials 1..5.
inline std::vector<Fold> loso_folds(const std::vector<VideoKey>& videos) {
    std::map<std::pair<int, int>, std::string> by_key;
    std::map<int, int> trials_per_surgeon;
    for (const auto& v : videos) {
        if (v.trial < 1 || v.trial > 5) {
            throw ConfigError("loso: video '" + v.id + "' has trial " + std::to_string(v.trial) +
                              " outside 1..5");
        }
        if (!by_key.emplace(std::make_pair(v.surgeon, v.trial), v.id).second) {
            throw ConfigError("loso: duplicate (surgeon " + std::to_string(v.surgeon) +
                              ", trial " + std::to_string(v.trial) + ")");
        }
        ++trials_per_surgeon[v.surgeon];
    }
    for (const auto& [surgeon, count] : trials_per_surgeon) {
        if (count != 5) {
            throw ConfigError("loso: surgeon " + std::to_string(surgeon) +
                              " is missing trial numbers (has " + std::to_string(count) + " of 5)");
        }
    }
    std::vector<Fold> folds(5);
    for (int t = 1; t <= 5; ++t) folds[t - 1].held_out_trial = t;
    for (const auto& [key, id] : by_key) {
        for (int t = 1; t <= 5; ++t) {
            auto& fold = folds[t - 1];
            if (key.second == t) fold.test_ids.push_back(id);
            else fold.train_ids.push_back(id);
        }
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Exports

inline void ribbon_export(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& truth, const std::string& path) {
    if (pred.size() != truth.size()) throw ShapeError("ribbon_export: length mismatch");
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "' for writing");
    out << "frame,truth,pred\n";
    for (std::size_t i = 0; i < pred.size(); ++i) {
        out << i << "," << static_cast<int>(truth[i]) << "," << static_cast<int>(pred[i]) << "\n";
    }
    if (!out) throw IoError(IoError::Kind::WriteFailed, "failed writing '" + path + "'");
}

inline std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> parse_ribbon(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "frame,truth,pred") {
        throw IoError(IoError::Kind::BadHeader, "ribbon file must start with frame,truth,pred");
    }
    std::vector<std::uint8_t> truth, pred;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string frame, t, p;
        if (!std::getline(ss, frame, ',') || !std::getline(ss, t, ',') || !std::getline(ss, p)) {
            throw IoError(IoError::Kind::ParseError, "malformed ribbon line " +
                          std::to_string(line_no), line_no);
        }
        truth.push_back(static_cast<std::uint8_t>(std::stoi(t)));
        pred.push_back(static_cast<std::uint8_t>(std::stoi(p)));
    }
    return {truth, pred};
}

struct ReportRow {
    std::string scope;
    Metrics frame;
    bool has_window = false;
    Metrics window;
};

struct EvalReport {
    std::vector<ReportRow> rows;
};

namespace detail {

inline void append_stats_rows(EvalReport& report, const std::vector<ReportRow>& fold_rows) {
    if (fold_rows.empty()) return;
    auto stat = [&](auto get) {
        double mean = 0;
        for (const auto& r : fold_rows) mean += get(r);
        mean /= static_cast<double>(fold_rows.size());
        double var = 0;
        for (const auto& r : fold_rows) {
            const double d = get(r) - mean;
            var += d * d;
        }
        var = fold_rows.size() > 1 ? var / static_cast<double>(fold_rows.size() - 1) : 0.0;
        return std::make_pair(mean, std::sqrt(var));
    };
    ReportRow mean_row, std_row;
    mean_row.scope = "mean";
    std_row.scope = "std";
    bool any_window = true;
    for (const auto& r : fold_rows) any_window = any_window && r.has_window;
    auto fill = [&](Metrics ReportRow::*field, auto sel) {
        auto [m_f1, s_f1] = stat([&](const ReportRow& r) { return (r.*field).f1; });
        auto [m_ac, s_ac] = stat([&](const ReportRow& r) { return (r.*field).accuracy; });
        auto [m_ja, s_ja] = stat([&](const ReportRow& r) { return (r.*field).jaccard; });
        (mean_row.*field).f1 = m_f1;
        (mean_row.*field).accuracy = m_ac;
        (mean_row.*field).jaccard = m_ja;
        (std_row.*field).f1 = s_f1;
        (std_row.*field).accuracy = s_ac;
        (std_row.*field).jaccard = s_ja;
        (void)sel;
    };
    fill(&ReportRow::frame, 0);
    if (any_window) {
        fill(&ReportRow::window, 0);
        mean_row.has_window = true;
        std_row.has_window = true;
    }
    report.rows.push_back(mean_row);
    report.rows.push_back(std_row);
}

}  // namespace detail

inline void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoError::Kind::OpenFailed, "cannot open '" + path + "' for writing");
    out << "scope,level,f1,accuracy,jaccard,tp,fp,tn,fn\n";
    for (const auto& r : report.rows) {
        const bool stats = r.scope == "mean" || r.scope == "std";
        out << r.scope << ",frame," << r.frame.f1 << "," << r.frame.accuracy << ","
            << r.frame.jaccard;
        if (stats) out << ",,,,";
        else
            out << "," << r.frame.counts.tp << "," << r.frame.counts.fp << ","
                << r.frame.counts.tn << "," << r.frame.counts.fn;
        out << "\n";
        if (r.has_window) {
            out << r.scope << ",window," << r.window.f1 << "," << r.window.accuracy << ","
                << r.window.jaccard;
            if (stats) out << ",,,,";
            else
                out << "," << r.window.counts.tp << "," << r.window.counts.fp << ","
                    << r.window.counts.tn << "," << r.window.counts.fn;
            out << "\n";
        }
    }
    if (!out) throw IoError(IoError::Kind::WriteFailed, "failed writing '" + path + "'");
}

inline std::string render_report_table(const EvalReport& report) {
    std::ostringstream out;
    out << "scope                level    F1       Accuracy Jaccard\n";
    auto line = [&](const std::string& scope, const char* level, const Metrics& m) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-20s %-8s %-8.4f %-8.4f %-8.4f\n", scope.c_str(), level,
                      m.f1, m.accuracy, m.jaccard);
        out << buf;
    };
    for (const auto& r : report.rows) {
        line(r.scope, "frame", r.frame);
        if (r.has_window) line(r.scope, "window", r.window);
    }
    return out.str();
}

}  // namespace cog
