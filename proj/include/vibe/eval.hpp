#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vibe/classify.hpp"
#include "vibe/train.hpp"

namespace vibe::eval {

using nn::Vec;
using ntm::Side;

// Throws "length-mismatch" / "empty-input".
double accuracy(std::span<const int> predictions, std::span<const int> gold);

struct ClassStats {
    double precision = 0;
    double recall = 0;
    int support = 0;
    bool operator==(const ClassStats&) const = default;
};

std::vector<ClassStats> per_class(std::span<const int> predictions, std::span<const int> gold,
                                  int classes);

// Median of pairwise Euclidean distances over the pooled sample (i < j).
double median_pairwise_distance(const std::vector<Vec>& pooled);

// Unbiased squared MMD, RBF kernel exp(-d^2 / (2 s^2)) with s from the median
// heuristic. May be slightly negative.
double mmd_rbf_unbiased(const std::vector<Vec>& a, const std::vector<Vec>& b);
// Same, clamped at 0 for reporting.
double mmd_rbf(const std::vector<Vec>& a, const std::vector<Vec>& b);

// Embedding bag + MLP head trained by cross-entropy on past labels only.
struct Baseline {
    classify::EmbeddingProvider embedding;
    classify::ClassifierHead head;

    Vec probabilities(const classify::EncodedDoc& doc) const;
    int predict(const classify::EncodedDoc& doc) const;
};

// Uses config.seed, learning_rate, batch_size, E, head_hidden; trains for
// baseline_epochs, or stage1_epochs * N epochs when that is 0 (the same number
// of classifier updates as stage 1 over N pairs per doc).
Baseline past_only_baseline(const std::vector<classify::EncodedDoc>& train, int vocab, int classes,
                            const train::TrainConfig& config);

struct CurvePoint {
    int depth = 0;
    double accuracy = 0;
    bool operator==(const CurvePoint&) const = default;
};

struct EvalReport {
    double accuracy = 0;
    std::optional<double> baseline_accuracy;
    std::vector<std::string> class_names;
    std::vector<ClassStats> per_class;
    std::map<std::string, double> mmd_scores;
    std::map<std::string, double> vocab_overlaps;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> doc_ids;
    std::vector<int> predictions;
    std::vector<int> gold;
    std::vector<CurvePoint> accuracy_vs_n;

    bool operator==(const EvalReport&) const = default;
};

std::string to_json(const EvalReport& report);
EvalReport from_json(const std::string& text);
void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

struct ReportInputs {
    const classify::VibeState& state;
    const corpus::LabelMap& labels;
    const corpus::Vocabulary& vocab;
    const std::vector<corpus::TimedDocument>& train;
    const std::vector<corpus::TimedDocument>& adaptive;
    const std::vector<corpus::TimedDocument>& test;
    const train::TrainConfig& config;
    std::vector<std::uint64_t> seeds;
    const Baseline* baseline = nullptr;
    std::vector<CurvePoint> accuracy_vs_n;
    std::size_t overlap_top_k = 100;
    std::size_t mmd_max_samples = 300;
};

// Test accuracy and per-class stats, vocabulary overlaps between the three
// sets, MMD on TF-IDF vectors (raw data) and sphere features (model space).
EvalReport run_report(const ReportInputs& in);

// <prefix>overlap.csv, <prefix>mmd.csv, <prefix>accuracy_vs_n.csv
void write_plot_data(const std::string& prefix, const EvalReport& report);

}  // namespace vibe::eval
