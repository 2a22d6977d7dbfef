#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vibe/classify.hpp"
#include "vibe/retrieval.hpp"

namespace vibe::train {

using classify::EncodedDoc;
using classify::VibeState;
using nn::Vec;
using ntm::Side;

struct TrainConfig {
    std::uint64_t seed = 0;
    int batch_size = 64;
    double learning_rate = 1e-3;
    int warmup_epochs = 1;
    int stage1_epochs = 10;
    int stage2_epochs = 10;
    double lambda = 0.5;
    double mu = 0.5;
    int topics = ntm::kDefaultTopics;
    int hidden = ntm::kDefaultHidden;
    int head_hidden = 128;
    int embedding = classify::kDefaultEmbedding;
    int depth = retrieval::kDefaultDepth;
    int time_buckets = 2;
    int noise_draws = 1;
    int baseline_epochs = 0;  // 0: stage1_epochs * N (same update count as stage 1)
    int max_vocab = 20000;
    bool stage2_update_all = false;
    std::string scheme = "tfidf";
    std::vector<double> grid_lambda{0.1, 0.5, 1.0};
    std::vector<double> grid_mu{0.1, 0.5, 1.0};
    std::vector<double> grid_learning_rate{1e-3};

    // Throws "bad-config".
    void validate() const;
    // Throws "unknown-key" / "bad-config".
    void set(const std::string& key, const std::string& value);
    // Ordered key/value snapshot; the same keys set() accepts.
    std::vector<std::pair<std::string, std::string>> entries() const;
};

TrainConfig read_config(const std::string& path, TrainConfig base = {});
void write_config(const std::string& path, const TrainConfig& config);

// Uniform init scaled by 1/sqrt(fan_in); bitwise reproducible per rng state.
VibeState init_model(const TrainConfig& config, int vocab, int classes, Rng& rng);

struct EpochRecord {
    std::string stage;  // warmup | stage1 | stage2
    int epoch = 0;
    ntm::LossBreakdown breakdown;
    double past = 0;
    double total = 0;
    double task = 0;
    double time = 0;
    double sphere = 0;
};

struct History {
    std::vector<EpochRecord> epochs;
    bool diverged = false;
};

void write_history(const std::string& path, const History& history);

struct StepRecord {
    const std::string& stage;
    int epoch;
    int step;
    const classify::JointLoss* joint;      // warmup / stage1
    const classify::Stage2Losses* sphere;  // stage2
};
using StepObserver = std::function<void(const StepRecord&)>;

// Warm-up epochs on the NTM objective (NTM parameters only), then joint-loss
// epochs over NTM, embedding and stage-1 head. On a non-finite loss the state
// is rolled back to the start of the failing epoch and diverged is set.
History train_stage1(VibeState& state, const std::vector<classify::LabeledPair>& pairs,
                     const TrainConfig& config, Rng& rng, const StepObserver& observe = {});

History train_stage2(VibeState& state, const std::vector<classify::Stage2Example>& examples,
                     const TrainConfig& config, Rng& rng, const StepObserver& observe = {});

struct GradCheckReport {
    double max_rel_error = 0;
    double max_abs_error = 0;
    std::string worst;  // tensor[index] of the largest relative error
    std::size_t checked = 0;
    double tolerance = 0;
    bool passed() const { return max_rel_error <= tolerance; }
};

inline constexpr double kGradCheckFloor = 1e-6;

// Central differences on every entry of params against the analytic gradient;
// relative error |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(std::vector<nn::TensorView> params,
                           const std::vector<nn::TensorView>& analytic,
                           const std::function<double()>& loss, double step = 1e-4,
                           double tol = 1e-3, double floor = kGradCheckFloor);

struct VibeGradCheck {
    GradCheckReport objective;  // -objective w.r.t. NTM parameters
    GradCheckReport joint;      // joint loss w.r.t. all stage-1 parameters
    GradCheckReport sphere;     // L_sphere through the projection path
};

// Random toy model and pairs with fixed noise.
VibeGradCheck check_vibe_gradients(int vocab, int topics, int hidden, std::uint64_t seed,
                                   double lambda = 1.0, double mu = 0.7, double step = 1e-4,
                                   double tol = 1e-3);

struct PipelineData {
    std::vector<EncodedDoc> train;     // labeled past docs
    std::vector<EncodedDoc> adaptive;  // unlabeled future pool
    std::vector<retrieval::PairedSample> pairs;
};

std::vector<classify::LabeledPair> resolve_pairs(const PipelineData& data);
// Distinct future docs referenced by the pairs, in pool order.
std::vector<const EncodedDoc*> adaptive_docs(const PipelineData& data);

// Past docs get buckets 0..T-2 (equal-width over their timestamps), adaptive docs T-1.
std::vector<classify::Stage2Example> stage2_examples(
    const std::vector<EncodedDoc>& train, const std::vector<const EncodedDoc*>& adaptive,
    const std::vector<classify::PseudoLabeledDoc>& pseudo, int time_buckets);

struct PipelineResult {
    VibeState state;
    History stage1;
    History stage2;
    std::vector<classify::PseudoLabeledDoc> pseudo;
    bool diverged() const { return stage1.diverged || stage2.diverged; }
};

PipelineResult run_pipeline(const PipelineData& data, int vocab, int classes,
                            const TrainConfig& config, const StepObserver& observe = {});

struct GridCell {
    double lambda = 0;
    double mu = 0;
    double learning_rate = 0;
    double validation_accuracy = 0;
    bool diverged = false;
};

struct GridResult {
    TrainConfig best;
    std::vector<GridCell> cells;
    PipelineResult best_run;
};

// Exhaustive; a cell must be strictly better to displace an earlier one, so
// ties go to lower lambda, then mu, then learning rate. Diverged cells never win.
GridResult grid_search(const PipelineData& data, const std::vector<EncodedDoc>& validation,
                       int vocab, int classes, const TrainConfig& config);

}  // namespace vibe::train
