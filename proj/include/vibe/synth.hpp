#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vibe/corpus.hpp"
#include "vibe/nn.hpp"

namespace vibe::synth {

struct DriftSpec {
    int vocab = 500;
    int shared_topics = 2;  // label-linked, present in every period
    int period_topics = 3;  // exclusive to each period
    int periods = 3;
    int docs_per_period = 1000;
    int min_length = 20;
    int max_length = 40;
    double mix_shared = 0.5;
    double topic_sharpness = 10.0;  // topic-word Dirichlet concentration is 1/sharpness
    double doc_concentration = 1.0;
    // Weight pulling each doc's period mixture toward the period topics linked
    // to its label (topic j is linked to label j mod shared_topics).
    double label_period_correlation = 0.0;
    std::int64_t start_time = 1'600'000'000;
    std::int64_t period_seconds = 30 * 86400;
    std::uint64_t seed = 0;

    // Throws "bad-spec".
    void validate() const;
};

struct GroundTruth {
    std::string id;
    int period = 0;
    // Over shared topics then each period's topics (length shared + periods * period_topics).
    std::vector<double> mixture;
};

struct SynthCorpus {
    std::vector<corpus::TimedDocument> docs;
    std::vector<GroundTruth> truth;
    corpus::LabelMap labels;  // "topic0", "topic1", ...
};

// Topic-word distributions for a spec; shared by gen_corpus and gen_stream.
std::vector<std::vector<double>> topic_word_distributions(const DriftSpec& spec);

SynthCorpus gen_corpus(const DriftSpec& spec);

// Extra documents from one period's mixture (same topics as gen_corpus), with
// timestamps interleaved inside that period. Ids are prefixed by `tag`.
SynthCorpus gen_stream(const DriftSpec& spec, int period, int count, const std::string& tag);

std::string word_name(int id);

void write_ground_truth(const std::string& path, const std::vector<GroundTruth>& truth);
std::vector<GroundTruth> read_ground_truth(const std::string& path);

// Multinomial logistic regression, full-batch gradient descent for a fixed
// number of iterations on standardized features. Fits on a seeded half of the
// rows and reports accuracy on the other half.
double linear_probe_accuracy(const std::vector<nn::Vec>& features, const std::vector<int>& targets,
                             std::uint64_t seed, int iterations = 200);

struct ProbeResult {
    double acc_zx = 0;
    double acc_zs = 0;
};

// Throws "single-period" when fewer than two periods are represented.
ProbeResult probe_disentanglement(const std::vector<nn::Vec>& zx, const std::vector<nn::Vec>& zs,
                                  const std::vector<int>& periods, std::uint64_t seed);

}  // namespace vibe::synth
