#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vibe/corpus.hpp"
#include "vibe/nn.hpp"
#include "vibe/ntm.hpp"

namespace vibe::classify {

using nn::Vec;
using ntm::Side;

inline constexpr int kDefaultEmbedding = 128;

// A document after vocabulary mapping; the unit every model-side call works on.
struct EncodedDoc {
    std::string id;
    corpus::BowVector bow;
    std::int64_t timestamp = 0;
    std::optional<int> label;
};

std::vector<EncodedDoc> encode_docs(const std::vector<corpus::TimedDocument>& docs,
                                    const corpus::Vocabulary& vocab);

// Count-weighted mean of learned word embeddings. Documents listed in
// `precomputed` use the supplied vector instead (and receive no gradient).
struct EmbeddingProvider {
    nn::Mat table;  // V x E
    std::unordered_map<std::string, Vec> precomputed;

    EmbeddingProvider() = default;
    EmbeddingProvider(int vocab, int width) : table(nn::Mat::Zero(vocab, width)) {}

    int width() const { return static_cast<int>(table.cols()); }
    Vec embed(const corpus::BowVector& bow) const;
    Vec embed(const EncodedDoc& doc) const;
    bool overridden(const EncodedDoc& doc) const { return precomputed.contains(doc.id); }
    void backward(const corpus::BowVector& bow, const Vec& d, EmbeddingProvider& grad) const;
};

Vec embed(const corpus::BowVector& bow, const EmbeddingProvider& provider);

// Line records: doc-id followed by E floats.
void load_precomputed_embeddings(const std::string& path, EmbeddingProvider& provider);

// u = relu(W_mlp x + b_mlp); logits = W_out u + b_out.
struct ClassifierHead {
    nn::Dense mlp;
    nn::Dense out;

    ClassifierHead() = default;
    ClassifierHead(int in, int hidden, int classes) : mlp(in, hidden), out(hidden, classes) {}

    int classes() const { return out.out(); }

    struct Trace {
        Vec input, pre, u, logits;
    };
    Trace forward(const Vec& input) const;
    // Returns the gradient w.r.t. the head input.
    Vec backward(const Trace& trace, const Vec& dlogits, ClassifierHead& grad) const;
};

// All trainable parameters of one VIBE run.
struct VibeState {
    ntm::VibeModel ntm;
    EmbeddingProvider embedding;
    ClassifierHead task1;  // stage-1 task classifier over [embedding; r^x mean]
    ClassifierHead task2;  // stage-2 task head over sphere features
    ClassifierHead time2;  // stage-2 time-bucket head over sphere features

    VibeState() = default;
    VibeState(int vocab, int topics, int hidden, int head_hidden, int embed_width, int classes,
              int time_buckets);

    int classes() const { return task1.classes(); }
    int time_buckets() const { return time2.classes(); }
    int head_hidden() const { return task1.mlp.out(); }

    // Declared order: ntm tensors, embedding table, task1, task2, time2.
    std::vector<nn::TensorView> tensors();
    // Same shapes, all zeros (gradient buffer).
    VibeState zeros_like() const;
    void set_zero();
};

Vec stage1_input(const EncodedDoc& doc, const VibeState& state);
Vec stage1_features(const EncodedDoc& doc, const VibeState& state);
Vec stage1_predict(const EncodedDoc& doc, const VibeState& state);

struct LabeledPair {
    const EncodedDoc* past;    // carries the class label
    const EncodedDoc* future;
};

struct JointLoss {
    double total = 0;   // past + mu * ntm
    double past = 0;    // mean cross-entropy
    double ntm = 0;     // mean of -objective
    ntm::LossBreakdown breakdown;
};

// noise[i] is used for batch[i].
JointLoss joint_loss(const std::vector<LabeledPair>& batch, const VibeState& state, double mu,
                     double lambda, const std::vector<ntm::NoiseDraws>& noise);
// Same value; also accumulates d(total)/d(params) into grad.
JointLoss joint_loss_backward(const std::vector<LabeledPair>& batch, const VibeState& state,
                              double mu, double lambda, const std::vector<ntm::NoiseDraws>& noise,
                              VibeState& grad);

struct PseudoLabeledDoc {
    std::string id;
    int label = 0;
    double confidence = 0;
};

std::vector<PseudoLabeledDoc> pseudo_label(const std::vector<const EncodedDoc*>& docs,
                                           const VibeState& state);

void write_pseudo_labels(const std::string& path, const std::vector<PseudoLabeledDoc>& docs);
std::vector<PseudoLabeledDoc> read_pseudo_labels(const std::string& path);

// Decoder output from single-view posterior means.
Vec reconstruct_for_projection(const EncodedDoc& doc, Side side, const ntm::VibeModel& model);

// Unit-norm [embedding; reconstruction]; zero input maps to the first basis vector.
Vec sphere_project(const EncodedDoc& doc, Side side, const VibeState& state);

struct Stage2Example {
    const EncodedDoc* doc;
    int label;   // true or pseudo label
    int bucket;  // time bucket in [0, T)
    Side side;
};

struct Stage2Losses {
    double task = 0;
    double time = 0;
    double sphere = 0;  // task + time
};

Stage2Losses stage2_losses(const std::vector<Stage2Example>& batch, const VibeState& state);

// Accumulates gradients of L_sphere. With through_features the gradient also
// flows into the embedding table, encoders, and decoders.
Stage2Losses stage2_backward(const std::vector<Stage2Example>& batch, const VibeState& state,
                             VibeState& grad, bool through_features);

// Loss/gradient for precomputed, fixed sphere features (heads only).
Stage2Losses stage2_heads_backward(const std::vector<const Vec*>& features,
                                   const std::vector<Stage2Example>& batch,
                                   const VibeState& state, VibeState* grad);

int predict_final(const EncodedDoc& doc, const VibeState& state);

}  // namespace vibe::classify
