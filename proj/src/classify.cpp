#include "vibe/classify.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vibe::classify {

std::vector<EncodedDoc> encode_docs(const std::vector<corpus::TimedDocument>& docs,
                                    const corpus::Vocabulary& vocab) {
    std::vector<EncodedDoc> out;
    out.reserve(docs.size());
    for (const auto& d : docs) out.push_back({d.id, corpus::to_bow(d, vocab), d.timestamp, d.label});
    return out;
}

Vec EmbeddingProvider::embed(const corpus::BowVector& bow) const {
    Vec e = Vec::Zero(width());
    if (bow.total() == 0) return e;
    for (const auto& en : bow.entries()) e.noalias() += en.count * table.row(en.id).transpose();
    return e / static_cast<double>(bow.total());
}

Vec EmbeddingProvider::embed(const EncodedDoc& doc) const {
    if (auto it = precomputed.find(doc.id); it != precomputed.end()) return it->second;
    return embed(doc.bow);
}

void EmbeddingProvider::backward(const corpus::BowVector& bow, const Vec& d,
                                 EmbeddingProvider& grad) const {
    if (bow.total() == 0) return;
    const double inv = 1.0 / static_cast<double>(bow.total());
    for (const auto& en : bow.entries()) grad.table.row(en.id).noalias() += (en.count * inv) * d.transpose();
}

Vec embed(const corpus::BowVector& bow, const EmbeddingProvider& provider) {
    return provider.embed(bow);
}

void load_precomputed_embeddings(const std::string& path, EmbeddingProvider& provider) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id;
        ss >> id;
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (static_cast<int>(vals.size()) != provider.width())
            throw Error("dimension-mismatch", "embedding for " + id + " has wrong width");
        provider.precomputed[id] = Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    }
}

ClassifierHead::Trace ClassifierHead::forward(const Vec& input) const {
    Trace t;
    t.input = input;
    t.pre = mlp.forward(input);
    t.u = nn::relu(t.pre);
    t.logits = out.forward(t.u);
    return t;
}

Vec ClassifierHead::backward(const Trace& t, const Vec& dlogits, ClassifierHead& grad) const {
    Vec du = out.backward(t.u, dlogits, grad.out);
    return mlp.backward(t.input, nn::relu_backward(t.pre, du), grad.mlp);
}

VibeState::VibeState(int vocab, int topics, int hidden, int head_hidden, int embed_width,
                     int classes, int time_buckets)
    : ntm(vocab, topics, hidden),
      embedding(vocab, embed_width),
      task1(embed_width + topics, head_hidden, classes),
      task2(embed_width + vocab, head_hidden, classes),
      time2(embed_width + vocab, head_hidden, time_buckets) {}

std::vector<nn::TensorView> VibeState::tensors() {
    using nn::ParamGroup;
    std::vector<nn::TensorView> out;
    ntm.append_tensors(out);
    out.push_back({"embedding.table", ParamGroup::embedding, nn::view_of(embedding.table)});
    nn::append_dense(out, "task1.mlp", ParamGroup::task1, task1.mlp);
    nn::append_dense(out, "task1.out", ParamGroup::task1, task1.out);
    nn::append_dense(out, "task2.mlp", ParamGroup::task2, task2.mlp);
    nn::append_dense(out, "task2.out", ParamGroup::task2, task2.out);
    nn::append_dense(out, "time2.mlp", ParamGroup::time2, time2.mlp);
    nn::append_dense(out, "time2.out", ParamGroup::time2, time2.out);
    return out;
}

VibeState VibeState::zeros_like() const {
    return VibeState(ntm.vocab, ntm.topics, ntm.hidden, head_hidden(), embedding.width(), classes(),
                     time_buckets());
}

void VibeState::set_zero() {
    for (auto& t : tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
}

Vec stage1_input(const EncodedDoc& doc, const VibeState& state) {
    Vec e = state.embedding.embed(doc);
    Vec r = ntm::approx_shared(doc.bow, Side::past, state.ntm).mean;
    Vec in(e.size() + r.size());
    in << e, r;
    return in;
}

Vec stage1_features(const EncodedDoc& doc, const VibeState& state) {
    return state.task1.forward(stage1_input(doc, state)).u;
}

Vec stage1_predict(const EncodedDoc& doc, const VibeState& state) {
    return nn::softmax(state.task1.forward(stage1_input(doc, state)).logits);
}

namespace {

JointLoss joint_impl(const std::vector<LabeledPair>& batch, const VibeState& state, double mu,
                     double lambda, const std::vector<ntm::NoiseDraws>& noise, VibeState* grad) {
    if (mu < 0.0) throw Error("bad-mu", "mu must be >= 0");
    if (lambda < 0.0) throw Error("bad-lambda", "lambda must be >= 0");
    if (noise.size() != batch.size()) throw Error("bad-argument", "one noise set per pair");
    JointLoss out;
    if (batch.empty()) return out;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const int E = state.embedding.width();
    const int K = state.ntm.topics;
    std::vector<ntm::LossBreakdown> parts;
    parts.reserve(batch.size());
    double ce_sum = 0.0;

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& past = *batch[i].past;
        const auto& future = *batch[i].future;
        if (!past.label) throw Error("missing-label", past.id);
        const int label = *past.label;
        if (label < 0 || label >= state.classes()) throw Error("bad-label", past.id);

        auto pass = ntm::forward_pair({past.bow, future.bow}, state.ntm, noise[i]);
        Vec e = state.embedding.embed(past);
        Vec in(E + K);
        in << e, pass.rx.out.mean;
        auto trace = state.task1.forward(in);
        Vec dlogits;
        ce_sum += nn::cross_entropy(trace.logits, label, grad ? &dlogits : nullptr);

        auto terms = pass.terms;
        terms.lambda = lambda;
        terms.assemble();
        parts.push_back(terms);

        if (grad) {
            Vec din = state.task1.backward(trace, inv_b * dlogits, grad->task1);
            if (!state.embedding.overridden(past))
                state.embedding.backward(past.bow, din.head(E), grad->embedding);
            Vec drx = din.tail(K);
            ntm::backward_pair(pass, state.ntm, lambda, mu * inv_b, grad->ntm, &drx);
        }
    }
    out.breakdown = ntm::mean_breakdown(parts, lambda);
    out.breakdown.mu = mu;
    out.past = ce_sum * inv_b;
    out.ntm = out.breakdown.ntm_loss();
    out.total = out.past + mu * out.ntm;
    return out;
}

}  // namespace

JointLoss joint_loss(const std::vector<LabeledPair>& batch, const VibeState& state, double mu,
                     double lambda, const std::vector<ntm::NoiseDraws>& noise) {
    return joint_impl(batch, state, mu, lambda, noise, nullptr);
}

JointLoss joint_loss_backward(const std::vector<LabeledPair>& batch, const VibeState& state,
                              double mu, double lambda, const std::vector<ntm::NoiseDraws>& noise,
                              VibeState& grad) {
    return joint_impl(batch, state, mu, lambda, noise, &grad);
}

std::vector<PseudoLabeledDoc> pseudo_label(const std::vector<const EncodedDoc*>& docs,
                                           const VibeState& state) {
    std::vector<PseudoLabeledDoc> out;
    out.reserve(docs.size());
    for (const auto* d : docs) {
        Vec p = stage1_predict(*d, state);
        const int best = nn::argmax(p);
        out.push_back({d->id, best, p[best]});
    }
    return out;
}

void write_pseudo_labels(const std::string& path, const std::vector<PseudoLabeledDoc>& docs) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    char buf[64];
    for (const auto& d : docs) {
        std::snprintf(buf, sizeof buf, "%.17g", d.confidence);
        out << d.id << '\t' << d.label << '\t' << buf << '\n';
    }
}

std::vector<PseudoLabeledDoc> read_pseudo_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<PseudoLabeledDoc> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        PseudoLabeledDoc d;
        std::string label, conf;
        if (!std::getline(ss, d.id, '\t') || !std::getline(ss, label, '\t') || !std::getline(ss, conf))
            throw Error("bad-record", path + ": " + line);
        d.label = std::stoi(label);
        d.confidence = std::stod(conf);
        out.push_back(std::move(d));
    }
    return out;
}

namespace {

// Forward values of the projection path, kept for the backward pass.
struct ProjectionTrace {
    nn::SparseInput in;
    ntm::GaussianEncoder::Trace variant, shared;
    Vec theta_v, theta_s, dec_in, recon, embedding, raw, feature;
    double norm = 0;
};

ProjectionTrace project(const EncodedDoc& doc, Side side, const VibeState& state) {
    const auto& m = state.ntm;
    const bool past = side == Side::past;
    ProjectionTrace t;
    t.in = ntm::as_input(doc.bow);
    t.variant = (past ? m.enc_x : m.enc_y).forward(t.in);
    t.shared = (past ? m.approx_x : m.approx_y).forward(t.in);
    t.theta_v = nn::softmax(t.variant.out.mean);
    t.theta_s = nn::softmax(t.shared.out.mean);
    t.dec_in.resize(2 * m.topics);
    t.dec_in << t.theta_v, t.theta_s;
    t.recon = nn::softmax((past ? m.dec_x : m.dec_y).forward(t.dec_in));
    t.embedding = state.embedding.embed(doc);
    t.raw.resize(t.embedding.size() + t.recon.size());
    t.raw << t.embedding, t.recon;
    t.norm = t.raw.norm();
    if (t.norm > 0.0) {
        t.feature = t.raw / t.norm;
    } else {
        t.feature = Vec::Zero(t.raw.size());
        t.feature[0] = 1.0;
    }
    return t;
}

void project_backward(const EncodedDoc& doc, Side side, const ProjectionTrace& t,
                      const Vec& dfeature, const VibeState& state, VibeState& grad) {
    if (t.norm <= 0.0) return;
    const auto& m = state.ntm;
    const bool past = side == Side::past;
    const int E = state.embedding.width();
    const int K = m.topics;
    Vec draw = (dfeature - t.feature * t.feature.dot(dfeature)) / t.norm;
    if (!state.embedding.overridden(doc)) state.embedding.backward(doc.bow, draw.head(E), grad.embedding);
    Vec dlogits = nn::softmax_backward(t.recon, draw.tail(draw.size() - E));
    const auto& dec = past ? m.dec_x : m.dec_y;
    Vec din = dec.backward(t.dec_in, dlogits, past ? grad.ntm.dec_x : grad.ntm.dec_y);
    Vec dmean_v = nn::softmax_backward(t.theta_v, din.head(K));
    Vec dmean_s = nn::softmax_backward(t.theta_s, din.tail(K));
    const Vec zero = Vec::Zero(K);
    (past ? m.enc_x : m.enc_y).backward(t.in, t.variant, dmean_v, zero, past ? grad.ntm.enc_x : grad.ntm.enc_y);
    (past ? m.approx_x : m.approx_y)
        .backward(t.in, t.shared, dmean_s, zero, past ? grad.ntm.approx_x : grad.ntm.approx_y);
}

void check_example(const Stage2Example& ex, const VibeState& state) {
    if (ex.label < 0 || ex.label >= state.classes()) throw Error("bad-label", ex.doc->id);
    if (ex.bucket < 0 || ex.bucket >= state.time_buckets()) throw Error("bad-bucket", ex.doc->id);
}

}  // namespace

Vec reconstruct_for_projection(const EncodedDoc& doc, Side side, const ntm::VibeModel& model) {
    const bool past = side == Side::past;
    auto variant = past ? ntm::encode_past(doc.bow, model) : ntm::encode_future(doc.bow, model);
    auto shared = ntm::approx_shared(doc.bow, side, model);
    return ntm::decode(variant.mean, shared.mean, side, model);
}

Vec sphere_project(const EncodedDoc& doc, Side side, const VibeState& state) {
    return project(doc, side, state).feature;
}

Stage2Losses stage2_heads_backward(const std::vector<const Vec*>& features,
                                   const std::vector<Stage2Example>& batch,
                                   const VibeState& state, VibeState* grad) {
    Stage2Losses out;
    if (batch.empty()) return out;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check_example(batch[i], state);
        auto tt = state.task2.forward(*features[i]);
        auto ht = state.time2.forward(*features[i]);
        Vec dt, dh;
        out.task += nn::cross_entropy(tt.logits, batch[i].label, grad ? &dt : nullptr);
        out.time += nn::cross_entropy(ht.logits, batch[i].bucket, grad ? &dh : nullptr);
        if (grad) {
            state.task2.backward(tt, inv_b * dt, grad->task2);
            state.time2.backward(ht, inv_b * dh, grad->time2);
        }
    }
    out.task *= inv_b;
    out.time *= inv_b;
    out.sphere = out.task + out.time;
    return out;
}

Stage2Losses stage2_losses(const std::vector<Stage2Example>& batch, const VibeState& state) {
    std::vector<Vec> feats;
    feats.reserve(batch.size());
    for (const auto& ex : batch) feats.push_back(sphere_project(*ex.doc, ex.side, state));
    std::vector<const Vec*> ptrs;
    for (const auto& f : feats) ptrs.push_back(&f);
    return stage2_heads_backward(ptrs, batch, state, nullptr);
}

Stage2Losses stage2_backward(const std::vector<Stage2Example>& batch, const VibeState& state,
                             VibeState& grad, bool through_features) {
    Stage2Losses out;
    if (batch.empty()) return out;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        check_example(ex, state);
        auto pt = project(*ex.doc, ex.side, state);
        auto tt = state.task2.forward(pt.feature);
        auto ht = state.time2.forward(pt.feature);
        Vec dt, dh;
        out.task += nn::cross_entropy(tt.logits, ex.label, &dt);
        out.time += nn::cross_entropy(ht.logits, ex.bucket, &dh);
        Vec df = state.task2.backward(tt, inv_b * dt, grad.task2);
        df += state.time2.backward(ht, inv_b * dh, grad.time2);
        if (through_features) project_backward(*ex.doc, ex.side, pt, df, state, grad);
    }
    out.task *= inv_b;
    out.time *= inv_b;
    out.sphere = out.task + out.time;
    return out;
}

int predict_final(const EncodedDoc& doc, const VibeState& state) {
    Vec f = sphere_project(doc, Side::future, state);
    return nn::argmax(state.task2.forward(f).logits);
}

}  // namespace vibe::classify
