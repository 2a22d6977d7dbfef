#include "vibe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vibe::eval {

namespace {

void check_lengths(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw Error("length-mismatch", "predictions and gold differ in length");
    if (a.empty()) throw Error("empty-input", "no predictions");
}

double sq_dist(const Vec& a, const Vec& b) { return (a - b).squaredNorm(); }

std::vector<Vec> subsample(const std::vector<Vec>& v, std::size_t cap, Rng& rng) {
    if (v.size() <= cap) return v;
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    std::vector<Vec> out;
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double accuracy(std::span<const int> predictions, std::span<const int> gold) {
    check_lengths(predictions, gold);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) hits += predictions[i] == gold[i];
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::vector<ClassStats> per_class(std::span<const int> predictions, std::span<const int> gold,
                                  int classes) {
    check_lengths(predictions, gold);
    std::vector<int> tp(static_cast<std::size_t>(classes)), predicted(tp.size()), actual(tp.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto p = static_cast<std::size_t>(predictions[i]);
        const auto g = static_cast<std::size_t>(gold[i]);
        if (p >= tp.size() || g >= tp.size()) throw Error("bad-label", "class id out of range");
        ++predicted[p];
        ++actual[g];
        tp[g] += p == g;
    }
    std::vector<ClassStats> out(tp.size());
    for (std::size_t c = 0; c < tp.size(); ++c) {
        out[c].support = actual[c];
        out[c].precision = predicted[c] ? static_cast<double>(tp[c]) / predicted[c] : 0.0;
        out[c].recall = actual[c] ? static_cast<double>(tp[c]) / actual[c] : 0.0;
    }
    return out;
}

double median_pairwise_distance(const std::vector<Vec>& pooled) {
    std::vector<double> d;
    d.reserve(pooled.size() * (pooled.size() - 1) / 2);
    for (std::size_t i = 0; i < pooled.size(); ++i)
        for (std::size_t j = i + 1; j < pooled.size(); ++j) d.push_back(std::sqrt(sq_dist(pooled[i], pooled[j])));
    if (d.empty()) return 0.0;
    const std::size_t mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    if (d.size() % 2 == 1) return d[mid];
    const double hi = d[mid];
    const double lo = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double mmd_rbf_unbiased(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty()) throw Error("empty-input", "mmd needs two non-empty samples");
    const auto dim = a.front().size();
    for (const auto* set : {&a, &b})
        for (const auto& v : *set)
            if (v.size() != dim) throw Error("dimension-mismatch", "mmd samples differ in dimension");
    std::vector<Vec> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    double s = median_pairwise_distance(pooled);
    if (!(s > 0.0)) s = 1.0;
    const double gamma = 1.0 / (2.0 * s * s);
    auto k = [&](const Vec& x, const Vec& y) { return std::exp(-gamma * sq_dist(x, y)); };

    auto within = [&](const std::vector<Vec>& v) {
        if (v.size() < 2) return 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j) sum += k(v[i], v[j]);
        const double n = static_cast<double>(v.size());
        return 2.0 * sum / (n * (n - 1.0));
    };
    double cross = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) cross += k(x, y);
    cross /= static_cast<double>(a.size()) * static_cast<double>(b.size());
    return within(a) + within(b) - 2.0 * cross;
}

double mmd_rbf(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    return std::max(0.0, mmd_rbf_unbiased(a, b));
}

Vec Baseline::probabilities(const classify::EncodedDoc& doc) const {
    return nn::softmax(head.forward(embedding.embed(doc)).logits);
}

int Baseline::predict(const classify::EncodedDoc& doc) const {
    return nn::argmax(head.forward(embedding.embed(doc)).logits);
}

Baseline past_only_baseline(const std::vector<classify::EncodedDoc>& train, int vocab, int classes,
                            const train::TrainConfig& config) {
    config.validate();
    if (train.empty()) throw Error("empty-input", "no training docs");
    Rng root(config.seed);
    Rng init = root.child(7);
    Rng order_rng = root.child(8);

    Baseline m{classify::EmbeddingProvider(vocab, config.embedding),
               classify::ClassifierHead(config.embedding, config.head_hidden, classes)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.embedding));
    for (Eigen::Index c = 0; c < m.embedding.table.cols(); ++c)
        for (Eigen::Index r = 0; r < m.embedding.table.rows(); ++r) m.embedding.table(r, c) = init.uniform(-bound, bound);
    nn::init_uniform(m.head.mlp, init);
    nn::init_uniform(m.head.out, init);

    Baseline g{classify::EmbeddingProvider(vocab, config.embedding),
               classify::ClassifierHead(config.embedding, config.head_hidden, classes)};
    auto views = [](Baseline& b) {
        std::vector<nn::TensorView> v{{"baseline.embedding", nn::ParamGroup::baseline, nn::view_of(b.embedding.table)}};
        nn::append_dense(v, "baseline.mlp", nn::ParamGroup::baseline, b.head.mlp);
        nn::append_dense(v, "baseline.out", nn::ParamGroup::baseline, b.head.out);
        return v;
    };
    auto params = views(m);
    auto grads = views(g);
    nn::Adam adam(config.learning_rate);
    const int epochs = config.baseline_epochs > 0 ? config.baseline_epochs : config.stage1_epochs * config.depth;
    const std::size_t B = static_cast<std::size_t>(config.batch_size);
    std::vector<std::size_t> order(train.size());
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += B) {
            const std::size_t end = std::min(order.size(), start + B);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& t : grads) std::fill(t.data.begin(), t.data.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const auto& d = train[order[i]];
                if (!d.label) throw Error("missing-label", d.id);
                auto trace = m.head.forward(m.embedding.embed(d));
                Vec dl;
                nn::cross_entropy(trace.logits, *d.label, &dl);
                Vec de = m.head.backward(trace, inv * dl, g.head);
                if (!m.embedding.overridden(d)) m.embedding.backward(d.bow, de, g.embedding);
            }
            adam.step(params, grads, {nn::ParamGroup::baseline});
        }
    }
    return m;
}

std::string to_json(const EvalReport& r) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["accuracy"] = r.accuracy;
    j["baseline_accuracy"] = r.baseline_accuracy ? ordered_json(*r.baseline_accuracy) : ordered_json(nullptr);
    j["class_names"] = r.class_names;
    auto& pc = j["per_class"] = ordered_json::array();
    for (const auto& c : r.per_class)
        pc.push_back({{"precision", c.precision}, {"recall", c.recall}, {"support", c.support}});
    j["mmd_scores"] = ordered_json::object();
    for (const auto& [k, v] : r.mmd_scores) j["mmd_scores"][k] = v;
    j["vocab_overlaps"] = ordered_json::object();
    for (const auto& [k, v] : r.vocab_overlaps) j["vocab_overlaps"][k] = v;
    j["config"] = ordered_json::object();
    for (const auto& [k, v] : r.config) j["config"][k] = v;
    j["seeds"] = r.seeds;
    j["doc_ids"] = r.doc_ids;
    j["predictions"] = r.predictions;
    j["gold"] = r.gold;
    auto& curve = j["accuracy_vs_n"] = ordered_json::array();
    for (const auto& p : r.accuracy_vs_n) curve.push_back({{"N", p.depth}, {"accuracy", p.accuracy}});
    return j.dump(2) + "\n";
}

EvalReport from_json(const std::string& text) {
    using nlohmann::ordered_json;
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw Error("bad-report", e.what());
    }
    EvalReport r;
    try {
        r.accuracy = j.at("accuracy").get<double>();
        if (!j.at("baseline_accuracy").is_null()) r.baseline_accuracy = j["baseline_accuracy"].get<double>();
        r.class_names = j.at("class_names").get<std::vector<std::string>>();
        for (const auto& c : j.at("per_class"))
            r.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(), c.at("support").get<int>()});
        for (const auto& [k, v] : j.at("mmd_scores").items()) r.mmd_scores[k] = v.get<double>();
        for (const auto& [k, v] : j.at("vocab_overlaps").items()) r.vocab_overlaps[k] = v.get<double>();
        for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
        r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        r.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
        r.predictions = j.at("predictions").get<std::vector<int>>();
        r.gold = j.at("gold").get<std::vector<int>>();
        for (const auto& p : j.at("accuracy_vs_n")) r.accuracy_vs_n.push_back({p.at("N").get<int>(), p.at("accuracy").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-report", e.what());
    }
    return r;
}

void write_report(const std::string& path, const EvalReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path);
    out << to_json(report);
}

EvalReport read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

EvalReport run_report(const ReportInputs& in) {
    EvalReport r;
    r.class_names = in.labels.names;
    r.config = in.config.entries();
    r.seeds = in.seeds;
    r.accuracy_vs_n = in.accuracy_vs_n;

    const auto test = classify::encode_docs(in.test, in.vocab);
    std::vector<int> baseline_pred;
    for (const auto& d : test) {
        if (!d.label) throw Error("missing-label", d.id);
        r.doc_ids.push_back(d.id);
        r.gold.push_back(*d.label);
        r.predictions.push_back(classify::predict_final(d, in.state));
        if (in.baseline) baseline_pred.push_back(in.baseline->predict(d));
    }
    if (!test.empty()) {
        r.accuracy = accuracy(r.predictions, r.gold);
        r.per_class = per_class(r.predictions, r.gold, static_cast<int>(in.labels.names.size()));
        if (in.baseline) r.baseline_accuracy = accuracy(baseline_pred, r.gold);
    }

    const std::pair<const char*, const std::vector<corpus::TimedDocument>*> sets[] = {
        {"train", &in.train}, {"adaptive", &in.adaptive}, {"test", &in.test}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j)
            if (!sets[i].second->empty() && !sets[j].second->empty())
                r.vocab_overlaps[std::string(sets[i].first) + "-" + sets[j].first] =
                    corpus::vocab_overlap(*sets[i].second, *sets[j].second, in.overlap_top_k);

    // Raw-data space: TF-IDF rows from one index over the union.
    std::vector<corpus::TimedDocument> pooled;
    for (const auto& [name, docs] : sets) pooled.insert(pooled.end(), docs->begin(), docs->end());
    if (pooled.empty()) return r;
    const auto index = retrieval::build_index(pooled, in.vocab, retrieval::Scheme::tfidf_cosine);
    const int V = static_cast<int>(in.vocab.size());
    const auto rows = index.tfidf_rows();
    std::vector<std::vector<Vec>> raw(3), model(3);
    std::size_t row = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto encoded = classify::encode_docs(*sets[s].second, in.vocab);
        for (const auto& d : encoded) {
            Vec v = Vec::Zero(V);
            for (const auto& [t, w] : rows[row++]) v[t] = w;
            raw[s].push_back(std::move(v));
            model[s].push_back(classify::sphere_project(d, s == 0 ? Side::past : Side::future, in.state));
        }
    }
    Rng rng = Rng(in.config.seed).child(11);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) {
            if (raw[i].empty() || raw[j].empty()) continue;
            const std::string name = std::string(sets[i].first) + "-" + sets[j].first;
            r.mmd_scores["tfidf:" + name] =
                mmd_rbf(subsample(raw[i], in.mmd_max_samples, rng), subsample(raw[j], in.mmd_max_samples, rng));
            r.mmd_scores["sphere:" + name] =
                mmd_rbf(subsample(model[i], in.mmd_max_samples, rng), subsample(model[j], in.mmd_max_samples, rng));
        }
    return r;
}

void write_plot_data(const std::string& prefix, const EvalReport& report) {
    auto open = [&](const std::string& name) {
        std::ofstream out(prefix + name);
        if (!out) throw Error("io", "cannot write " + prefix + name);
        return out;
    };
    {
        auto out = open("overlap.csv");
        out << "pair,overlap_percent\n";
        for (const auto& [k, v] : report.vocab_overlaps) out << k << ',' << fmt(v) << '\n';
    }
    {
        auto out = open("mmd.csv");
        out << "pair,mmd\n";
        for (const auto& [k, v] : report.mmd_scores) out << k << ',' << fmt(v) << '\n';
    }
    {
        auto out = open("accuracy_vs_n.csv");
        out << "N,accuracy\n";
        for (const auto& p : report.accuracy_vs_n) out << p.depth << ',' << fmt(p.accuracy) << '\n';
    }
}

}  // namespace vibe::eval
