#include "vibe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace vibe::synth {

namespace {

constexpr std::uint64_t kTopicSalt = 0x70b1c5;
constexpr std::uint64_t kPeriodSalt = 0x9e41;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<double> dirichlet(int n, double alpha, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& v : w) sum += (v = rng.gamma(alpha));
    if (sum <= 0.0) {
        // Every gamma draw underflowed; fall back to a single random corner.
        std::fill(w.begin(), w.end(), 0.0);
        w[rng.below(static_cast<std::uint64_t>(n))] = 1.0;
        return w;
    }
    for (auto& v : w) v /= sum;
    return w;
}

std::vector<double> cumulative(const std::vector<double>& w) {
    std::vector<double> c(w.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) c[i] = (acc += w[i]);
    return c;
}

int draw(const std::vector<double>& cum, Rng& rng) {
    const double u = rng.uniform(0.0, cum.back());
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return static_cast<int>(it - cum.begin());
}

struct Generator {
    const DriftSpec& spec;
    std::vector<std::vector<double>> topic_cum;

    explicit Generator(const DriftSpec& s) : spec(s) {
        for (const auto& t : topic_word_distributions(s)) topic_cum.push_back(cumulative(t));
    }

    int n_topics() const { return spec.shared_topics + spec.periods * spec.period_topics; }

    void emit(int period, const std::string& id, std::int64_t ts, Rng& rng, SynthCorpus& out) const {
        const int S = spec.shared_topics;
        const int P = spec.period_topics;
        auto shared = dirichlet(S, spec.doc_concentration, rng);
        const int label = static_cast<int>(std::max_element(shared.begin(), shared.end()) - shared.begin());
        auto local = dirichlet(P, spec.doc_concentration, rng);
        if (spec.label_period_correlation > 0.0) {
            int linked = 0;
            for (int j = 0; j < P; ++j) linked += j % S == label;
            if (linked > 0)
                for (int j = 0; j < P; ++j)
                    local[static_cast<std::size_t>(j)] =
                        (1.0 - spec.label_period_correlation) * local[static_cast<std::size_t>(j)] +
                        (j % S == label ? spec.label_period_correlation / linked : 0.0);
        }
        std::vector<double> mixture(static_cast<std::size_t>(n_topics()), 0.0);
        for (int j = 0; j < S; ++j) mixture[static_cast<std::size_t>(j)] = spec.mix_shared * shared[static_cast<std::size_t>(j)];
        for (int j = 0; j < P; ++j)
            mixture[static_cast<std::size_t>(S + period * P + j)] = (1.0 - spec.mix_shared) * local[static_cast<std::size_t>(j)];
        const auto mix_cum = cumulative(mixture);

        const int span = spec.max_length - spec.min_length + 1;
        const int length = spec.min_length + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
        corpus::TimedDocument doc;
        doc.id = id;
        doc.timestamp = ts;
        doc.label = label;
        doc.period = period;
        doc.tokens.reserve(static_cast<std::size_t>(length));
        for (int i = 0; i < length; ++i) {
            const int topic = draw(mix_cum, rng);
            doc.tokens.push_back(word_name(draw(topic_cum[static_cast<std::size_t>(topic)], rng)));
        }
        out.docs.push_back(std::move(doc));
        out.truth.push_back({id, period, std::move(mixture)});
    }
};

SynthCorpus with_labels(const DriftSpec& spec) {
    SynthCorpus c;
    for (int j = 0; j < spec.shared_topics; ++j) c.labels.id_for("topic" + std::to_string(j));
    return c;
}

std::string padded(int v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*d", width, v);
    return buf;
}

}  // namespace

void DriftSpec::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw Error("bad-spec", what);
    };
    need(vocab >= 1 && shared_topics >= 1 && period_topics >= 1 && periods >= 1 && docs_per_period >= 1,
         "counts must be >= 1");
    need(min_length >= 1 && max_length >= min_length, "bad document length range");
    need(mix_shared > 0.0 && mix_shared < 1.0, "mix_shared must be in (0,1)");
    need(topic_sharpness > 0.0 && doc_concentration > 0.0, "concentrations must be > 0");
    need(label_period_correlation >= 0.0 && label_period_correlation <= 1.0,
         "label_period_correlation must be in [0,1]");
    need(period_seconds >= docs_per_period && start_time >= 0, "bad time layout");
}

std::string word_name(int id) { return "w" + padded(id, 4); }

std::vector<std::vector<double>> topic_word_distributions(const DriftSpec& spec) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, kTopicSalt));
    const int n = spec.shared_topics + spec.periods * spec.period_topics;
    std::vector<std::vector<double>> topics;
    topics.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) topics.push_back(dirichlet(spec.vocab, 1.0 / spec.topic_sharpness, rng));
    return topics;
}

SynthCorpus gen_corpus(const DriftSpec& spec) {
    Generator gen(spec);
    SynthCorpus out = with_labels(spec);
    for (int p = 0; p < spec.periods; ++p) {
        Rng rng(mix_seed(spec.seed, kPeriodSalt + static_cast<std::uint64_t>(p)));
        for (int i = 0; i < spec.docs_per_period; ++i) {
            const std::int64_t ts = spec.start_time + p * spec.period_seconds +
                                    (static_cast<std::int64_t>(i) * spec.period_seconds) / spec.docs_per_period;
            gen.emit(p, "p" + std::to_string(p) + "-" + padded(i, 6), ts, rng, out);
        }
    }
    return out;
}

SynthCorpus gen_stream(const DriftSpec& spec, int period, int count, const std::string& tag) {
    if (period < 0 || period >= spec.periods) throw Error("bad-spec", "stream period out of range");
    if (count < 1) throw Error("bad-spec", "stream count must be >= 1");
    Generator gen(spec);
    SynthCorpus out = with_labels(spec);
    Rng rng(mix_seed(spec.seed, fnv1a(tag) + static_cast<std::uint64_t>(period)));
    for (int i = 0; i < count; ++i) {
        const std::int64_t ts = spec.start_time + period * spec.period_seconds +
                                (static_cast<std::int64_t>(i) * spec.period_seconds) / count;
        gen.emit(period, tag + std::to_string(period) + "-" + padded(i, 6), ts, rng, out);
    }
    return out;
}

void write_ground_truth(const std::string& path, const std::vector<GroundTruth>& truth) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    char buf[32];
    for (const auto& t : truth) {
        out << t.id << '\t' << t.period << '\t';
        for (std::size_t i = 0; i < t.mixture.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", t.mixture[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\n';
    }
}

std::vector<GroundTruth> read_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<GroundTruth> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        GroundTruth t;
        std::string period, mix;
        if (!std::getline(ss, t.id, '\t') || !std::getline(ss, period, '\t') || !std::getline(ss, mix))
            throw Error("bad-record", path + ": " + line);
        t.period = std::stoi(period);
        std::stringstream ms(mix);
        std::string item;
        while (std::getline(ms, item, ',')) t.mixture.push_back(std::stod(item));
        out.push_back(std::move(t));
    }
    return out;
}

double linear_probe_accuracy(const std::vector<nn::Vec>& features, const std::vector<int>& targets,
                             std::uint64_t seed, int iterations) {
    if (features.size() != targets.size() || features.size() < 2)
        throw Error("bad-argument", "probe needs at least two labeled rows");
    std::map<int, int> classes;
    for (int t : targets) classes.emplace(t, 0);
    int next = 0;
    for (auto& [k, v] : classes) v = next++;
    const int C = next;
    const Eigen::Index D = features.front().size();

    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t n_fit = order.size() / 2;

    nn::Vec mean = nn::Vec::Zero(D), sd = nn::Vec::Zero(D);
    for (std::size_t i = 0; i < n_fit; ++i) mean += features[order[i]];
    mean /= static_cast<double>(n_fit);
    for (std::size_t i = 0; i < n_fit; ++i) sd += (features[order[i]] - mean).cwiseAbs2();
    sd = (sd / static_cast<double>(n_fit)).cwiseSqrt();
    for (Eigen::Index j = 0; j < D; ++j)
        if (sd[j] < 1e-12) sd[j] = 1.0;
    auto standardize = [&](const nn::Vec& v) -> nn::Vec { return (v - mean).cwiseQuotient(sd); };

    nn::Mat X(static_cast<Eigen::Index>(n_fit), D);
    std::vector<int> y(n_fit);
    for (std::size_t i = 0; i < n_fit; ++i) {
        X.row(static_cast<Eigen::Index>(i)) = standardize(features[order[i]]).transpose();
        y[i] = classes[targets[order[i]]];
    }
    nn::Mat W = nn::Mat::Zero(C, D);
    nn::Vec b = nn::Vec::Zero(C);
    constexpr double kRate = 0.5;
    const double inv = 1.0 / static_cast<double>(n_fit);
    for (int it = 0; it < iterations; ++it) {
        nn::Mat logits = (X * W.transpose()).rowwise() + b.transpose();
        nn::Mat G(logits.rows(), C);
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            nn::Vec p = nn::softmax(logits.row(i).transpose());
            p[y[static_cast<std::size_t>(i)]] -= 1.0;
            G.row(i) = p.transpose();
        }
        W -= kRate * inv * (G.transpose() * X);
        b -= kRate * inv * G.colwise().sum().transpose();
    }

    std::size_t hits = 0;
    const std::size_t n_eval = order.size() - n_fit;
    for (std::size_t i = n_fit; i < order.size(); ++i) {
        nn::Vec logits = W * standardize(features[order[i]]) + b;
        hits += nn::argmax(logits) == classes[targets[order[i]]];
    }
    return static_cast<double>(hits) / static_cast<double>(n_eval);
}

ProbeResult probe_disentanglement(const std::vector<nn::Vec>& zx, const std::vector<nn::Vec>& zs,
                                  const std::vector<int>& periods, std::uint64_t seed) {
    if (zx.size() != periods.size() || zs.size() != periods.size())
        throw Error("bad-argument", "one period id per latent row");
    std::vector<int> distinct(periods);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw Error("single-period", "probe needs at least two periods");
    return {linear_probe_accuracy(zx, periods, seed), linear_probe_accuracy(zs, periods, seed)};
}

}  // namespace vibe::synth
