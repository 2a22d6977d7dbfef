#include "vibe/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vibe::retrieval {

Scheme parse_scheme(const std::string& name) {
    if (name == "tfidf" || name == "tfidf-cosine") return Scheme::tfidf_cosine;
    if (name == "bm25") return Scheme::bm25;
    throw Error("bad-scheme", name);
}

std::string scheme_name(Scheme scheme) {
    return scheme == Scheme::bm25 ? "bm25" : "tfidf";
}

LexicalIndex build_index(const std::vector<corpus::TimedDocument>& pool,
                         const corpus::Vocabulary& vocab, Scheme scheme) {
    if (pool.empty()) throw Error("empty-pool", "retrieval pool is empty");
    LexicalIndex index;
    index.scheme_ = scheme;
    index.vocab_ = vocab;
    const std::size_t V = vocab.size();
    const double n = static_cast<double>(pool.size());
    index.df_.assign(V, 0);
    index.idf_.assign(V, 0.0);
    index.postings_.assign(V, {});

    std::vector<corpus::BowVector> bows;
    bows.reserve(pool.size());
    for (const auto& d : pool) {
        index.doc_ids_.push_back(d.id);
        index.timestamps_.push_back(d.timestamp);
        bows.push_back(corpus::to_bow(d, vocab));
        for (const auto& e : bows.back().entries()) ++index.df_[static_cast<std::size_t>(e.id)];
        index.doc_len_.push_back(static_cast<double>(bows.back().total()));
    }
    index.avg_len_ = std::accumulate(index.doc_len_.begin(), index.doc_len_.end(), 0.0) / n;

    for (std::size_t t = 0; t < V; ++t) {
        const double df = index.df_[t];
        index.idf_[t] = scheme == Scheme::tfidf_cosine
                            ? std::log((1.0 + n) / (1.0 + df)) + 1.0
                            : std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    for (std::size_t i = 0; i < bows.size(); ++i) {
        const auto& entries = bows[i].entries();
        double norm2 = 0.0;
        if (scheme == Scheme::tfidf_cosine)
            for (const auto& e : entries) {
                double w = e.count * index.idf_[static_cast<std::size_t>(e.id)];
                norm2 += w * w;
            }
        const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        for (const auto& e : entries) {
            double w = scheme == Scheme::tfidf_cosine
                           ? e.count * index.idf_[static_cast<std::size_t>(e.id)] * inv
                           : static_cast<double>(e.count);
            index.postings_[static_cast<std::size_t>(e.id)].push_back({static_cast<int>(i), w});
        }
    }
    return index;
}

std::vector<std::pair<int, double>> LexicalIndex::tfidf_row(std::size_t i) const {
    std::vector<std::pair<int, double>> row;
    for (std::size_t t = 0; t < postings_.size(); ++t)
        for (const auto& p : postings_[t])
            if (static_cast<std::size_t>(p.doc) == i) row.emplace_back(static_cast<int>(t), p.weight);
    return row;
}

std::vector<std::vector<std::pair<int, double>>> LexicalIndex::tfidf_rows() const {
    std::vector<std::vector<std::pair<int, double>>> rows(doc_ids_.size());
    for (std::size_t t = 0; t < postings_.size(); ++t)
        for (const auto& p : postings_[t]) rows[static_cast<std::size_t>(p.doc)].emplace_back(static_cast<int>(t), p.weight);
    return rows;
}

std::vector<double> LexicalIndex::score_all(const corpus::BowVector& query) const {
    std::vector<double> scores(doc_ids_.size(), 0.0);
    if (scheme_ == Scheme::tfidf_cosine) {
        double norm2 = 0.0;
        for (const auto& e : query.entries()) {
            double w = e.count * idf_[static_cast<std::size_t>(e.id)];
            norm2 += w * w;
        }
        if (norm2 <= 0.0) return scores;
        const double inv = 1.0 / std::sqrt(norm2);
        for (const auto& e : query.entries()) {
            const double qw = e.count * idf_[static_cast<std::size_t>(e.id)] * inv;
            for (const auto& p : postings_[static_cast<std::size_t>(e.id)])
                scores[static_cast<std::size_t>(p.doc)] += qw * p.weight;
        }
    } else {
        for (const auto& e : query.entries()) {
            const double idf = idf_[static_cast<std::size_t>(e.id)];
            for (const auto& p : postings_[static_cast<std::size_t>(e.id)]) {
                const double len = doc_len_[static_cast<std::size_t>(p.doc)];
                const double tf = p.weight;
                const double denom = tf + kBm25K1 * (1.0 - kBm25B + kBm25B * len / avg_len_);
                scores[static_cast<std::size_t>(p.doc)] += idf * tf * (kBm25K1 + 1.0) / denom;
            }
        }
    }
    return scores;
}

namespace {

std::vector<std::size_t> rank(const LexicalIndex& index, const std::vector<double>& scores,
                              std::int64_t after_ts, bool filter_time) {
    std::vector<std::size_t> order;
    order.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!filter_time || index.timestamps()[i] > after_ts) order.push_back(i);
    const auto& ids = index.doc_ids();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    });
    return order;
}

}  // namespace

std::vector<PairedSample> retrieve_topn(const corpus::TimedDocument& query,
                                        const LexicalIndex& index, int n) {
    if (n < 1) throw Error("bad-argument", "n must be >= 1");
    auto scores = index.score_all(corpus::to_bow(query, index.vocabulary()));
    auto order = rank(index, scores, 0, false);
    std::vector<PairedSample> out;
    for (std::size_t i = 0; i < order.size() && out.size() < static_cast<std::size_t>(n); ++i)
        out.push_back({query.id, index.doc_ids()[order[i]], scores[order[i]], false});
    return out;
}

std::vector<PairedSample> pair_training_set(const std::vector<corpus::TimedDocument>& train,
                                            const LexicalIndex& index, int n, Rng& rng) {
    if (train.empty()) throw Error("bad-argument", "empty training set");
    if (n < 1) throw Error("bad-argument", "n must be >= 1");
    std::vector<PairedSample> pairs;
    pairs.reserve(train.size() * static_cast<std::size_t>(n));
    for (const auto& doc : train) {
        auto scores = index.score_all(corpus::to_bow(doc, index.vocabulary()));
        auto order = rank(index, scores, doc.timestamp, true);
        if (order.empty()) continue;
        const bool degenerate = scores[order.front()] <= 0.0;
        if (!degenerate) {
            for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(n); ++i)
                pairs.push_back({doc.id, index.doc_ids()[order[i]], scores[order[i]], false});
            continue;
        }
        // Partial Fisher-Yates over the eligible candidates.
        const std::size_t take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < take; ++i) {
            std::size_t j = i + rng.below(order.size() - i);
            std::swap(order[i], order[j]);
            pairs.push_back({doc.id, index.doc_ids()[order[i]], 0.0, true});
        }
    }
    return pairs;
}

void write_pairs(const std::string& path, const std::vector<PairedSample>& pairs) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    char buf[64];
    for (const auto& p : pairs) {
        std::snprintf(buf, sizeof buf, "%.17g", p.score);
        out << p.past << '\t' << p.future << '\t' << buf << '\n';
    }
}

std::vector<PairedSample> read_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<PairedSample> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        PairedSample p;
        std::string score;
        if (!std::getline(ss, p.past, '\t') || !std::getline(ss, p.future, '\t') ||
            !std::getline(ss, score))
            throw Error("bad-record", path + ": " + line);
        p.score = std::stod(score);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace vibe::retrieval
