#pragma once

#include <string>
#include <vector>

#include "vibe/common.hpp"
#include "vibe/corpus.hpp"

namespace vibe::retrieval {

enum class Scheme { tfidf_cosine, bm25 };

Scheme parse_scheme(const std::string& name);
std::string scheme_name(Scheme scheme);

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr int kDefaultDepth = 10;

struct Posting {
    int doc = 0;
    double weight = 0.0;  // normalized tf-idf, or raw tf for bm25
};

// Immutable after build_index; queries are read-only.
class LexicalIndex {
public:
    Scheme scheme() const noexcept { return scheme_; }
    std::size_t size() const noexcept { return doc_ids_.size(); }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<std::int64_t>& timestamps() const noexcept { return timestamps_; }
    const corpus::Vocabulary& vocabulary() const noexcept { return vocab_; }

    double idf(int term) const { return idf_.at(static_cast<std::size_t>(term)); }
    int document_frequency(int term) const { return df_.at(static_cast<std::size_t>(term)); }
    double average_length() const noexcept { return avg_len_; }

    // L2-normalized tf-idf row of pool doc i (tfidf-cosine scheme).
    std::vector<std::pair<int, double>> tfidf_row(std::size_t i) const;
    // All rows at once, in pool order.
    std::vector<std::vector<std::pair<int, double>>> tfidf_rows() const;

    // Score of every pool doc against a bag of words.
    std::vector<double> score_all(const corpus::BowVector& query) const;

private:
    friend LexicalIndex build_index(const std::vector<corpus::TimedDocument>&,
                                    const corpus::Vocabulary&, Scheme);

    Scheme scheme_ = Scheme::tfidf_cosine;
    corpus::Vocabulary vocab_;
    std::vector<std::string> doc_ids_;
    std::vector<std::int64_t> timestamps_;
    std::vector<double> idf_;
    std::vector<int> df_;
    std::vector<double> doc_len_;
    double avg_len_ = 0.0;
    std::vector<std::vector<Posting>> postings_;  // per term
};

struct PairedSample {
    std::string past;
    std::string future;
    double score = 0.0;
    bool degenerate = false;  // seeded-random fallback pairing
};

// tfidf-cosine: idf = ln((1+n)/(1+df)) + 1, rows L2-normalized.
// bm25: idf = ln(1 + (n-df+0.5)/(df+0.5)), k1=1.2, b=0.75.
LexicalIndex build_index(const std::vector<corpus::TimedDocument>& pool,
                         const corpus::Vocabulary& vocab, Scheme scheme);

// Descending score, ties by ascending doc id.
std::vector<PairedSample> retrieve_topn(const corpus::TimedDocument& query,
                                        const LexicalIndex& index, int n = kDefaultDepth);

// Top-n future partners for every training doc. Candidates must be strictly
// later than the query; a query with no positive score gets n seeded-random
// partners flagged degenerate.
std::vector<PairedSample> pair_training_set(const std::vector<corpus::TimedDocument>& train,
                                            const LexicalIndex& index, int n, Rng& rng);

// Line records: past_id <TAB> future_id <TAB> score
void write_pairs(const std::string& path, const std::vector<PairedSample>& pairs);
std::vector<PairedSample> read_pairs(const std::string& path);

}  // namespace vibe::retrieval
