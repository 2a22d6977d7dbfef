#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vibe/common.hpp"

namespace vibe::corpus {

struct TimedDocument {
    std::string id;
    std::vector<std::string> tokens;
    std::int64_t timestamp = 0;
    std::optional<int> label;
    std::optional<int> period;
};

// Lowercases, drops URLs and @-mentions, then splits on non-alphanumeric runs.
std::vector<std::string> tokenize(std::string_view text);

const std::unordered_set<std::string>& stopwords();
inline constexpr std::string_view kStopwordListVersion = "en-150-v1";

class Vocabulary {
public:
    static constexpr std::size_t kDefaultMaxSize = 20000;

    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> words);

    // -1 when absent.
    int id(std::string_view word) const;
    const std::string& word(int id) const { return id_to_word_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const noexcept { return id_to_word_.size(); }
    const std::vector<std::string>& words() const noexcept { return id_to_word_; }

private:
    std::unordered_map<std::string, int> word_to_id_;
    std::vector<std::string> id_to_word_;
};

struct BowEntry {
    int id = 0;
    int count = 0;
    bool operator==(const BowEntry&) const = default;
};

// Sparse counts sorted by word id; no zero entries.
class BowVector {
public:
    BowVector() = default;
    explicit BowVector(std::vector<BowEntry> entries);

    const std::vector<BowEntry>& entries() const noexcept { return entries_; }
    int total() const noexcept { return total_; }
    bool empty() const noexcept { return entries_.empty(); }
    int count(int id) const;

    BowVector operator+(const BowVector& other) const;
    bool operator==(const BowVector&) const = default;

private:
    std::vector<BowEntry> entries_;
    int total_ = 0;
};

Vocabulary build_vocabulary(const std::vector<TimedDocument>& docs,
                            std::size_t max_size = Vocabulary::kDefaultMaxSize,
                            const std::unordered_set<std::string>& stop = stopwords());

BowVector to_bow(const TimedDocument& doc, const Vocabulary& vocab);

enum class SplitMode { relative, absolute };

struct SplitSpec {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> golden_adaptive;
    std::vector<std::string> test;
    SplitMode mode = SplitMode::relative;
    std::vector<std::int64_t> boundaries;
};

// Relative: earliest 50% train, latest 30% test, middle 20% split into a
// seeded 5% validation sample and 15% golden adaptive data.
// Absolute: ts < b0 train, b0 <= ts < b1 middle (validation + adaptive),
// b1 <= ts (< b2 when given) test.
SplitSpec temporal_split(const std::vector<TimedDocument>& docs, SplitMode mode,
                         const std::vector<std::int64_t>& cut_points, Rng& rng);

// Percentage of shared words among the top-k (non-stopword) words of a and b.
double vocab_overlap(const std::vector<TimedDocument>& a, const std::vector<TimedDocument>& b,
                     std::size_t k);

// Top-k most frequent non-stopword tokens, ties broken lexicographically.
std::vector<std::string> top_words(const std::vector<TimedDocument>& docs, std::size_t k,
                                   const std::unordered_set<std::string>& stop = stopwords());

// ---- files -------------------------------------------------------------

// Class names in class-id order; ids are assigned in first-seen order.
struct LabelMap {
    std::vector<std::string> names;
    int id_for(const std::string& name);
    std::optional<int> find(const std::string& name) const;
};

struct Dataset {
    std::vector<TimedDocument> docs;
    LabelMap labels;
};

std::int64_t parse_timestamp(std::string_view text);

// One JSON object per line: {"id", "text", "timestamp", "label"?}.
// An existing label map may be passed so that ids stay stable across files.
Dataset read_dataset(const std::string& path, LabelMap labels = {});
void write_dataset(const std::string& path, const std::vector<TimedDocument>& docs,
                   const LabelMap& labels);

void write_label_map(const std::string& path, const LabelMap& labels);
LabelMap read_label_map(const std::string& path);

void write_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::string& path);

void write_split(const std::string& path, const SplitSpec& split);
SplitSpec read_split(const std::string& path);

// Index docs by id; throws "unknown-doc" when a requested id is missing.
std::vector<const TimedDocument*> select(const std::vector<TimedDocument>& docs,
                                         const std::vector<std::string>& ids);

}  // namespace vibe::corpus
