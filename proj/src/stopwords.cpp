#include <array>
#include <string_view>
#include <unordered_set>

#include "vibe/corpus.hpp"

namespace vibe::corpus {

namespace {

// Fixed English list; bump kStopwordListVersion when editing.
constexpr std::array<std::string_view, 150> kStopwords = {
    "a",       "about",   "above",   "after",   "again",   "against", "all",     "am",
    "an",      "and",     "any",     "are",     "as",      "at",      "be",      "because",
    "been",    "before",  "being",   "below",   "between", "both",    "but",     "by",
    "can",     "could",   "did",     "do",      "does",    "doing",   "down",    "during",
    "each",    "few",     "for",     "from",    "further", "had",     "has",     "have",
    "having",  "he",      "her",     "here",    "hers",    "herself", "him",     "himself",
    "his",     "how",     "i",       "if",      "in",      "into",    "is",      "it",
    "its",     "itself",  "just",    "me",      "more",    "most",    "my",      "myself",
    "no",      "nor",     "not",     "now",     "of",      "off",     "on",      "once",
    "only",    "or",      "other",   "our",     "ours",    "ourselves", "out",   "over",
    "own",     "same",    "she",     "should",  "so",      "some",    "such",    "than",
    "that",    "the",     "their",   "theirs",  "them",    "themselves", "then", "there",
    "these",   "they",    "this",    "those",   "through", "to",      "too",     "under",
    "until",   "up",      "very",    "was",     "we",      "were",    "what",    "when",
    "where",   "which",   "while",   "who",     "whom",    "why",     "will",    "with",
    "would",   "you",     "your",    "yours",   "yourself", "yourselves", "also", "get",
    "got",     "like",    "may",     "might",   "must",    "rt",      "amp",     "us",
    "via",     "im",      "dont",    "cant",    "let",     "one",     "etc",     "yet",
    "ever",    "even",    "much",    "many",    "every",   "another",
};

}  // namespace

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> set = [] {
        std::unordered_set<std::string> s;
        for (auto w : kStopwords) s.emplace(w);
        return s;
    }();
    return set;
}

}  // namespace vibe::corpus
