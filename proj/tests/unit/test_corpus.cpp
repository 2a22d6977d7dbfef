#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "vibe/corpus.hpp"

using namespace vibe;
using namespace vibe::corpus;

namespace {

TimedDocument doc(std::string id, std::vector<std::string> tokens, std::int64_t ts = 0) {
    TimedDocument d;
    d.id = std::move(id);
    d.tokens = std::move(tokens);
    d.timestamp = ts;
    return d;
}

std::vector<TimedDocument> numbered(int n) {
    std::vector<TimedDocument> docs;
    for (int i = 0; i < n; ++i) docs.push_back(doc("d" + std::to_string(i), {"word"}, 1000 + (i * 7919) % n));
    return docs;
}

}  // namespace

TEST_CASE("tokenize lowercases and drops urls and mentions") {
    auto t = tokenize("Masks WORK! @bob see https://x.org/a www.site.com covid-19");
    CHECK(t == std::vector<std::string>{"masks", "work", "see", "covid", "19"});
    CHECK(tokenize("").empty());
}

TEST_CASE("bundled stopword list") {
    CHECK(stopwords().size() == 150);
    CHECK(stopwords().contains("the"));
    CHECK(kStopwordListVersion == "en-150-v1");
}

TEST_CASE("build_vocabulary orders by frequency then word") {
    auto v = build_vocabulary({doc("a", {"covid", "mask"}), doc("b", {"covid"})}, 10);
    REQUIRE(v.size() == 2);
    CHECK(v.id("covid") == 0);
    CHECK(v.id("mask") == 1);
    CHECK(v.id("absent") == -1);

    auto tie = build_vocabulary({doc("a", {"zeta", "alpha", "mid"})}, 2);
    CHECK(tie.words() == std::vector<std::string>{"alpha", "mid"});
}

TEST_CASE("build_vocabulary excludes stopwords and rejects stopword-only corpora") {
    auto v = build_vocabulary({doc("a", {"the", "covid", "and"})});
    CHECK(v.size() == 1);
    for (const auto& w : v.words()) CHECK_FALSE(stopwords().contains(w));
    try {
        build_vocabulary({doc("a", {"the", "and", "of"})});
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "empty-vocabulary");
    }
}

TEST_CASE("default vocabulary cap") { CHECK(Vocabulary::kDefaultMaxSize == 20000); }

TEST_CASE("build_vocabulary is deterministic") {
    std::vector<TimedDocument> docs{doc("a", {"b", "c", "d", "c"}), doc("b", {"d", "e"})};
    CHECK(build_vocabulary(docs).words() == build_vocabulary(docs).words());
}

TEST_CASE("to_bow counts in-vocabulary tokens") {
    Vocabulary v({"covid", "mask"});
    auto b = to_bow(doc("a", {"covid", "covid", "mask"}), v);
    CHECK(b.count(0) == 2);
    CHECK(b.count(1) == 1);
    CHECK(b.total() == 3);
    CHECK(to_bow(doc("b", {"oov", "other"}), v).total() == 0);
    CHECK(to_bow(doc("c", {}), v).empty());
}

TEST_CASE("to_bow is additive over concatenation") {
    Vocabulary v({"a1", "b2", "c3", "d4"});
    auto d1 = doc("x", {"a1", "b2", "zz", "a1"});
    auto d2 = doc("y", {"c3", "a1", "d4", "qq"});
    auto joined = d1;
    joined.tokens.insert(joined.tokens.end(), d2.tokens.begin(), d2.tokens.end());
    CHECK(to_bow(joined, v) == to_bow(d1, v) + to_bow(d2, v));
}

TEST_CASE("relative split proportions") {
    Rng rng(3);
    auto s = temporal_split(numbered(1000), SplitMode::relative, {}, rng);
    CHECK(s.train.size() == 500);
    CHECK(s.validation.size() == 50);
    CHECK(s.golden_adaptive.size() == 150);
    CHECK(s.test.size() == 300);

    Rng rng2(3);
    auto small = temporal_split(numbered(20), SplitMode::relative, {}, rng2);
    CHECK(small.train.size() == 10);
    CHECK(small.validation.size() == 1);
    CHECK(small.golden_adaptive.size() == 3);
    CHECK(small.test.size() == 6);
}

TEST_CASE("relative split covers every doc once and respects time order") {
    for (int n : {20, 37, 1000}) {
        auto docs = numbered(n);
        Rng rng(static_cast<std::uint64_t>(n));
        auto s = temporal_split(docs, SplitMode::relative, {}, rng);
        std::multiset<std::string> seen;
        for (const auto* part : {&s.train, &s.validation, &s.golden_adaptive, &s.test})
            seen.insert(part->begin(), part->end());
        CHECK(seen.size() == static_cast<std::size_t>(n));
        CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == static_cast<std::size_t>(n));

        auto ts = [&](const std::vector<std::string>& ids, bool want_max) {
            std::int64_t best = want_max ? INT64_MIN : INT64_MAX;
            for (const auto* d : select(docs, ids)) best = want_max ? std::max(best, d->timestamp) : std::min(best, d->timestamp);
            return best;
        };
        std::vector<std::string> middle(s.validation);
        middle.insert(middle.end(), s.golden_adaptive.begin(), s.golden_adaptive.end());
        CHECK(ts(s.train, true) <= ts(middle, false));
        CHECK(ts(middle, true) <= ts(s.test, false));
    }
}

TEST_CASE("relative split rejects tiny corpora") {
    Rng rng(0);
    CHECK_THROWS_AS(temporal_split(numbered(19), SplitMode::relative, {}, rng), Error);
}

TEST_CASE("absolute split honors boundaries exactly") {
    // Month buckets: Sep, Oct train; Nov middle; Dec test.
    const std::int64_t sep = parse_timestamp("2020-09-01T00:00:00");
    const std::int64_t nov = parse_timestamp("2020-11-01T00:00:00");
    const std::int64_t dec = parse_timestamp("2020-12-01T00:00:00");
    const std::int64_t jan = parse_timestamp("2021-01-01T00:00:00");
    std::vector<TimedDocument> docs{doc("a", {"w"}, sep), doc("b", {"w"}, nov - 1), doc("c", {"w"}, nov),
                                    doc("d", {"w"}, dec - 1), doc("e", {"w"}, dec), doc("f", {"w"}, jan - 1),
                                    doc("g", {"w"}, jan)};
    Rng rng(1);
    auto s = temporal_split(docs, SplitMode::absolute, {nov, dec, jan}, rng);
    CHECK(s.train == std::vector<std::string>{"a", "b"});
    std::vector<std::string> middle(s.validation);
    middle.insert(middle.end(), s.golden_adaptive.begin(), s.golden_adaptive.end());
    std::sort(middle.begin(), middle.end());
    CHECK(middle == std::vector<std::string>{"c", "d"});
    CHECK(s.test == std::vector<std::string>{"e", "f"});
    CHECK(s.boundaries == std::vector<std::int64_t>{nov, dec, jan});
}

TEST_CASE("absolute split rejects non-monotone boundaries") {
    Rng rng(1);
    try {
        temporal_split(numbered(30), SplitMode::absolute, {2000, 1500}, rng);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "bad-boundaries");
    }
}

TEST_CASE("vocab_overlap") {
    std::vector<TimedDocument> a{doc("a", {"xx", "yy", "zz"})};
    std::vector<TimedDocument> b{doc("b", {"yy", "zz", "ww"})};
    std::vector<TimedDocument> c{doc("c", {"qq", "rr"})};
    CHECK(vocab_overlap(a, a, 3) == doctest::Approx(100.0));
    CHECK(vocab_overlap(a, c, 3) == doctest::Approx(0.0));
    CHECK(vocab_overlap(a, b, 3) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(vocab_overlap(a, b, 3) == vocab_overlap(b, a, 3));
}

TEST_CASE("vocab_overlap is symmetric and bounded on random corpora") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<TimedDocument> a, b;
        for (int i = 0; i < 5; ++i) {
            std::vector<std::string> ta, tb;
            for (int j = 0; j < 10; ++j) {
                ta.push_back("t" + std::to_string(rng.below(30)));
                tb.push_back("t" + std::to_string(rng.below(30)));
            }
            a.push_back(doc("a", ta));
            b.push_back(doc("b", tb));
        }
        const auto k = 1 + rng.below(20);
        const double ab = vocab_overlap(a, b, k);
        CHECK(ab == vocab_overlap(b, a, k));
        CHECK(ab >= 0.0);
        CHECK(ab <= 100.0);
    }
}

TEST_CASE("parse_timestamp accepts integers and ISO-8601") {
    CHECK(parse_timestamp("1600000000") == 1600000000);
    CHECK(parse_timestamp("1970-01-02T00:00:00") == 86400);
    CHECK(parse_timestamp("1970-01-01 00:01:00") == 60);
    CHECK(parse_timestamp("2020-03-01") == parse_timestamp("2020-03-01T00:00:00"));
    CHECK_THROWS_AS(parse_timestamp("yesterday"), Error);
}
