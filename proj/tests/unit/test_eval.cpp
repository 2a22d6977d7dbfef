#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "vibe/eval.hpp"

using namespace vibe;
using namespace vibe::eval;
using corpus::BowVector;

namespace {

std::vector<Vec> gaussian_sample(int n, int dim, double shift, Rng& rng) {
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) {
        Vec v(dim);
        for (int k = 0; k < dim; ++k) v[k] = rng.normal() + shift;
        out.push_back(v);
    }
    return out;
}

// Textbook unbiased estimator with explicit i != j sums.
double mmd_oracle(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    std::vector<Vec> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<double> d;
    for (std::size_t i = 0; i < pooled.size(); ++i)
        for (std::size_t j = i + 1; j < pooled.size(); ++j) d.push_back((pooled[i] - pooled[j]).norm());
    std::sort(d.begin(), d.end());
    const double s = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    auto k = [&](const Vec& x, const Vec& y) { return std::exp(-(x - y).squaredNorm() / (2 * s * s)); };
    double xx = 0, yy = 0, xy = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            if (i != j) xx += k(a[i], a[j]);
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            if (i != j) yy += k(b[i], b[j]);
    for (const auto& x : a)
        for (const auto& y : b) xy += k(x, y);
    const double m = static_cast<double>(a.size()), n = static_cast<double>(b.size());
    return xx / (m * (m - 1)) + yy / (n * (n - 1)) - 2 * xy / (m * n);
}

std::vector<classify::EncodedDoc> separable_docs(int n, int V, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<classify::EncodedDoc> out;
    for (int i = 0; i < n; ++i) {
        const int c = i % 2;
        std::vector<corpus::BowEntry> e;
        for (int j = 0; j < 6; ++j) e.push_back({c * (V / 2) + static_cast<int>(rng.below(V / 2)), 1});
        out.push_back({"d" + std::to_string(i), BowVector(e), i, c});
    }
    return out;
}

train::TrainConfig small_config() {
    train::TrainConfig c;
    c.embedding = 8;
    c.head_hidden = 8;
    c.batch_size = 8;
    c.learning_rate = 1e-2;
    c.baseline_epochs = 20;
    return c;
}

}  // namespace

TEST_CASE("accuracy") {
    std::vector<int> p{0, 1, 1, 2}, g{0, 1, 2, 2};
    CHECK(accuracy(p, g) == 0.75);
    CHECK(accuracy(g, g) == 1.0);
    std::vector<int> short_gold{0};
    try {
        accuracy(p, short_gold);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "length-mismatch");
    }
    std::vector<int> none;
    CHECK_THROWS_AS(accuracy(none, none), Error);
}

TEST_CASE("per-class precision and recall") {
    std::vector<int> p{0, 0, 1, 1, 1}, g{0, 1, 1, 1, 0};
    auto s = per_class(p, g, 3);
    REQUIRE(s.size() == 3);
    CHECK(s[0].precision == 0.5);
    CHECK(s[0].recall == 0.5);
    CHECK(s[0].support == 2);
    CHECK(s[1].precision == doctest::Approx(2.0 / 3));
    CHECK(s[1].recall == doctest::Approx(2.0 / 3));
    CHECK(s[2].support == 0);
    CHECK(s[2].precision == 0.0);
}

TEST_CASE("median pairwise distance") {
    std::vector<Vec> pts;
    for (double x : {0.0, 1.0, 3.0}) pts.push_back(Vec::Constant(1, x));
    CHECK(median_pairwise_distance(pts) == 2.0);  // distances 1, 2, 3
}

TEST_CASE("mmd matches the textbook estimator") {
    Rng rng(4);
    auto a = gaussian_sample(40, 3, 0.0, rng), b = gaussian_sample(35, 3, 0.4, rng);
    CHECK(mmd_rbf_unbiased(a, b) == doctest::Approx(mmd_oracle(a, b)).epsilon(1e-12));
}

TEST_CASE("mmd properties") {
    Rng rng(5);
    auto a = gaussian_sample(80, 4, 0.0, rng);
    CHECK(std::abs(mmd_rbf(a, a)) <= 1e-9);
    CHECK(mmd_rbf(a, a) >= 0.0);

    double same_sum = 0.0, shifted_sum = 0.0;
    bool any_negative = false;
    for (int t = 0; t < 5; ++t) {
        auto x = gaussian_sample(80, 4, 0.0, rng), y = gaussian_sample(80, 4, 0.0, rng);
        auto z = gaussian_sample(80, 4, 1.0, rng);
        const double u = mmd_rbf_unbiased(x, y);
        any_negative = any_negative || u < 0.0;
        CHECK(mmd_rbf(x, y) == std::max(0.0, u));
        same_sum += mmd_rbf(x, y);
        shifted_sum += mmd_rbf(x, z);
    }
    CHECK(shifted_sum > 10 * same_sum);
    MESSAGE("unbiased estimate went negative at least once: " << any_negative);

    auto c = gaussian_sample(10, 2, 0.0, rng);
    CHECK(mmd_rbf(a, gaussian_sample(10, 4, 0.0, rng)) >= 0.0);
    CHECK_THROWS_AS(mmd_rbf(a, c), Error);
    CHECK_THROWS_AS(mmd_rbf(a, {}), Error);
}

TEST_CASE("baseline learns a separable task and is deterministic") {
    auto train = separable_docs(60, 10, 1);
    auto test = separable_docs(40, 10, 2);
    auto c = small_config();
    auto m = past_only_baseline(train, 10, 2, c);
    int hits = 0;
    for (const auto& d : test) hits += m.predict(d) == *d.label;
    CHECK(hits >= 38);
    auto again = past_only_baseline(train, 10, 2, c);
    CHECK(again.embedding.table == m.embedding.table);
    CHECK(again.head.out.weight == m.head.out.weight);
    CHECK(m.probabilities(test[0]).sum() == doctest::Approx(1.0));
}

TEST_CASE("baseline is at chance when labels carry no signal") {
    auto train = separable_docs(200, 10, 3);
    Rng rng(9);
    for (auto& d : train) d.label = static_cast<int>(rng.below(2));
    auto test = separable_docs(400, 10, 4);
    for (auto& d : test) d.label = static_cast<int>(rng.below(2));
    auto m = past_only_baseline(train, 10, 2, small_config());
    int hits = 0;
    for (const auto& d : test) hits += m.predict(d) == *d.label;
    const double acc = hits / 400.0;
    CHECK(acc > 0.4);
    CHECK(acc < 0.6);
}

TEST_CASE("report JSON round trip is exact") {
    EvalReport r;
    r.accuracy = 0.1 + 0.2;
    r.baseline_accuracy = 1.0 / 3.0;
    r.class_names = {"a", "b"};
    r.per_class = {{0.5, 0.25, 4}, {1.0, 0.0, 0}};
    r.mmd_scores = {{"tfidf:train-test", 1e-17}, {"sphere:train-test", 0.125}};
    r.vocab_overlaps = {{"train-test", 66.66666666666667}};
    r.config = {{"lambda", "0.5"}};
    r.seeds = {0, 18446744073709551615ull};
    r.doc_ids = {"x", "y"};
    r.predictions = {0, 1};
    r.gold = {1, 1};
    r.accuracy_vs_n = {{10, 0.8}, {50, 0.81}};

    CHECK(from_json(to_json(r)) == r);
    CHECK(to_json(from_json(to_json(r))) == to_json(r));
    auto path = std::filesystem::temp_directory_path() / "vibe_report.json";
    write_report(path.string(), r);
    CHECK(read_report(path.string()) == r);
    std::filesystem::remove(path);

    EvalReport none = r;
    none.baseline_accuracy.reset();
    CHECK(from_json(to_json(none)) == none);
    try {
        from_json("{\"accuracy\": \"x\"}");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "bad-report");
    }
}
