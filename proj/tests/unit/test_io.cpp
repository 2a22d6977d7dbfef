#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "vibe/checkpoint.hpp"
#include "vibe/corpus.hpp"
#include "vibe/retrieval.hpp"

using namespace vibe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("vibe_io_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

classify::VibeState random_state() {
    classify::VibeState s(5, 2, 3, 4, 3, 2, 2);
    Rng rng(1);
    for (auto& t : s.tensors())
        for (double& x : t.data) x = rng.normal();
    return s;
}

}  // namespace

TEST_CASE("dataset and label map round trip") {
    TempDir dir;
    corpus::LabelMap labels;
    const int pos = labels.id_for("pos");
    const int neg = labels.id_for("neg");
    std::vector<corpus::TimedDocument> docs{
        {"a", {"hello", "world"}, 1600000000, pos, std::nullopt},
        {"b", {"foo"}, 1600000100, neg, std::nullopt},
        {"c", {"unlabeled", "doc"}, 1600000200, std::nullopt, std::nullopt},
    };
    corpus::write_dataset(dir / "d.jsonl", docs, labels);
    auto back = corpus::read_dataset(dir / "d.jsonl");
    REQUIRE(back.docs.size() == 3);
    CHECK(back.docs[0].id == "a");
    CHECK(back.docs[0].tokens == docs[0].tokens);
    CHECK(back.docs[1].timestamp == 1600000100);
    CHECK(back.labels.names[static_cast<std::size_t>(*back.docs[1].label)] == "neg");
    CHECK_FALSE(back.docs[2].label);

    corpus::write_label_map(dir / "labels.txt", labels);
    CHECK(corpus::read_label_map(dir / "labels.txt").names == labels.names);
}

TEST_CASE("vocabulary and split round trip") {
    TempDir dir;
    corpus::Vocabulary v({"alpha", "beta", "gamma"});
    corpus::write_vocabulary(dir / "v.txt", v);
    auto back = corpus::read_vocabulary(dir / "v.txt");
    CHECK(back.words() == v.words());
    CHECK(back.id("beta") == 1);

    corpus::SplitSpec s;
    s.train = {"a", "b"};
    s.validation = {"c"};
    s.golden_adaptive = {"d"};
    s.test = {"e", "f"};
    s.mode = corpus::SplitMode::absolute;
    s.boundaries = {100, 200};
    corpus::write_split(dir / "split.txt", s);
    auto sb = corpus::read_split(dir / "split.txt");
    CHECK(sb.train == s.train);
    CHECK(sb.validation == s.validation);
    CHECK(sb.golden_adaptive == s.golden_adaptive);
    CHECK(sb.test == s.test);
    CHECK(sb.mode == s.mode);
    CHECK(sb.boundaries == s.boundaries);
}

TEST_CASE("pairs file round trip") {
    TempDir dir;
    std::vector<retrieval::PairedSample> pairs{{"p1", "f1", 0.75, false}, {"p1", "f2", 1.0 / 3, true}};
    retrieval::write_pairs(dir / "pairs.tsv", pairs);
    auto back = retrieval::read_pairs(dir / "pairs.tsv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].future == "f2");
    CHECK(back[1].score == pairs[1].score);
    CHECK(slurp(dir / "pairs.tsv").rfind("p1\tf1\t0.75\n", 0) == 0);
}

TEST_CASE("checkpoint round trip is bitwise") {
    TempDir dir;
    auto s = random_state();
    corpus::LabelMap labels;
    labels.id_for("x");
    labels.id_for("y");
    corpus::Vocabulary vocab({"a", "b", "c", "d", "e"});
    checkpoint::save(dir / "m.bin", s, labels, vocab);
    auto loaded = checkpoint::load(dir / "m.bin");
    auto a = s.tensors(), b = loaded.state.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(std::equal(a[i].data.begin(), a[i].data.end(), b[i].data.begin(), b[i].data.end()));
    }
    CHECK(loaded.labels.names == labels.names);
    CHECK(loaded.vocab.words() == vocab.words());
    CHECK(loaded.state.head_hidden() == 4);

    checkpoint::save(dir / "m2.bin", loaded.state, loaded.labels, loaded.vocab);
    CHECK(slurp(dir / "m.bin") == slurp(dir / "m2.bin"));
}

TEST_CASE("corrupt checkpoints are rejected") {
    TempDir dir;
    auto s = random_state();
    corpus::LabelMap labels;
    labels.id_for("x");
    labels.id_for("y");
    corpus::Vocabulary vocab({"a", "b", "c", "d", "e"});
    checkpoint::save(dir / "m.bin", s, labels, vocab);
    const std::string good = slurp(dir / "m.bin");

    auto expect_bad = [&](const std::string& bytes) {
        {
            std::ofstream out(dir / "m.bin", std::ios::binary | std::ios::trunc);
            out << bytes;
        }
        try {
            checkpoint::load(dir / "m.bin");
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == "bad-checkpoint");
        }
    };
    expect_bad("VIBE0" + good.substr(5));
    expect_bad(good.substr(0, good.size() - 3));
    expect_bad(good + "x");
    expect_bad("");
}
