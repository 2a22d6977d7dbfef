#include "vibe/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

namespace vibe::corpus {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j == i) break;
        std::string raw(text.substr(i, j - i));
        std::transform(raw.begin(), raw.end(), raw.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        i = j;
        if (raw.front() == '@' || raw.rfind("http://", 0) == 0 || raw.rfind("https://", 0) == 0 ||
            raw.rfind("www.", 0) == 0) {
            continue;
        }
        std::string cur;
        for (char c : raw) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                cur.push_back(c);
            } else if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) out.push_back(std::move(cur));
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : id_to_word_(std::move(words)) {
    word_to_id_.reserve(id_to_word_.size());
    for (std::size_t i = 0; i < id_to_word_.size(); ++i) {
        auto [it, inserted] = word_to_id_.emplace(id_to_word_[i], static_cast<int>(i));
        if (!inserted) throw Error("duplicate-word", id_to_word_[i]);
    }
}

int Vocabulary::id(std::string_view word) const {
    auto it = word_to_id_.find(std::string(word));
    return it == word_to_id_.end() ? -1 : it->second;
}

BowVector::BowVector(std::vector<BowEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const BowEntry& a, const BowEntry& b) { return a.id < b.id; });
    for (const auto& e : entries) {
        if (e.count <= 0) continue;
        if (!entries_.empty() && entries_.back().id == e.id) {
            entries_.back().count += e.count;
        } else {
            entries_.push_back(e);
        }
        total_ += e.count;
    }
}

int BowVector::count(int id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const BowEntry& e, int v) { return e.id < v; });
    return (it != entries_.end() && it->id == id) ? it->count : 0;
}

BowVector BowVector::operator+(const BowVector& other) const {
    std::vector<BowEntry> merged = entries_;
    merged.insert(merged.end(), other.entries_.begin(), other.entries_.end());
    return BowVector(std::move(merged));
}

namespace {

std::vector<std::pair<std::string, std::size_t>> ranked_counts(
    const std::vector<TimedDocument>& docs, const std::unordered_set<std::string>& stop) {
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& d : docs)
        for (const auto& t : d.tokens)
            if (!stop.contains(t)) ++freq[t];
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    return ranked;
}

}  // namespace

std::vector<std::string> top_words(const std::vector<TimedDocument>& docs, std::size_t k,
                                   const std::unordered_set<std::string>& stop) {
    auto ranked = ranked_counts(docs, stop);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
    return out;
}

Vocabulary build_vocabulary(const std::vector<TimedDocument>& docs, std::size_t max_size,
                            const std::unordered_set<std::string>& stop) {
    if (docs.empty()) throw Error("empty-vocabulary", "no documents");
    if (max_size < 1) throw Error("bad-argument", "max_size must be >= 1");
    auto words = top_words(docs, max_size, stop);
    if (words.empty()) throw Error("empty-vocabulary", "no non-stopword tokens");
    return Vocabulary(std::move(words));
}

BowVector to_bow(const TimedDocument& doc, const Vocabulary& vocab) {
    std::vector<BowEntry> entries;
    entries.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens) {
        int id = vocab.id(t);
        if (id >= 0) entries.push_back({id, 1});
    }
    return BowVector(std::move(entries));
}

SplitSpec temporal_split(const std::vector<TimedDocument>& docs, SplitMode mode,
                         const std::vector<std::int64_t>& cut_points, Rng& rng) {
    std::vector<const TimedDocument*> order;
    order.reserve(docs.size());
    for (const auto& d : docs) {
        if (d.timestamp < 0) throw Error("bad-timestamp", d.id);
        order.push_back(&d);
    }
    std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        return a->timestamp != b->timestamp ? a->timestamp < b->timestamp : a->id < b->id;
    });

    SplitSpec split;
    split.mode = mode;
    std::vector<const TimedDocument*> middle;

    if (mode == SplitMode::relative) {
        const std::size_t n = order.size();
        if (n < 20) throw Error("too-few-docs", "relative split needs at least 20 documents");
        const std::size_t n_train = n / 2;
        const std::size_t n_test = 3 * n / 10;
        for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(order[i]->id);
        middle.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                      order.end() - static_cast<std::ptrdiff_t>(n_test));
        for (std::size_t i = n - n_test; i < n; ++i) split.test.push_back(order[i]->id);
        split.boundaries = {order[n_train]->timestamp, order[n - n_test]->timestamp};
    } else {
        if (cut_points.size() < 2) throw Error("bad-boundaries", "need at least two cut points");
        for (std::size_t i = 1; i < cut_points.size(); ++i)
            if (cut_points[i] <= cut_points[i - 1])
                throw Error("bad-boundaries", "cut points must be strictly increasing");
        split.boundaries = cut_points;
        for (const auto* d : order) {
            if (d->timestamp < cut_points[0]) {
                split.train.push_back(d->id);
            } else if (d->timestamp < cut_points[1]) {
                middle.push_back(d);
            } else if (cut_points.size() < 3 || d->timestamp < cut_points[2]) {
                split.test.push_back(d->id);
            }
        }
    }

    // Validation is a quarter of the middle segment (5% of 20% in relative mode).
    const std::size_t n_val =
        mode == SplitMode::relative ? order.size() / 20 : middle.size() / 4;
    std::vector<std::size_t> idx(middle.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n_val && i < idx.size(); ++i) {
        std::size_t j = i + rng.below(idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<bool> is_val(middle.size(), false);
    for (std::size_t i = 0; i < n_val && i < idx.size(); ++i) is_val[idx[i]] = true;
    for (std::size_t i = 0; i < middle.size(); ++i)
        (is_val[i] ? split.validation : split.golden_adaptive).push_back(middle[i]->id);
    return split;
}

double vocab_overlap(const std::vector<TimedDocument>& a, const std::vector<TimedDocument>& b,
                     std::size_t k) {
    auto ta = top_words(a, k);
    auto tb = top_words(b, k);
    if (ta.empty() || tb.empty()) return 0.0;
    std::unordered_set<std::string> sa(ta.begin(), ta.end());
    std::size_t shared = 0;
    for (const auto& w : tb) shared += sa.contains(w);
    return 100.0 * static_cast<double>(shared) / static_cast<double>(std::min(ta.size(), tb.size()));
}

// ---- files -------------------------------------------------------------

int LabelMap::id_for(const std::string& name) {
    if (auto id = find(name)) return *id;
    names.push_back(name);
    return static_cast<int>(names.size()) - 1;
}

std::optional<int> LabelMap::find(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<int>(it - names.begin());
}

std::int64_t parse_timestamp(std::string_view text) {
    std::string buf(text);
    if (!buf.empty() && std::all_of(buf.begin(), buf.end(), [](unsigned char c) { return std::isdigit(c); })) {
        try {
            return std::stoll(buf);
        } catch (const std::out_of_range&) {
            throw Error("bad-timestamp", buf);
        }
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    int n = std::sscanf(buf.c_str(), "%d-%d-%d%*1[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
    if (n != 3 && n != 6) throw Error("bad-timestamp", buf);
    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw Error("bad-timestamp", buf);
    auto secs = sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{s};
    auto v = duration_cast<seconds>(secs).count();
    if (v < 0) throw Error("bad-timestamp", "before epoch: " + buf);
    return v;
}

Dataset read_dataset(const std::string& path, LabelMap labels) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    Dataset ds;
    ds.labels = std::move(labels);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("bad-record", path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        TimedDocument doc;
        doc.id = rec.at("id").get<std::string>();
        doc.tokens = tokenize(rec.at("text").get<std::string>());
        const auto& ts = rec.at("timestamp");
        if (ts.is_number_integer()) {
            doc.timestamp = ts.get<std::int64_t>();
        } else if (ts.is_string()) {
            doc.timestamp = parse_timestamp(ts.get<std::string>());
        } else {
            throw Error("bad-timestamp", doc.id);
        }
        if (doc.timestamp < 0) throw Error("bad-timestamp", doc.id);
        if (rec.contains("label") && !rec["label"].is_null())
            doc.label = ds.labels.id_for(rec["label"].get<std::string>());
        ds.docs.push_back(std::move(doc));
    }
    return ds;
}

void write_dataset(const std::string& path, const std::vector<TimedDocument>& docs,
                   const LabelMap& labels) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    for (const auto& d : docs) {
        std::string text;
        for (const auto& t : d.tokens) {
            if (!text.empty()) text.push_back(' ');
            text += t;
        }
        json rec = {{"id", d.id}, {"text", text}, {"timestamp", d.timestamp}};
        if (d.label) rec["label"] = labels.names.at(static_cast<std::size_t>(*d.label));
        out << rec.dump() << '\n';
    }
}

void write_label_map(const std::string& path, const LabelMap& labels) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    for (std::size_t i = 0; i < labels.names.size(); ++i) out << i << '\t' << labels.names[i] << '\n';
}

LabelMap read_label_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    LabelMap labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw Error("bad-record", path);
        labels.names.push_back(line.substr(tab + 1));
    }
    return labels;
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    for (const auto& w : vocab.words()) out << w << '\n';
}

Vocabulary read_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) words.push_back(line);
    return Vocabulary(std::move(words));
}

void write_split(const std::string& path, const SplitSpec& split) {
    json j = {{"mode", split.mode == SplitMode::relative ? "relative" : "absolute"},
              {"boundaries", split.boundaries},
              {"train", split.train},
              {"validation", split.validation},
              {"golden_adaptive", split.golden_adaptive},
              {"test", split.test}};
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    out << j.dump(1) << '\n';
}

SplitSpec read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    json j = json::parse(in);
    SplitSpec s;
    s.mode = j.at("mode").get<std::string>() == "absolute" ? SplitMode::absolute : SplitMode::relative;
    s.boundaries = j.at("boundaries").get<std::vector<std::int64_t>>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.golden_adaptive = j.at("golden_adaptive").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
}

std::vector<const TimedDocument*> select(const std::vector<TimedDocument>& docs,
                                         const std::vector<std::string>& ids) {
    std::unordered_map<std::string_view, const TimedDocument*> by_id;
    by_id.reserve(docs.size());
    for (const auto& d : docs) by_id.emplace(d.id, &d);
    std::vector<const TimedDocument*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("unknown-doc", id);
        out.push_back(it->second);
    }
    return out;
}

}  // namespace vibe::corpus
