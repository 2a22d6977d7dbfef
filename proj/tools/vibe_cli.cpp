#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vibe/checkpoint.hpp"
#include "vibe/eval.hpp"
#include "vibe/synth.hpp"
#include "vibe/train.hpp"

using namespace vibe;

namespace {

// --seed, --config and one flag per TrainConfig key. Values are applied on
// top of the config file, which is applied on top of the defaults.
struct ConfigFlags {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App& app) {
        app.add_option("--seed", seed, "Seed for all randomness");
        app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
        for (const auto& [key, value] : train::TrainConfig{}.entries()) {
            if (key == "seed") continue;
            std::string names = "--" + key;
            std::string dashed = key;
            std::replace(dashed.begin(), dashed.end(), '_', '-');
            if (dashed != key) names += ",--" + dashed;
            app.add_option_function<std::string>(
                names, [this, k = key](const std::string& v) { overrides[k] = v; }, "default " + value);
        }
    }

    train::TrainConfig resolve() const {
        train::TrainConfig c;
        if (!config_path.empty()) c = train::read_config(config_path, c);
        for (const auto& [k, v] : overrides) c.set(k, v);
        if (seed) c.seed = *seed;
        c.validate();
        return c;
    }
};

std::vector<corpus::TimedDocument> load_docs(const std::string& path, corpus::LabelMap& labels) {
    auto ds = corpus::read_dataset(path, labels);
    labels = ds.labels;
    return std::move(ds.docs);
}

// Vocabulary over the labeled past plus the unlabeled pool; retrieve and
// train-stage1 must agree on it.
corpus::Vocabulary pool_vocabulary(const std::vector<corpus::TimedDocument>& train,
                                   const std::vector<corpus::TimedDocument>& pool, int max_vocab) {
    std::vector<corpus::TimedDocument> all(train);
    all.insert(all.end(), pool.begin(), pool.end());
    return corpus::build_vocabulary(all, static_cast<std::size_t>(max_vocab));
}

void check_labels(const std::vector<classify::EncodedDoc>& docs, int classes) {
    for (const auto& d : docs)
        if (d.label && *d.label >= classes) throw Error("unknown-label", d.id);
}

int cmd_synth_gen(const synth::DriftSpec& spec, const std::string& out, const std::string& truth,
                  const std::string& stream_out, int stream_count) {
    auto c = synth::gen_corpus(spec);
    corpus::write_dataset(out, c.docs, c.labels);
    if (!truth.empty()) synth::write_ground_truth(truth, c.truth);
    if (!stream_out.empty()) {
        auto s = synth::gen_stream(spec, spec.periods - 1, stream_count, "s");
        for (auto& d : s.docs) d.label.reset();
        corpus::write_dataset(stream_out, s.docs, s.labels);
    }
    std::fprintf(stderr, "wrote %zu documents to %s\n", c.docs.size(), out.c_str());
    return 0;
}

int cmd_split(const std::string& data, const std::string& mode, const std::vector<std::int64_t>& boundaries,
              std::uint64_t seed, const std::string& out, const std::string& prefix) {
    corpus::LabelMap labels;
    auto docs = load_docs(data, labels);
    const auto m = mode == "absolute" ? corpus::SplitMode::absolute : corpus::SplitMode::relative;
    if (mode != "absolute" && mode != "relative") throw Error("bad-argument", "mode must be relative or absolute");
    Rng rng(seed);
    auto split = corpus::temporal_split(docs, m, boundaries, rng);
    corpus::write_split(out, split);
    if (!prefix.empty()) {
        auto dump = [&](const std::vector<std::string>& ids, const char* name) {
            std::vector<corpus::TimedDocument> subset;
            for (const auto* d : corpus::select(docs, ids)) subset.push_back(*d);
            corpus::write_dataset(prefix + name + ".jsonl", subset, labels);
        };
        dump(split.train, "train");
        dump(split.validation, "validation");
        dump(split.golden_adaptive, "adaptive");
        dump(split.test, "test");
    }
    std::fprintf(stderr, "train %zu validation %zu adaptive %zu test %zu\n", split.train.size(),
                 split.validation.size(), split.golden_adaptive.size(), split.test.size());
    return 0;
}

int cmd_retrieve(const train::TrainConfig& cfg, const std::string& train_path, const std::string& pool_path,
                 const std::string& out) {
    corpus::LabelMap labels;
    auto train = load_docs(train_path, labels);
    auto pool = load_docs(pool_path, labels);
    auto vocab = pool_vocabulary(train, pool, cfg.max_vocab);
    auto index = retrieval::build_index(pool, vocab, retrieval::parse_scheme(cfg.scheme));
    Rng rng = Rng(cfg.seed).child(5);
    auto pairs = retrieval::pair_training_set(train, index, cfg.depth, rng);
    retrieval::write_pairs(out, pairs);
    std::size_t degenerate = 0;
    for (const auto& p : pairs) degenerate += p.degenerate;
    std::fprintf(stderr, "%zu pairs (%zu degenerate) -> %s\n", pairs.size(), degenerate, out.c_str());
    return 0;
}

int cmd_train_stage1(const train::TrainConfig& cfg, const std::string& train_path, const std::string& pool_path,
                     const std::string& pairs_path, const std::string& embeddings, const std::string& out,
                     const std::string& history) {
    corpus::LabelMap labels;
    auto train_docs = load_docs(train_path, labels);
    auto pool = load_docs(pool_path, labels);
    auto vocab = pool_vocabulary(train_docs, pool, cfg.max_vocab);
    train::PipelineData data;
    data.train = classify::encode_docs(train_docs, vocab);
    data.adaptive = classify::encode_docs(pool, vocab);
    data.pairs = retrieval::read_pairs(pairs_path);

    Rng root(cfg.seed);
    Rng init = root.child(1);
    Rng stage1 = root.child(2);
    const int classes = static_cast<int>(labels.names.size());
    auto state = train::init_model(cfg, static_cast<int>(vocab.size()), classes, init);
    if (!embeddings.empty()) classify::load_precomputed_embeddings(embeddings, state.embedding);
    auto h = train::train_stage1(state, train::resolve_pairs(data), cfg, stage1);
    if (!history.empty()) train::write_history(history, h);
    checkpoint::save(out, state, labels, vocab);
    if (!h.epochs.empty()) {
        const auto& last = h.epochs.back();
        std::fprintf(stderr, "stage1 %s epoch %d: total %.6f ce %.6f objective %.6f\n", last.stage.c_str(),
                     last.epoch, last.total, last.past, last.breakdown.objective);
    }
    if (h.diverged) {
        std::fprintf(stderr, "stage1 diverged; checkpoint holds the last finite state\n");
        return 3;
    }
    return 0;
}

// Pool docs referenced by the pairs (all of them when no pairs are given).
std::vector<classify::EncodedDoc> adaptive_subset(const std::vector<classify::EncodedDoc>& pool,
                                                  const std::string& pairs_path) {
    if (pairs_path.empty()) return pool;
    train::PipelineData d;
    d.adaptive = pool;
    d.pairs = retrieval::read_pairs(pairs_path);
    std::vector<classify::EncodedDoc> out;
    for (const auto* p : train::adaptive_docs(d)) out.push_back(*p);
    return out;
}

int cmd_pseudo_label(const std::string& model, const std::string& pool_path, const std::string& pairs_path,
                     const std::string& out) {
    auto ck = checkpoint::load(model);
    auto pool = load_docs(pool_path, ck.labels);
    auto docs = adaptive_subset(classify::encode_docs(pool, ck.vocab), pairs_path);
    std::vector<const classify::EncodedDoc*> ptrs;
    for (const auto& d : docs) ptrs.push_back(&d);
    auto labeled = classify::pseudo_label(ptrs, ck.state);
    classify::write_pseudo_labels(out, labeled);
    std::fprintf(stderr, "%zu pseudo-labels -> %s\n", labeled.size(), out.c_str());
    return 0;
}

int cmd_train_stage2(const train::TrainConfig& cfg, const std::string& model, const std::string& train_path,
                     const std::string& pool_path, const std::string& pseudo_path, const std::string& out,
                     const std::string& history) {
    auto ck = checkpoint::load(model);
    auto train_docs = classify::encode_docs(load_docs(train_path, ck.labels), ck.vocab);
    auto pool = classify::encode_docs(load_docs(pool_path, ck.labels), ck.vocab);
    check_labels(train_docs, ck.state.classes());
    if (ck.state.time_buckets() != cfg.time_buckets)
        throw Error("bad-config", "T differs from the checkpoint");
    auto pseudo = classify::read_pseudo_labels(pseudo_path);
    std::map<std::string, const classify::EncodedDoc*> by_id;
    for (const auto& d : pool) by_id[d.id] = &d;
    std::vector<const classify::EncodedDoc*> adaptive;
    for (const auto& p : pseudo) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) throw Error("unknown-doc", p.id);
        adaptive.push_back(it->second);
    }
    auto examples = train::stage2_examples(train_docs, adaptive, pseudo, cfg.time_buckets);
    Rng stage2 = Rng(cfg.seed).child(3);
    auto h = train::train_stage2(ck.state, examples, cfg, stage2);
    if (!history.empty()) train::write_history(history, h);
    checkpoint::save(out, ck.state, ck.labels, ck.vocab);
    if (!h.epochs.empty())
        std::fprintf(stderr, "stage2 epoch %d: task %.6f time %.6f\n", h.epochs.back().epoch, h.epochs.back().task,
                     h.epochs.back().time);
    return h.diverged ? 3 : 0;
}

int cmd_evaluate(const std::string& model, const std::string& test_path) {
    auto ck = checkpoint::load(model);
    auto test = classify::encode_docs(load_docs(test_path, ck.labels), ck.vocab);
    check_labels(test, ck.state.classes());
    std::vector<int> pred, gold;
    for (const auto& d : test) {
        if (!d.label) throw Error("missing-label", d.id);
        pred.push_back(classify::predict_final(d, ck.state));
        gold.push_back(*d.label);
    }
    const auto stats = eval::per_class(pred, gold, ck.state.classes());
    std::printf("accuracy\t%.6f\n", eval::accuracy(pred, gold));
    for (std::size_t c = 0; c < stats.size(); ++c)
        std::printf("%s\tprecision %.6f\trecall %.6f\tsupport %d\n", ck.labels.names[c].c_str(), stats[c].precision,
                    stats[c].recall, stats[c].support);
    return 0;
}

int cmd_grad_check(int vocab, int topics, int hidden, std::uint64_t seed, double step, double tol) {
    auto r = train::check_vibe_gradients(vocab, topics, hidden, seed, 1.0, 0.7, step, tol);
    const std::pair<const char*, const train::GradCheckReport*> parts[] = {
        {"objective", &r.objective}, {"joint", &r.joint}, {"sphere", &r.sphere}};
    bool ok = true;
    for (const auto& [name, rep] : parts) {
        std::printf("%-9s %s  max_rel %.3e  max_abs %.3e  worst %s  entries %zu\n", name,
                    rep->passed() ? "ok  " : "FAIL", rep->max_rel_error, rep->max_abs_error, rep->worst.c_str(),
                    rep->checked);
        ok = ok && rep->passed();
    }
    return ok ? 0 : 1;
}

int cmd_report(const train::TrainConfig& cfg, const std::string& model, const std::string& train_path,
               const std::string& pool_path, const std::string& test_path, bool baseline, const std::string& out,
               const std::string& plots) {
    auto ck = checkpoint::load(model);
    auto train_docs = load_docs(train_path, ck.labels);
    auto pool = load_docs(pool_path, ck.labels);
    auto test = load_docs(test_path, ck.labels);
    std::optional<eval::Baseline> base;
    if (baseline) {
        auto enc = classify::encode_docs(train_docs, ck.vocab);
        check_labels(enc, ck.state.classes());
        base = eval::past_only_baseline(enc, static_cast<int>(ck.vocab.size()), ck.state.classes(), cfg);
    }
    eval::ReportInputs in{ck.state, ck.labels, ck.vocab, train_docs, pool, test, cfg, {cfg.seed},
                          base ? &*base : nullptr};
    auto report = eval::run_report(in);
    eval::write_report(out, report);
    if (!plots.empty()) eval::write_plot_data(plots, report);
    std::printf("accuracy\t%.6f\n", report.accuracy);
    if (report.baseline_accuracy) std::printf("baseline\t%.6f\n", *report.baseline_accuracy);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VIBE: temporally adaptive text classification with a disentangled topic model"};
    app.require_subcommand(1);

    // synth-gen
    auto* synth_cmd = app.add_subcommand("synth-gen", "Generate a synthetic drifting corpus");
    synth::DriftSpec spec;
    std::uint64_t synth_seed = 0;
    std::string synth_out, synth_truth, stream_out;
    int stream_count = 1000;
    synth_cmd->add_option("--out", synth_out, "Dataset (JSON lines)")->required();
    synth_cmd->add_option("--truth", synth_truth, "Ground-truth mixtures (TSV)");
    synth_cmd->add_option("--stream-out", stream_out, "Unlabeled final-period pool (JSON lines)");
    synth_cmd->add_option("--stream-count", stream_count, "Pool size")->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed, "Seed");
    synth_cmd->add_option("--vocab", spec.vocab)->capture_default_str();
    synth_cmd->add_option("--shared-topics", spec.shared_topics)->capture_default_str();
    synth_cmd->add_option("--period-topics", spec.period_topics)->capture_default_str();
    synth_cmd->add_option("--periods", spec.periods)->capture_default_str();
    synth_cmd->add_option("--docs-per-period", spec.docs_per_period)->capture_default_str();
    synth_cmd->add_option("--min-length", spec.min_length)->capture_default_str();
    synth_cmd->add_option("--max-length", spec.max_length)->capture_default_str();
    synth_cmd->add_option("--mix-shared", spec.mix_shared)->capture_default_str();
    synth_cmd->add_option("--topic-sharpness", spec.topic_sharpness)->capture_default_str();
    synth_cmd->add_option("--doc-concentration", spec.doc_concentration)->capture_default_str();
    synth_cmd->add_option("--label-period-correlation", spec.label_period_correlation)->capture_default_str();
    synth_cmd->add_option("--start-time", spec.start_time)->capture_default_str();
    synth_cmd->add_option("--period-seconds", spec.period_seconds)->capture_default_str();

    // split
    auto* split_cmd = app.add_subcommand("split", "Temporal train/validation/adaptive/test split");
    std::string split_data, split_mode = "relative", split_out, split_prefix;
    std::vector<std::int64_t> boundaries;
    std::uint64_t split_seed = 0;
    split_cmd->add_option("--data", split_data)->required()->check(CLI::ExistingFile);
    split_cmd->add_option("--mode", split_mode)->check(CLI::IsMember({"relative", "absolute"}))->capture_default_str();
    split_cmd->add_option("--boundaries", boundaries, "Absolute cut points (unix seconds or ISO dates)")
        ->delimiter(',')
        ->transform([](std::string s) { return std::to_string(corpus::parse_timestamp(s)); });
    split_cmd->add_option("--seed", split_seed);
    split_cmd->add_option("--out", split_out, "Split file")->required();
    split_cmd->add_option("--out-prefix", split_prefix, "Also write <prefix>{train,validation,adaptive,test}.jsonl");

    // commands that take a TrainConfig
    std::map<CLI::App*, ConfigFlags> flags;
    auto configured = [&](const char* name, const char* help) {
        auto* c = app.add_subcommand(name, help);
        flags[c].attach(*c);
        return c;
    };

    std::string train_path, pool_path, pairs_path, out_path, history_path, model_path, pseudo_path, test_path,
        embeddings_path, plots_prefix;
    bool with_baseline = false;

    auto* retrieve_cmd = configured("retrieve", "Pair each training doc with its top-N pool docs");
    retrieve_cmd->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
    retrieve_cmd->add_option("--out", out_path, "Pairs file")->required();
    // --n and --scheme are config keys (N, scheme); --n is the documented spelling.
    retrieve_cmd->add_option_function<std::string>(
        "--n", [&](const std::string& v) { flags[retrieve_cmd].overrides["N"] = v; }, "Pairs per training doc");

    auto* s1_cmd = configured("train-stage1", "Warm-up and joint training of topic model and task classifier");
    s1_cmd->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
    s1_cmd->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
    s1_cmd->add_option("--pairs", pairs_path)->required()->check(CLI::ExistingFile);
    s1_cmd->add_option("--embeddings", embeddings_path, "Precomputed doc embeddings")->check(CLI::ExistingFile);
    s1_cmd->add_option("--out", out_path, "Checkpoint")->required();
    s1_cmd->add_option("--history", history_path, "Loss history (CSV)");

    auto* pl_cmd = app.add_subcommand("pseudo-label", "Label adaptive docs with the stage-1 classifier");
    pl_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    pl_cmd->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
    pl_cmd->add_option("--pairs", pairs_path, "Restrict to paired pool docs")->check(CLI::ExistingFile);
    pl_cmd->add_option("--out", out_path)->required();

    auto* s2_cmd = configured("train-stage2", "Sphere-projected multi-task training");
    s2_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    s2_cmd->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
    s2_cmd->add_option("--pool", pool_path)->required()->check(CLI::ExistingFile);
    s2_cmd->add_option("--pseudo", pseudo_path)->required()->check(CLI::ExistingFile);
    s2_cmd->add_option("--out", out_path, "Checkpoint")->required();
    s2_cmd->add_option("--history", history_path, "Loss history (CSV)");

    auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy and per-class stats on a labeled set");
    eval_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--test", test_path)->required()->check(CLI::ExistingFile);

    auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of all analytic gradients");
    int gc_vocab = 30, gc_topics = 4, gc_hidden = 16;
    double gc_step = 1e-4, gc_tol = 1e-3;
    std::uint64_t gc_seed = 0;
    gc_cmd->add_option("--V", gc_vocab)->capture_default_str();
    gc_cmd->add_option("--K", gc_topics)->capture_default_str();
    gc_cmd->add_option("--hidden", gc_hidden)->capture_default_str();
    gc_cmd->add_option("--step", gc_step)->capture_default_str();
    gc_cmd->add_option("--tol", gc_tol)->capture_default_str();
    gc_cmd->add_option("--seed", gc_seed);

    auto* report_cmd = configured("report", "JSON report with accuracy, vocabulary overlap and MMD");
    report_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--pool", pool_path, "Adaptive docs")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--test", test_path)->required()->check(CLI::ExistingFile);
    report_cmd->add_flag("--baseline", with_baseline, "Also train and score the past-only baseline");
    report_cmd->add_option("--out", out_path)->required();
    report_cmd->add_option("--plots", plots_prefix, "Prefix for plot CSV files");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            spec.seed = synth_seed;
            spec.validate();
            return cmd_synth_gen(spec, synth_out, synth_truth, stream_out, stream_count);
        }
        if (*split_cmd) return cmd_split(split_data, split_mode, boundaries, split_seed, split_out, split_prefix);
        if (*pl_cmd) return cmd_pseudo_label(model_path, pool_path, pairs_path, out_path);
        if (*eval_cmd) return cmd_evaluate(model_path, test_path);
        if (*gc_cmd) return cmd_grad_check(gc_vocab, gc_topics, gc_hidden, gc_seed, gc_step, gc_tol);
        if (*retrieve_cmd) return cmd_retrieve(flags[retrieve_cmd].resolve(), train_path, pool_path, out_path);
        if (*s1_cmd)
            return cmd_train_stage1(flags[s1_cmd].resolve(), train_path, pool_path, pairs_path, embeddings_path,
                                    out_path, history_path);
        if (*s2_cmd)
            return cmd_train_stage2(flags[s2_cmd].resolve(), model_path, train_path, pool_path, pseudo_path, out_path,
                                    history_path);
        if (*report_cmd)
            return cmd_report(flags[report_cmd].resolve(), model_path, train_path, pool_path, test_path,
                              with_baseline, out_path, plots_prefix);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
