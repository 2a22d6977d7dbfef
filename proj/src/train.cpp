#include "vibe/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace vibe::train {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("bad-config", key + " expects a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw Error("bad-config", key + " expects an integer, got '" + v + "'");
    return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw Error("bad-config", key + " is empty");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw Error("bad-config", key + " expects a boolean, got '" + v + "'");
}

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

void init_encoder(ntm::GaussianEncoder& e, Rng& rng) {
    nn::init_uniform(e.hidden, rng);
    nn::init_uniform(e.mean, rng);
    nn::init_uniform(e.log_std, rng);
}

void init_head(classify::ClassifierHead& h, Rng& rng) {
    nn::init_uniform(h.mlp, rng);
    nn::init_uniform(h.out, rng);
}

struct Snapshot {
    std::vector<std::vector<double>> data;

    explicit Snapshot(std::vector<nn::TensorView>& t) {
        for (auto& v : t) data.emplace_back(v.data.begin(), v.data.end());
    }
    void restore(std::vector<nn::TensorView>& t) const {
        for (std::size_t i = 0; i < t.size(); ++i) std::copy(data[i].begin(), data[i].end(), t[i].data.begin());
    }
};

std::vector<ntm::NoiseDraws> sample_noise(std::size_t n, int topics, int draws, Rng& rng) {
    std::vector<ntm::NoiseDraws> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(ntm::NoiseDraws::sample(topics, draws, rng));
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw Error("bad-config", what);
    };
    need(batch_size >= 1, "batch_size must be >= 1");
    need(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
    need(warmup_epochs >= 0, "warmup_epochs must be >= 0");
    need(stage1_epochs >= 1, "stage1_epochs must be >= 1");
    need(stage2_epochs >= 1, "stage2_epochs must be >= 1");
    need(lambda >= 0.0, "lambda must be >= 0");
    need(mu >= 0.0, "mu must be >= 0");
    need(topics >= 1 && hidden >= 1 && head_hidden >= 1 && embedding >= 1, "dimensions must be >= 1");
    need(depth >= 1, "N must be >= 1");
    need(time_buckets >= 2, "T must be >= 2");
    need(noise_draws >= 1, "noise_draws must be >= 1");
    need(baseline_epochs >= 0, "baseline_epochs must be >= 0");
    need(max_vocab >= 1, "max_vocab must be >= 1");
    need(!grid_lambda.empty() && !grid_mu.empty() && !grid_learning_rate.empty(), "empty grid");
    retrieval::parse_scheme(scheme);
}

void TrainConfig::set(const std::string& raw_key, const std::string& raw_value) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string v = trim(raw_value);
    auto as_int = [&] { return static_cast<int>(parse_int(key, v)); };
    if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, v));
    else if (key == "batch_size") batch_size = as_int();
    else if (key == "learning_rate") learning_rate = parse_double(key, v);
    else if (key == "warmup_epochs") warmup_epochs = as_int();
    else if (key == "stage1_epochs") stage1_epochs = as_int();
    else if (key == "stage2_epochs") stage2_epochs = as_int();
    else if (key == "lambda") lambda = parse_double(key, v);
    else if (key == "mu") mu = parse_double(key, v);
    else if (key == "K") topics = as_int();
    else if (key == "hidden") hidden = as_int();
    else if (key == "head_hidden") head_hidden = as_int();
    else if (key == "E") embedding = as_int();
    else if (key == "N") depth = as_int();
    else if (key == "T") time_buckets = as_int();
    else if (key == "noise_draws") noise_draws = as_int();
    else if (key == "baseline_epochs") baseline_epochs = as_int();
    else if (key == "max_vocab") max_vocab = as_int();
    else if (key == "stage2_update_all") stage2_update_all = parse_bool(key, v);
    else if (key == "scheme") scheme = v;
    else if (key == "grid_lambda") grid_lambda = parse_list(key, v);
    else if (key == "grid_mu") grid_mu = parse_list(key, v);
    else if (key == "grid_learning_rate") grid_learning_rate = parse_list(key, v);
    else throw Error("unknown-key", raw_key);
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
    return {
        {"seed", std::to_string(seed)},
        {"batch_size", std::to_string(batch_size)},
        {"learning_rate", fmt(learning_rate)},
        {"warmup_epochs", std::to_string(warmup_epochs)},
        {"stage1_epochs", std::to_string(stage1_epochs)},
        {"stage2_epochs", std::to_string(stage2_epochs)},
        {"lambda", fmt(lambda)},
        {"mu", fmt(mu)},
        {"K", std::to_string(topics)},
        {"hidden", std::to_string(hidden)},
        {"head_hidden", std::to_string(head_hidden)},
        {"E", std::to_string(embedding)},
        {"N", std::to_string(depth)},
        {"T", std::to_string(time_buckets)},
        {"noise_draws", std::to_string(noise_draws)},
        {"baseline_epochs", std::to_string(baseline_epochs)},
        {"max_vocab", std::to_string(max_vocab)},
        {"stage2_update_all", stage2_update_all ? "true" : "false"},
        {"scheme", scheme},
        {"grid_lambda", fmt_list(grid_lambda)},
        {"grid_mu", fmt_list(grid_mu)},
        {"grid_learning_rate", fmt_list(grid_learning_rate)},
    };
}

TrainConfig read_config(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error("bad-config", path + ":" + std::to_string(lineno) + ": expected key=value");
        base.set(trim(t.substr(0, eq)), t.substr(eq + 1));
    }
    base.validate();
    return base;
}

void write_config(const std::string& path, const TrainConfig& config) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    for (const auto& [k, v] : config.entries()) out << k << '=' << v << '\n';
}

VibeState init_model(const TrainConfig& config, int vocab, int classes, Rng& rng) {
    config.validate();
    if (vocab < 1 || classes < 1) throw Error("bad-config", "vocab and classes must be >= 1");
    VibeState s(vocab, config.topics, config.hidden, config.head_hidden, config.embedding, classes,
                config.time_buckets);

    auto& m = s.ntm;
    for (auto* e : {&m.enc_x, &m.enc_y, &m.enc_s, &m.approx_x, &m.approx_y}) init_encoder(*e, rng);
    nn::init_uniform(m.dec_x, rng);
    nn::init_uniform(m.dec_y, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.embedding));
    for (Eigen::Index c = 0; c < s.embedding.table.cols(); ++c)
        for (Eigen::Index r = 0; r < s.embedding.table.rows(); ++r)
            s.embedding.table(r, c) = rng.uniform(-bound, bound);
    init_head(s.task1, rng);
    init_head(s.task2, rng);
    init_head(s.time2, rng);
    return s;
}

void write_history(const std::string& path, const History& history) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write " + path);
    out << "stage,epoch,total,past,ntm,recon_x,recon_y,kl_x,kl_y,kl_s_prior,kl_s_rx,kl_s_ry,elbo,"
           "objective,task,time,sphere\n";
    for (const auto& r : history.epochs) {
        const auto& b = r.breakdown;
        out << r.stage << ',' << r.epoch << ',' << fmt(r.total) << ',' << fmt(r.past) << ','
            << fmt(b.ntm_loss()) << ',' << fmt(b.recon_x) << ',' << fmt(b.recon_y) << ','
            << fmt(b.kl_x) << ',' << fmt(b.kl_y) << ',' << fmt(b.kl_s_prior) << ','
            << fmt(b.kl_s_rx) << ',' << fmt(b.kl_s_ry) << ',' << fmt(b.elbo) << ','
            << fmt(b.objective) << ',' << fmt(r.task) << ',' << fmt(r.time) << ','
            << fmt(r.sphere) << '\n';
    }
    if (history.diverged) out << "# diverged\n";
}

History train_stage1(VibeState& state, const std::vector<classify::LabeledPair>& pairs,
                     const TrainConfig& config, Rng& rng, const StepObserver& observe) {
    config.validate();
    if (pairs.empty()) throw Error("empty-input", "no training pairs");
    History history;
    VibeState grad = state.zeros_like();
    auto params = state.tensors();
    auto grads = grad.tensors();
    using nn::ParamGroup;
    const int K = state.ntm.topics;
    const std::size_t B = static_cast<std::size_t>(config.batch_size);

    auto run_phase = [&](const std::string& stage, int epochs, bool joint) {
        nn::Adam adam(config.learning_rate);
        const std::vector<ParamGroup> active =
            joint ? std::vector<ParamGroup>{ParamGroup::ntm, ParamGroup::embedding, ParamGroup::task1}
                  : std::vector<ParamGroup>{ParamGroup::ntm};
        for (int epoch = 0; epoch < epochs; ++epoch) {
            Snapshot snap(params);
            auto order = iota(pairs.size());
            shuffle(order, rng);
            std::vector<ntm::LossBreakdown> parts;
            double past_sum = 0.0, total_sum = 0.0;
            int step = 0;
            for (std::size_t start = 0; start < order.size(); start += B, ++step) {
                const std::size_t end = std::min(order.size(), start + B);
                std::vector<classify::LabeledPair> batch;
                for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
                auto noise = sample_noise(batch.size(), K, config.noise_draws, rng);
                grad.set_zero();
                classify::JointLoss loss;
                if (joint) {
                    loss = classify::joint_loss_backward(batch, state, config.mu, config.lambda, noise, grad);
                } else {
                    std::vector<ntm::LossBreakdown> bparts;
                    const double scale = 1.0 / static_cast<double>(batch.size());
                    for (std::size_t i = 0; i < batch.size(); ++i)
                        bparts.push_back(ntm::backward({batch[i].past->bow, batch[i].future->bow}, state.ntm,
                                                       config.lambda, noise[i], grad.ntm, scale));
                    loss.breakdown = ntm::mean_breakdown(bparts, config.lambda);
                    loss.ntm = loss.breakdown.ntm_loss();
                    loss.total = loss.ntm;
                }
                if (!std::isfinite(loss.total) || !nn::all_finite(grads)) {
                    snap.restore(params);
                    history.diverged = true;
                    return false;
                }
                adam.step(params, grads, active);
                if (!nn::all_finite(params)) {
                    snap.restore(params);
                    history.diverged = true;
                    return false;
                }
                if (observe) observe({stage, epoch, step, &loss, nullptr});
                const double w = static_cast<double>(batch.size());
                auto b = loss.breakdown;
                for (auto* f : {&b.recon_x, &b.recon_y, &b.kl_x, &b.kl_y, &b.kl_s_prior, &b.kl_s_rx, &b.kl_s_ry})
                    *f *= w;
                parts.push_back(b);
                past_sum += loss.past * w;
                total_sum += loss.total * w;
            }
            // Batch sums -> per-pair means.
            EpochRecord rec;
            rec.stage = stage;
            rec.epoch = epoch;
            rec.breakdown = ntm::mean_breakdown(parts, config.lambda);
            const double scale = static_cast<double>(parts.size()) / static_cast<double>(pairs.size());
            for (auto* f : {&rec.breakdown.recon_x, &rec.breakdown.recon_y, &rec.breakdown.kl_x,
                            &rec.breakdown.kl_y, &rec.breakdown.kl_s_prior, &rec.breakdown.kl_s_rx,
                            &rec.breakdown.kl_s_ry})
                *f *= scale;
            rec.breakdown.assemble();
            rec.breakdown.mu = joint ? config.mu : 0.0;
            rec.past = past_sum / static_cast<double>(pairs.size());
            rec.total = total_sum / static_cast<double>(pairs.size());
            history.epochs.push_back(rec);
        }
        return true;
    };

    if (run_phase("warmup", config.warmup_epochs, false)) run_phase("stage1", config.stage1_epochs, true);
    return history;
}

History train_stage2(VibeState& state, const std::vector<classify::Stage2Example>& examples,
                     const TrainConfig& config, Rng& rng, const StepObserver& observe) {
    config.validate();
    if (examples.empty()) throw Error("empty-input", "no stage-2 examples");
    History history;
    VibeState grad = state.zeros_like();
    auto params = state.tensors();
    auto grads = grad.tensors();
    using nn::ParamGroup;
    std::vector<ParamGroup> active{ParamGroup::task2, ParamGroup::time2};
    if (config.stage2_update_all) {
        active.push_back(ParamGroup::ntm);
        active.push_back(ParamGroup::embedding);
    }
    const bool frozen = !config.stage2_update_all;
    std::vector<Vec> features;
    if (frozen) {
        features.reserve(examples.size());
        for (const auto& ex : examples) features.push_back(classify::sphere_project(*ex.doc, ex.side, state));
    }

    nn::Adam adam(config.learning_rate);
    const std::size_t B = static_cast<std::size_t>(config.batch_size);
    const std::string stage = "stage2";
    for (int epoch = 0; epoch < config.stage2_epochs; ++epoch) {
        Snapshot snap(params);
        auto order = iota(examples.size());
        shuffle(order, rng);
        EpochRecord rec;
        rec.stage = stage;
        rec.epoch = epoch;
        int step = 0;
        for (std::size_t start = 0; start < order.size(); start += B, ++step) {
            const std::size_t end = std::min(order.size(), start + B);
            std::vector<classify::Stage2Example> batch;
            std::vector<const Vec*> feats;
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(examples[order[i]]);
                if (frozen) feats.push_back(&features[order[i]]);
            }
            grad.set_zero();
            auto loss = frozen ? classify::stage2_heads_backward(feats, batch, state, &grad)
                               : classify::stage2_backward(batch, state, grad, true);
            if (!std::isfinite(loss.sphere) || !nn::all_finite(grads)) {
                snap.restore(params);
                history.diverged = true;
                return history;
            }
            adam.step(params, grads, active);
            if (!nn::all_finite(params)) {
                snap.restore(params);
                history.diverged = true;
                return history;
            }
            if (observe) observe({stage, epoch, step, nullptr, &loss});
            const double w = static_cast<double>(batch.size());
            rec.task += loss.task * w;
            rec.time += loss.time * w;
        }
        const double n = static_cast<double>(examples.size());
        rec.task /= n;
        rec.time /= n;
        rec.sphere = rec.task + rec.time;
        rec.total = rec.sphere;
        history.epochs.push_back(rec);
    }
    return history;
}

GradCheckReport grad_check(std::vector<nn::TensorView> params,
                           const std::vector<nn::TensorView>& analytic,
                           const std::function<double()>& loss, double step, double tol,
                           double floor) {
    if (params.size() != analytic.size()) throw Error("bad-argument", "tensor lists differ");
    GradCheckReport r;
    r.tolerance = tol;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& p = params[t].data;
        const auto& g = analytic[t].data;
        if (p.size() != g.size()) throw Error("bad-argument", "tensor sizes differ: " + params[t].name);
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double saved = p[j];
            p[j] = saved + step;
            const double up = loss();
            p[j] = saved - step;
            const double down = loss();
            p[j] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double abs_err = std::abs(numeric - g[j]);
            const double rel = abs_err / std::max({std::abs(numeric), std::abs(g[j]), floor});
            ++r.checked;
            r.max_abs_error = std::max(r.max_abs_error, abs_err);
            if (r.checked == 1 || rel > r.max_rel_error) {
                r.max_rel_error = rel;
                r.worst = params[t].name + "[" + std::to_string(j) + "]";
            }
        }
    }
    return r;
}

namespace {

corpus::BowVector random_bow(int V, int length, Rng& rng) {
    std::vector<corpus::BowEntry> e;
    for (int i = 0; i < length; ++i) e.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(V))), 1});
    return corpus::BowVector(std::move(e));
}

template <class Params>
std::vector<nn::TensorView> filter(std::vector<nn::TensorView> all, const Params& groups) {
    std::vector<nn::TensorView> out;
    for (auto& t : all)
        if (std::find(groups.begin(), groups.end(), t.group) != groups.end()) out.push_back(t);
    return out;
}

}  // namespace

VibeGradCheck check_vibe_gradients(int vocab, int topics, int hidden, std::uint64_t seed,
                                   double lambda, double mu, double step, double tol) {
    TrainConfig cfg;
    cfg.topics = topics;
    cfg.hidden = hidden;
    cfg.head_hidden = hidden;
    cfg.embedding = 6;
    cfg.time_buckets = 2;
    Rng rng(seed);
    const int classes = 3;
    VibeState state = init_model(cfg, vocab, classes, rng);

    std::vector<EncodedDoc> docs;
    for (int i = 0; i < 8; ++i) {
        EncodedDoc d;
        d.id = "d" + std::to_string(i);
        d.bow = random_bow(vocab, 6 + static_cast<int>(rng.below(6)), rng);
        d.timestamp = i;
        d.label = i % classes;
        docs.push_back(std::move(d));
    }
    std::vector<classify::LabeledPair> pairs;
    for (int i = 0; i < 4; ++i) pairs.push_back({&docs[static_cast<std::size_t>(i)], &docs[static_cast<std::size_t>(i + 4)]});
    auto noise = sample_noise(pairs.size(), topics, 1, rng);

    VibeGradCheck out;
    using nn::ParamGroup;
    {
        VibeState g = state.zeros_like();
        const double scale = 1.0 / static_cast<double>(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i)
            ntm::backward({pairs[i].past->bow, pairs[i].future->bow}, state.ntm, lambda, noise[i], g.ntm, scale);
        auto loss = [&] {
            double s = 0.0;
            for (std::size_t i = 0; i < pairs.size(); ++i)
                s -= ntm::vibe_objective({pairs[i].past->bow, pairs[i].future->bow}, state.ntm, lambda, noise[i]).objective;
            return s * scale;
        };
        const std::vector<ParamGroup> groups{ParamGroup::ntm};
        out.objective = grad_check(filter(state.tensors(), groups), filter(g.tensors(), groups), loss, step, tol);
    }
    {
        VibeState g = state.zeros_like();
        classify::joint_loss_backward(pairs, state, mu, lambda, noise, g);
        auto loss = [&] { return classify::joint_loss(pairs, state, mu, lambda, noise).total; };
        const std::vector<ParamGroup> groups{ParamGroup::ntm, ParamGroup::embedding, ParamGroup::task1};
        out.joint = grad_check(filter(state.tensors(), groups), filter(g.tensors(), groups), loss, step, tol);
    }
    {
        std::vector<classify::Stage2Example> batch;
        for (std::size_t i = 0; i < docs.size(); ++i)
            batch.push_back({&docs[i], *docs[i].label, i < 4 ? 0 : 1, i < 4 ? Side::past : Side::future});
        VibeState g = state.zeros_like();
        classify::stage2_backward(batch, state, g, true);
        auto loss = [&] { return classify::stage2_losses(batch, state).sphere; };
        const std::vector<ParamGroup> groups{ParamGroup::ntm, ParamGroup::embedding, ParamGroup::task2,
                                             ParamGroup::time2};
        out.sphere = grad_check(filter(state.tensors(), groups), filter(g.tensors(), groups), loss, step, tol);
    }
    return out;
}

std::vector<classify::LabeledPair> resolve_pairs(const PipelineData& data) {
    std::unordered_map<std::string, const EncodedDoc*> past, future;
    for (const auto& d : data.train) past.emplace(d.id, &d);
    for (const auto& d : data.adaptive) future.emplace(d.id, &d);
    std::vector<classify::LabeledPair> out;
    out.reserve(data.pairs.size());
    for (const auto& p : data.pairs) {
        auto a = past.find(p.past);
        auto b = future.find(p.future);
        if (a == past.end()) throw Error("unknown-doc", p.past);
        if (b == future.end()) throw Error("unknown-doc", p.future);
        out.push_back({a->second, b->second});
    }
    return out;
}

std::vector<const EncodedDoc*> adaptive_docs(const PipelineData& data) {
    std::unordered_map<std::string, bool> used;
    for (const auto& p : data.pairs) used[p.future] = true;
    std::vector<const EncodedDoc*> out;
    for (const auto& d : data.adaptive)
        if (used.contains(d.id)) out.push_back(&d);
    return out;
}

std::vector<classify::Stage2Example> stage2_examples(
    const std::vector<EncodedDoc>& train, const std::vector<const EncodedDoc*>& adaptive,
    const std::vector<classify::PseudoLabeledDoc>& pseudo, int time_buckets) {
    if (pseudo.size() != adaptive.size()) throw Error("bad-argument", "one pseudo-label per adaptive doc");
    std::vector<classify::Stage2Example> out;
    out.reserve(train.size() + adaptive.size());
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& d : train) {
        lo = std::min(lo, d.timestamp);
        hi = std::max(hi, d.timestamp);
    }
    const int past_buckets = time_buckets - 1;
    for (const auto& d : train) {
        if (!d.label) throw Error("missing-label", d.id);
        int bucket = 0;
        if (past_buckets > 1 && hi > lo) {
            const double f = static_cast<double>(d.timestamp - lo) / static_cast<double>(hi - lo);
            bucket = std::min(past_buckets - 1, static_cast<int>(f * past_buckets));
        }
        out.push_back({&d, *d.label, bucket, Side::past});
    }
    for (std::size_t i = 0; i < adaptive.size(); ++i) {
        if (pseudo[i].id != adaptive[i]->id) throw Error("bad-argument", "pseudo-label order mismatch");
        out.push_back({adaptive[i], pseudo[i].label, time_buckets - 1, Side::future});
    }
    return out;
}

PipelineResult run_pipeline(const PipelineData& data, int vocab, int classes,
                            const TrainConfig& config, const StepObserver& observe) {
    Rng root(config.seed);
    Rng init_rng = root.child(1);
    Rng stage1_rng = root.child(2);
    Rng stage2_rng = root.child(3);
    PipelineResult r;
    r.state = init_model(config, vocab, classes, init_rng);
    const auto pairs = resolve_pairs(data);
    r.stage1 = train_stage1(r.state, pairs, config, stage1_rng, observe);
    if (r.stage1.diverged) return r;
    const auto adaptive = adaptive_docs(data);
    r.pseudo = classify::pseudo_label(adaptive, r.state);
    const auto examples = stage2_examples(data.train, adaptive, r.pseudo, config.time_buckets);
    r.stage2 = train_stage2(r.state, examples, config, stage2_rng, observe);
    return r;
}

GridResult grid_search(const PipelineData& data, const std::vector<EncodedDoc>& validation,
                       int vocab, int classes, const TrainConfig& config) {
    if (validation.empty()) throw Error("empty-input", "no validation docs");
    auto sorted = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    GridResult out;
    double best_acc = -1.0;
    bool have_best = false;
    for (double l : sorted(config.grid_lambda))
        for (double m : sorted(config.grid_mu))
            for (double lr : sorted(config.grid_learning_rate)) {
                TrainConfig cell = config;
                cell.lambda = l;
                cell.mu = m;
                cell.learning_rate = lr;
                auto run = run_pipeline(data, vocab, classes, cell);
                GridCell g{l, m, lr, 0.0, run.diverged()};
                if (!g.diverged) {
                    std::size_t hits = 0;
                    for (const auto& d : validation) {
                        if (!d.label) throw Error("missing-label", d.id);
                        hits += classify::predict_final(d, run.state) == *d.label;
                    }
                    g.validation_accuracy = static_cast<double>(hits) / static_cast<double>(validation.size());
                }
                out.cells.push_back(g);
                if (!g.diverged && (!have_best || g.validation_accuracy > best_acc)) {
                    have_best = true;
                    best_acc = g.validation_accuracy;
                    out.best = cell;
                    out.best_run = std::move(run);
                }
            }
    if (!have_best) throw Error("diverged", "every grid cell diverged");
    return out;
}

}  // namespace vibe::train
