#include "vibe/ntm.hpp"

#include <algorithm>
#include <cmath>

namespace vibe::ntm {

GaussianEncoder::Trace GaussianEncoder::forward(const nn::SparseInput& x) const {
    Trace t;
    t.pre = hidden.forward(x);
    t.act = nn::relu(t.pre);
    t.out.mean = mean.forward(t.act);
    t.log_std_raw = log_std.forward(t.act);
    t.out.log_std = t.log_std_raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    return t;
}

void GaussianEncoder::backward(const nn::SparseInput& x, const Trace& t, const Vec& dmean,
                               const Vec& dlog_std, GaussianEncoder& grad) const {
    Vec draw = (t.log_std_raw.array() >= kLogStdMin && t.log_std_raw.array() <= kLogStdMax)
                   .select(dlog_std, 0.0);
    Vec dact = mean.backward(t.act, dmean, grad.mean);
    dact += log_std.backward(t.act, draw, grad.log_std);
    hidden.backward(x, nn::relu_backward(t.pre, dact), grad.hidden);
}

void GaussianEncoder::append_tensors(std::vector<nn::TensorView>& out, const std::string& name,
                                     nn::ParamGroup group) {
    nn::append_dense(out, name + ".hidden", group, hidden);
    nn::append_dense(out, name + ".mean", group, mean);
    nn::append_dense(out, name + ".log_std", group, log_std);
}

VibeModel::VibeModel(int V, int K, int hidden_width)
    : vocab(V),
      topics(K),
      hidden(hidden_width),
      enc_x(V, hidden_width, K),
      enc_y(V, hidden_width, K),
      enc_s(2 * V, hidden_width, K),
      approx_x(V, hidden_width, K),
      approx_y(V, hidden_width, K),
      dec_x(2 * K, V),
      dec_y(2 * K, V) {}

void VibeModel::append_tensors(std::vector<nn::TensorView>& out) {
    using nn::ParamGroup;
    enc_x.append_tensors(out, "enc_x", ParamGroup::ntm);
    enc_y.append_tensors(out, "enc_y", ParamGroup::ntm);
    enc_s.append_tensors(out, "enc_s", ParamGroup::ntm);
    approx_x.append_tensors(out, "approx_x", ParamGroup::ntm);
    approx_y.append_tensors(out, "approx_y", ParamGroup::ntm);
    nn::append_dense(out, "dec_x", ParamGroup::ntm, dec_x);
    nn::append_dense(out, "dec_y", ParamGroup::ntm, dec_y);
}

nn::SparseInput as_input(const corpus::BowVector& bow, int offset) {
    nn::SparseInput in;
    in.reserve(bow.entries().size());
    for (const auto& e : bow.entries()) in.emplace_back(e.id + offset, static_cast<double>(e.count));
    return in;
}

namespace {

nn::SparseInput concat_input(const corpus::BowVector& x, const corpus::BowVector& y, int V) {
    auto in = as_input(x);
    auto tail = as_input(y, V);
    in.insert(in.end(), tail.begin(), tail.end());
    return in;
}

Vec decoder_input(const Vec& z_variant, const Vec& z_shared, Vec* theta_v, Vec* theta_s) {
    Vec tv = nn::softmax(z_variant);
    Vec ts = nn::softmax(z_shared);
    Vec in(tv.size() + ts.size());
    in << tv, ts;
    if (theta_v) *theta_v = std::move(tv);
    if (theta_s) *theta_s = std::move(ts);
    return in;
}

// d/dlogits of coef * sum_w c_w ln(p_w + eps), p = softmax(logits).
Vec recon_logit_grad(const nn::SparseInput& counts, const Vec& p, double coef) {
    double pg = 0.0;
    for (const auto& [w, c] : counts) pg += c * p[w] / (p[w] + kLogEps);
    Vec d = -pg * p;
    for (const auto& [w, c] : counts) d[w] += c * p[w] / (p[w] + kLogEps);
    return coef * d;
}

}  // namespace

LatentGaussian encode_past(const corpus::BowVector& bow_x, const VibeModel& model) {
    return model.enc_x.forward(as_input(bow_x)).out;
}

LatentGaussian encode_shared(const corpus::BowVector& bow_x, const corpus::BowVector& bow_y,
                             const VibeModel& model) {
    return model.enc_s.forward(concat_input(bow_x, bow_y, model.vocab)).out;
}

LatentGaussian encode_future(const corpus::BowVector& bow_y, const VibeModel& model) {
    return model.enc_y.forward(as_input(bow_y)).out;
}

LatentGaussian approx_shared(const corpus::BowVector& bow, Side side, const VibeModel& model) {
    const auto& enc = side == Side::past ? model.approx_x : model.approx_y;
    return enc.forward(as_input(bow)).out;
}

Vec reparameterize(const LatentGaussian& g, const Vec& noise) {
    if (noise.size() != g.mean.size()) throw Error("dimension-mismatch", "noise length != K");
    return g.mean + g.log_std.array().exp().matrix().cwiseProduct(noise);
}

Vec decode(const Vec& z_variant, const Vec& z_shared, Side side, const VibeModel& model) {
    const auto& dec = side == Side::past ? model.dec_x : model.dec_y;
    return nn::softmax(dec.forward(decoder_input(z_variant, z_shared, nullptr, nullptr)));
}

double bow_log_likelihood(const corpus::BowVector& bow, const Vec& probs) {
    double ll = 0.0;
    for (const auto& e : bow.entries()) ll += e.count * std::log(probs[e.id] + kLogEps);
    return ll;
}

double kl_diag_gaussian(const LatentGaussian& q, const LatentGaussian& p) {
    if (q.dim() != p.dim()) throw Error("dimension-mismatch", "kl over unequal dimensions");
    double kl = 0.0;
    for (int i = 0; i < q.dim(); ++i) {
        const double vq = std::exp(2.0 * q.log_std[i]);
        const double vp = std::exp(2.0 * p.log_std[i]);
        const double d = q.mean[i] - p.mean[i];
        kl += p.log_std[i] - q.log_std[i] + (vq + d * d) / (2.0 * vp) - 0.5;
    }
    return kl;
}

KlGradient kl_diag_gaussian_grad(const LatentGaussian& q, const LatentGaussian& p) {
    if (q.dim() != p.dim()) throw Error("dimension-mismatch", "kl over unequal dimensions");
    const int K = q.dim();
    KlGradient g{Vec(K), Vec(K), Vec(K), Vec(K)};
    for (int i = 0; i < K; ++i) {
        const double vq = std::exp(2.0 * q.log_std[i]);
        const double vp = std::exp(2.0 * p.log_std[i]);
        const double d = q.mean[i] - p.mean[i];
        g.q_mean[i] = d / vp;
        g.p_mean[i] = -d / vp;
        g.q_log_std[i] = vq / vp - 1.0;
        g.p_log_std[i] = 1.0 - (vq + d * d) / vp;
    }
    return g;
}

void LossBreakdown::assemble() {
    elbo = recon_x + recon_y - kl_x - kl_y - kl_s_prior;
    objective = (1.0 + lambda) * elbo + lambda * kl_s_prior - lambda * (kl_s_rx + kl_s_ry);
}

LossBreakdown mean_breakdown(const std::vector<LossBreakdown>& parts, double lambda) {
    LossBreakdown m;
    m.lambda = lambda;
    if (parts.empty()) return m;
    for (const auto& p : parts) {
        m.recon_x += p.recon_x;
        m.recon_y += p.recon_y;
        m.kl_x += p.kl_x;
        m.kl_y += p.kl_y;
        m.kl_s_prior += p.kl_s_prior;
        m.kl_s_rx += p.kl_s_rx;
        m.kl_s_ry += p.kl_s_ry;
    }
    const double n = static_cast<double>(parts.size());
    m.recon_x /= n;
    m.recon_y /= n;
    m.kl_x /= n;
    m.kl_y /= n;
    m.kl_s_prior /= n;
    m.kl_s_rx /= n;
    m.kl_s_ry /= n;
    m.mu = parts.front().mu;
    m.assemble();
    return m;
}

NoiseDraws NoiseDraws::sample(int topics, int draws, Rng& rng) {
    NoiseDraws n;
    auto one = [&] {
        Vec v(topics);
        for (int i = 0; i < topics; ++i) v[i] = rng.normal();
        return v;
    };
    for (int d = 0; d < draws; ++d) {
        n.x.push_back(one());
        n.s.push_back(one());
        n.y.push_back(one());
    }
    return n;
}

NoiseDraws NoiseDraws::zeros(int topics, int draws) {
    NoiseDraws n;
    for (int d = 0; d < draws; ++d) {
        n.x.push_back(Vec::Zero(topics));
        n.s.push_back(Vec::Zero(topics));
        n.y.push_back(Vec::Zero(topics));
    }
    return n;
}

PairPass forward_pair(const PairBows& pair, const VibeModel& model, const NoiseDraws& noise) {
    if (noise.draws() == 0) throw Error("bad-argument", "at least one noise draw required");
    PairPass pass;
    pass.in_x = as_input(pair.x);
    pass.in_y = as_input(pair.y);
    pass.in_xy = concat_input(pair.x, pair.y, model.vocab);
    pass.qx = model.enc_x.forward(pass.in_x);
    pass.qy = model.enc_y.forward(pass.in_y);
    pass.qs = model.enc_s.forward(pass.in_xy);
    pass.rx = model.approx_x.forward(pass.in_x);
    pass.ry = model.approx_y.forward(pass.in_y);

    auto& t = pass.terms;
    for (std::size_t d = 0; d < noise.draws(); ++d) {
        PairPass::Draw dr;
        dr.eps_x = noise.x[d];
        dr.eps_s = noise.s[d];
        dr.eps_y = noise.y[d];
        // One z^s sample feeds both decoders.
        const Vec zx = reparameterize(pass.qx.out, dr.eps_x);
        const Vec zs = reparameterize(pass.qs.out, dr.eps_s);
        const Vec zy = reparameterize(pass.qy.out, dr.eps_y);
        dr.dec_in_x = decoder_input(zx, zs, &dr.theta_x, &dr.theta_s);
        dr.dec_in_y = decoder_input(zy, zs, &dr.theta_y, nullptr);
        dr.probs_x = nn::softmax(model.dec_x.forward(dr.dec_in_x));
        dr.probs_y = nn::softmax(model.dec_y.forward(dr.dec_in_y));
        dr.recon_x = bow_log_likelihood(pair.x, dr.probs_x);
        dr.recon_y = bow_log_likelihood(pair.y, dr.probs_y);
        t.recon_x += dr.recon_x;
        t.recon_y += dr.recon_y;
        pass.draws.push_back(std::move(dr));
    }
    const double D = static_cast<double>(noise.draws());
    t.recon_x /= D;
    t.recon_y /= D;
    const int K = model.topics;
    const auto prior = LatentGaussian::standard(K);
    t.kl_x = kl_diag_gaussian(pass.qx.out, prior);
    t.kl_y = kl_diag_gaussian(pass.qy.out, prior);
    t.kl_s_prior = kl_diag_gaussian(pass.qs.out, prior);
    t.kl_s_rx = kl_diag_gaussian(pass.qs.out, pass.rx.out);
    t.kl_s_ry = kl_diag_gaussian(pass.qs.out, pass.ry.out);
    t.assemble();
    return pass;
}

LossBreakdown elbo_pair(const PairBows& pair, const VibeModel& model, const NoiseDraws& noise) {
    return forward_pair(pair, model, noise).terms;
}

LossBreakdown vibe_objective(const PairBows& pair, const VibeModel& model, double lambda,
                             const NoiseDraws& noise) {
    if (lambda < 0.0) throw Error("bad-lambda", "lambda must be >= 0");
    LossBreakdown t = forward_pair(pair, model, noise).terms;
    t.lambda = lambda;
    t.assemble();
    return t;
}

void backward_pair(const PairPass& pass, const VibeModel& model, double lambda, double scale,
                   VibeModel& grad, const Vec* extra_rx_mean) {
    const int K = model.topics;
    const double D = static_cast<double>(pass.draws.size());
    // Coefficients of -objective in terms of the components.
    const double c_recon = -(1.0 + lambda) * scale / D;
    const double c_kl_var = (1.0 + lambda) * scale;
    const double c_kl_prior_s = scale;  // (1+l) from the elbo, -l from the explicit term
    const double c_kl_r = lambda * scale;

    Vec dqx_m = Vec::Zero(K), dqx_l = Vec::Zero(K);
    Vec dqy_m = Vec::Zero(K), dqy_l = Vec::Zero(K);
    Vec dqs_m = Vec::Zero(K), dqs_l = Vec::Zero(K);
    Vec drx_m = Vec::Zero(K), drx_l = Vec::Zero(K);
    Vec dry_m = Vec::Zero(K), dry_l = Vec::Zero(K);

    const Vec sx = pass.qx.out.log_std.array().exp();
    const Vec ss = pass.qs.out.log_std.array().exp();
    const Vec sy = pass.qy.out.log_std.array().exp();

    for (const auto& dr : pass.draws) {
        Vec dlog_x = recon_logit_grad(pass.in_x, dr.probs_x, c_recon);
        Vec din_x = model.dec_x.backward(dr.dec_in_x, dlog_x, grad.dec_x);
        Vec dlog_y = recon_logit_grad(pass.in_y, dr.probs_y, c_recon);
        Vec din_y = model.dec_y.backward(dr.dec_in_y, dlog_y, grad.dec_y);

        Vec dzx = nn::softmax_backward(dr.theta_x, din_x.head(K));
        Vec dzs = nn::softmax_backward(dr.theta_s, din_x.tail(K) + din_y.tail(K));
        Vec dzy = nn::softmax_backward(dr.theta_y, din_y.head(K));

        dqx_m += dzx;
        dqx_l += dzx.cwiseProduct(sx).cwiseProduct(dr.eps_x);
        dqs_m += dzs;
        dqs_l += dzs.cwiseProduct(ss).cwiseProduct(dr.eps_s);
        dqy_m += dzy;
        dqy_l += dzy.cwiseProduct(sy).cwiseProduct(dr.eps_y);
    }

    // KL to the standard-normal priors.
    dqx_m += c_kl_var * pass.qx.out.mean;
    dqx_l += c_kl_var * (sx.array().square() - 1.0).matrix();
    dqy_m += c_kl_var * pass.qy.out.mean;
    dqy_l += c_kl_var * (sy.array().square() - 1.0).matrix();
    dqs_m += c_kl_prior_s * pass.qs.out.mean;
    dqs_l += c_kl_prior_s * (ss.array().square() - 1.0).matrix();

    if (c_kl_r != 0.0) {
        const auto gx = kl_diag_gaussian_grad(pass.qs.out, pass.rx.out);
        const auto gy = kl_diag_gaussian_grad(pass.qs.out, pass.ry.out);
        dqs_m += c_kl_r * (gx.q_mean + gy.q_mean);
        dqs_l += c_kl_r * (gx.q_log_std + gy.q_log_std);
        drx_m += c_kl_r * gx.p_mean;
        drx_l += c_kl_r * gx.p_log_std;
        dry_m += c_kl_r * gy.p_mean;
        dry_l += c_kl_r * gy.p_log_std;
    }
    if (extra_rx_mean) drx_m += *extra_rx_mean;

    model.enc_x.backward(pass.in_x, pass.qx, dqx_m, dqx_l, grad.enc_x);
    model.enc_y.backward(pass.in_y, pass.qy, dqy_m, dqy_l, grad.enc_y);
    model.enc_s.backward(pass.in_xy, pass.qs, dqs_m, dqs_l, grad.enc_s);
    model.approx_x.backward(pass.in_x, pass.rx, drx_m, drx_l, grad.approx_x);
    model.approx_y.backward(pass.in_y, pass.ry, dry_m, dry_l, grad.approx_y);
}

LossBreakdown backward(const PairBows& pair, const VibeModel& model, double lambda,
                       const NoiseDraws& noise, VibeModel& grad, double scale) {
    if (lambda < 0.0) throw Error("bad-lambda", "lambda must be >= 0");
    PairPass pass = forward_pair(pair, model, noise);
    backward_pair(pass, model, lambda, scale, grad);
    LossBreakdown t = pass.terms;
    t.lambda = lambda;
    t.assemble();
    return t;
}

// ---- interaction information ------------------------------------------

namespace {

// Mutual information I(A;C) and conditional I(A;C|B) over an (a, b, c)
// accessor, in bits.
template <class P>
double mutual_ac(int na, int nb, int nc, P p) {
    std::vector<double> pa(na, 0.0), pc(nc, 0.0), pac(static_cast<std::size_t>(na * nc), 0.0);
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int c = 0; c < nc; ++c) {
                const double v = p(a, b, c);
                pa[a] += v;
                pc[c] += v;
                pac[static_cast<std::size_t>(a * nc + c)] += v;
            }
    double mi = 0.0;
    for (int a = 0; a < na; ++a)
        for (int c = 0; c < nc; ++c) {
            const double v = pac[static_cast<std::size_t>(a * nc + c)];
            if (v > 0.0) mi += v * std::log2(v / (pa[a] * pc[c]));
        }
    return mi;
}

template <class P>
double conditional_ac_given_b(int na, int nb, int nc, P p) {
    std::vector<double> pb(nb, 0.0), pab(static_cast<std::size_t>(na * nb), 0.0),
        pbc(static_cast<std::size_t>(nb * nc), 0.0);
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int c = 0; c < nc; ++c) {
                const double v = p(a, b, c);
                pb[b] += v;
                pab[static_cast<std::size_t>(a * nb + b)] += v;
                pbc[static_cast<std::size_t>(b * nc + c)] += v;
            }
    double cmi = 0.0;
    for (int a = 0; a < na; ++a)
        for (int b = 0; b < nb; ++b)
            for (int c = 0; c < nc; ++c) {
                const double v = p(a, b, c);
                if (v > 0.0)
                    cmi += v * std::log2(v * pb[b] / (pab[static_cast<std::size_t>(a * nb + b)] *
                                                      pbc[static_cast<std::size_t>(b * nc + c)]));
            }
    return cmi;
}

}  // namespace

InteractionForms interaction_information_forms(const JointTable& joint) {
    if (joint.nx <= 0 || joint.ny <= 0 || joint.nz <= 0 ||
        joint.p.size() != static_cast<std::size_t>(joint.nx * joint.ny * joint.nz))
        throw Error("bad-table", "table shape does not match its dimensions");
    double total = 0.0;
    for (double v : joint.p) {
        if (v < 0.0 || !std::isfinite(v)) throw Error("non-normalized", "negative probability");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("non-normalized", "table does not sum to 1");

    auto pxyz = [&](int x, int y, int z) { return joint.at(x, y, z); };
    auto pyxz = [&](int y, int x, int z) { return joint.at(x, y, z); };
    InteractionForms f{};
    f.via_x = mutual_ac(joint.nx, joint.ny, joint.nz, pxyz) -
              conditional_ac_given_b(joint.nx, joint.ny, joint.nz, pxyz);
    f.via_y = mutual_ac(joint.ny, joint.nx, joint.nz, pyxz) -
              conditional_ac_given_b(joint.ny, joint.nx, joint.nz, pyxz);
    return f;
}

double interaction_information_discrete(const JointTable& joint) {
    const auto f = interaction_information_forms(joint);
    if (std::abs(f.via_x - f.via_y) > 1e-12)
        throw Error("identity-violation", "interaction information forms disagree");
    return f.via_x;
}

}  // namespace vibe::ntm
