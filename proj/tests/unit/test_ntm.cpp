#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "vibe/ntm.hpp"

using namespace vibe;
using namespace vibe::ntm;
using corpus::BowEntry;
using corpus::BowVector;

namespace {

VibeModel random_model(int V, int K, int H, std::uint64_t seed, double scale = 1.0) {
    VibeModel m(V, K, H);
    Rng rng(seed);
    std::vector<nn::TensorView> t;
    m.append_tensors(t);
    for (auto& v : t)
        for (double& x : v.data) x = scale * rng.uniform(-0.5, 0.5);
    return m;
}

BowVector random_bow(int V, int n, Rng& rng) {
    std::vector<BowEntry> e;
    for (int i = 0; i < n; ++i) e.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(V))), 1});
    return BowVector(e);
}

LatentGaussian gaussian(std::initializer_list<double> m, std::initializer_list<double> l) {
    LatentGaussian g{Vec(static_cast<Eigen::Index>(m.size())), Vec(static_cast<Eigen::Index>(l.size()))};
    Eigen::Index i = 0;
    for (double v : m) g.mean[i++] = v;
    i = 0;
    for (double v : l) g.log_std[i++] = v;
    return g;
}

JointTable table(int n, std::function<double(int, int, int)> f) {
    JointTable t{n, n, n, {}};
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z) t.p.push_back(f(x, y, z));
    return t;
}

}  // namespace

TEST_CASE("zero input with zero biases gives zero means") {
    VibeModel m = random_model(10, 3, 5, 1);
    for (auto* e : {&m.enc_x, &m.enc_y, &m.enc_s, &m.approx_x, &m.approx_y}) {
        e->hidden.bias.setZero();
        e->mean.bias.setZero();
    }
    BowVector empty;
    CHECK(encode_past(empty, m).mean.isZero());
    CHECK(encode_future(empty, m).mean.isZero());
    CHECK(encode_shared(empty, empty, m).mean.isZero());
    CHECK(approx_shared(empty, Side::past, m).mean.isZero());
    CHECK(approx_shared(empty, Side::future, m).mean.isZero());
}

TEST_CASE("encoders are deterministic and finite on huge counts") {
    VibeModel m = random_model(20, 4, 8, 2);
    BowVector big({{0, 5000}, {7, 5000}});
    auto a = encode_past(big, m);
    auto b = encode_past(big, m);
    CHECK(a.mean == b.mean);
    CHECK(a.log_std == b.log_std);
    for (const auto& g : {a, encode_future(big, m), encode_shared(big, big, m), approx_shared(big, Side::past, m)}) {
        CHECK(g.mean.allFinite());
        CHECK(g.log_std.maxCoeff() <= kLogStdMax);
        CHECK(g.log_std.minCoeff() >= kLogStdMin);
    }
}

TEST_CASE("past posterior does not depend on the future document") {
    VibeModel m = random_model(15, 3, 6, 3);
    Rng rng(4);
    BowVector x = random_bow(15, 10, rng);
    auto n = NoiseDraws::sample(3, 1, rng);
    auto p1 = forward_pair({x, random_bow(15, 12, rng)}, m, n);
    auto p2 = forward_pair({x, random_bow(15, 3, rng)}, m, n);
    CHECK(p1.qx.out.mean == p2.qx.out.mean);
    CHECK(p1.qx.out.log_std == p2.qx.out.log_std);
    CHECK(p1.rx.out.mean == p2.rx.out.mean);
}

TEST_CASE("reparameterize") {
    auto g = gaussian({1.0, -2.0}, {0.0, std::log(2.0)});
    CHECK(reparameterize(g, Vec::Zero(2)) == g.mean);
    Vec e(2);
    e << 0.5, 1.0;
    Vec z = reparameterize(g, e);
    CHECK(z[0] == doctest::Approx(1.5));
    CHECK(z[1] == doctest::Approx(0.0));
    try {
        reparameterize(g, Vec::Zero(3));
        FAIL("expected error");
    } catch (const Error& err) {
        CHECK(err.code() == "dimension-mismatch");
    }
}

TEST_CASE("reparameterized samples have the right mean") {
    auto g = gaussian({0.3, -1.0, 2.0}, {0.0, -1.0, 0.5});
    Rng rng(11);
    const int n = 100000;
    Vec acc = Vec::Zero(3);
    for (int i = 0; i < n; ++i) {
        Vec e(3);
        for (int k = 0; k < 3; ++k) e[k] = rng.normal();
        acc += reparameterize(g, e);
    }
    acc /= n;
    for (int k = 0; k < 3; ++k) CHECK(std::abs(acc[k] - g.mean[k]) <= 3.0 * std::exp(g.log_std[k]) / std::sqrt(n));
}

TEST_CASE("decode") {
    VibeModel m(6, 2, 3);
    Vec z = Vec::Constant(2, 0.7);
    Vec p = decode(z, z, Side::past, m);
    for (int i = 0; i < 6; ++i) CHECK(p[i] == doctest::Approx(1.0 / 6));

    VibeModel r = random_model(9, 3, 4, 5);
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        Vec a(3), b(3);
        for (int k = 0; k < 3; ++k) {
            a[k] = rng.normal();
            b[k] = rng.normal();
        }
        Vec q = decode(a, b, Side::future, r);
        CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(q.minCoeff() >= 0.0);
    }
}

TEST_CASE("decode argmax on a hand-computed V=4, K=2 toy") {
    VibeModel m(4, 2, 1);
    // Decoder sees [softmax(zv); softmax(zs)]; with zv = zs = 0 that is (0.5,0.5,0.5,0.5).
    m.dec_x.weight << 1, 0, 0, 0,   //
        0, 2, 0, 0,                 //
        0, 0, 0, 3,                 //
        1, 1, -1, -1;
    m.dec_x.bias << 0.2, 0, 0, 0;
    // logits: 0.7, 1.0, 1.5, 0.0 -> argmax 2
    Vec p = decode(Vec::Zero(2), Vec::Zero(2), Side::past, m);
    Eigen::Index best;
    p.maxCoeff(&best);
    CHECK(best == 2);
    CHECK(p[2] / p[1] == doctest::Approx(std::exp(0.5)));
}

TEST_CASE("bow_log_likelihood") {
    CHECK(bow_log_likelihood(BowVector(), Vec::Constant(4, 0.25)) == 0.0);
    CHECK(bow_log_likelihood(BowVector({{2, 1}}), Vec::Constant(4, 0.25)) == doctest::Approx(std::log(0.25)));
    Vec p(4);
    p << 0.5, 0.25, 0.125, 0.125;
    CHECK(bow_log_likelihood(BowVector({{0, 2}, {1, 1}}), p) ==
          doctest::Approx(2 * std::log(0.5) + std::log(0.25)).epsilon(1e-9));
}

TEST_CASE("kl_diag_gaussian closed forms") {
    auto q = gaussian({1.0}, {0.0});
    auto p = LatentGaussian::standard(1);
    CHECK(kl_diag_gaussian(p, p) == 0.0);
    CHECK(kl_diag_gaussian(q, p) == doctest::Approx(0.5));
    CHECK_THROWS_AS(kl_diag_gaussian(q, LatentGaussian::standard(2)), Error);
}

TEST_CASE("kl is non-negative and zero only at equality") {
    Rng rng(8);
    for (int t = 0; t < 200; ++t) {
        LatentGaussian q{Vec(3), Vec(3)}, p{Vec(3), Vec(3)};
        for (int k = 0; k < 3; ++k) {
            q.mean[k] = rng.normal();
            p.mean[k] = rng.normal();
            q.log_std[k] = rng.uniform(-2, 2);
            p.log_std[k] = rng.uniform(-2, 2);
        }
        CHECK(kl_diag_gaussian(q, p) > 0.0);
        CHECK(kl_diag_gaussian(q, q) == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("kl matches a Monte-Carlo estimate") {
    auto q = gaussian({0.5, -0.3}, {-0.2, 0.3});
    auto p = gaussian({0.0, 0.4}, {0.1, -0.1});
    Rng rng(21);
    const int n = 200000;
    double acc = 0.0;
    auto logpdf = [](const LatentGaussian& g, const Vec& z) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < z.size(); ++k) {
            const double sd = std::exp(g.log_std[k]);
            const double u = (z[k] - g.mean[k]) / sd;
            s += -0.5 * u * u - g.log_std[k] - 0.5 * std::log(2 * M_PI);
        }
        return s;
    };
    for (int i = 0; i < n; ++i) {
        Vec e(2);
        e << rng.normal(), rng.normal();
        Vec z = reparameterize(q, e);
        acc += logpdf(q, z) - logpdf(p, z);
    }
    CHECK(std::abs(acc / n - kl_diag_gaussian(q, p)) < 1e-2);
}

TEST_CASE("kl gradient vanishes at q = p and matches differences elsewhere") {
    auto q = gaussian({0.4, -1.0}, {0.2, -0.5});
    auto g0 = kl_diag_gaussian_grad(q, q);
    CHECK(g0.q_mean.isZero());
    CHECK(g0.q_log_std.norm() < 1e-14);

    auto p = gaussian({-0.3, 0.8}, {0.6, 0.1});
    auto g = kl_diag_gaussian_grad(q, p);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
        auto f = [&](LatentGaussian& target, bool mean, double delta) {
            auto saved = target;
            (mean ? target.mean : target.log_std)[k] += delta;
            const double v = kl_diag_gaussian(q, p);
            target = saved;
            return v;
        };
        CHECK(g.q_mean[k] == doctest::Approx((f(q, true, h) - f(q, true, -h)) / (2 * h)).epsilon(1e-6));
        CHECK(g.q_log_std[k] == doctest::Approx((f(q, false, h) - f(q, false, -h)) / (2 * h)).epsilon(1e-6));
        CHECK(g.p_mean[k] == doctest::Approx((f(p, true, h) - f(p, true, -h)) / (2 * h)).epsilon(1e-6));
        CHECK(g.p_log_std[k] == doctest::Approx((f(p, false, h) - f(p, false, -h)) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("prior encoders and uniform decoders give the closed-form elbo") {
    VibeModel m(7, 3, 4);
    Rng rng(5);
    BowVector x = random_bow(7, 9, rng), y = random_bow(7, 4, rng);
    auto t = elbo_pair({x, y}, m, NoiseDraws::sample(3, 2, rng));
    CHECK(t.kl_x == 0.0);
    CHECK(t.kl_y == 0.0);
    CHECK(t.kl_s_prior == 0.0);
    CHECK(t.elbo == doctest::Approx(13 * std::log(1.0 / 7)).epsilon(1e-9));
}

TEST_CASE("elbo matches independent term-by-term assembly") {
    VibeModel m = random_model(12, 3, 6, 9);
    Rng rng(3);
    BowVector x = random_bow(12, 15, rng), y = random_bow(12, 11, rng);
    auto noise = NoiseDraws::sample(3, 1, rng);
    auto t = elbo_pair({x, y}, m, noise);

    auto qx = encode_past(x, m), qy = encode_future(y, m), qs = encode_shared(x, y, m);
    Vec zx = reparameterize(qx, noise.x[0]), zs = reparameterize(qs, noise.s[0]), zy = reparameterize(qy, noise.y[0]);
    const double rx = bow_log_likelihood(x, decode(zx, zs, Side::past, m));
    const double ry = bow_log_likelihood(y, decode(zy, zs, Side::future, m));
    const auto prior = LatentGaussian::standard(3);
    const double manual = rx + ry - kl_diag_gaussian(qx, prior) - kl_diag_gaussian(qy, prior) - kl_diag_gaussian(qs, prior);
    CHECK(t.elbo == doctest::Approx(manual).epsilon(1e-12));
    CHECK(t.elbo <= t.recon_x + t.recon_y);
    CHECK(t.kl_x >= -1e-6);
    CHECK(t.kl_s_rx >= -1e-6);
}

TEST_CASE("objective assembly") {
    VibeModel m = random_model(10, 2, 5, 13);
    Rng rng(2);
    BowVector x = random_bow(10, 8, rng), y = random_bow(10, 8, rng);
    auto noise = NoiseDraws::sample(2, 1, rng);

    auto zero = vibe_objective({x, y}, m, 0.0, noise);
    CHECK(zero.objective == zero.elbo);  // bitwise

    auto one = vibe_objective({x, y}, m, 1.0, noise);
    const double manual = 2 * one.elbo + one.kl_s_prior - (one.kl_s_rx + one.kl_s_ry);
    CHECK(one.objective == doctest::Approx(manual).epsilon(1e-12));
    CHECK(one.elbo == zero.elbo);

    try {
        vibe_objective({x, y}, m, -0.1, noise);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "bad-lambda");
    }
}

TEST_CASE("approximators equal to the shared posterior remove the r terms") {
    VibeModel m = random_model(6, 2, 3, 17);
    for (auto* e : {&m.enc_s, &m.approx_x, &m.approx_y}) e->hidden.weight.setZero();
    m.approx_x.hidden.bias = m.approx_y.hidden.bias = m.enc_s.hidden.bias;
    m.approx_x.mean = m.approx_y.mean = m.enc_s.mean;
    m.approx_x.log_std = m.approx_y.log_std = m.enc_s.log_std;
    Rng rng(6);
    BowVector x = random_bow(6, 5, rng), y = random_bow(6, 5, rng);
    const double lambda = 0.6;
    auto t = vibe_objective({x, y}, m, lambda, NoiseDraws::sample(2, 1, rng));
    CHECK(t.kl_s_rx == 0.0);
    CHECK(t.kl_s_ry == 0.0);
    CHECK(t.objective == doctest::Approx((1 + lambda) * t.elbo + lambda * t.kl_s_prior).epsilon(1e-12));
}

TEST_CASE("empty pair gives no reconstruction gradient on the decoders") {
    VibeModel m = random_model(8, 2, 4, 19);
    VibeModel g(8, 2, 4);
    Rng rng(1);
    backward({BowVector(), BowVector()}, m, 0.5, NoiseDraws::sample(2, 1, rng), g);
    CHECK(g.dec_x.weight.isZero());
    CHECK(g.dec_y.bias.isZero());
}

TEST_CASE("backward matches central differences on every parameter") {
    const int V = 8, K = 2, H = 4;
    VibeModel m = random_model(V, K, H, 23);
    Rng rng(7);
    BowVector x = random_bow(V, 9, rng), y = random_bow(V, 6, rng);
    auto noise = NoiseDraws::sample(K, 2, rng);
    const double lambda = 0.7;
    VibeModel g(V, K, H);
    backward({x, y}, m, lambda, noise, g);

    std::vector<nn::TensorView> params, grads;
    m.append_tensors(params);
    g.append_tensors(grads);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t j = 0; j < params[t].data.size(); ++j) {
            double& w = params[t].data[j];
            const double saved = w;
            w = saved + h;
            const double up = -vibe_objective({x, y}, m, lambda, noise).objective;
            w = saved - h;
            const double dn = -vibe_objective({x, y}, m, lambda, noise).objective;
            w = saved;
            const double num = (up - dn) / (2 * h);
            const double a = grads[t].data[j];
            worst = std::max(worst, std::abs(num - a) / std::max({std::abs(num), std::abs(a), 1e-6}));
        }
    CHECK(worst < 1e-4);
}

TEST_CASE("interaction information: copy, independence, xor") {
    auto copy = table(2, [](int x, int y, int z) { return (x == y && y == z) ? 0.5 : 0.0; });
    CHECK(interaction_information_discrete(copy) == doctest::Approx(1.0).epsilon(1e-12));

    auto indep = table(3, [](int x, int y, int z) {
        const double px[] = {0.2, 0.3, 0.5}, py[] = {0.6, 0.1, 0.3}, pz[] = {0.25, 0.25, 0.5};
        return px[x] * py[y] * pz[z];
    });
    CHECK(std::abs(interaction_information_discrete(indep)) < 1e-12);

    auto xor_table = table(2, [](int x, int y, int z) { return z == (x ^ y) ? 0.25 : 0.0; });
    CHECK(interaction_information_discrete(xor_table) == -1.0);
}

TEST_CASE("interaction information forms agree on random joints") {
    Rng rng(31);
    for (int t = 0; t < 50; ++t) {
        auto j = table(4, [&](int, int, int) { return rng.uniform(0.0, 1.0); });
        double s = 0.0;
        for (double v : j.p) s += v;
        for (double& v : j.p) v /= s;
        auto f = interaction_information_forms(j);
        CHECK(std::abs(f.via_x - f.via_y) <= 1e-12);
    }
}

TEST_CASE("interaction information rejects bad tables") {
    auto j = table(2, [](int, int, int) { return 0.2; });
    try {
        interaction_information_discrete(j);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == "non-normalized");
    }
}

TEST_CASE("training from scratch recovers the planted elbo") {
    const int V = 12, K = 2, H = 8;
    VibeModel planted = random_model(V, K, H, 41, 6.0);
    Rng gen(43);
    auto sample_doc = [&](const Vec& zv, const Vec& zs, Side side) {
        Vec p = decode(zv, zs, side, planted);
        std::vector<BowEntry> e;
        for (int i = 0; i < 30; ++i) {
            double u = gen.uniform(), acc = 0.0;
            int w = V - 1;
            for (int v = 0; v < V; ++v)
                if ((acc += p[v]) >= u) {
                    w = v;
                    break;
                }
            e.push_back({w, 1});
        }
        return BowVector(e);
    };
    std::vector<std::pair<BowVector, BowVector>> train, held;
    for (int i = 0; i < 1800; ++i) {
        Vec zx(K), zs(K), zy(K);
        for (int k = 0; k < K; ++k) {
            zx[k] = gen.normal();
            zs[k] = gen.normal();
            zy[k] = gen.normal();
        }
        auto pair = std::make_pair(sample_doc(zx, zs, Side::past), sample_doc(zy, zs, Side::future));
        (i < 1500 ? train : held).push_back(std::move(pair));
    }

    // Fit encoders (and optionally decoders) by Adam on -elbo.
    auto fit = [&](VibeModel m, bool decoders) {
        Rng rng(47);
        std::vector<nn::TensorView> params;
        m.append_tensors(params);
        VibeModel g(V, K, H);
        std::vector<nn::TensorView> grads;
        g.append_tensors(grads);
        if (!decoders)
            for (std::size_t i = params.size() - 4; i < params.size(); ++i) params[i].group = nn::ParamGroup::baseline;
        nn::Adam adam(5e-3);
        for (int epoch = 0; epoch < 25; ++epoch)
            for (std::size_t s = 0; s < train.size(); s += 32) {
                for (auto& t : grads) std::fill(t.data.begin(), t.data.end(), 0.0);
                const std::size_t e = std::min(train.size(), s + 32);
                for (std::size_t i = s; i < e; ++i)
                    backward({train[i].first, train[i].second}, m, 0.0, NoiseDraws::sample(K, 1, rng), g,
                             1.0 / static_cast<double>(e - s));
                adam.step(params, grads, {nn::ParamGroup::ntm});
            }
        Rng eval(53);
        double total = 0.0;
        for (const auto& [x, y] : held) total += elbo_pair({x, y}, m, NoiseDraws::sample(K, 8, eval)).elbo;
        return total / static_cast<double>(held.size());
    };

    VibeModel fresh = random_model(V, K, H, 59, 0.3);
    VibeModel reference = fresh;
    reference.dec_x = planted.dec_x;
    reference.dec_y = planted.dec_y;
    const double planted_elbo = fit(reference, false);
    const double learned_elbo = fit(fresh, true);
    MESSAGE("planted " << planted_elbo << " learned " << learned_elbo);
    CHECK(learned_elbo >= planted_elbo - 0.05 * std::abs(planted_elbo));
}
