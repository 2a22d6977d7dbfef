#include "vibe/nn.hpp"

#include <algorithm>
#include <cmath>

namespace vibe::nn {

Vec Dense::forward(const SparseInput& x) const {
    Vec y = bias;
    for (const auto& [col, val] : x) y.noalias() += val * weight.col(col);
    return y;
}

Vec Dense::backward(const Vec& x, const Vec& dy, Dense& grad) const {
    grad.weight.noalias() += dy * x.transpose();
    grad.bias += dy;
    return weight.transpose() * dy;
}

void Dense::backward(const SparseInput& x, const Vec& dy, Dense& grad) const {
    for (const auto& [col, val] : x) grad.weight.col(col).noalias() += val * dy;
    grad.bias += dy;
}

void init_uniform(Dense& layer, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, layer.in())));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
            layer.weight(r, c) = rng.uniform(-bound, bound);
    layer.bias.setZero();
}

Vec relu(const Vec& x) { return x.cwiseMax(0.0); }

Vec relu_backward(const Vec& pre, const Vec& dy) {
    return (pre.array() > 0.0).select(dy, 0.0);
}

double log_sum_exp(const Vec& logits) {
    const double m = logits.maxCoeff();
    return m + std::log((logits.array() - m).exp().sum());
}

Vec softmax(const Vec& logits) {
    const double m = logits.maxCoeff();
    Vec e = (logits.array() - m).exp();
    return e / e.sum();
}

Vec softmax_backward(const Vec& p, const Vec& dp) {
    return (p.array() * (dp.array() - p.dot(dp))).matrix();
}

int argmax(const Vec& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

double cross_entropy(const Vec& logits, int label, Vec* dlogits) {
    const double lse = log_sum_exp(logits);
    if (dlogits) {
        *dlogits = (logits.array() - lse).exp();
        (*dlogits)[label] -= 1.0;
    }
    return lse - logits[label];
}

bool all_finite(const std::vector<TensorView>& tensors) {
    for (const auto& t : tensors)
        for (double v : t.data)
            if (!std::isfinite(v)) return false;
    return true;
}

void Adam::step(std::vector<TensorView>& params, const std::vector<TensorView>& grads,
                const std::vector<ParamGroup>& active) {
    if (state_.size() != params.size()) state_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (std::find(active.begin(), active.end(), params[i].group) == active.end()) continue;
        auto& p = params[i].data;
        const auto& g = grads[i].data;
        auto& s = state_[i];
        if (s.m.size() != p.size()) {
            s.m.assign(p.size(), 0.0);
            s.v.assign(p.size(), 0.0);
        }
        ++s.t;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
        for (std::size_t j = 0; j < p.size(); ++j) {
            s.m[j] = beta1_ * s.m[j] + (1.0 - beta1_) * g[j];
            s.v[j] = beta2_ * s.v[j] + (1.0 - beta2_) * g[j] * g[j];
            p[j] -= lr_ * (s.m[j] / c1) / (std::sqrt(s.v[j] / c2) + eps_);
        }
    }
}

}  // namespace vibe::nn
