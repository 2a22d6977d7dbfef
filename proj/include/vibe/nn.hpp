#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vibe/common.hpp"

namespace vibe::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Sparse input row: (column, value) with distinct columns.
using SparseInput = std::vector<std::pair<int, double>>;

// y = W x + b, W is out x in.
struct Dense {
    Mat weight;
    Vec bias;

    Dense() = default;
    Dense(int in, int out) : weight(Mat::Zero(out, in)), bias(Vec::Zero(out)) {}

    int in() const { return static_cast<int>(weight.cols()); }
    int out() const { return static_cast<int>(weight.rows()); }

    Vec forward(const Vec& x) const { return weight * x + bias; }
    Vec forward(const SparseInput& x) const;

    // Accumulates parameter gradients for upstream gradient dy; returns dx.
    Vec backward(const Vec& x, const Vec& dy, Dense& grad) const;
    void backward(const SparseInput& x, const Vec& dy, Dense& grad) const;

    void set_zero() {
        weight.setZero();
        bias.setZero();
    }
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; bias zero.
void init_uniform(Dense& layer, Rng& rng);

Vec relu(const Vec& x);
Vec relu_backward(const Vec& pre, const Vec& dy);

Vec softmax(const Vec& logits);
double log_sum_exp(const Vec& logits);
// Gradient w.r.t. logits given gradient w.r.t. softmax output p.
Vec softmax_backward(const Vec& p, const Vec& dp);

// Lowest index among maximal entries.
int argmax(const Vec& v);

// Mean cross-entropy helper: -log softmax(logits)[label], and its logit gradient.
double cross_entropy(const Vec& logits, int label, Vec* dlogits = nullptr);

enum class ParamGroup { ntm, embedding, task1, task2, time2, baseline };

struct TensorView {
    std::string name;
    ParamGroup group;
    std::span<double> data;
};

template <class Derived>
std::span<double> view_of(Eigen::PlainObjectBase<Derived>& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

inline void append_dense(std::vector<TensorView>& out, const std::string& name, ParamGroup group,
                         Dense& d) {
    out.push_back({name + ".weight", group, view_of(d.weight)});
    out.push_back({name + ".bias", group, view_of(d.bias)});
}

bool all_finite(const std::vector<TensorView>& tensors);

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with a per-tensor step counter so
// that groups can be frozen or trained independently.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // params and grads must be structurally identical tensor lists.
    void step(std::vector<TensorView>& params, const std::vector<TensorView>& grads,
              const std::vector<ParamGroup>& active);

private:
    struct Moments {
        std::vector<double> m, v;
        long t = 0;
    };
    double lr_, beta1_, beta2_, eps_;
    std::vector<Moments> state_;
};

}  // namespace vibe::nn
