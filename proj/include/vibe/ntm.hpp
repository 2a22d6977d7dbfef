#pragma once

#include <vector>

#include "vibe/common.hpp"
#include "vibe/corpus.hpp"
#include "vibe/nn.hpp"

namespace vibe::ntm {

using nn::Vec;

inline constexpr double kLogStdMin = -8.0;
inline constexpr double kLogStdMax = 8.0;
inline constexpr double kLogEps = 1e-10;
inline constexpr int kDefaultTopics = 128;
inline constexpr int kDefaultHidden = 2048;

// Diagonal Gaussian parameterized by mean and log standard deviation.
struct LatentGaussian {
    Vec mean;
    Vec log_std;

    int dim() const { return static_cast<int>(mean.size()); }
    static LatentGaussian standard(int dim) { return {Vec::Zero(dim), Vec::Zero(dim)}; }
};

enum class Side { past, future };

// BoW -> ReLU hidden layer -> (mean, clamped log-std).
struct GaussianEncoder {
    nn::Dense hidden;
    nn::Dense mean;
    nn::Dense log_std;

    GaussianEncoder() = default;
    GaussianEncoder(int in, int hidden_width, int topics)
        : hidden(in, hidden_width), mean(hidden_width, topics), log_std(hidden_width, topics) {}

    struct Trace {
        Vec pre;
        Vec act;
        Vec log_std_raw;
        LatentGaussian out;
    };

    Trace forward(const nn::SparseInput& x) const;
    void backward(const nn::SparseInput& x, const Trace& trace, const Vec& dmean,
                  const Vec& dlog_std, GaussianEncoder& grad) const;

    void append_tensors(std::vector<nn::TensorView>& out, const std::string& name,
                        nn::ParamGroup group);
};

// Three posterior encoders (past, future, shared-from-pair), two single-view
// approximators of the shared posterior, and two decoders over [z_var; z_s].
struct VibeModel {
    int vocab = 0;
    int topics = 0;
    int hidden = 0;
    GaussianEncoder enc_x;
    GaussianEncoder enc_y;
    GaussianEncoder enc_s;
    GaussianEncoder approx_x;
    GaussianEncoder approx_y;
    nn::Dense dec_x;
    nn::Dense dec_y;

    VibeModel() = default;
    VibeModel(int V, int K, int hidden_width);

    // Declared order: enc_x, enc_y, enc_s, approx_x, approx_y, dec_x, dec_y.
    void append_tensors(std::vector<nn::TensorView>& out);
};

nn::SparseInput as_input(const corpus::BowVector& bow, int offset = 0);

LatentGaussian encode_past(const corpus::BowVector& bow_x, const VibeModel& model);
LatentGaussian encode_shared(const corpus::BowVector& bow_x, const corpus::BowVector& bow_y,
                             const VibeModel& model);
LatentGaussian encode_future(const corpus::BowVector& bow_y, const VibeModel& model);
// r^x for the past side, r^y for the future side.
LatentGaussian approx_shared(const corpus::BowVector& bow, Side side, const VibeModel& model);

Vec reparameterize(const LatentGaussian& g, const Vec& noise);

// softmax(W [softmax(z_variant); softmax(z_shared)] + b).
Vec decode(const Vec& z_variant, const Vec& z_shared, Side side, const VibeModel& model);

// sum_w count_w * ln(p_w + 1e-10)
double bow_log_likelihood(const corpus::BowVector& bow, const Vec& probs);

double kl_diag_gaussian(const LatentGaussian& q, const LatentGaussian& p);

struct KlGradient {
    Vec q_mean, q_log_std, p_mean, p_log_std;
};
KlGradient kl_diag_gaussian_grad(const LatentGaussian& q, const LatentGaussian& p);

struct LossBreakdown {
    double recon_x = 0, recon_y = 0;
    double kl_x = 0, kl_y = 0, kl_s_prior = 0;
    double kl_s_rx = 0, kl_s_ry = 0;
    double elbo = 0;
    double objective = 0;
    double lambda = 0;
    double mu = 0;

    // Fills elbo and objective from the component terms.
    void assemble();
    double ntm_loss() const { return -objective; }
};

// Averages component terms, then assembles (so lambda = 0 gives objective == elbo exactly).
LossBreakdown mean_breakdown(const std::vector<LossBreakdown>& parts, double lambda);

struct PairBows {
    const corpus::BowVector& x;
    const corpus::BowVector& y;
};

// Standard-normal noise for each latent; one vector per draw.
struct NoiseDraws {
    std::vector<Vec> x, s, y;

    std::size_t draws() const { return s.size(); }
    static NoiseDraws sample(int topics, int draws, Rng& rng);
    static NoiseDraws zeros(int topics, int draws = 1);
};

// Retained forward values for one pair.
struct PairPass {
    nn::SparseInput in_x, in_y, in_xy;
    GaussianEncoder::Trace qx, qy, qs, rx, ry;
    struct Draw {
        Vec eps_x, eps_s, eps_y;
        Vec theta_x, theta_s, theta_y;
        Vec dec_in_x, dec_in_y;
        Vec probs_x, probs_y;
        double recon_x = 0, recon_y = 0;
    };
    std::vector<Draw> draws;
    LossBreakdown terms;  // lambda not applied yet
};

PairPass forward_pair(const PairBows& pair, const VibeModel& model, const NoiseDraws& noise);

LossBreakdown elbo_pair(const PairBows& pair, const VibeModel& model, const NoiseDraws& noise);

// (1+l)*elbo + l*KL[q(zs|x,y)||p(zs)] - l*(KL[q(zs|x,y)||r^y] + KL[q(zs|x,y)||r^x])
LossBreakdown vibe_objective(const PairBows& pair, const VibeModel& model, double lambda,
                             const NoiseDraws& noise);

// Accumulates scale * d(-objective)/d(params) into grad. extra_rx_mean, when
// given, is an upstream gradient on the mean of r^x (from the classifier).
void backward_pair(const PairPass& pass, const VibeModel& model, double lambda, double scale,
                   VibeModel& grad, const Vec* extra_rx_mean = nullptr);

LossBreakdown backward(const PairBows& pair, const VibeModel& model, double lambda,
                       const NoiseDraws& noise, VibeModel& grad, double scale = 1.0);

// Discrete joint p(x, y, z) stored x-major.
struct JointTable {
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> p;

    double at(int x, int y, int z) const {
        return p[static_cast<std::size_t>((x * ny + y) * nz + z)];
    }
};

struct InteractionForms {
    double via_x;  // I(X;Z) - I(X;Z|Y)
    double via_y;  // I(Y;Z) - I(Y;Z|X)
};

// Both forms by exact enumeration, in bits.
InteractionForms interaction_information_forms(const JointTable& joint);
// Common value of the two forms; throws if they disagree beyond 1e-12.
double interaction_information_discrete(const JointTable& joint);

}  // namespace vibe::ntm
