#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lcdr/rng.hpp"

namespace lcdr {

// Decoder probabilities are clipped to [kProbEps, 1-kProbEps] before any
// log; the Bernoulli log-likelihood diverges at {0,1}.
inline constexpr double kProbEps = 1e-7;

// Log-variances are clamped to [-kLogVarClamp, kLogVarClamp] to keep
// exp() tame under aggressive optimization.
inline constexpr double kLogVarClamp = 10.0;

// Smoothing added under the square root of the L2 alignment penalty so it
// stays differentiable at zero.
inline constexpr double kNormEps = 1e-12;

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class Activation { Tanh, Sigmoid, Identity };

struct MlpLayer {
  DenseMatrix weight;         // out x in
  std::vector<double> bias;   // out
  Activation act = Activation::Identity;
};

// A small feed-forward net. Layers are applied in order; consecutive
// dimensions must be compatible.
struct MlpParams {
  std::vector<MlpLayer> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows; }
  std::size_t param_count() const;

  // Flat layout: per layer, weight row-major then bias.
  void flatten_into(std::span<double> out) const;
  void unflatten_from(std::span<const double> in);
  std::vector<double> flatten() const;
};

// Gradient accumulator with the same shapes as an MlpParams.
struct MlpGrads {
  struct LayerGrads {
    DenseMatrix weight;
    std::vector<double> bias;
  };
  std::vector<LayerGrads> layers;

  explicit MlpGrads(const MlpParams& shape);
  MlpGrads() = default;
  void zero();
  void scale(double s);
};

// One hidden layer of `hidden` units (tanh) unless hidden == 0, in which
// case a single affine layer. Weights ~ N(0, 2/(fan_in+fan_out)), biases 0.
MlpParams make_mlp(std::size_t in, std::size_t hidden, std::size_t out,
                   Activation out_act, RandomStream& rng);

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input);

// Forward pass retaining per-layer inputs and post-activation outputs for
// the backward pass.
struct MlpCache {
  std::vector<std::vector<double>> inputs;   // input to each layer
  std::vector<std::vector<double>> outputs;  // post-activation output of each layer
};
std::vector<double> mlp_forward_cached(const MlpParams& params,
                                       std::span<const double> input, MlpCache& cache);

// Accumulates dL/dparams into `grads` and returns dL/dinput.
std::vector<double> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                 std::span<const double> d_output, MlpGrads& grads);

// Diagonal Gaussian over the latent held as (mean, log variance).
struct GaussianParams {
  std::vector<double> mean;
  std::vector<double> log_var;

  std::size_t dim() const { return mean.size(); }
};

// Splits a 2k-vector (mean || log_var) into GaussianParams, clamping the
// log-variance half. Raw (pre-clamp) log-variances are written to
// `raw_log_var` when non-null so the backward pass can zero gradients at
// the clamp.
GaussianParams split_gaussian(std::span<const double> net_output,
                              std::vector<double>* raw_log_var = nullptr);

// KL(q || p) for diagonal Gaussians, summed over dimensions:
//   log(sigma_p/sigma_q) + (sigma_q^2 + (mu_q - mu_p)^2) / (2 sigma_p^2) - 1/2
double gaussian_kl(const GaussianParams& q, const GaussianParams& p);

// Gradients of gaussian_kl accumulated into the four destination vectors
// (all sized to the Gaussian dimension).
void gaussian_kl_backward(const GaussianParams& q, const GaussianParams& p,
                          double upstream,
                          std::span<double> d_q_mean, std::span<double> d_q_log_var,
                          std::span<double> d_p_mean, std::span<double> d_p_log_var);

// sum_i a_i log(mu_i) + (1 - a_i) log(1 - mu_i). Callers clip mu first.
double bernoulli_loglik(std::span<const double> a, std::span<const double> mu);

// d loglik / d mu_i accumulated into d_mu (scaled by upstream).
void bernoulli_loglik_backward(std::span<const double> a, std::span<const double> mu,
                               double upstream, std::span<double> d_mu);

// mean + exp(log_var / 2) * noise.
std::vector<double> reparam_sample(const GaussianParams& g, std::span<const double> noise);

// Given dL/dz for z = reparam_sample(g, noise), accumulate dL/dmean and
// dL/dlog_var.
void reparam_backward(const GaussianParams& g, std::span<const double> noise,
                      std::span<const double> d_z,
                      std::span<double> d_mean, std::span<double> d_log_var);

inline double clip_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

// Clips every entry; sets mask[i] = 0 where the clip was active (gradient
// is blocked there) and 1 elsewhere.
void clip_probs(std::vector<double>& p, std::vector<double>* mask = nullptr);

// Adam with decoupled weight decay: params *= (1 - lr*wd) first, then the
// bias-corrected Adam delta. step_count is incremented before correction.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  AdamState() = default;
  AdamState(std::size_t n, double lr_, double weight_decay_ = 0.0)
      : first_moment(n, 0.0), second_moment(n, 0.0), lr(lr_), weight_decay(weight_decay_) {}

  std::size_t size() const { return first_moment.size(); }

  // Increments step_count and caches the bias corrections for this step.
  void begin_step();
  // Updates one parameter in place; idx addresses this state's moments.
  void update_one(std::size_t idx, double& param, double grad);

 private:
  double bc1_ = 1.0;
  double bc2_ = 1.0;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Walks (weight, bias) of every layer in order, pairing parameters with
// their gradients; the flat index into `state` follows the same order as
// MlpParams::flatten.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state);

// Central finite differences, (f(x+eps) - f(x-eps)) / (2 eps) per
// coordinate. Verification oracle for every analytic gradient here.
std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    const std::vector<double>& params, double eps = 1e-4);

}  // namespace lcdr
