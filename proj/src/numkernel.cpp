#include "lcdr/numkernel.hpp"

#include <cmath>
#include <cstddef>

#include "lcdr/errors.hpp"

namespace lcdr {

namespace {

double apply_act(Activation act, double x) {
  switch (act) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Identity: return x;
  }
  return x;
}

// Derivative expressed through the post-activation value y.
double act_deriv_from_output(Activation act, double y) {
  switch (act) {
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.data.size() + l.bias.size();
  return n;
}

void MlpParams::flatten_into(std::span<double> out) const {
  std::size_t k = 0;
  for (const auto& l : layers) {
    for (double w : l.weight.data) out[k++] = w;
    for (double b : l.bias) out[k++] = b;
  }
}

void MlpParams::unflatten_from(std::span<const double> in) {
  std::size_t k = 0;
  for (auto& l : layers) {
    for (double& w : l.weight.data) w = in[k++];
    for (double& b : l.bias) b = in[k++];
  }
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> v(param_count());
  flatten_into(v);
  return v;
}

MlpGrads::MlpGrads(const MlpParams& shape) {
  layers.reserve(shape.layers.size());
  for (const auto& l : shape.layers) {
    LayerGrads g;
    g.weight = DenseMatrix(l.weight.rows, l.weight.cols);
    g.bias.assign(l.bias.size(), 0.0);
    layers.push_back(std::move(g));
  }
}

void MlpGrads::zero() {
  for (auto& l : layers) {
    std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void MlpGrads::scale(double s) {
  for (auto& l : layers) {
    for (double& w : l.weight.data) w *= s;
    for (double& b : l.bias) b *= s;
  }
}

MlpParams make_mlp(std::size_t in, std::size_t hidden, std::size_t out,
                   Activation out_act, RandomStream& rng) {
  MlpParams p;
  auto init_layer = [&](std::size_t rows, std::size_t cols, Activation act) {
    MlpLayer l;
    l.weight = DenseMatrix(rows, cols);
    double sd = std::sqrt(2.0 / static_cast<double>(rows + cols));
    for (double& w : l.weight.data) w = sd * rng.normal();
    l.bias.assign(rows, 0.0);
    l.act = act;
    return l;
  };
  if (hidden == 0) {
    p.layers.push_back(init_layer(out, in, out_act));
  } else {
    p.layers.push_back(init_layer(hidden, in, Activation::Tanh));
    p.layers.push_back(init_layer(out, hidden, out_act));
  }
  return p;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> input) {
  MlpCache cache;
  return mlp_forward_cached(params, input, cache);
}

std::vector<double> mlp_forward_cached(const MlpParams& params,
                                       std::span<const double> input, MlpCache& cache) {
  if (params.layers.empty()) throw ConfigError("mlp_forward: empty network");
  if (input.size() != params.input_dim())
    throw ConfigError("mlp_forward: input length " + std::to_string(input.size()) +
                      " does not match first layer width " +
                      std::to_string(params.input_dim()));
  cache.inputs.assign(params.layers.size(), {});
  cache.outputs.assign(params.layers.size(), {});
  std::vector<double> x(input.begin(), input.end());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const MlpLayer& l = params.layers[li];
    if (x.size() != l.weight.cols)
      throw ConfigError("mlp_forward: layer " + std::to_string(li) + " expects " +
                        std::to_string(l.weight.cols) + " inputs, got " +
                        std::to_string(x.size()));
    cache.inputs[li] = x;
    std::vector<double> y(l.weight.rows);
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      double acc = l.bias[r];
      const double* wrow = &l.weight.data[r * l.weight.cols];
      for (std::size_t c = 0; c < l.weight.cols; ++c) acc += wrow[c] * x[c];
      y[r] = apply_act(l.act, acc);
    }
    cache.outputs[li] = y;
    x = std::move(y);
  }
  return x;
}

std::vector<double> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                 std::span<const double> d_output, MlpGrads& grads) {
  std::vector<double> d_y(d_output.begin(), d_output.end());
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const MlpLayer& l = params.layers[li];
    const auto& x = cache.inputs[li];
    const auto& y = cache.outputs[li];
    // d pre-activation
    std::vector<double> d_u(l.weight.rows);
    for (std::size_t r = 0; r < l.weight.rows; ++r)
      d_u[r] = d_y[r] * act_deriv_from_output(l.act, y[r]);
    auto& g = grads.layers[li];
    std::vector<double> d_x(l.weight.cols, 0.0);
    for (std::size_t r = 0; r < l.weight.rows; ++r) {
      const double du = d_u[r];
      g.bias[r] += du;
      double* grow = &g.weight.data[r * l.weight.cols];
      const double* wrow = &l.weight.data[r * l.weight.cols];
      for (std::size_t c = 0; c < l.weight.cols; ++c) {
        grow[c] += du * x[c];
        d_x[c] += du * wrow[c];
      }
    }
    d_y = std::move(d_x);
  }
  return d_y;
}

GaussianParams split_gaussian(std::span<const double> net_output,
                              std::vector<double>* raw_log_var) {
  if (net_output.size() % 2 != 0)
    throw ConfigError("split_gaussian: output length must be even");
  std::size_t k = net_output.size() / 2;
  GaussianParams g;
  g.mean.assign(net_output.begin(), net_output.begin() + k);
  g.log_var.resize(k);
  if (raw_log_var) raw_log_var->assign(net_output.begin() + k, net_output.end());
  for (std::size_t i = 0; i < k; ++i) {
    double lv = net_output[k + i];
    if (lv < -kLogVarClamp) lv = -kLogVarClamp;
    if (lv > kLogVarClamp) lv = kLogVarClamp;
    g.log_var[i] = lv;
  }
  return g;
}

double gaussian_kl(const GaussianParams& q, const GaussianParams& p) {
  if (q.dim() != p.dim()) throw ConfigError("gaussian_kl: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double dm = q.mean[i] - p.mean[i];
    kl += 0.5 * (p.log_var[i] - q.log_var[i]) +
          (std::exp(q.log_var[i]) + dm * dm) * 0.5 * std::exp(-p.log_var[i]) - 0.5;
  }
  if (!std::isfinite(kl)) throw NumericalError("gaussian_kl: non-finite result");
  return kl;
}

void gaussian_kl_backward(const GaussianParams& q, const GaussianParams& p,
                          double upstream,
                          std::span<double> d_q_mean, std::span<double> d_q_log_var,
                          std::span<double> d_p_mean, std::span<double> d_p_log_var) {
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double dm = q.mean[i] - p.mean[i];
    const double inv_vp = std::exp(-p.log_var[i]);
    d_q_mean[i] += upstream * dm * inv_vp;
    d_p_mean[i] -= upstream * dm * inv_vp;
    d_q_log_var[i] += upstream * 0.5 * (std::exp(q.log_var[i] - p.log_var[i]) - 1.0);
    d_p_log_var[i] +=
        upstream * 0.5 * (1.0 - (std::exp(q.log_var[i]) + dm * dm) * inv_vp);
  }
}

double bernoulli_loglik(std::span<const double> a, std::span<const double> mu) {
  if (a.size() != mu.size()) throw ConfigError("bernoulli_loglik: length mismatch");
  double ll = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    ll += a[i] * std::log(mu[i]) + (1.0 - a[i]) * std::log(1.0 - mu[i]);
  return ll;
}

void bernoulli_loglik_backward(std::span<const double> a, std::span<const double> mu,
                               double upstream, std::span<double> d_mu) {
  for (std::size_t i = 0; i < a.size(); ++i)
    d_mu[i] += upstream * (a[i] / mu[i] - (1.0 - a[i]) / (1.0 - mu[i]));
}

std::vector<double> reparam_sample(const GaussianParams& g, std::span<const double> noise) {
  if (noise.size() != g.dim()) throw ConfigError("reparam_sample: dimension mismatch");
  std::vector<double> z(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i)
    z[i] = g.mean[i] + std::exp(0.5 * g.log_var[i]) * noise[i];
  return z;
}

void reparam_backward(const GaussianParams& g, std::span<const double> noise,
                      std::span<const double> d_z,
                      std::span<double> d_mean, std::span<double> d_log_var) {
  for (std::size_t i = 0; i < g.dim(); ++i) {
    d_mean[i] += d_z[i];
    d_log_var[i] += d_z[i] * 0.5 * std::exp(0.5 * g.log_var[i]) * noise[i];
  }
}

void clip_probs(std::vector<double>& p, std::vector<double>* mask) {
  if (mask) mask->assign(p.size(), 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < kProbEps) {
      p[i] = kProbEps;
      if (mask) (*mask)[i] = 0.0;
    } else if (p[i] > 1.0 - kProbEps) {
      p[i] = 1.0 - kProbEps;
      if (mask) (*mask)[i] = 0.0;
    }
  }
}

void AdamState::begin_step() {
  ++step_count;
  bc1_ = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  bc2_ = 1.0 - std::pow(beta2, static_cast<double>(step_count));
}

void AdamState::update_one(std::size_t idx, double& param, double grad) {
  param *= 1.0 - lr * weight_decay;
  double& m = first_moment[idx];
  double& v = second_moment[idx];
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double m_hat = m / bc1_;
  const double v_hat = v / bc2_;
  param -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.size())
    throw ConfigError("adam_step: shape mismatch");
  state.begin_step();
  for (std::size_t i = 0; i < params.size(); ++i)
    state.update_one(i, params[i], grads[i]);
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state) {
  state.begin_step();
  std::size_t idx = 0;
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& l = params.layers[li];
    const auto& g = grads.layers[li];
    for (std::size_t i = 0; i < l.weight.data.size(); ++i)
      state.update_one(idx++, l.weight.data[i], g.weight.data[i]);
    for (std::size_t i = 0; i < l.bias.size(); ++i)
      state.update_one(idx++, l.bias[i], g.bias[i]);
  }
}

std::vector<double> finite_diff_grad(
    const std::function<double(const std::vector<double>&)>& loss_fn,
    const std::vector<double>& params, double eps) {
  std::vector<double> grad(params.size());
  std::vector<double> x = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double up = loss_fn(x);
    x[i] = orig - eps;
    const double down = loss_fn(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace lcdr
