#include "lcdr/lcvae.hpp"

#include <cmath>

#include "lcdr/errors.hpp"

namespace lcdr {

namespace {

// Zeros gradient entries where the log-variance clamp was active.
void mask_clamped(const std::vector<double>& raw, std::span<double> d_log_var) {
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw[i] < -kLogVarClamp || raw[i] > kLogVarClamp) d_log_var[i] = 0.0;
}

GaussianParams standard_normal(std::size_t k) {
  GaussianParams g;
  g.mean.assign(k, 0.0);
  g.log_var.assign(k, 0.0);
  return g;
}

}  // namespace

LcvaeModel make_lcvae(std::size_t num_items, std::size_t latent_dim,
                      std::size_t hidden_dim, RandomStream& rng) {
  if (latent_dim == 0) throw ConfigError("make_lcvae: latent_dim must be >= 1");
  LcvaeModel m;
  m.latent_dim = latent_dim;
  m.encoder_net = make_mlp(num_items, hidden_dim, 2 * latent_dim, Activation::Identity, rng);
  m.decoder_net = make_mlp(latent_dim, hidden_dim, num_items, Activation::Sigmoid, rng);
  return m;
}

GaussianParams lcvae_encode(const LcvaeModel& m, const ExposureRow& a) {
  return split_gaussian(mlp_forward(m.encoder_net, a.a));
}

std::vector<double> lcvae_decode(const LcvaeModel& m, std::span<const double> z_lc) {
  if (z_lc.size() != m.latent_dim) throw ConfigError("lcvae_decode: latent size mismatch");
  auto probs = mlp_forward(m.decoder_net, z_lc);
  clip_probs(probs);
  return probs;
}

double alignment_penalty(std::span<const double> z_lc, std::span<const double> z) {
  if (z_lc.size() != z.size()) throw ConfigError("alignment_penalty: length mismatch");
  double ss = kNormEps;
  for (std::size_t i = 0; i < z_lc.size(); ++i) {
    const double d = z_lc[i] - z[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

double lcvae_loss(const LcvaeModel& m, const ExposureRow& a,
                  std::span<const double> z_companion, double lambda,
                  std::span<const double> noise) {
  if (lambda < 0.0) throw ConfigError("lcvae_loss: lambda must be non-negative");
  GaussianParams q = lcvae_encode(m, a);
  auto z_lc = reparam_sample(q, noise);
  auto probs = lcvae_decode(m, z_lc);
  double loss =
      gaussian_kl(q, standard_normal(m.latent_dim)) - bernoulli_loglik(a.a, probs);
  if (lambda != 0.0) loss += lambda * alignment_penalty(z_lc, z_companion);
  return loss;
}

void LcvaeGrads::zero() {
  encoder.zero();
  decoder.zero();
}

void LcvaeGrads::scale(double s) {
  encoder.scale(s);
  decoder.scale(s);
}

double lcvae_loss_backward(const LcvaeModel& m, const ExposureRow& a,
                           std::span<const double> z_companion, double lambda,
                           std::span<const double> noise, LcvaeGrads& grads,
                           std::vector<double>* z_lc_out, LcvaeLossParts* parts) {
  if (lambda < 0.0) throw ConfigError("lcvae_loss_backward: lambda must be non-negative");
  const std::size_t k = m.latent_dim;

  MlpCache enc_cache, dec_cache;
  auto enc_out = mlp_forward_cached(m.encoder_net, a.a, enc_cache);
  std::vector<double> q_raw_lv;
  GaussianParams q = split_gaussian(enc_out, &q_raw_lv);

  auto z_lc = reparam_sample(q, noise);
  auto probs = mlp_forward_cached(m.decoder_net, z_lc, dec_cache);
  std::vector<double> clip_mask;
  clip_probs(probs, &clip_mask);

  GaussianParams prior = standard_normal(k);
  const double recon = bernoulli_loglik(a.a, probs);
  const double kl = gaussian_kl(q, prior);
  double loss = kl - recon;
  if (parts) {
    parts->recon = recon;
    parts->kl = kl;
    parts->align = 0.0;
  }

  std::vector<double> d_probs(probs.size(), 0.0);
  bernoulli_loglik_backward(a.a, probs, -1.0, d_probs);
  for (std::size_t i = 0; i < d_probs.size(); ++i) d_probs[i] *= clip_mask[i];
  auto d_z = mlp_backward(m.decoder_net, dec_cache, d_probs, grads.decoder);

  if (lambda != 0.0) {
    const double norm = alignment_penalty(z_lc, z_companion);
    loss += lambda * norm;
    if (parts) parts->align = norm;
    for (std::size_t i = 0; i < k; ++i)
      d_z[i] += lambda * (z_lc[i] - z_companion[i]) / norm;
  }

  std::vector<double> d_q_mean(k, 0.0), d_q_lv(k, 0.0);
  reparam_backward(q, noise, d_z, d_q_mean, d_q_lv);
  // KL against the fixed N(0,I): dmean = mean, dlogvar = (exp(lv) - 1)/2.
  std::vector<double> d_p_mean(k, 0.0), d_p_lv(k, 0.0);
  gaussian_kl_backward(q, prior, 1.0, d_q_mean, d_q_lv, d_p_mean, d_p_lv);
  mask_clamped(q_raw_lv, d_q_lv);

  std::vector<double> d_enc_out(2 * k);
  std::copy(d_q_mean.begin(), d_q_mean.end(), d_enc_out.begin());
  std::copy(d_q_lv.begin(), d_q_lv.end(), d_enc_out.begin() + k);
  mlp_backward(m.encoder_net, enc_cache, d_enc_out, grads.encoder);

  if (z_lc_out) *z_lc_out = std::move(z_lc);
  return loss;
}

}  // namespace lcdr
