#include "lcdr/ivae.hpp"

#include <cmath>

#include "lcdr/errors.hpp"

namespace lcdr {

namespace {

std::vector<double> concat_aw(const ExposureRow& a, const ProxyRow& w) {
  std::vector<double> x;
  x.reserve(a.a.size() + w.w.size());
  x.insert(x.end(), a.a.begin(), a.a.end());
  x.insert(x.end(), w.w.begin(), w.w.end());
  return x;
}

// Zeros gradient entries where the log-variance clamp was active.
void mask_clamped(const std::vector<double>& raw, std::span<double> d_log_var) {
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (raw[i] < -kLogVarClamp || raw[i] > kLogVarClamp) d_log_var[i] = 0.0;
}

}  // namespace

IvaeModel make_ivae(std::size_t num_items, std::size_t proxy_dim, std::size_t latent_dim,
                    std::size_t hidden_dim, RandomStream& rng) {
  if (latent_dim == 0) throw ConfigError("make_ivae: latent_dim must be >= 1");
  IvaeModel m;
  m.latent_dim = latent_dim;
  m.prior_net = make_mlp(proxy_dim, hidden_dim, 2 * latent_dim, Activation::Identity, rng);
  m.encoder_net =
      make_mlp(num_items + proxy_dim, hidden_dim, 2 * latent_dim, Activation::Identity, rng);
  m.decoder_net = make_mlp(latent_dim, hidden_dim, num_items, Activation::Sigmoid, rng);
  return m;
}

GaussianParams ivae_prior(const IvaeModel& m, const ProxyRow& w) {
  return split_gaussian(mlp_forward(m.prior_net, w.w));
}

GaussianParams ivae_encode(const IvaeModel& m, const ExposureRow& a, const ProxyRow& w) {
  return split_gaussian(mlp_forward(m.encoder_net, concat_aw(a, w)));
}

std::vector<double> ivae_decode(const IvaeModel& m, std::span<const double> z) {
  if (z.size() != m.latent_dim) throw ConfigError("ivae_decode: latent size mismatch");
  auto probs = mlp_forward(m.decoder_net, z);
  clip_probs(probs);
  return probs;
}

double ivae_elbo(const IvaeModel& m, const ExposureRow& a, const ProxyRow& w,
                 std::span<const double> noise) {
  GaussianParams prior = ivae_prior(m, w);
  GaussianParams q = ivae_encode(m, a, w);
  auto z = reparam_sample(q, noise);
  auto probs = ivae_decode(m, z);
  return bernoulli_loglik(a.a, probs) - gaussian_kl(q, prior);
}

void IvaeGrads::zero() {
  prior.zero();
  encoder.zero();
  decoder.zero();
}

void IvaeGrads::scale(double s) {
  prior.scale(s);
  encoder.scale(s);
  decoder.scale(s);
}

double ivae_loss_backward(const IvaeModel& m, const ExposureRow& a, const ProxyRow& w,
                          std::span<const double> noise, IvaeGrads& grads,
                          std::vector<double>* z_out) {
  const std::size_t k = m.latent_dim;

  MlpCache prior_cache, enc_cache, dec_cache;
  auto prior_out = mlp_forward_cached(m.prior_net, w.w, prior_cache);
  std::vector<double> prior_raw_lv;
  GaussianParams prior = split_gaussian(prior_out, &prior_raw_lv);

  auto enc_in = concat_aw(a, w);
  auto enc_out = mlp_forward_cached(m.encoder_net, enc_in, enc_cache);
  std::vector<double> q_raw_lv;
  GaussianParams q = split_gaussian(enc_out, &q_raw_lv);

  auto z = reparam_sample(q, noise);
  auto probs = mlp_forward_cached(m.decoder_net, z, dec_cache);
  std::vector<double> clip_mask;
  clip_probs(probs, &clip_mask);

  const double loss = gaussian_kl(q, prior) - bernoulli_loglik(a.a, probs);

  // Reconstruction term: loss holds -loglik, so upstream is -1.
  std::vector<double> d_probs(probs.size(), 0.0);
  bernoulli_loglik_backward(a.a, probs, -1.0, d_probs);
  for (std::size_t i = 0; i < d_probs.size(); ++i) d_probs[i] *= clip_mask[i];
  auto d_z = mlp_backward(m.decoder_net, dec_cache, d_probs, grads.decoder);

  std::vector<double> d_q_mean(k, 0.0), d_q_lv(k, 0.0), d_p_mean(k, 0.0), d_p_lv(k, 0.0);
  reparam_backward(q, noise, d_z, d_q_mean, d_q_lv);
  gaussian_kl_backward(q, prior, 1.0, d_q_mean, d_q_lv, d_p_mean, d_p_lv);
  mask_clamped(q_raw_lv, d_q_lv);
  mask_clamped(prior_raw_lv, d_p_lv);

  std::vector<double> d_enc_out(2 * k);
  std::copy(d_q_mean.begin(), d_q_mean.end(), d_enc_out.begin());
  std::copy(d_q_lv.begin(), d_q_lv.end(), d_enc_out.begin() + k);
  mlp_backward(m.encoder_net, enc_cache, d_enc_out, grads.encoder);

  std::vector<double> d_prior_out(2 * k);
  std::copy(d_p_mean.begin(), d_p_mean.end(), d_prior_out.begin());
  std::copy(d_p_lv.begin(), d_p_lv.end(), d_prior_out.begin() + k);
  mlp_backward(m.prior_net, prior_cache, d_prior_out, grads.prior);

  if (z_out) *z_out = std::move(z);
  return loss;
}

}  // namespace lcdr
