#pragma once

#include <span>
#include <vector>

#include "lcdr/dataio.hpp"
#include "lcdr/numkernel.hpp"
#include "lcdr/rng.hpp"

namespace lcdr {

// Constrained VAE branch: posterior q(Z_lc|A), standard-normal prior,
// Bernoulli decoder, and an L2 pull toward a companion latent sample.
struct LcvaeModel {
  MlpParams encoder_net;  // A -> (mean || log_var)
  MlpParams decoder_net;  // Z_lc -> per-item probabilities (sigmoid output)
  std::size_t latent_dim = 0;

  std::size_t num_items() const { return decoder_net.output_dim(); }
};

LcvaeModel make_lcvae(std::size_t num_items, std::size_t latent_dim,
                      std::size_t hidden_dim, RandomStream& rng);

GaussianParams lcvae_encode(const LcvaeModel& m, const ExposureRow& a);
std::vector<double> lcvae_decode(const LcvaeModel& m, std::span<const double> z_lc);

// Euclidean distance with a 1e-12 smoothing term under the square root.
double alignment_penalty(std::span<const double> z_lc, std::span<const double> z);

// Minimization loss: -bernoulli_loglik + KL(q || N(0,I)) + lambda *
// alignment_penalty(sample, z_companion). The companion latent is a
// constant here (no gradient flows to its producer). lambda == 0 skips the
// penalty entirely, reducing bit-for-bit to a plain VAE loss; z_companion
// may then be empty. lambda < 0 throws ConfigError.
double lcvae_loss(const LcvaeModel& m, const ExposureRow& a,
                  std::span<const double> z_companion, double lambda,
                  std::span<const double> noise);

struct LcvaeGrads {
  MlpGrads encoder;
  MlpGrads decoder;

  explicit LcvaeGrads(const LcvaeModel& m)
      : encoder(m.encoder_net), decoder(m.decoder_net) {}
  void zero();
  void scale(double s);
};

// Additive pieces of the loss: loss = -recon + kl + lambda * align.
struct LcvaeLossParts {
  double recon = 0.0;  // bernoulli log-likelihood
  double kl = 0.0;
  double align = 0.0;  // unscaled penalty; 0 when lambda == 0
};

// Loss plus parameter gradients; writes the reparameterized sample to
// *z_lc_out and the loss decomposition to *parts when non-null.
double lcvae_loss_backward(const LcvaeModel& m, const ExposureRow& a,
                           std::span<const double> z_companion, double lambda,
                           std::span<const double> noise, LcvaeGrads& grads,
                           std::vector<double>* z_lc_out = nullptr,
                           LcvaeLossParts* parts = nullptr);

}  // namespace lcdr
