#pragma once

#include <span>
#include <vector>

#include "lcdr/dataio.hpp"
#include "lcdr/numkernel.hpp"
#include "lcdr/rng.hpp"

namespace lcdr {

// Conditional-prior VAE branch: prior p(Z|W), posterior q(Z|A,W), and a
// Bernoulli decoder over the exposure vector.
struct IvaeModel {
  MlpParams prior_net;    // W -> (mean || log_var)
  MlpParams encoder_net;  // concat(A, W) -> (mean || log_var)
  MlpParams decoder_net;  // Z -> per-item probabilities (sigmoid output)
  std::size_t latent_dim = 0;

  std::size_t num_items() const { return decoder_net.output_dim(); }
  std::size_t proxy_dim() const { return prior_net.input_dim(); }
};

IvaeModel make_ivae(std::size_t num_items, std::size_t proxy_dim, std::size_t latent_dim,
                    std::size_t hidden_dim, RandomStream& rng);

GaussianParams ivae_prior(const IvaeModel& m, const ProxyRow& w);
GaussianParams ivae_encode(const IvaeModel& m, const ExposureRow& a, const ProxyRow& w);

// Per-item probabilities, clipped away from {0,1}.
std::vector<double> ivae_decode(const IvaeModel& m, std::span<const double> z);

// Single-sample evidence lower bound:
//   bernoulli_loglik(a, decode(reparam(q, noise))) - KL(q || prior).
double ivae_elbo(const IvaeModel& m, const ExposureRow& a, const ProxyRow& w,
                 std::span<const double> noise);

struct IvaeGrads {
  MlpGrads prior;
  MlpGrads encoder;
  MlpGrads decoder;

  explicit IvaeGrads(const IvaeModel& m)
      : prior(m.prior_net), encoder(m.encoder_net), decoder(m.decoder_net) {}
  void zero();
  void scale(double s);
};

// Minimization loss (-ELBO) with gradients accumulated into `grads`.
// The reparameterized latent sample is written to *z_out when non-null;
// downstream consumers treat it as a constant.
double ivae_loss_backward(const IvaeModel& m, const ExposureRow& a, const ProxyRow& w,
                          std::span<const double> noise, IvaeGrads& grads,
                          std::vector<double>* z_out = nullptr);

}  // namespace lcdr
