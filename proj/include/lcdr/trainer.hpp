#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcdr/dataio.hpp"
#include "lcdr/ivae.hpp"
#include "lcdr/lcvae.hpp"

namespace lcdr {

struct TrainConfig {
  std::size_t latent_dim = 4;
  std::size_t hidden_dim = 64;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  double lambda = 0.9;
  int epochs = 200;
  int batch_size = 256;
  int patience = 10;
  std::uint64_t seed = 0;
  std::string val_metric = "ndcg@5";
};

// Per-user latent features extracted after stage one.
struct RepresentationTable {
  std::vector<std::vector<double>> z_lc;  // constrained posterior means, one row per user
  std::vector<std::vector<double>> z;     // companion posterior means; empty when unused
};

struct EpochStats {
  int epoch = 0;
  double ivae_loss = 0.0;   // mean negative ELBO per user
  double lcvae_loss = 0.0;  // mean constrained loss per user
  double recon = 0.0;       // mean reconstruction log-likelihood (constrained branch)
  double kl = 0.0;          // mean KL (constrained branch)
  double align = 0.0;       // mean unscaled alignment penalty
  double wall_ms = 0.0;

  std::string to_json() const;  // one log line
};

// Which branches run during stage one. Joint trains both with the
// alignment pull; PlainVae trains only the constrained branch with the
// penalty forced off (a standard VAE); IvaeOnly trains only the companion
// branch. Stream separation makes a Joint run with lambda == 0 produce the
// constrained branch of PlainVae bit for bit, and the companion branch of
// IvaeOnly bit for bit.
enum class StageOneMode { Joint, PlainVae, IvaeOnly };

struct StageOneResult {
  IvaeModel ivae;    // untouched initialization in PlainVae mode
  LcvaeModel lcvae;  // untouched initialization in IvaeOnly mode
  RepresentationTable reps;
  std::vector<EpochStats> log;
  int epochs_run = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Stage one: joint mini-batch training of both branches over user
// exposure rows, Adam updates per network, convergence when the combined
// epoch loss improves by less than 1e-4 relative for `patience`
// consecutive epochs. Deterministic given config.seed.
StageOneResult train_representations(const InteractionDataset& ds, const TrainConfig& cfg,
                                     StageOneMode mode = StageOneMode::Joint);

// Posterior means per user: z_lc from the constrained encoder, plus the
// companion branch's means when `ivae` is non-null.
RepresentationTable extract_zlc(const LcvaeModel& lcvae, const IvaeModel* ivae,
                                const InteractionDataset& ds);

}  // namespace lcdr
