#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcdr/dataio.hpp"
#include "lcdr/lcvae.hpp"
#include "lcdr/metrics.hpp"
#include "lcdr/numkernel.hpp"
#include "lcdr/trainer.hpp"

namespace lcdr {

// Matrix-factorization block of the score.
struct MfParams {
  DenseMatrix P;  // num_users x d_mf
  DenseMatrix Q;  // num_items x d_mf
  std::vector<double> b_u;
  std::vector<double> b_i;
  double global_bias = 0.0;

  std::size_t d_mf() const { return P.cols; }
  std::size_t num_users() const { return P.rows; }
  std::size_t num_items() const { return Q.rows; }
};

// Latent-feature interaction block: adds (H * feature)^T Qc_i to the score.
struct ConfounderHead {
  DenseMatrix H;   // d_mf x feature_dim
  DenseMatrix Qc;  // num_items x d_mf

  std::size_t feature_dim() const { return H.cols; }
};

// P_u . Q_i + b_u + b_i + global_bias. Out-of-range ids throw ConfigError.
double mf_score(const MfParams& p, int u, int i);

// mf_score plus the feature interaction term (H * feature)^T Qc_i.
double lcdr_score(const MfParams& p, const ConfounderHead& head, int u, int i,
                  std::span<const double> feature);

// Gradient accumulators shaped like the score parameters.
struct RecGrads {
  MfParams mf;
  ConfounderHead head;  // unused when the model has no head

  RecGrads(const MfParams& p, const ConfounderHead* h);
  void zero();
  void scale(double s);
};

// Accumulates d(score)/d(params) scaled by `upstream` into `grads`.
// `head`/`feature` may be null for the MF-only score.
void score_backward(const MfParams& p, const ConfounderHead* head, int u, int i,
                    std::span<const double> feature, double upstream, RecGrads& grads);

struct RecConfig {
  std::size_t d_mf = 32;
  double lr = 1e-3;
  double weight_decay = 1e-6;
  int epochs = 200;
  int batch_size = 256;
  int patience = 10;
  int k = 5;  // validation ranking cutoff
  std::uint64_t seed = 0;
  bool freeze_head = false;  // keep the head at its all-zero initialization
};

struct RecEpochStats {
  int epoch = 0;
  double bce = 0.0;       // mean training loss
  double val_ndcg = -1.0; // -1 when no validation split exists
  double wall_ms = 0.0;

  std::string to_json() const;
};

struct RecResult {
  MfParams mf;
  ConfounderHead head;
  bool has_head = false;
  std::vector<std::vector<double>> features;  // copy of the per-user feature table
  std::vector<RecEpochStats> log;
  double best_val_ndcg = -1.0;
  int epochs_run = 0;
  bool early_stopped = false;

  double score(int u, int i) const;
  ScoreFn score_fn() const;
};

// Minimizes binary cross-entropy between sigmoid(score) and the binarized
// labels over the train split. `features` is the per-user feature table
// (one row per user) powering the interaction head; empty disables the
// head. Early-stops on validation NDCG@k with `patience` and restores the
// best parameters; datasets without a val split run all epochs. With
// freeze_head the head stays all-zero: the run reproduces the MF-only
// trajectory bit for bit under the same seed.
RecResult train_recommender(const InteractionDataset& ds,
                            const std::vector<std::vector<double>>& features,
                            const RecConfig& cfg);

// Monte-Carlo estimate of the feedback probability under an intervened
// exposure bit: a_u[i] := a_value, z ~ q(Z_lc | a_u), average of
// sigmoid(score with z substituted). Exact (sample-independent) when the
// integrand is constant.
double estimate_potential_outcome(const LcvaeModel& lcvae, const MfParams& mf,
                                  const ConfounderHead* head, ExposureRow a_u, int u, int i,
                                  double a_value, int num_samples, std::uint64_t seed);

// Baseline assembly: which feature table feeds the interaction head.
//   Mf            — no head.
//   MfWf          — raw proxy features.
//   VaeIvaeConcat — plain-VAE means concatenated with companion means,
//                   both from a lambda-zero stage one (`ablation_reps`).
//   LcdrWoLc      — constrained means from the lambda-zero stage one.
//   Lcdr          — constrained means from the full stage one (`lcdr_reps`).
enum class VariantKind { Mf, MfWf, VaeIvaeConcat, LcdrWoLc, Lcdr };

const char* to_string(VariantKind k);

// Missing required artifacts throw ConfigError.
RecResult train_variant(VariantKind kind, const InteractionDataset& ds,
                        const RepresentationTable* lcdr_reps,
                        const RepresentationTable* ablation_reps, const RecConfig& cfg);

// TSV rows "user<TAB>item<TAB>score" for every record in the split.
void export_scores(const std::string& path, const RecResult& model,
                   const InteractionDataset& ds, SplitTag split);

}  // namespace lcdr
