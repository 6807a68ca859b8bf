#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcdr/dataio.hpp"

namespace lcdr {

// Number of categorical classes behind each true latent factor; the proxy
// one-hot block for a factor has this width.
inline constexpr int kSynthClasses = 8;

// Class-conditional latent mean: classes sit two standard deviations apart
// (the latent noise is unit variance), centred on zero.
inline double synth_class_mean(int cls) { return 2.0 * (static_cast<double>(cls) - 3.5); }

struct SynthConfig {
  int num_users = 1000;
  int num_items = 200;
  int latent_dim_true = 2;
  double proxy_noise = 0.0;        // rho: per-factor probability of class resampling
  double exposure_sparsity = 0.05; // target density of the confounded exposure matrix
  int unbiased_per_user = 10;      // uniform-random exposures per user
  int pref_dim = 4;                // width of the taste vectors in the feedback model
  double exposure_scale = 1.0;     // scale of the latent -> exposure interaction
  double exposure_skew = 1.0;      // per-dimension decay of the exposure loadings (1 = isotropic)
  double item_effect_scale = 0.5;  // per-item exposure offset spread
  double feedback_scale = 1.0;     // scale of the taste interaction in feedback
  double confound_scale = 0.3;     // scale of the latent's direct effect on feedback
  double feedback_bias = 0.0;
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<std::vector<double>> z_true;      // one row per user
  std::vector<std::vector<double>> w_clean;     // concatenated one-hot blocks
  std::vector<std::vector<double>> w_observed;  // corrupted proxy actually emitted
  std::vector<std::vector<int>> class_clean;    // class index per (user, factor)
  std::vector<std::vector<int>> class_observed;
};

struct SynthResult {
  InteractionDataset dataset;  // biased records tagged Train, unbiased tagged Test
  GroundTruth truth;
  double exposure_intercept = 0.0;  // calibrated offset hitting the sparsity target
};

// Draws users with categorical confounder classes, latent factors from the
// class-conditional Gaussians, exposures from a sigmoid model of the latent
// (intercept calibrated by bisection to the sparsity target), labels from a
// taste-plus-confounder sigmoid model, and a uniform-random unbiased slate
// per user. The dataset's proxies are the corrupted one-hot rows.
// Unachievable sparsity targets throw NumericalError.
SynthResult generate(const SynthConfig& cfg);

// Mean R-squared, over true dimensions, of the least-squares affine fit
// from z_recovered to z_true; 1.0 means the recovered representation spans
// the truth up to an invertible affine map. Rank-deficient recovered
// matrices fall back to a pseudo-inverse and append a warning.
double alignment_score(const std::vector<std::vector<double>>& z_recovered,
                       const std::vector<std::vector<double>>& z_true,
                       std::vector<std::string>* warnings = nullptr);

// Max over factors of |corr| between the observed proxy's class-mean
// encoding and the true latent factor. Near zero when proxies are fully
// resampled; large when they are clean.
double proxy_confounder_correlation(const GroundTruth& gt);

// TSV "user<TAB>z1,z2,..." with full round-trip precision.
void write_ground_truth(const std::string& path,
                        const std::vector<std::vector<double>>& z_rows);
std::vector<std::vector<double>> read_ground_truth(const std::string& path);

}  // namespace lcdr
