#pragma once

#include <cstdint>
#include <string>

namespace lcdr {

// Deterministic generator for a small explicit-feedback benchmark in the
// raw Coat layout: per-user rating matrices `train.ascii` (self-selected,
// confounded exposure) and `test.ascii` (uniformly sampled items), plus
// binary `user_features.ascii` rows that proxy the exposure confounder.
//
// Each user carries a two-dimensional latent trait that drives both which
// items they rate on their own (via item propensity loadings) and how they
// rate (via item feedback loadings), so the self-selected slate is a biased
// sample of each user's preferences. The one-hot feature blocks encode
// noisy discretizations of the trait next to unrelated filler blocks.
struct CoatBenchConfig {
  int num_users = 290;
  int num_items = 300;
  int biased_per_user = 24;    // self-selected ratings per user
  int unbiased_per_user = 16;  // uniformly assigned ratings per user
  double proxy_noise = 0.1;    // per-block chance of resampling the observed category
  double trait_within_sd = 0.35;  // within-class spread of each trait dimension
  double exposure_scale = 1.7;   // trait -> propensity strength
  double nuisance_scale = 1.2;   // rating-irrelevant user factors -> propensity strength
  double popularity_scale = 0.8; // item-level propensity offset spread
  double feedback_scale = 1.0;   // taste -> rating strength
  double confound_scale = 1.4;   // trait -> rating strength
  double rating_noise = 0.9;     // per-rating Gaussian noise
  double user_bias_scale = 0.0;  // per-user generosity shift applied to all ratings
  double exposure_scale_b = -1.0;  // slate-selection weight of the second trait; <0 mirrors exposure_scale
  double class_exposure_scale = 0.0;  // per-class item affinity in the slate logit for the second trait
  double rating_cut3 = 0.35;  // standardized-score threshold separating ratings 3 and 4
  std::uint64_t seed = 7;
};

// Writes train.ascii / test.ascii / user_features.ascii into `dir`
// (created if needed). Ratings are integers 1..5; zero marks no rating.
void write_coat_benchmark(const std::string& dir, const CoatBenchConfig& cfg = {});

}  // namespace lcdr
