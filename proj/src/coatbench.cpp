#include "lcdr/coatbench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"

namespace fs = std::filesystem;

namespace lcdr {

namespace {

constexpr int kPrefDim = 4;     // taste dimensions independent of the trait
constexpr int kNuisanceDim = 6;  // exposure-only user factors competing for encoder capacity

// One-hot block widths of the feature file: two trait-derived blocks (6 and
// 3 categories) surrounded by unrelated filler blocks (2 and 3 categories),
// 14 columns total.
constexpr int kFillerA = 2;
constexpr int kTraitBlockA = 6;
constexpr int kFillerB = 3;
constexpr int kTraitBlockB = 3;

// Class-mixture trait dimension: evenly spaced centers, Gaussian spread
// within each class, normalized to unit marginal variance so the scale
// knobs are comparable across block widths.
struct TraitMixture {
  int classes;
  double center_gap;
  double within_sd;

  double center(int c) const { return center_gap * (c - 0.5 * (classes - 1)); }
  double marginal_sd() const {
    const double n = classes;
    const double center_var = center_gap * center_gap * (n * n - 1.0) / 12.0;
    return std::sqrt(center_var + within_sd * within_sd);
  }
  double draw(int c, double noise) const {
    return (center(c) + within_sd * noise) / marginal_sd();
  }
};

void write_matrix_file(const fs::path& path, const std::vector<std::vector<int>>& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& row : m) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ' ';
      out << row[i];
    }
    out << '\n';
  }
}

}  // namespace

void write_coat_benchmark(const std::string& dir, const CoatBenchConfig& cfg) {
  if (cfg.num_users < 1 || cfg.num_items < 1)
    throw ConfigError("coat benchmark: num_users and num_items must be positive");
  if (cfg.biased_per_user < 1 || cfg.biased_per_user > cfg.num_items)
    throw ConfigError("coat benchmark: biased_per_user out of range");
  if (cfg.unbiased_per_user < 1 ||
      cfg.unbiased_per_user > cfg.num_items - cfg.biased_per_user)
    throw ConfigError("coat benchmark: unbiased_per_user out of range");
  if (!(cfg.proxy_noise >= 0.0 && cfg.proxy_noise <= 1.0))
    throw ConfigError("coat benchmark: proxy_noise must lie in [0, 1]");

  const int U = cfg.num_users;
  const int I = cfg.num_items;

  // Per-user trait (drives exposure and ratings) and taste (ratings only).
  // Each trait dimension is a class mixture whose class index is what the
  // matching feature block reports.
  const TraitMixture mix_a{kTraitBlockA, 0.9, cfg.trait_within_sd};
  const TraitMixture mix_b{kTraitBlockB, 1.3, cfg.trait_within_sd};
  RandomStream rs_class(cfg.seed, "coatbench/class");
  RandomStream rs_trait(cfg.seed, "coatbench/trait");
  RandomStream rs_taste(cfg.seed, "coatbench/taste");
  RandomStream rs_nuis(cfg.seed, "coatbench/nuisance");
  std::vector<std::vector<double>> trait(U, std::vector<double>(2));
  std::vector<std::vector<double>> taste(U);
  std::vector<std::vector<double>> nuisance(U);  // drives exposure, never ratings
  std::vector<int> class_a(U), class_b(U);
  for (int u = 0; u < U; ++u) {
    class_a[u] = static_cast<int>(rs_class.index(kTraitBlockA));
    class_b[u] = static_cast<int>(rs_class.index(kTraitBlockB));
    trait[u][0] = mix_a.draw(class_a[u], rs_trait.normal());
    trait[u][1] = mix_b.draw(class_b[u], rs_trait.normal());
    taste[u] = rs_taste.normal_vec(kPrefDim);
    nuisance[u] = rs_nuis.normal_vec(kNuisanceDim);
  }

  // Item loadings: propensity (trait + popularity) and feedback (taste + trait).
  RandomStream rs_items(cfg.seed, "coatbench/items");
  std::vector<std::vector<double>> v(I), e(I), g(I), nl(I);
  std::vector<double> pop(I);
  const double vs = cfg.exposure_scale / std::sqrt(2.0);
  const double vs_b =
      (cfg.exposure_scale_b < 0.0 ? cfg.exposure_scale : cfg.exposure_scale_b) / std::sqrt(2.0);
  const double es = cfg.feedback_scale / std::sqrt(static_cast<double>(kPrefDim));
  const double gs = cfg.confound_scale / std::sqrt(2.0);
  const double ns = cfg.nuisance_scale / std::sqrt(static_cast<double>(kNuisanceDim));
  for (int i = 0; i < I; ++i) {
    v[i] = rs_items.normal_vec(2);
    pop[i] = cfg.popularity_scale * rs_items.normal();
    e[i] = rs_items.normal_vec(kPrefDim);
    g[i] = rs_items.normal_vec(2);
    nl[i] = rs_items.normal_vec(kNuisanceDim);
    v[i][0] *= vs;
    v[i][1] *= vs_b;
    for (double& x : e[i]) x *= es;
    for (double& x : g[i]) x *= gs;
    for (double& x : nl[i]) x *= ns;
  }

  // Raw rating scores for every pair; standardized thresholds map to 1..5.
  // A per-user generosity shift spreads how many items each user ends up
  // liking without altering that user's item ranking.
  RandomStream rs_noise(cfg.seed, "coatbench/noise");
  RandomStream rs_gen(cfg.seed, "coatbench/generosity");
  std::vector<double> generosity(U);
  for (int u = 0; u < U; ++u) generosity[u] = cfg.user_bias_scale * rs_gen.normal();
  std::vector<std::vector<double>> score(U, std::vector<double>(I));
  double sum = 0.0, sum_sq = 0.0;
  for (int u = 0; u < U; ++u) {
    for (int i = 0; i < I; ++i) {
      double s = generosity[u];
      for (int d = 0; d < kPrefDim; ++d) s += taste[u][d] * e[i][d];
      for (int d = 0; d < 2; ++d) s += trait[u][d] * g[i][d];
      s += cfg.rating_noise * rs_noise.normal();
      score[u][i] = s;
      sum += s;
      sum_sq += s * s;
    }
  }
  const double n_pairs = static_cast<double>(U) * I;
  const double mean = sum / n_pairs;
  const double sd = std::sqrt(std::max(1e-12, sum_sq / n_pairs - mean * mean));
  const auto to_rating = [&](double s) {
    const double z = (s - mean) / sd;
    if (z <= -0.85) return 1;
    if (z <= -0.15) return 2;
    if (z <= cfg.rating_cut3) return 3;
    if (z <= cfg.rating_cut3 + 1.05) return 4;
    return 5;
  };

  // Optional class-structured slate affinity for the second trait: each class
  // has its own per-item appeal, so slate membership reflects class identity
  // rather than a linear function of the trait value.
  std::vector<std::vector<double>> class_affinity;
  if (cfg.class_exposure_scale != 0.0) {
    RandomStream rs_classexp(cfg.seed, "coatbench/classexp");
    class_affinity.assign(kTraitBlockB, std::vector<double>(I));
    for (int c = 0; c < kTraitBlockB; ++c)
      for (int i = 0; i < I; ++i)
        class_affinity[c][i] = cfg.class_exposure_scale * rs_classexp.normal();
  }

  // Self-selected slate: top items by propensity logit plus Gumbel noise,
  // i.e. a without-replacement sample weighted by exp(logit).
  RandomStream rs_gumbel(cfg.seed, "coatbench/gumbel");
  std::vector<std::vector<int>> train(U, std::vector<int>(I, 0));
  std::vector<std::vector<char>> exposed(U, std::vector<char>(I, 0));
  std::vector<int> order(I);
  std::vector<double> key(I);
  for (int u = 0; u < U; ++u) {
    for (int i = 0; i < I; ++i) {
      double logit = pop[i];
      for (int d = 0; d < 2; ++d) logit += trait[u][d] * v[i][d];
      for (int d = 0; d < kNuisanceDim; ++d) logit += nuisance[u][d] * nl[i][d];
      if (!class_affinity.empty()) logit += class_affinity[class_b[u]][i];
      const double unif = std::max(1e-300, 1.0 - rs_gumbel.uniform());
      key[i] = logit - std::log(-std::log(unif));
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + cfg.biased_per_user, order.end(),
                      [&](int a, int b) { return key[a] > key[b]; });
    for (int r = 0; r < cfg.biased_per_user; ++r) {
      const int i = order[r];
      train[u][i] = to_rating(score[u][i]);
      exposed[u][i] = 1;
    }
  }

  // Uniform slate over the items the user did not self-select.
  RandomStream rs_unbiased(cfg.seed, "coatbench/unbiased");
  std::vector<std::vector<int>> test(U, std::vector<int>(I, 0));
  for (int u = 0; u < U; ++u) {
    std::vector<int> pool;
    pool.reserve(I - cfg.biased_per_user);
    for (int i = 0; i < I; ++i)
      if (!exposed[u][i]) pool.push_back(i);
    for (int r = 0; r < cfg.unbiased_per_user; ++r) {
      const std::size_t j = r + rs_unbiased.index(pool.size() - r);
      std::swap(pool[r], pool[j]);
      test[u][pool[r]] = to_rating(score[u][pool[r]]);
    }
  }

  // Feature rows: filler block, trait-0 block, filler block, trait-1 block.
  RandomStream rs_feat(cfg.seed, "coatbench/features");
  RandomStream rs_corrupt(cfg.seed, "coatbench/corrupt");
  std::vector<std::vector<int>> features(
      U, std::vector<int>(kFillerA + kTraitBlockA + kFillerB + kTraitBlockB, 0));
  for (int u = 0; u < U; ++u) {
    int off = 0;
    features[u][off + static_cast<int>(rs_feat.index(kFillerA))] = 1;
    off += kFillerA;
    int cls_a = class_a[u];
    {
      // Draw both the coin and the replacement so the stream advances
      // identically at every noise level.
      const double coin = rs_corrupt.uniform();
      const int repl = static_cast<int>(rs_corrupt.index(kTraitBlockA));
      if (coin < cfg.proxy_noise) cls_a = repl;
    }
    features[u][off + cls_a] = 1;
    off += kTraitBlockA;
    features[u][off + static_cast<int>(rs_feat.index(kFillerB))] = 1;
    off += kFillerB;
    int cls_b = class_b[u];
    {
      const double coin = rs_corrupt.uniform();
      const int repl = static_cast<int>(rs_corrupt.index(kTraitBlockB));
      if (coin < cfg.proxy_noise) cls_b = repl;
    }
    features[u][off + cls_b] = 1;
  }

  fs::create_directories(dir);
  write_matrix_file(fs::path(dir) / "train.ascii", train);
  write_matrix_file(fs::path(dir) / "test.ascii", test);
  write_matrix_file(fs::path(dir) / "user_features.ascii", features);
}

}  // namespace lcdr
