#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "lcdr/dataio.hpp"

namespace lcdr {

// One candidate item for a user, carrying its model score and binary
// relevance label.
struct ScoredItem {
  int item = 0;
  double score = 0.0;
  int label = 0;
};

// Ranks by score descending, breaking ties by item id ascending.
std::vector<int> rank_by_score(std::vector<ScoredItem> items);

// DCG with unit gains and 1/log2(rank+1) discounts, normalized by the
// ideal DCG truncated at min(k, |relevant|). Returns 0 when relevant is
// empty (such users are skipped upstream).
double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                 int k);

// |top-k ∩ relevant| / |relevant|; 0 when relevant is empty.
double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                   int k);

using ScoreFn = std::function<double(int user, int item)>;

struct EvalEntry {
  double ndcg = 0.0;
  double recall = 0.0;
  int users_evaluated = 0;
  int users_skipped = 0;
};

// Per user, ranks that user's own items in `split` and averages both
// metrics over users with at least one positive label; users with items
// but no positives are counted as skipped. Throws ConfigError when the
// split holds no records at all.
EvalEntry evaluate(const ScoreFn& score, const InteractionDataset& ds, SplitTag split,
                   int k);

// Continued-fraction regularized incomplete beta I_x(a, b), the kernel of
// the t-distribution CDF.
double regularized_incomplete_beta(double a, double b, double x);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int n = 0;
};

// Two-sided paired t-test over equal-length per-seed samples. Degenerate
// cases: zero-variance differences give p = 1 when the mean difference is
// zero and p = 0 otherwise.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Multi-seed aggregation of one method on one dataset.
struct MetricsReport {
  struct PerSeed {
    std::uint64_t seed = 0;
    double ndcg = 0.0;
    double recall = 0.0;
  };

  std::string method;
  std::string dataset;
  int k = 5;
  std::vector<PerSeed> per_seed;
  int users_evaluated = 0;
  int users_skipped = 0;
  std::optional<double> p_value_vs_baseline;

  void add(std::uint64_t seed, const EvalEntry& entry);

  double ndcg_mean() const;
  double ndcg_std() const;  // sample standard deviation
  double recall_mean() const;
  double recall_std() const;

  std::vector<double> ndcg_values() const;
  std::vector<double> recall_values() const;

  std::string to_json() const;
  // Per-seed rows followed by mean and std rows.
  std::string to_csv() const;
};

}  // namespace lcdr
