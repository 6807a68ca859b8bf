#include "lcdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "lcdr/errors.hpp"

namespace lcdr {

std::vector<int> rank_by_score(std::vector<ScoredItem> items) {
  std::sort(items.begin(), items.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });
  std::vector<int> ranked;
  ranked.reserve(items.size());
  for (const auto& it : items) ranked.push_back(it.item);
  return ranked;
}

namespace {

double discount(int rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

}  // namespace

double ndcg_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                 int k) {
  if (k < 1) throw ConfigError("ndcg_at_k: k must be >= 1");
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  int limit = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int r = 1; r <= limit; ++r)
    if (relevant.count(ranked[r - 1])) dcg += discount(r);
  double idcg = 0.0;
  int ideal = std::min<int>(k, static_cast<int>(relevant.size()));
  for (int r = 1; r <= ideal; ++r) idcg += discount(r);
  return dcg / idcg;
}

double recall_at_k(const std::vector<int>& ranked, const std::unordered_set<int>& relevant,
                   int k) {
  if (k < 1) throw ConfigError("recall_at_k: k must be >= 1");
  if (relevant.empty()) return 0.0;
  int hits = 0;
  int limit = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int r = 0; r < limit; ++r) hits += relevant.count(ranked[r]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

EvalEntry evaluate(const ScoreFn& score, const InteractionDataset& ds, SplitTag split,
                   int k) {
  std::map<int, std::vector<const InteractionRecord*>> by_user;
  for (const auto& r : ds.records)
    if (r.split == split) by_user[r.user].push_back(&r);
  if (by_user.empty())
    throw ConfigError(std::string("evaluate: split '") + to_string(split) +
                      "' holds no records");

  EvalEntry out;
  double ndcg_sum = 0.0, recall_sum = 0.0;
  for (const auto& [user, recs] : by_user) {
    std::vector<ScoredItem> items;
    std::unordered_set<int> relevant;
    items.reserve(recs.size());
    for (const auto* r : recs) {
      items.push_back({r->item, score(user, r->item), r->label});
      if (r->label) relevant.insert(r->item);
    }
    if (relevant.empty()) {
      out.users_skipped++;
      continue;
    }
    auto ranked = rank_by_score(std::move(items));
    ndcg_sum += ndcg_at_k(ranked, relevant, k);
    recall_sum += recall_at_k(ranked, relevant, k);
    out.users_evaluated++;
  }
  if (out.users_evaluated > 0) {
    out.ndcg = ndcg_sum / out.users_evaluated;
    out.recall = recall_sum / out.users_evaluated;
  }
  return out;
}

namespace {

// Lentz continued fraction for the incomplete beta kernel.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw NumericalError("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ConfigError("regularized_incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("paired_t_test: unequal sample lengths");
  if (a.size() < 2) throw ConfigError("paired_t_test: need at least two pairs");
  const int n = static_cast<int>(a.size());
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1);

  TTestResult res;
  res.n = n;
  if (var == 0.0) {
    if (mean == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  res.t = mean / std::sqrt(var / n);
  const double nu = static_cast<double>(n - 1);
  const double x = nu / (nu + res.t * res.t);
  res.p = regularized_incomplete_beta(nu / 2.0, 0.5, x);
  return res;
}

void MetricsReport::add(std::uint64_t seed, const EvalEntry& entry) {
  per_seed.push_back({seed, entry.ndcg, entry.recall});
  users_evaluated = entry.users_evaluated;
  users_skipped = entry.users_skipped;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<double> MetricsReport::ndcg_values() const {
  std::vector<double> v;
  v.reserve(per_seed.size());
  for (const auto& e : per_seed) v.push_back(e.ndcg);
  return v;
}

std::vector<double> MetricsReport::recall_values() const {
  std::vector<double> v;
  v.reserve(per_seed.size());
  for (const auto& e : per_seed) v.push_back(e.recall);
  return v;
}

double MetricsReport::ndcg_mean() const { return mean_of(ndcg_values()); }
double MetricsReport::ndcg_std() const { return sample_std(ndcg_values()); }
double MetricsReport::recall_mean() const { return mean_of(recall_values()); }
double MetricsReport::recall_std() const { return sample_std(recall_values()); }

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["dataset"] = dataset;
  j["k"] = k;
  j["per_seed"] = nlohmann::json::array();
  for (const auto& e : per_seed)
    j["per_seed"].push_back(
        {{"seed", e.seed}, {"ndcg_at_k", e.ndcg}, {"recall_at_k", e.recall}});
  j["mean"] = {{"ndcg_at_k", ndcg_mean()}, {"recall_at_k", recall_mean()}};
  j["std"] = {{"ndcg_at_k", ndcg_std()}, {"recall_at_k", recall_std()}};
  j["users_evaluated"] = users_evaluated;
  j["users_skipped"] = users_skipped;
  if (p_value_vs_baseline) j["p_value_vs_baseline"] = *p_value_vs_baseline;
  return j.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::string out = "method,dataset,k,seed,ndcg_at_k,recall_at_k\n";
  char buf[160];
  for (const auto& e : per_seed) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%llu,%.10f,%.10f\n", method.c_str(),
                  dataset.c_str(), k, static_cast<unsigned long long>(e.seed), e.ndcg,
                  e.recall);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,mean,%.10f,%.10f\n", method.c_str(),
                dataset.c_str(), k, ndcg_mean(), recall_mean());
  out += buf;
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,std,%.10f,%.10f\n", method.c_str(),
                dataset.c_str(), k, ndcg_std(), recall_std());
  out += buf;
  return out;
}

}  // namespace lcdr
