#include "lcdr/recommender.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"

namespace lcdr {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow; BCE(s, y) = softplus(s) - y*s.
double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_user_item(const MfParams& p, int u, int i) {
  if (u < 0 || static_cast<std::size_t>(u) >= p.num_users()) {
    throw ConfigError("recommender: user id " + std::to_string(u) + " out of range [0, " +
                      std::to_string(p.num_users()) + ")");
  }
  if (i < 0 || static_cast<std::size_t>(i) >= p.num_items()) {
    throw ConfigError("recommender: item id " + std::to_string(i) + " out of range [0, " +
                      std::to_string(p.num_items()) + ")");
  }
}

void check_head(const MfParams& p, const ConfounderHead& head, std::span<const double> feature) {
  if (head.H.rows != p.d_mf() || head.Qc.cols != p.d_mf() || head.Qc.rows != p.num_items()) {
    throw ConfigError("recommender: head shapes do not match the factor model");
  }
  if (feature.size() != head.feature_dim()) {
    throw ConfigError("recommender: feature width " + std::to_string(feature.size()) +
                      " != head input width " + std::to_string(head.feature_dim()));
  }
}

std::vector<double> head_projection(const ConfounderHead& head, std::span<const double> feature) {
  std::vector<double> hz(head.H.rows, 0.0);
  for (std::size_t r = 0; r < head.H.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < head.H.cols; ++c) acc += head.H.at(r, c) * feature[c];
    hz[r] = acc;
  }
  return hz;
}

// Applies fn(flat_index, param, grad) over every parameter in a fixed
// order: P, Q, b_u, b_i, global_bias, then (when head is non-null) H, Qc.
// The MF block occupies the same flat indices with or without a head, so
// optimizer moments line up between an MF-only run and a frozen-head run.
template <typename Fn>
void walk_params(MfParams& p, ConfounderHead* head, const RecGrads& g, Fn&& fn) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < p.P.data.size(); ++i) fn(idx++, p.P.data[i], g.mf.P.data[i]);
  for (std::size_t i = 0; i < p.Q.data.size(); ++i) fn(idx++, p.Q.data[i], g.mf.Q.data[i]);
  for (std::size_t i = 0; i < p.b_u.size(); ++i) fn(idx++, p.b_u[i], g.mf.b_u[i]);
  for (std::size_t i = 0; i < p.b_i.size(); ++i) fn(idx++, p.b_i[i], g.mf.b_i[i]);
  fn(idx++, p.global_bias, g.mf.global_bias);
  if (head != nullptr) {
    for (std::size_t i = 0; i < head->H.data.size(); ++i)
      fn(idx++, head->H.data[i], g.head.H.data[i]);
    for (std::size_t i = 0; i < head->Qc.data.size(); ++i)
      fn(idx++, head->Qc.data[i], g.head.Qc.data[i]);
  }
}

double param_norm(const MfParams& p, const ConfounderHead* head) {
  double acc = 0.0;
  for (double v : p.P.data) acc += v * v;
  for (double v : p.Q.data) acc += v * v;
  for (double v : p.b_u) acc += v * v;
  for (double v : p.b_i) acc += v * v;
  acc += p.global_bias * p.global_bias;
  if (head != nullptr) {
    for (double v : head->H.data) acc += v * v;
    for (double v : head->Qc.data) acc += v * v;
  }
  return std::sqrt(acc);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

double mf_score(const MfParams& p, int u, int i) {
  check_user_item(p, u, i);
  const std::size_t uu = static_cast<std::size_t>(u);
  const std::size_t ii = static_cast<std::size_t>(i);
  double acc = p.global_bias + p.b_u[uu] + p.b_i[ii];
  for (std::size_t c = 0; c < p.d_mf(); ++c) acc += p.P.at(uu, c) * p.Q.at(ii, c);
  return acc;
}

double lcdr_score(const MfParams& p, const ConfounderHead& head, int u, int i,
                  std::span<const double> feature) {
  check_user_item(p, u, i);
  check_head(p, head, feature);
  const std::vector<double> hz = head_projection(head, feature);
  double acc = mf_score(p, u, i);
  const std::size_t ii = static_cast<std::size_t>(i);
  for (std::size_t c = 0; c < p.d_mf(); ++c) acc += hz[c] * head.Qc.at(ii, c);
  return acc;
}

RecGrads::RecGrads(const MfParams& p, const ConfounderHead* h) {
  mf.P = DenseMatrix(p.P.rows, p.P.cols);
  mf.Q = DenseMatrix(p.Q.rows, p.Q.cols);
  mf.b_u.assign(p.b_u.size(), 0.0);
  mf.b_i.assign(p.b_i.size(), 0.0);
  mf.global_bias = 0.0;
  if (h != nullptr) {
    head.H = DenseMatrix(h->H.rows, h->H.cols);
    head.Qc = DenseMatrix(h->Qc.rows, h->Qc.cols);
  }
}

void RecGrads::zero() {
  std::fill(mf.P.data.begin(), mf.P.data.end(), 0.0);
  std::fill(mf.Q.data.begin(), mf.Q.data.end(), 0.0);
  std::fill(mf.b_u.begin(), mf.b_u.end(), 0.0);
  std::fill(mf.b_i.begin(), mf.b_i.end(), 0.0);
  mf.global_bias = 0.0;
  std::fill(head.H.data.begin(), head.H.data.end(), 0.0);
  std::fill(head.Qc.data.begin(), head.Qc.data.end(), 0.0);
}

void RecGrads::scale(double s) {
  for (double& v : mf.P.data) v *= s;
  for (double& v : mf.Q.data) v *= s;
  for (double& v : mf.b_u) v *= s;
  for (double& v : mf.b_i) v *= s;
  mf.global_bias *= s;
  for (double& v : head.H.data) v *= s;
  for (double& v : head.Qc.data) v *= s;
}

void score_backward(const MfParams& p, const ConfounderHead* head, int u, int i,
                    std::span<const double> feature, double upstream, RecGrads& grads) {
  check_user_item(p, u, i);
  const std::size_t uu = static_cast<std::size_t>(u);
  const std::size_t ii = static_cast<std::size_t>(i);
  const std::size_t d = p.d_mf();
  for (std::size_t c = 0; c < d; ++c) {
    grads.mf.P.at(uu, c) += upstream * p.Q.at(ii, c);
    grads.mf.Q.at(ii, c) += upstream * p.P.at(uu, c);
  }
  grads.mf.b_u[uu] += upstream;
  grads.mf.b_i[ii] += upstream;
  grads.mf.global_bias += upstream;
  if (head != nullptr) {
    check_head(p, *head, feature);
    const std::vector<double> hz = head_projection(*head, feature);
    for (std::size_t c = 0; c < d; ++c) {
      grads.head.Qc.at(ii, c) += upstream * hz[c];
      const double qc = head->Qc.at(ii, c);
      for (std::size_t l = 0; l < head->feature_dim(); ++l) {
        grads.head.H.at(c, l) += upstream * qc * feature[l];
      }
    }
  }
}

std::string RecEpochStats::to_json() const {
  std::ostringstream os;
  os << "{\"epoch\":" << epoch << ",\"bce\":" << fmt_double(bce)
     << ",\"val_ndcg\":" << fmt_double(val_ndcg) << ",\"wall_ms\":" << fmt_double(wall_ms) << "}";
  return os.str();
}

double RecResult::score(int u, int i) const {
  if (!has_head) return mf_score(mf, u, i);
  if (u < 0 || static_cast<std::size_t>(u) >= features.size()) {
    throw ConfigError("recommender: no feature row for user " + std::to_string(u));
  }
  return lcdr_score(mf, head, u, i, features[static_cast<std::size_t>(u)]);
}

ScoreFn RecResult::score_fn() const {
  return [this](int u, int i) { return this->score(u, i); };
}

RecResult train_recommender(const InteractionDataset& ds,
                            const std::vector<std::vector<double>>& features,
                            const RecConfig& cfg) {
  if (cfg.d_mf < 1) throw ConfigError("recommender: d_mf must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("recommender: epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("recommender: batch_size must be >= 1");
  if (cfg.patience < 1) throw ConfigError("recommender: patience must be >= 1");
  if (cfg.k < 1) throw ConfigError("recommender: validation cutoff k must be >= 1");
  if (ds.num_users == 0 || ds.num_items == 0) {
    throw ConfigError("recommender: dataset has no users or no items");
  }

  const bool has_head = !features.empty();
  std::size_t feature_dim = 0;
  if (has_head) {
    if (features.size() != static_cast<std::size_t>(ds.num_users)) {
      throw ConfigError("recommender: feature table has " + std::to_string(features.size()) +
                        " rows for " + std::to_string(ds.num_users) + " users");
    }
    feature_dim = features.front().size();
    if (feature_dim == 0) throw ConfigError("recommender: feature rows are empty");
    for (const auto& row : features) {
      if (row.size() != feature_dim) {
        throw ConfigError("recommender: ragged feature table");
      }
    }
  } else if (cfg.freeze_head) {
    throw ConfigError("recommender: freeze_head requires a feature table");
  }

  RecResult out;
  out.has_head = has_head;
  out.features = features;

  const std::size_t nu = static_cast<std::size_t>(ds.num_users);
  const std::size_t ni = static_cast<std::size_t>(ds.num_items);
  out.mf.P = DenseMatrix(nu, cfg.d_mf);
  out.mf.Q = DenseMatrix(ni, cfg.d_mf);
  out.mf.b_u.assign(nu, 0.0);
  out.mf.b_i.assign(ni, 0.0);
  out.mf.global_bias = 0.0;
  {
    RandomStream embed(cfg.seed, "stage2/embed/init");
    for (double& v : out.mf.P.data) v = 0.01 * embed.normal();
    for (double& v : out.mf.Q.data) v = 0.01 * embed.normal();
  }
  if (has_head) {
    out.head.H = DenseMatrix(cfg.d_mf, feature_dim);
    out.head.Qc = DenseMatrix(ni, cfg.d_mf);
    if (!cfg.freeze_head) {
      RandomStream hrs(cfg.seed, "stage2/head/init");
      for (double& v : out.head.H.data) v = 0.01 * hrs.normal();
      for (double& v : out.head.Qc.data) v = 0.01 * hrs.normal();
    }
  }

  // A frozen head stays all-zero and contributes neither score nor
  // gradient, so training walks exactly the MF-only parameter block.
  const bool train_head = has_head && !cfg.freeze_head;
  ConfounderHead* opt_head = train_head ? &out.head : nullptr;

  std::vector<std::size_t> train_idx;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    if (ds.records[r].split == SplitTag::Train) train_idx.push_back(r);
  }
  if (train_idx.empty()) throw ConfigError("recommender: no train records");
  const bool has_val = ds.count(SplitTag::Val) > 0;

  std::size_t total_params = out.mf.P.data.size() + out.mf.Q.data.size() + out.mf.b_u.size() +
                             out.mf.b_i.size() + 1;
  if (train_head) total_params += out.head.H.data.size() + out.head.Qc.data.size();
  AdamState adam(total_params, cfg.lr, cfg.weight_decay);
  RecGrads grads(out.mf, train_head ? &out.head : nullptr);
  RandomStream shuffle_rs(cfg.seed, "stage2/shuffle");

  const auto current_score = [&](int u, int i) -> double {
    if (train_head) {
      return lcdr_score(out.mf, out.head, u, i, features[static_cast<std::size_t>(u)]);
    }
    return mf_score(out.mf, u, i);
  };

  double best_ndcg = -std::numeric_limits<double>::infinity();
  MfParams best_mf;
  ConfounderHead best_head;
  bool have_best = false;
  int stall = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rs.shuffle(train_idx);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    const std::size_t bsz = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < train_idx.size(); start += bsz) {
      const std::size_t end = std::min(start + bsz, train_idx.size());
      const double batch_n = static_cast<double>(end - start);
      grads.zero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const InteractionRecord& rec = ds.records[train_idx[b]];
        const double s = current_score(rec.user, rec.item);
        const double y = rec.label ? 1.0 : 0.0;
        batch_loss += softplus(s) - y * s;
        const double up = (sigmoid(s) - y) / batch_n;
        std::span<const double> feat;
        if (train_head) feat = features[static_cast<std::size_t>(rec.user)];
        score_backward(out.mf, opt_head, rec.user, rec.item, feat, up, grads);
      }
      batch_loss /= batch_n;
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("recommender: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(start / bsz) +
                             " (|params|=" + fmt_double(param_norm(out.mf, opt_head)) + ")");
      }
      adam.begin_step();
      walk_params(out.mf, opt_head, grads,
                  [&](std::size_t idx, double& p, double g) { adam.update_one(idx, p, g); });
      epoch_loss += batch_loss * batch_n;
      seen += end - start;
    }
    epoch_loss /= static_cast<double>(seen);

    RecEpochStats st;
    st.epoch = epoch;
    st.bce = epoch_loss;
    if (has_val) {
      const ScoreFn fn = [&](int u, int i) { return current_score(u, i); };
      st.val_ndcg = evaluate(fn, ds, SplitTag::Val, cfg.k).ndcg;
      if (st.val_ndcg > best_ndcg) {
        best_ndcg = st.val_ndcg;
        best_mf = out.mf;
        best_head = out.head;
        have_best = true;
        stall = 0;
      } else {
        ++stall;
      }
    }
    st.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                     .count();
    out.log.push_back(st);
    out.epochs_run = epoch;
    if (has_val && stall >= cfg.patience) {
      out.early_stopped = true;
      break;
    }
  }

  if (have_best) {
    out.mf = std::move(best_mf);
    out.head = std::move(best_head);
    out.best_val_ndcg = best_ndcg;
  }
  return out;
}

double estimate_potential_outcome(const LcvaeModel& lcvae, const MfParams& mf,
                                  const ConfounderHead* head, ExposureRow a_u, int u, int i,
                                  double a_value, int num_samples, std::uint64_t seed) {
  if (num_samples < 1) throw ConfigError("potential outcome: num_samples must be >= 1");
  if (i < 0 || static_cast<std::size_t>(i) >= a_u.a.size()) {
    throw ConfigError("potential outcome: item id " + std::to_string(i) +
                      " outside the exposure row");
  }
  a_u.a[static_cast<std::size_t>(i)] = a_value;
  const GaussianParams q = lcvae_encode(lcvae, a_u);

  RandomStream rs(seed, "potential_outcome");
  double acc = 0.0;
  double first = 0.0;
  bool all_same = true;
  for (int s = 0; s < num_samples; ++s) {
    const std::vector<double> noise = rs.normal_vec(q.dim());
    const std::vector<double> z = reparam_sample(q, noise);
    const double sc = (head != nullptr) ? lcdr_score(mf, *head, u, i, z) : mf_score(mf, u, i);
    const double v = sigmoid(sc);
    if (s == 0) {
      first = v;
    } else if (v != first) {
      all_same = false;
    }
    acc += v;
  }
  // A constant integrand averages to itself exactly, independent of seed.
  if (all_same) return first;
  return acc / static_cast<double>(num_samples);
}

const char* to_string(VariantKind k) {
  switch (k) {
    case VariantKind::Mf: return "mf";
    case VariantKind::MfWf: return "mf_wf";
    case VariantKind::VaeIvaeConcat: return "vae_ivae_concat";
    case VariantKind::LcdrWoLc: return "lcdr_wo_lc";
    case VariantKind::Lcdr: return "lcdr";
  }
  return "unknown";
}

RecResult train_variant(VariantKind kind, const InteractionDataset& ds,
                        const RepresentationTable* lcdr_reps,
                        const RepresentationTable* ablation_reps, const RecConfig& cfg) {
  std::vector<std::vector<double>> features;
  switch (kind) {
    case VariantKind::Mf:
      break;
    case VariantKind::MfWf: {
      if (ds.proxies.size() != static_cast<std::size_t>(ds.num_users)) {
        throw ConfigError("variant mf_wf: dataset has no per-user proxy features");
      }
      features.reserve(ds.proxies.size());
      for (const auto& row : ds.proxies) features.push_back(row.w);
      break;
    }
    case VariantKind::VaeIvaeConcat: {
      if (ablation_reps == nullptr || ablation_reps->z_lc.empty() || ablation_reps->z.empty()) {
        throw ConfigError(
            "variant vae_ivae_concat: needs unconstrained-stage representations with both "
            "tables");
      }
      features.reserve(ablation_reps->z_lc.size());
      for (std::size_t uu = 0; uu < ablation_reps->z_lc.size(); ++uu) {
        std::vector<double> row = ablation_reps->z_lc[uu];
        row.insert(row.end(), ablation_reps->z[uu].begin(), ablation_reps->z[uu].end());
        features.push_back(std::move(row));
      }
      break;
    }
    case VariantKind::LcdrWoLc: {
      if (ablation_reps == nullptr || ablation_reps->z_lc.empty()) {
        throw ConfigError("variant lcdr_wo_lc: needs unconstrained-stage representations");
      }
      features = ablation_reps->z_lc;
      break;
    }
    case VariantKind::Lcdr: {
      if (lcdr_reps == nullptr || lcdr_reps->z_lc.empty()) {
        throw ConfigError("variant lcdr: needs constrained-stage representations");
      }
      features = lcdr_reps->z_lc;
      break;
    }
  }
  return train_recommender(ds, features, cfg);
}

void export_scores(const std::string& path, const RecResult& model,
                   const InteractionDataset& ds, SplitTag split) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "user\titem\tscore\n";
  for (const auto& rec : ds.records) {
    if (rec.split != split) continue;
    out << rec.user << '\t' << rec.item << '\t' << fmt_double(model.score(rec.user, rec.item))
        << '\n';
  }
  if (!out.good()) throw ConfigError("write failed: " + path);
}

}  // namespace lcdr
