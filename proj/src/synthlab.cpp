#include "lcdr/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lcdr/errors.hpp"
#include "lcdr/rng.hpp"

namespace lcdr {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void validate(const SynthConfig& cfg) {
  if (cfg.num_users < 1 || cfg.num_items < 1 || cfg.latent_dim_true < 1 || cfg.pref_dim < 1) {
    throw ConfigError("synth: dimensions must be >= 1");
  }
  if (cfg.proxy_noise < 0.0 || cfg.proxy_noise > 1.0) {
    throw ConfigError("synth: proxy_noise must lie in [0, 1]");
  }
  if (!(cfg.exposure_sparsity > 0.0) || !(cfg.exposure_sparsity < 1.0)) {
    throw ConfigError("synth: exposure_sparsity must lie in (0, 1)");
  }
  if (cfg.unbiased_per_user < 1 || cfg.unbiased_per_user > cfg.num_items) {
    throw ConfigError("synth: unbiased_per_user must lie in [1, num_items]");
  }
}

// Mean exposure probability over all (user, item) pairs at intercept c.
double mean_density(const std::vector<double>& logits, double c) {
  double acc = 0.0;
  for (double l : logits) acc += sigmoid(l + c);
  return acc / static_cast<double>(logits.size());
}

// Bisect the exposure intercept so the expected density hits the target.
double calibrate_intercept(const std::vector<double>& logits, double target) {
  double lo = -40.0;
  double hi = 40.0;
  const double d_lo = mean_density(logits, lo);
  const double d_hi = mean_density(logits, hi);
  if (target < d_lo || target > d_hi) {
    throw NumericalError("synth: sparsity target " + fmt_double(target) +
                         " outside the achievable range [" + fmt_double(d_lo) + ", " +
                         fmt_double(d_hi) + "]");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_density(logits, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double c = 0.5 * (lo + hi);
  const double achieved = mean_density(logits, c);
  if (std::abs(achieved - target) > std::max(1e-6, 0.01 * target)) {
    throw NumericalError("synth: sparsity calibration failed; wanted " + fmt_double(target) +
                         ", got " + fmt_double(achieved));
  }
  return c;
}

// --- Symmetric eigendecomposition (cyclic Jacobi) for the affine fit. ---

struct SymEig {
  std::vector<double> values;           // ascending not guaranteed
  std::vector<std::vector<double>> vectors;  // column j is the j-th eigenvector
};

SymEig jacobi_eig(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = cs * akp - sn * akq;
          a[k][q] = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = cs * apk - sn * aqk;
          a[q][k] = sn * apk + cs * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = cs * vkp - sn * vkq;
          v[k][q] = sn * vkp + cs * vkq;
        }
      }
    }
  }
  SymEig out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a[i][i];
  out.vectors = std::move(v);
  return out;
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t nu = static_cast<std::size_t>(cfg.num_users);
  const std::size_t ni = static_cast<std::size_t>(cfg.num_items);
  const std::size_t kdim = static_cast<std::size_t>(cfg.latent_dim_true);
  const std::size_t pdim = static_cast<std::size_t>(cfg.pref_dim);

  SynthResult out;
  GroundTruth& gt = out.truth;
  gt.z_true.assign(nu, std::vector<double>(kdim, 0.0));
  gt.class_clean.assign(nu, std::vector<int>(kdim, 0));
  gt.class_observed.assign(nu, std::vector<int>(kdim, 0));

  {
    RandomStream cls_rs(cfg.seed, "synth/class");
    RandomStream z_rs(cfg.seed, "synth/z");
    for (std::size_t u = 0; u < nu; ++u) {
      for (std::size_t d = 0; d < kdim; ++d) {
        const int c = static_cast<int>(cls_rs.index(kSynthClasses));
        gt.class_clean[u][d] = c;
        gt.z_true[u][d] = synth_class_mean(c) + z_rs.normal();
      }
    }
  }

  {
    RandomStream noise_rs(cfg.seed, "synth/corrupt");
    for (std::size_t u = 0; u < nu; ++u) {
      for (std::size_t d = 0; d < kdim; ++d) {
        const double coin = noise_rs.uniform();
        const int resample = static_cast<int>(noise_rs.index(kSynthClasses));
        gt.class_observed[u][d] = (coin < cfg.proxy_noise) ? resample : gt.class_clean[u][d];
      }
    }
  }

  const auto one_hot_rows = [&](const std::vector<std::vector<int>>& classes) {
    std::vector<std::vector<double>> rows(nu,
                                          std::vector<double>(kdim * kSynthClasses, 0.0));
    for (std::size_t u = 0; u < nu; ++u) {
      for (std::size_t d = 0; d < kdim; ++d) {
        rows[u][d * kSynthClasses + static_cast<std::size_t>(classes[u][d])] = 1.0;
      }
    }
    return rows;
  };
  gt.w_clean = one_hot_rows(gt.class_clean);
  gt.w_observed = one_hot_rows(gt.class_observed);

  // Item-side coefficients for exposure and feedback.
  std::vector<std::vector<double>> v_i(ni, std::vector<double>(kdim));
  std::vector<double> item_effect(ni);
  std::vector<std::vector<double>> e_i(ni, std::vector<double>(pdim));
  std::vector<std::vector<double>> g_i(ni, std::vector<double>(kdim));
  std::vector<std::vector<double>> theta_u(nu, std::vector<double>(pdim));
  {
    RandomStream item_rs(cfg.seed, "synth/items");
    const double vs = cfg.exposure_scale / std::sqrt(static_cast<double>(kdim));
    for (auto& row : v_i)
      for (double& x : row) x = vs * item_rs.normal();
    if (cfg.exposure_skew != 1.0) {
      double mult = 1.0;
      for (std::size_t d = 0; d < kdim; ++d) {
        for (auto& row : v_i) row[d] *= mult;
        mult *= cfg.exposure_skew;
      }
    }
    for (double& x : item_effect) x = cfg.item_effect_scale * item_rs.normal();
    RandomStream fb_rs(cfg.seed, "synth/feedback");
    const double es = cfg.feedback_scale / std::sqrt(static_cast<double>(pdim));
    const double gs = cfg.confound_scale / std::sqrt(static_cast<double>(kdim));
    for (auto& row : e_i)
      for (double& x : row) x = es * fb_rs.normal();
    for (auto& row : g_i)
      for (double& x : row) x = gs * fb_rs.normal();
    RandomStream th_rs(cfg.seed, "synth/theta");
    for (auto& row : theta_u)
      for (double& x : row) x = th_rs.normal();
  }

  // Exposure logits (before the calibrated intercept) for every pair.
  std::vector<double> logits(nu * ni);
  for (std::size_t u = 0; u < nu; ++u) {
    for (std::size_t i = 0; i < ni; ++i) {
      double acc = item_effect[i];
      for (std::size_t d = 0; d < kdim; ++d) acc += gt.z_true[u][d] * v_i[i][d];
      logits[u * ni + i] = acc;
    }
  }
  out.exposure_intercept = calibrate_intercept(logits, cfg.exposure_sparsity);

  const auto feedback_prob = [&](std::size_t u, std::size_t i) {
    double acc = cfg.feedback_bias;
    for (std::size_t k = 0; k < pdim; ++k) acc += theta_u[u][k] * e_i[i][k];
    for (std::size_t d = 0; d < kdim; ++d) acc += gt.z_true[u][d] * g_i[i][d];
    return sigmoid(acc);
  };

  InteractionDataset& ds = out.dataset;
  ds.num_users = cfg.num_users;
  ds.num_items = cfg.num_items;

  {
    RandomStream exp_rs(cfg.seed, "synth/exposure");
    RandomStream lab_rs(cfg.seed, "synth/labels");
    for (std::size_t u = 0; u < nu; ++u) {
      for (std::size_t i = 0; i < ni; ++i) {
        const double p = sigmoid(logits[u * ni + i] + out.exposure_intercept);
        if (exp_rs.uniform() >= p) continue;
        InteractionRecord r;
        r.user = static_cast<int>(u);
        r.item = static_cast<int>(i);
        r.label = lab_rs.uniform() < feedback_prob(u, i);
        r.value = r.label ? 1.0 : 0.0;
        r.origin = Origin::Biased;
        r.split = SplitTag::Train;
        ds.records.push_back(r);
      }
    }

    // Uniform-random slate per user: distinct items via partial shuffle.
    RandomStream unb_rs(cfg.seed, "synth/unbiased");
    std::vector<int> pool(ni);
    for (std::size_t u = 0; u < nu; ++u) {
      std::iota(pool.begin(), pool.end(), 0);
      for (int s = 0; s < cfg.unbiased_per_user; ++s) {
        const std::size_t j =
            static_cast<std::size_t>(s) +
            unb_rs.index(pool.size() - static_cast<std::size_t>(s));
        std::swap(pool[static_cast<std::size_t>(s)], pool[j]);
        const int item = pool[static_cast<std::size_t>(s)];
        InteractionRecord r;
        r.user = static_cast<int>(u);
        r.item = item;
        r.label = lab_rs.uniform() < feedback_prob(u, static_cast<std::size_t>(item));
        r.value = r.label ? 1.0 : 0.0;
        r.origin = Origin::Unbiased;
        r.split = SplitTag::Test;
        ds.records.push_back(r);
      }
    }
  }

  ds.proxies.resize(nu);
  for (std::size_t u = 0; u < nu; ++u) {
    ds.proxies[u].user = static_cast<int>(u);
    ds.proxies[u].w = gt.w_observed[u];
  }
  return out;
}

double alignment_score(const std::vector<std::vector<double>>& z_recovered,
                       const std::vector<std::vector<double>>& z_true,
                       std::vector<std::string>* warnings) {
  if (z_recovered.empty() || z_true.empty()) {
    throw ConfigError("alignment: empty representation");
  }
  if (z_recovered.size() != z_true.size()) {
    throw ConfigError("alignment: user counts differ: " + std::to_string(z_recovered.size()) +
                      " vs " + std::to_string(z_true.size()));
  }
  const std::size_t n = z_recovered.size();
  const std::size_t kr = z_recovered.front().size();
  const std::size_t kt = z_true.front().size();
  if (kr < 1 || kt < 1) throw ConfigError("alignment: dimensions must be >= 1");
  for (const auto& row : z_recovered) {
    if (row.size() != kr) throw ConfigError("alignment: ragged recovered matrix");
  }
  for (const auto& row : z_true) {
    if (row.size() != kt) throw ConfigError("alignment: ragged truth matrix");
  }

  // Design matrix X = [z_recovered | 1]; solve the normal equations with a
  // pseudo-inverse so collinear columns degrade gracefully.
  const std::size_t m = kr + 1;
  std::vector<std::vector<double>> xtx(m, std::vector<double>(m, 0.0));
  std::vector<std::vector<double>> xty(m, std::vector<double>(kt, 0.0));
  const auto design = [&](std::size_t u, std::size_t c) {
    return c < kr ? z_recovered[u][c] : 1.0;
  };
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t a = 0; a < m; ++a) {
      const double xa = design(u, a);
      for (std::size_t b = a; b < m; ++b) xtx[a][b] += xa * design(u, b);
      for (std::size_t j = 0; j < kt; ++j) xty[a][j] += xa * z_true[u][j];
    }
  }
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < a; ++b) xtx[a][b] = xtx[b][a];

  const SymEig eig = jacobi_eig(xtx);
  double lmax = 0.0;
  for (double l : eig.values) lmax = std::max(lmax, std::abs(l));
  const double tol = lmax * 1e-10;
  bool deficient = false;
  std::vector<double> inv_l(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(eig.values[i]) > tol) {
      inv_l[i] = 1.0 / eig.values[i];
    } else {
      deficient = true;
    }
  }
  if (deficient && warnings != nullptr) {
    warnings->push_back(
        "alignment: rank-deficient recovered representation; fit uses a pseudo-inverse");
  }

  // B = V diag(inv_l) V^T (X^T Y), column j maps onto true dimension j.
  std::vector<std::vector<double>> vt_xty(m, std::vector<double>(kt, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < kt; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m; ++r) acc += eig.vectors[r][i] * xty[r][j];
      vt_xty[i][j] = acc * inv_l[i];
    }
  }
  std::vector<std::vector<double>> beta(m, std::vector<double>(kt, 0.0));
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < kt; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += eig.vectors[r][i] * vt_xty[i][j];
      beta[r][j] = acc;
    }
  }

  std::vector<double> mean_true(kt, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t j = 0; j < kt; ++j) mean_true[j] += z_true[u][j];
  for (double& v : mean_true) v /= static_cast<double>(n);

  std::vector<double> ss_res(kt, 0.0);
  std::vector<double> ss_tot(kt, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t j = 0; j < kt; ++j) {
      double pred = 0.0;
      for (std::size_t a = 0; a < m; ++a) pred += design(u, a) * beta[a][j];
      const double res = z_true[u][j] - pred;
      const double dev = z_true[u][j] - mean_true[j];
      ss_res[j] += res * res;
      ss_tot[j] += dev * dev;
    }
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < kt; ++j) {
    double r2;
    if (ss_tot[j] < 1e-12) {
      r2 = ss_res[j] < 1e-9 ? 1.0 : 0.0;
    } else {
      r2 = 1.0 - ss_res[j] / ss_tot[j];
    }
    acc += std::clamp(r2, 0.0, 1.0);
  }
  return acc / static_cast<double>(kt);
}

double proxy_confounder_correlation(const GroundTruth& gt) {
  const std::size_t n = gt.z_true.size();
  if (n < 2) throw ConfigError("correlation: need at least two users");
  const std::size_t kdim = gt.z_true.front().size();
  double worst = 0.0;
  for (std::size_t d = 0; d < kdim; ++d) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      const double x = synth_class_mean(gt.class_observed[u][d]);
      const double y = gt.z_true[u][d];
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
    }
    const double nn = static_cast<double>(n);
    const double cov = sxy / nn - (sx / nn) * (sy / nn);
    const double vx = sxx / nn - (sx / nn) * (sx / nn);
    const double vy = syy / nn - (sy / nn) * (sy / nn);
    if (vx <= 0.0 || vy <= 0.0) continue;
    worst = std::max(worst, std::abs(cov / std::sqrt(vx * vy)));
  }
  return worst;
}

void write_ground_truth(const std::string& path,
                        const std::vector<std::vector<double>>& z_rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "user\tz\n";
  for (std::size_t u = 0; u < z_rows.size(); ++u) {
    out << u << '\t';
    for (std::size_t d = 0; d < z_rows[u].size(); ++d) {
      if (d > 0) out << ',';
      out << fmt_double(z_rows[u][d]);
    }
    out << '\n';
  }
  if (!out.good()) throw ConfigError("write failed: " + path);
}

std::vector<std::vector<double>> read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "user\tz") {
    throw ParseError(path + ":1: expected header 'user<TAB>z'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": missing tab");
    }
    std::size_t user = 0;
    try {
      user = static_cast<std::size_t>(std::stoul(line.substr(0, tab)));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad user id");
    }
    if (user != rows.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": users must be consecutive");
    }
    std::vector<double> z;
    std::stringstream cell(line.substr(tab + 1));
    std::string tok;
    while (std::getline(cell, tok, ',')) {
      try {
        z.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
    }
    if (z.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty latent row");
    }
    rows.push_back(std::move(z));
  }
  return rows;
}

}  // namespace lcdr
