#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "lcdr/errors.hpp"
#include "lcdr/numkernel.hpp"
#include "lcdr/rng.hpp"
#include "test_util.hpp"

using namespace lcdr;

namespace {

MlpParams single_layer(std::vector<std::vector<double>> w, std::vector<double> b,
                       Activation act) {
  MlpParams p;
  MlpLayer l;
  l.weight = DenseMatrix(w.size(), w.front().size());
  for (std::size_t r = 0; r < w.size(); ++r)
    for (std::size_t c = 0; c < w[r].size(); ++c) l.weight.at(r, c) = w[r][c];
  l.bias = std::move(b);
  l.act = act;
  p.layers.push_back(std::move(l));
  return p;
}

// Simpson-rule estimate of KL between 1-d Gaussians, the slow oracle for
// the closed form.
double kl_by_quadrature(double mq, double lvq, double mp, double lvp) {
  const double sq = std::exp(0.5 * lvq);
  const double lo = mq - 14.0 * sq, hi = mq + 14.0 * sq;
  const int n = 40000;  // even
  const double h = (hi - lo) / n;
  auto logpdf = [](double x, double m, double lv) {
    double d = x - m;
    return -0.5 * (lv + std::log(2.0 * M_PI)) - 0.5 * d * d * std::exp(-lv);
  };
  auto f = [&](double x) {
    double lq = logpdf(x, mq, lvq);
    return std::exp(lq) * (lq - logpdf(x, mp, lvp));
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_CASE("fnv1a64 matches published vectors") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("random streams are deterministic per (seed, name) and independent") {
  RandomStream a1(42, "alpha"), a2(42, "alpha"), b(42, "beta"), c(7, "alpha");
  std::vector<double> va1 = a1.normal_vec(16), va2 = a2.normal_vec(16);
  CHECK(va1 == va2);
  CHECK(va1 != b.normal_vec(16));
  CHECK(va1 != c.normal_vec(16));
}

TEST_CASE("sigmoid activation at zero input gives one half") {
  MlpParams p = single_layer({{1.0}}, {0.0}, Activation::Sigmoid);
  auto y = mlp_forward(p, std::vector<double>{0.0});
  CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("single affine layer maps a known input") {
  MlpParams p = single_layer({{2.0, 0.0}, {0.0, 3.0}}, {1.0, -1.0}, Activation::Identity);
  auto y = mlp_forward(p, std::vector<double>{1.0, 1.0});
  REQUIRE(y.size() == 2);
  CHECK(y[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("mlp rejects mismatched input width") {
  MlpParams p = single_layer({{1.0, 2.0}}, {0.0}, Activation::Identity);
  CHECK_THROWS_AS(mlp_forward(p, std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("make_mlp shapes, init distribution, and determinism") {
  RandomStream r1(3, "init"), r2(3, "init");
  MlpParams a = make_mlp(5, 8, 6, Activation::Identity, r1);
  MlpParams b = make_mlp(5, 8, 6, Activation::Identity, r2);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].act == Activation::Tanh);
  CHECK(a.layers[0].weight.rows == 8);
  CHECK(a.layers[0].weight.cols == 5);
  CHECK(a.layers[1].weight.rows == 6);
  CHECK(a.input_dim() == 5);
  CHECK(a.output_dim() == 6);
  CHECK(a.flatten() == b.flatten());
  for (double bias : a.layers[0].bias) CHECK(bias == 0.0);

  RandomStream r3(3, "init");
  MlpParams lin = make_mlp(4, 0, 3, Activation::Sigmoid, r3);
  CHECK(lin.layers.size() == 1);
  CHECK(lin.layers[0].act == Activation::Sigmoid);
}

TEST_CASE("flatten/unflatten round-trips") {
  RandomStream r(11, "init");
  MlpParams p = make_mlp(3, 4, 2, Activation::Identity, r);
  auto flat = p.flatten();
  MlpParams q = p;
  for (auto& l : q.layers) {
    std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  q.unflatten_from(flat);
  CHECK(q.flatten() == flat);
  CHECK(flat.size() == p.param_count());
}

TEST_CASE("kl between unit-variance gaussians shifted by one") {
  GaussianParams q{{1.0}, {0.0}};
  GaussianParams p{{0.0}, {0.0}};
  CHECK(gaussian_kl(q, p) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kl between zero-mean gaussians with variance ratio four") {
  GaussianParams q{{0.0}, {std::log(4.0)}};
  GaussianParams p{{0.0}, {0.0}};
  CHECK(std::fabs(gaussian_kl(q, p) - 0.8068528194400547) < 1e-9);
}

TEST_CASE("kl of identical gaussians is zero and kl sums over dimensions") {
  GaussianParams g{{0.3, -1.2}, {0.1, -0.4}};
  CHECK(gaussian_kl(g, g) == doctest::Approx(0.0).epsilon(1e-15));

  GaussianParams q{{1.0, 0.0}, {0.0, std::log(4.0)}};
  GaussianParams p{{0.0, 0.0}, {0.0, 0.0}};
  CHECK(std::fabs(gaussian_kl(q, p) - (0.5 + 0.8068528194400547)) < 1e-9);
}

TEST_CASE("kl is non-negative over random parameter pairs") {
  RandomStream r(99, "klprop");
  for (int t = 0; t < 10000; ++t) {
    GaussianParams q{{3.0 * r.normal()}, {2.0 * r.normal()}};
    GaussianParams p{{3.0 * r.normal()}, {2.0 * r.normal()}};
    CHECK(gaussian_kl(q, p) >= -1e-12);
  }
}

TEST_CASE("kl closed form agrees with quadrature") {
  RandomStream r(5, "klquad");
  for (int t = 0; t < 10; ++t) {
    double mq = 2.0 * r.normal(), lvq = r.normal(), mp = 2.0 * r.normal(), lvp = r.normal();
    GaussianParams q{{mq}, {lvq}}, p{{mp}, {lvp}};
    CHECK(gaussian_kl(q, p) ==
          doctest::Approx(kl_by_quadrature(mq, lvq, mp, lvp)).epsilon(1e-6));
  }
}

TEST_CASE("kl dimension mismatch throws") {
  GaussianParams q{{0.0, 0.0}, {0.0, 0.0}};
  GaussianParams p{{0.0}, {0.0}};
  CHECK_THROWS_AS(gaussian_kl(q, p), ConfigError);
}

TEST_CASE("kl gradients match finite differences") {
  RandomStream r(17, "klgrad");
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = 3;
    std::vector<double> x(4 * k);
    for (auto& v : x) v = r.normal();
    auto unpack = [k](const std::vector<double>& v) {
      GaussianParams q{{v.begin(), v.begin() + k}, {v.begin() + k, v.begin() + 2 * k}};
      GaussianParams p{{v.begin() + 2 * k, v.begin() + 3 * k},
                       {v.begin() + 3 * k, v.end()}};
      return std::make_pair(q, p);
    };
    auto loss = [&](const std::vector<double>& v) {
      auto [q, p] = unpack(v);
      return gaussian_kl(q, p);
    };
    auto fd = finite_diff_grad(loss, x, 1e-5);
    auto [q, p] = unpack(x);
    std::vector<double> dqm(k, 0.0), dqlv(k, 0.0), dpm(k, 0.0), dplv(k, 0.0);
    gaussian_kl_backward(q, p, 1.0, dqm, dqlv, dpm, dplv);
    std::vector<double> analytic;
    analytic.insert(analytic.end(), dqm.begin(), dqm.end());
    analytic.insert(analytic.end(), dqlv.begin(), dqlv.end());
    analytic.insert(analytic.end(), dpm.begin(), dpm.end());
    analytic.insert(analytic.end(), dplv.begin(), dplv.end());
    CHECK(testutil::grads_close(analytic, fd));
  }
}

TEST_CASE("bernoulli log-likelihood on coin-flip probabilities") {
  std::vector<double> a{1.0, 0.0}, mu{0.5, 0.5};
  CHECK(bernoulli_loglik(a, mu) == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(bernoulli_loglik(a, mu) == doctest::Approx(-1.386294).epsilon(1e-6));
}

TEST_CASE("bernoulli log-likelihood on a mixed vector") {
  std::vector<double> a{1.0, 0.0, 1.0}, mu{0.9, 0.1, 0.8};
  double expect = std::log(0.9) + std::log(0.9) + std::log(0.8);
  CHECK(bernoulli_loglik(a, mu) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(bernoulli_loglik(a, mu) == doctest::Approx(-0.433864583).epsilon(1e-6));
}

TEST_CASE("bernoulli gradients match finite differences") {
  RandomStream r(23, "berngrad");
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(6), mu(6);
    for (auto& v : a) v = r.uniform() < 0.5 ? 0.0 : 1.0;
    for (auto& v : mu) v = 0.05 + 0.9 * r.uniform();
    auto loss = [&](const std::vector<double>& m) { return bernoulli_loglik(a, m); };
    auto fd = finite_diff_grad(loss, mu, 1e-6);
    std::vector<double> analytic(6, 0.0);
    bernoulli_loglik_backward(a, mu, 1.0, analytic);
    CHECK(testutil::grads_close(analytic, fd));
  }
}

TEST_CASE("reparameterized sample from mean two, variance four, noise one half") {
  GaussianParams g{{2.0}, {std::log(4.0)}};
  std::vector<double> noise{0.5};
  auto z = reparam_sample(g, noise);
  CHECK(z[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("reparameterized samples reproduce the target moments") {
  GaussianParams g{{1.5}, {std::log(0.25)}};
  RandomStream r(31, "reparamstats");
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> noise{r.normal()};
    double z = reparam_sample(g, noise)[0];
    sum += z;
    sumsq += z * z;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  double se_mean = 0.5 / std::sqrt(static_cast<double>(n));
  double se_var = 0.25 * std::sqrt(2.0 / (n - 1.0));
  CHECK(std::fabs(mean - 1.5) < 3.0 * se_mean);
  CHECK(std::fabs(var - 0.25) < 3.0 * se_var);
}

TEST_CASE("reparameterization gradients match finite differences") {
  RandomStream r(37, "reparamgrad");
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = 4;
    std::vector<double> noise(k), weight(k), x(2 * k);
    for (auto& v : noise) v = r.normal();
    for (auto& v : weight) v = r.normal();
    for (auto& v : x) v = r.normal();
    auto loss = [&](const std::vector<double>& v) {
      GaussianParams g{{v.begin(), v.begin() + k}, {v.begin() + k, v.end()}};
      auto z = reparam_sample(g, noise);
      return std::inner_product(z.begin(), z.end(), weight.begin(), 0.0);
    };
    auto fd = finite_diff_grad(loss, x, 1e-5);
    GaussianParams g{{x.begin(), x.begin() + k}, {x.begin() + k, x.end()}};
    std::vector<double> dm(k, 0.0), dlv(k, 0.0);
    reparam_backward(g, noise, weight, dm, dlv);
    std::vector<double> analytic(dm);
    analytic.insert(analytic.end(), dlv.begin(), dlv.end());
    CHECK(testutil::grads_close(analytic, fd));
  }
}

TEST_CASE("split_gaussian clamps log-variance and reports the raw value") {
  std::vector<double> out{0.5, -0.25, 15.0, -12.0};
  std::vector<double> raw;
  GaussianParams g = split_gaussian(out, &raw);
  CHECK(g.mean == std::vector<double>{0.5, -0.25});
  CHECK(g.log_var == std::vector<double>{10.0, -10.0});
  CHECK(raw == std::vector<double>{15.0, -12.0});
  CHECK_THROWS_AS(split_gaussian(std::vector<double>{1.0, 2.0, 3.0}), ConfigError);
}

TEST_CASE("probability clipping bounds values and masks blocked gradients") {
  std::vector<double> p{0.0, 0.5, 1.0, 1e-9};
  std::vector<double> mask;
  clip_probs(p, &mask);
  CHECK(p[0] == kProbEps);
  CHECK(p[1] == 0.5);
  CHECK(p[2] == 1.0 - kProbEps);
  CHECK(p[3] == kProbEps);
  CHECK(mask == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  CHECK(clip_prob(0.3) == 0.3);
  CHECK(clip_prob(-2.0) == kProbEps);
}

TEST_CASE("mlp backward matches finite differences across configurations") {
  RandomStream r(41, "mlpgrad");
  for (int t = 0; t < 20; ++t) {
    std::size_t in = 2 + t % 3, hidden = (t % 4 == 0) ? 0 : 3 + t % 2, out = 1 + t % 3;
    Activation act = (t % 3 == 0)   ? Activation::Identity
                     : (t % 3 == 1) ? Activation::Sigmoid
                                    : Activation::Tanh;
    MlpParams p = make_mlp(in, hidden, out, act, r);
    std::vector<double> input = r.normal_vec(in);
    std::vector<double> weight = r.normal_vec(out);
    auto loss_of = [&](const MlpParams& params, const std::vector<double>& x) {
      auto y = mlp_forward(params, x);
      return std::inner_product(y.begin(), y.end(), weight.begin(), 0.0);
    };
    auto flat = p.flatten();
    auto loss_params = [&](const std::vector<double>& v) {
      MlpParams q = p;
      q.unflatten_from(v);
      return loss_of(q, input);
    };
    auto fd = finite_diff_grad(loss_params, flat, 1e-5);

    MlpCache cache;
    auto y = mlp_forward_cached(p, input, cache);
    MlpGrads grads(p);
    auto d_input = mlp_backward(p, cache, weight, grads);

    std::vector<double> analytic;
    for (const auto& l : grads.layers) {
      analytic.insert(analytic.end(), l.weight.data.begin(), l.weight.data.end());
      analytic.insert(analytic.end(), l.bias.begin(), l.bias.end());
    }
    CHECK(testutil::grads_close(analytic, fd));

    auto loss_input = [&](const std::vector<double>& x) { return loss_of(p, x); };
    auto fd_in = finite_diff_grad(loss_input, input, 1e-5);
    CHECK(testutil::grads_close(d_input, fd_in));
    (void)y;
  }
}

TEST_CASE("adam first step matches the hand-derived update") {
  std::vector<double> p{1.0};
  std::vector<double> g{0.5};
  AdamState st(1, 0.01);
  adam_step(std::span<double>(p), std::span<const double>(g), st);
  // After one step the bias corrections cancel: m_hat = g, v_hat = g^2.
  double expect = 1.0 - 0.01 * 0.5 / (std::sqrt(0.25) + 1e-8);
  CHECK(p[0] == doctest::Approx(expect).epsilon(1e-15));
  CHECK(st.step_count == 1);
}

TEST_CASE("adam follows the reference recurrence over several steps") {
  std::vector<double> p{0.7};
  AdamState st(1, 0.05);
  double m = 0.0, v = 0.0, ref = 0.7;
  std::vector<double> gs{0.5, -0.25, 1.5, 0.0, -0.1};
  for (std::size_t t = 0; t < gs.size(); ++t) {
    std::vector<double> g{gs[t]};
    adam_step(std::span<double>(p), std::span<const double>(g), st);
    m = 0.9 * m + 0.1 * gs[t];
    v = 0.999 * v + 0.001 * gs[t] * gs[t];
    double mh = m / (1.0 - std::pow(0.9, static_cast<double>(t + 1)));
    double vh = v / (1.0 - std::pow(0.999, static_cast<double>(t + 1)));
    ref -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("adam applies decoupled weight decay before the step") {
  std::vector<double> p{2.0};
  std::vector<double> g{1.0};
  AdamState st(1, 0.1, 0.5);
  adam_step(std::span<double>(p), std::span<const double>(g), st);
  double expect = 2.0 * (1.0 - 0.1 * 0.5) - 0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(p[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("adam shape mismatch throws") {
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{1.0};
  AdamState st(2, 0.01);
  CHECK_THROWS_AS(adam_step(std::span<double>(p), std::span<const double>(g), st),
                  ConfigError);
}

TEST_CASE("adam over an mlp equals adam over its flattened parameters") {
  RandomStream r(51, "adamflat");
  MlpParams p = make_mlp(3, 4, 2, Activation::Tanh, r);
  MlpParams q = p;
  MlpGrads grads(p);
  RandomStream gr(52, "adamgrads");
  for (auto& l : grads.layers) {
    for (auto& w : l.weight.data) w = gr.normal();
    for (auto& b : l.bias) b = gr.normal();
  }
  std::vector<double> flat_g;
  for (const auto& l : grads.layers) {
    flat_g.insert(flat_g.end(), l.weight.data.begin(), l.weight.data.end());
    flat_g.insert(flat_g.end(), l.bias.begin(), l.bias.end());
  }
  AdamState s1(p.param_count(), 0.01, 1e-4), s2(p.param_count(), 0.01, 1e-4);
  for (int step = 0; step < 3; ++step) {
    adam_step(p, grads, s1);
    auto flat = q.flatten();
    adam_step(std::span<double>(flat), std::span<const double>(flat_g), s2);
    q.unflatten_from(flat);
    CHECK(p.flatten() == q.flatten());
  }
}

TEST_CASE("finite differences recover the gradient of a quadratic") {
  auto loss = [](const std::vector<double>& x) {
    return 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] + x[1] * x[1];
  };
  auto g = finite_diff_grad(loss, {1.0, -2.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-8));   // 6x + 2y
  CHECK(g[1] == doctest::Approx(-2.0).epsilon(1e-8));  // 2x + 2y
}

TEST_CASE("gradient accumulators zero and scale") {
  RandomStream r(61, "gz");
  MlpParams p = make_mlp(2, 3, 1, Activation::Identity, r);
  MlpGrads g(p);
  g.layers[0].weight.at(0, 0) = 4.0;
  g.layers[0].bias[1] = -2.0;
  g.scale(0.5);
  CHECK(g.layers[0].weight.at(0, 0) == 2.0);
  CHECK(g.layers[0].bias[1] == -1.0);
  g.zero();
  CHECK(g.layers[0].weight.at(0, 0) == 0.0);
  CHECK(g.layers[0].bias[1] == 0.0);
}
