#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "ddml/dp_client.hpp"

using namespace ddml;
using namespace ddml::dp;
using Catch::Approx;

namespace {

glm::ModelSpec unit_spec(int p) {
  glm::ModelSpec s;
  s.family = glm::Family::logistic;
  for (int i = 0; i < p; ++i)
    s.base_features.push_back(glm::FeatureDef::numeric("f" + std::to_string(i), 0, 1));
  return s;
}

// P(Laplace(0,b) <= x)
double laplace_cdf(double x, double b) {
  return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

// Asymptotic Kolmogorov p-value.
double ks_pvalue(double d, long n) {
  const double lambda = (std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(static_cast<double>(n))) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    p += 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("clip clamps coordinate-wise", "[dp]") {
  Eigen::MatrixXd g(1, 3);
  g << -2.0, 0.0, 2.0;
  const auto c = clip(g, -0.1, 0.1);
  CHECK(c(0, 0) == -0.1);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(0, 2) == 0.1);
  CHECK(clip(Eigen::MatrixXd::Constant(1, 1, 1.5), -1, 1)(0, 0) == 1.0);
  CHECK(clip(Eigen::MatrixXd::Constant(1, 1, -0.3), -1, 1)(0, 0) == -0.3);
  CHECK_THROWS_AS(clip(g, 1.0, -1.0), Error);
}

TEST_CASE("laplace scale follows 2 gamma / eps", "[dp]") {
  PrivacyParams p;
  p.gamma = 0.001;
  p.epsilon = 1.0;
  CHECK(p.sensitivity() == Approx(0.002));
  CHECK(p.noise_scale(10) == Approx(0.002));
  p.level = NoiseLevel::model;
  CHECK(p.noise_scale(10) == Approx(0.02));  // scaled by p
  p.level = NoiseLevel::feature;
  p.clip_lo = -0.1;
  p.clip_hi = 0.1;
  CHECK(p.noise_scale(10) == Approx(0.001 * 0.2));
}

TEST_CASE("laplace draws have variance 2 b^2", "[dp]") {
  Rng rng(123);
  const double b = 0.7;
  const long n = 1000000;
  double sum = 0, sumsq = 0;
  for (long i = 0; i < n; ++i) {
    const double x = laplace_sample(b, rng);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(var == Approx(2 * b * b).epsilon(0.03));
  CHECK(std::fabs(mean) <= 0.01);
}

TEST_CASE("client update with zero gradient and no noise is the identity", "[dp]") {
  const auto spec = unit_spec(2);
  glm::WeightVector w = glm::WeightVector::zeros(spec);
  w.coef << 0.5, 1.0, -1.0;
  // perfect prediction: linear family with y = eta exactly
  glm::ModelSpec lin = spec;
  lin.family = glm::Family::linear;
  Eigen::MatrixXd X(2, 2);
  X << 0.2, 0.4, 0.8, 0.1;
  Eigen::VectorXd y = (X * w.coef.row(0).tail(2).transpose()).array() + w.coef(0, 0);
  PrivacyParams p;
  p.epsilon = std::numeric_limits<double>::infinity();
  Rng rng(1);
  const auto out = client_update(w, lin, X, y, p, rng);
  CHECK(out.coef == w.coef);
}

TEST_CASE("saturated gradient steps every weight down by gamma", "[dp]") {
  glm::ModelSpec lin = unit_spec(2);
  lin.family = glm::Family::linear;
  glm::WeightVector w = glm::WeightVector::zeros(lin);
  w.coef << 5.0, 1.0, 1.0;  // predictions overshoot: residual 5+ everywhere
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
  PrivacyParams p;
  p.epsilon = std::numeric_limits<double>::infinity();
  p.gamma = 0.001;
  Rng rng(1);
  const auto out = client_update(w, lin, X, y, p, rng);
  CHECK((w.coef - out.coef).minCoeff() == Approx(0.001));
  CHECK((w.coef - out.coef).maxCoeff() == Approx(0.001));
}

TEST_CASE("client update rejects an empty batch", "[dp]") {
  const auto spec = unit_spec(2);
  const auto w = glm::WeightVector::zeros(spec);
  PrivacyParams p;
  Rng rng(1);
  Eigen::MatrixXd X(0, 2);
  Eigen::VectorXd y(0);
  CHECK_THROWS_AS(client_update(w, spec, X, y, p, rng), Error);
}

TEST_CASE("update noise matches Laplace(0, 2 gamma/eps) by KS", "[dp]") {
  glm::ModelSpec lin = unit_spec(1);
  lin.family = glm::Family::linear;
  glm::WeightVector w = glm::WeightVector::zeros(lin);
  w.coef << 0.3, 0.5;
  Eigen::MatrixXd X(1, 1);
  X << 0.4;
  Eigen::VectorXd y(1);
  y << 0.3 + 0.5 * 0.4;  // zero gradient
  PrivacyParams p;
  p.epsilon = 1.0;
  p.gamma = 0.001;
  Rng rng(20240);
  const long n = 100000;
  std::vector<double> diffs;
  diffs.reserve(n);
  for (long i = 0; i < n; ++i) {
    diffs.push_back(client_update(w, lin, X, y, p, rng).coef(0, 0) - w.coef(0, 0));
  }
  std::sort(diffs.begin(), diffs.end());
  const double b = 2 * p.gamma / p.epsilon;
  double d = 0.0;
  for (long i = 0; i < n; ++i) {
    const double f = laplace_cdf(diffs[static_cast<std::size_t>(i)], b);
    d = std::max(d, std::fabs(f - (i + 1.0) / n));
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
  }
  CHECK(ks_pvalue(d, n) > 0.01);
}

TEST_CASE("per-coordinate update variance is 8 gamma^2/eps^2", "[dp]") {
  glm::ModelSpec lin = unit_spec(1);
  lin.family = glm::Family::linear;
  glm::WeightVector w = glm::WeightVector::zeros(lin);
  w.coef << 0.3, 0.5;
  Eigen::MatrixXd X(1, 1);
  X << 0.4;
  Eigen::VectorXd y(1);
  y << 0.3 + 0.5 * 0.4;
  PrivacyParams p;
  p.epsilon = 2.0;
  p.gamma = 0.004;
  Rng rng(7);
  const long n = 200000;
  double sum = 0, sumsq = 0;
  for (long i = 0; i < n; ++i) {
    const double d = client_update(w, lin, X, y, p, rng).coef(0, 1) - w.coef(0, 1);
    sum += d;
    sumsq += d * d;
  }
  const double var = sumsq / n - (sum / n) * (sum / n);
  const double target = 8 * p.gamma * p.gamma / (p.epsilon * p.epsilon);
  CHECK(var == Approx(target).epsilon(0.05));
}

TEST_CASE("empirical likelihood ratio respects exp(eps) for the worst pair", "[dp]") {
  // Worst-case clipped scalar gradients a=-1 vs a'=+1; outputs differ by
  // a shift of 2 gamma, the full sensitivity.
  const double eps = 1.0, gamma = 0.5;
  const double b = 2 * gamma / eps;
  Rng rng(99);
  const long n = 1000000;
  const double lo = -5 * b, hi = 5 * b;
  const int bins = 50;
  std::vector<long> ha(bins, 0), hb(bins, 0);
  for (long i = 0; i < n; ++i) {
    const double base = rng.laplace(b);
    const double xa = base + gamma;   // w - gamma*(-1) + L
    const double xb2 = base - gamma;  // same noise, a'=+1
    const int ia = static_cast<int>((xa - lo) / (hi - lo) * bins);
    const int ib = static_cast<int>((xb2 - lo) / (hi - lo) * bins);
    if (ia >= 0 && ia < bins) ++ha[static_cast<std::size_t>(ia)];
    if (ib >= 0 && ib < bins) ++hb[static_cast<std::size_t>(ib)];
  }
  const double bound = std::exp(eps) * 1.2;  // 20% sampling tolerance at >=500 counts
  for (int i = 0; i < bins; ++i) {
    if (ha[static_cast<std::size_t>(i)] < 500 || hb[static_cast<std::size_t>(i)] < 500) continue;
    const double r = static_cast<double>(ha[static_cast<std::size_t>(i)]) /
                     static_cast<double>(hb[static_cast<std::size_t>(i)]);
    CHECK(std::max(r, 1 / r) <= bound);
  }
}

TEST_CASE("clipping bounds the update sensitivity by 2 gamma", "[dp]") {
  const auto spec = unit_spec(3);
  Rng rng(31);
  PrivacyParams p;
  p.epsilon = std::numeric_limits<double>::infinity();
  p.gamma = 0.01;
  glm::WeightVector w = glm::WeightVector::zeros(spec);
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd Xa(2, 3), Xb(2, 3);
    Eigen::VectorXd ya(2), yb(2);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) {
        Xa(i, j) = rng.uniform();
        Xb(i, j) = rng.uniform();
      }
      ya[i] = rng.bernoulli(0.5);
      yb[i] = rng.bernoulli(0.5);
    }
    const auto ua = client_update(w, spec, Xa, ya, p, rng);
    const auto ub = client_update(w, spec, Xb, yb, p, rng);
    CHECK((ua.coef - ub.coef).cwiseAbs().maxCoeff() <= 2 * p.gamma + 1e-15);
  }
}

TEST_CASE("stochastic operations replay bit-identically for a fixed seed", "[dp]") {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.laplace(0.5) == b.laplace(0.5));
    REQUIRE(a.normal(0, 1) == b.normal(0, 1));
    REQUIRE(a.uniform_index(17) == b.uniform_index(17));
  }
  Rng c(42, 4);
  bool same = true;
  for (int i = 0; i < 100; ++i) same &= (a.uniform() == c.uniform());
  CHECK_FALSE(same);  // different streams decorrelate
}

TEST_CASE("privacy params validate their domain", "[dp]") {
  PrivacyParams p;
  p.epsilon = -1;
  CHECK_THROWS_AS(p.validate(), Error);
  p = PrivacyParams{};
  p.clip_lo = 1;
  p.clip_hi = -1;
  CHECK_THROWS_AS(p.validate(), Error);
  p = PrivacyParams{};
  p.noise = NoiseFamily::gaussian;
  p.gaussian_delta = 0.7;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("gaussian noise option calibrates sigma from the quoted inequality", "[dp]") {
  PrivacyParams p;
  p.noise = NoiseFamily::gaussian;
  p.gaussian_delta = 1e-8;
  p.epsilon = 2.0;
  p.gamma = 0.001;
  const double w = p.sensitivity();
  const double expected = w * std::sqrt(2 * (std::log(1 / (2 * 1e-8)) + 2.0)) / 2.0;
  CHECK(p.noise_scale(4) == Approx(expected));
  CHECK(p.noise_variance(4) == Approx(expected * expected));
}
