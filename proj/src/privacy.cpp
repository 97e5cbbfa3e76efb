#include "ddml/privacy.hpp"

#include <cmath>
#include <thread>
#include <vector>

#include <Eigen/LU>
#include <nlohmann/json.hpp>

#include "ddml/errors.hpp"

namespace ddml::privacy {

using nlohmann::json;

double adv1_epsilon(double epsilon) { return epsilon; }

double adv2_expected_loss(int k, double epsilon) {
  if (k < 2) fail(Errc::bad_config, "adversary II needs k >= 2");
  return (static_cast<double>(k - 1) / k) * epsilon / 2.0;
}

namespace {

// log(e^x + e^y), stable for widely separated exponents.
double log_add_exp(double x, double y) {
  const double hi = std::max(x, y), lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

double adv2_ratio(double B1, double B2, double a, double a_prime, double gamma, double epsilon) {
  const double c = epsilon / (2.0 * gamma);
  const double d = B1 - B2;
  const double log_num =
      log_add_exp(-c * std::fabs(d + gamma * a), -c * std::fabs(-d + gamma * a));
  const double log_den =
      log_add_exp(-c * std::fabs(d + gamma * a_prime), -c * std::fabs(-d + gamma * a_prime));
  return std::exp(log_num - log_den);
}

Adv2GridResult adv2_grid_max(double gamma, double epsilon) {
  const double step = gamma / 100.0;
  double best = 0.0;
  const double grads[3] = {-1.0, 0.0, 1.0};
  for (int i = -300; i <= 300; ++i) {
    const double B1 = i * step;  // only the difference B1-B2 matters
    for (double a : grads) {
      for (double ap : grads) {
        best = std::max(best, adv2_ratio(B1, 0.0, a, ap, gamma, epsilon));
      }
    }
  }
  return {best, std::exp(epsilon / 2.0)};
}

DiscardExact discard_markov_exact(int k) {
  if (k < 1) fail(Errc::bad_config, "k must be >= 1");
  DiscardExact out;
  out.q1 = 1.0 - 1.0 / static_cast<double>(k);
  if (k == 1) {
    out.q = Eigen::VectorXd();
    out.solve_max_err = 0.0;
    return out;
  }
  // States 1..k-1; p_i (2 q_i - q_{i-1} - q_{i+1}) = 0 with q_0 = 1, q_k = 0.
  const int m = k - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (int i = 1; i <= m; ++i) {
    const double p_i = static_cast<double>(k - i) * i / (static_cast<double>(k) * k);
    A(i - 1, i - 1) = 2.0 * p_i;
    if (i > 1) A(i - 1, i - 2) = -p_i;
    if (i < m) A(i - 1, i) = -p_i;
    if (i == 1) b(0) = p_i;  // p_1 * q_0
  }
  out.q = A.partialPivLu().solve(b);
  double err = 0.0;
  for (int i = 1; i <= m; ++i) {
    err = std::max(err, std::fabs(out.q(i - 1) - (1.0 - static_cast<double>(i) / k)));
  }
  out.solve_max_err = err;
  return out;
}

McEstimate discard_simulate(int k, long trials, Rng& rng) {
  if (k < 1) fail(Errc::bad_config, "k must be >= 1");
  if (trials < 1) fail(Errc::bad_config, "trials must be >= 1");
  long absorbed_zero = 0;
  const double k2 = static_cast<double>(k) * k;
  for (long t = 0; t < trials; ++t) {
    int state = 1;
    while (state != 0 && state != k) {
      const double p = static_cast<double>(k - state) * state / k2;
      const double u = rng.uniform();
      if (u < p) {
        --state;
      } else if (u < 2.0 * p) {
        ++state;
      }
    }
    absorbed_zero += (state == 0);
  }
  McEstimate e;
  e.trials = trials;
  e.estimate = static_cast<double>(absorbed_zero) / static_cast<double>(trials);
  e.std_error = std::sqrt(e.estimate * (1.0 - e.estimate) / static_cast<double>(trials));
  return e;
}

EpsAfterT eps_after_T(double epsilon, double gamma, double T, double delta_T) {
  if (!(delta_T > 0.0 && delta_T < 0.5))
    fail(Errc::delta_out_of_range, "delta_T must be in (0, 1/2)");
  if (!(T >= 1.0)) fail(Errc::bad_config, "T must be >= 1");
  const double w = std::sqrt(2.0) * gamma;
  const double L = std::log(1.0 / (2.0 * delta_T));
  const double c = epsilon * epsilon * w * w / (8.0 * gamma * gamma * T);
  const double x = 16.0 * T * gamma * gamma / (epsilon * epsilon * w * w) * L;
  EpsAfterT out;
  out.exact = c * (1.0 + std::sqrt(1.0 + x));
  out.approx = epsilon / std::sqrt(2.0 * T) * std::sqrt(L);
  return out;
}

double gaussian_sigma(double w, double eps_T, double delta_T) {
  if (!(delta_T > 0.0 && delta_T < 0.5))
    fail(Errc::delta_out_of_range, "delta_T must be in (0, 1/2)");
  if (!(eps_T > 0.0)) fail(Errc::bad_config, "eps_T must be positive");
  return w * std::sqrt(2.0 * (std::log(1.0 / (2.0 * delta_T)) + eps_T)) / eps_T;
}

double preimage_ratio(double b_star, double b1, double b2, double gamma, double epsilon) {
  const double c = epsilon / (2.0 * gamma);
  const double log_num = log_add_exp(-c * std::fabs(b_star - b1 + gamma),
                                     -c * std::fabs(b_star - b2 + gamma));
  const double log_den = log_add_exp(-c * std::fabs(b_star - b1 - gamma),
                                     -c * std::fabs(b_star - b2 - gamma));
  return std::exp(log_num - log_den);
}

namespace {

// One worker's share of the pre-image experiment. Pools are burned in with
// pure-noise draw/discard rounds so the measured pool carries the process's
// true stationary correlation structure, not just its marginal variance.
long preimage_hits(int k, double gamma, double epsilon, double t, long trials, Rng& rng) {
  const double b = 2.0 * gamma / epsilon;
  const double sigma2 = 8.0 * gamma * gamma / (epsilon * epsilon);
  const double init_sd = std::sqrt(k / 2.0 * sigma2);
  const long trials_per_pool = 200;
  long hits = 0;
  long done = 0;
  std::vector<double> pool(static_cast<std::size_t>(k));
  while (done < trials) {
    for (auto& v : pool) v = rng.normal(0.0, init_sd);
    for (long r = 0; r < 50L * k; ++r) {
      const auto di = rng.uniform_index(static_cast<std::uint64_t>(k));
      const auto rj = rng.uniform_index(static_cast<std::uint64_t>(k));
      pool[rj] = pool[di] + rng.laplace(b);
    }
    const long batch = std::min<long>(trials_per_pool, trials - done);
    for (long i = 0; i < batch; ++i) {
      const auto di = rng.uniform_index(static_cast<std::uint64_t>(k));
      const double b_star = pool[di] + rng.laplace(b);
      int within = 0;
      for (double v : pool) within += (std::fabs(v - b_star) <= t * gamma);
      hits += (within >= 2);
    }
    done += batch;
  }
  return hits;
}

}  // namespace

McEstimate empirical_preimage_amplification(int k, double gamma, double epsilon, double t,
                                            long trials, std::uint64_t seed, int workers) {
  if (k < 2) fail(Errc::bad_config, "pre-image experiment needs k >= 2");
  if (trials < 1) fail(Errc::bad_config, "trials must be >= 1");
  workers = std::max(1, workers);
  std::vector<long> hits(static_cast<std::size_t>(workers), 0);
  std::vector<std::thread> threads;
  const long share = (trials + workers - 1) / workers;
  for (int wid = 0; wid < workers; ++wid) {
    const long lo = wid * share;
    const long n = std::max<long>(0, std::min<long>(share, trials - lo));
    if (n == 0) break;
    threads.emplace_back([&, wid, n] {
      Rng rng(seed, 0x9e000000u + static_cast<std::uint64_t>(wid));
      hits[static_cast<std::size_t>(wid)] = preimage_hits(k, gamma, epsilon, t, n, rng);
    });
  }
  for (auto& th : threads) th.join();
  long total = 0;
  for (long h : hits) total += h;
  McEstimate e;
  e.trials = trials;
  e.estimate = static_cast<double>(total) / static_cast<double>(trials);
  e.std_error = std::sqrt(e.estimate * (1.0 - e.estimate) / static_cast<double>(trials));
  return e;
}

json privacy_report(int k, double epsilon, double gamma, double T, double delta_T) {
  const auto acc = eps_after_T(epsilon, gamma, T, delta_T);
  json j;
  j["adversary_I"] = {{"adversary", "channel_listener"},
                      {"epsilon_effective", adv1_epsilon(epsilon)},
                      {"delta", 0.0},
                      {"method", "closed_form"}};
  j["adversary_II"] = {{"adversary", "internal_threat"},
                       {"epsilon_effective", adv2_expected_loss(k, epsilon)},
                       {"delta", 0.0},
                       {"method", "closed_form"},
                       {"worst_case_ratio_bound", std::exp(epsilon / 2.0)}};
  j["adversary_III"] = {{"adversary", "opportunistic_threat"},
                        {"epsilon_effective", epsilon / (k * std::sqrt(T))},
                        {"delta", delta_T},
                        {"method", "closed_form"},
                        {"T", T},
                        {"eps_T_exact", acc.exact},
                        {"eps_T_approx", acc.approx},
                        {"note", "expected guarantee composes the discard survival factor 1/k "
                                 "with the 1/sqrt(T) noise accumulation"}};
  return j;
}

}  // namespace ddml::privacy
