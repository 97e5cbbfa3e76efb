#pragma once

#include <Eigen/Dense>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ddml/errors.hpp"
#include "ddml/rng.hpp"

namespace ddml::privacy {

// Adversary I sees the channel itself; the guarantee is the mechanism's own
// epsilon. Kept as a function so reports treat all adversaries uniformly.
double adv1_epsilon(double epsilon);

// Expected privacy loss against an internal threat that sees the k instances
// but not the pre-image: (k-1)/k * eps/2.
double adv2_expected_loss(int k, double epsilon);

// Exact two-instance likelihood ratio
//   [e^(-|B1-B2+g*a| eps/2g) + e^(-|B2-B1+g*a| eps/2g)] / [same with a'].
double adv2_ratio(double B1, double B2, double a, double a_prime, double gamma, double epsilon);

struct Adv2GridResult {
  double max_ratio;
  double bound;  // exp(eps/2)
};
// Exhaustive search over B1-B2 in [-3g, 3g] (step g/100) and a, a' in {-1,0,1}.
Adv2GridResult adv2_grid_max(double gamma, double epsilon);

struct DiscardExact {
  double q1;             // closed form 1 - 1/k
  Eigen::VectorXd q;     // q_1..q_{k-1} from the tridiagonal solve
  double solve_max_err;  // max |q_i - (1 - i/k)|
};
// Absorption probabilities of the lineage chain with p_i = (k-i)i/k^2.
DiscardExact discard_markov_exact(int k);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long trials = 0;
};
McEstimate discard_simulate(int k, long trials, Rng& rng);

struct EpsAfterT {
  double exact;   // root of the calibration quadratic
  double approx;  // eps/sqrt(2T) * sqrt(ln(1/(2 delta_T)))
};
EpsAfterT eps_after_T(double epsilon, double gamma, double T, double delta_T);

// Minimal Gaussian scale ensuring (eps_T, delta_T)-DP for l2 sensitivity w:
// sigma = w * sqrt(2 (ln(1/(2 delta_T)) + eps_T)) / eps_T.
double gaussian_sigma(double w, double eps_T, double delta_T);

// Two-pre-image likelihood ratio R from the distance lemma.
double preimage_ratio(double b_star, double b1, double b2, double gamma, double epsilon);

// Probability that a noisy update of a stabilized pool has >= 2 pre-image
// candidates within t*gamma. Pools start at N(0, (k/2) * 8 gamma^2/eps^2) and
// are stabilized with 50k pure-noise draw/discard rounds before measuring.
McEstimate empirical_preimage_amplification(int k, double gamma, double epsilon, double t,
                                            long trials, std::uint64_t seed, int workers = 1);

// Summary-table entries {I: eps, II: (k-1)/(2k) eps, III: eps/(k sqrt(T))}
// plus the exact/approximate accumulation numbers, as a JSON report.
nlohmann::json privacy_report(int k, double epsilon, double gamma, double T, double delta_T);

}  // namespace ddml::privacy
