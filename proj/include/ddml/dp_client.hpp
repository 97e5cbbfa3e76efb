#pragma once

#include <Eigen/Dense>

#include "ddml/glm.hpp"
#include "ddml/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace ddml::dp {

enum class NoiseFamily { laplace, gaussian };
enum class NoiseLevel { feature, model };

// Client-side privacy parameters. epsilon may be +inf, which disables noise
// entirely (used by the no-noise experiment configurations).
struct PrivacyParams {
  double epsilon = 1.0;
  double gamma = 0.001;  // learning rate
  double clip_lo = -1.0;
  double clip_hi = 1.0;
  NoiseFamily noise = NoiseFamily::laplace;
  double gaussian_delta = 1e-8;  // gaussian only, must be in (0, 1/2)
  NoiseLevel level = NoiseLevel::feature;

  void validate() const;
  bool no_noise() const { return std::isinf(epsilon); }

  // Sensitivity of one update: gamma * (clip_hi - clip_lo), = 2*gamma at defaults.
  double sensitivity() const { return gamma * (clip_hi - clip_lo); }

  // Per-coordinate noise scale (Laplace b, or Gaussian sigma). Model-level
  // privacy multiplies the scale by the expanded dimension p.
  double noise_scale(int p) const;

  // Variance of one coordinate's noise draw; 2b^2 for Laplace, sigma^2 for
  // Gaussian, 0 when noise is off. Pool initialization is calibrated to this.
  double noise_variance(int p) const;

  nlohmann::json to_json() const;
  static PrivacyParams from_json(const nlohmann::json& j);
};

Eigen::MatrixXd clip(const Eigen::MatrixXd& g, double lo, double hi);

double laplace_sample(double scale, Rng& rng);

// Algorithm step: B' = B - gamma * clip(G) + per-coordinate noise. The
// intercept column is a coordinate like any other (its X is identically 1).
glm::WeightVector client_update(const glm::WeightVector& w, const glm::ModelSpec& spec,
                                const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const PrivacyParams& params, Rng& rng);

}  // namespace ddml::dp
