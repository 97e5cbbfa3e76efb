#include "ddml/dp_client.hpp"

#include <nlohmann/json.hpp>

#include "ddml/privacy.hpp"

namespace ddml::dp {

using nlohmann::json;

void PrivacyParams::validate() const {
  if (!(epsilon > 0)) fail(Errc::bad_config, "epsilon must be positive");
  if (!(gamma > 0)) fail(Errc::bad_config, "gamma must be positive");
  if (!(clip_lo < clip_hi)) fail(Errc::bad_config, "clip_lo must be < clip_hi");
  if (noise == NoiseFamily::gaussian && !(gaussian_delta > 0 && gaussian_delta < 0.5))
    fail(Errc::delta_out_of_range, "gaussian delta must be in (0, 1/2)");
}

double PrivacyParams::noise_scale(int p) const {
  if (no_noise()) return 0.0;
  double level_factor = level == NoiseLevel::model ? static_cast<double>(p) : 1.0;
  if (noise == NoiseFamily::laplace) return level_factor * sensitivity() / epsilon;
  return level_factor * privacy::gaussian_sigma(sensitivity(), epsilon, gaussian_delta);
}

double PrivacyParams::noise_variance(int p) const {
  double s = noise_scale(p);
  return noise == NoiseFamily::laplace ? 2.0 * s * s : s * s;
}

Eigen::MatrixXd clip(const Eigen::MatrixXd& g, double lo, double hi) {
  if (!(lo < hi)) fail(Errc::bad_config, "clip bounds must satisfy lo < hi");
  return g.cwiseMax(lo).cwiseMin(hi);
}

double laplace_sample(double scale, Rng& rng) {
  if (!(scale > 0)) fail(Errc::bad_config, "laplace scale must be positive");
  return rng.laplace(scale);
}

glm::WeightVector client_update(const glm::WeightVector& w, const glm::ModelSpec& spec,
                                const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const PrivacyParams& params, Rng& rng) {
  params.validate();
  Eigen::MatrixXd g = glm::gradient_matrix(spec, w, X, y);  // throws EmptyBatch on N_c = 0
  glm::WeightVector out;
  out.coef = w.coef - params.gamma * clip(g, params.clip_lo, params.clip_hi);
  const double scale = params.noise_scale(spec.dimension());
  if (scale > 0.0) {
    for (Eigen::Index r = 0; r < out.coef.rows(); ++r) {
      for (Eigen::Index c = 0; c < out.coef.cols(); ++c) {
        out.coef(r, c) += params.noise == NoiseFamily::laplace ? rng.laplace(scale)
                                                               : rng.normal(0.0, scale);
      }
    }
  }
  return out;
}

json PrivacyParams::to_json() const {
  json j{{"epsilon", std::isinf(epsilon) ? json("inf") : json(epsilon)},
         {"gamma", gamma},
         {"clip_lo", clip_lo},
         {"clip_hi", clip_hi},
         {"noise", noise == NoiseFamily::laplace ? "laplace" : "gaussian"},
         {"level", level == NoiseLevel::feature ? "feature" : "model"}};
  if (noise == NoiseFamily::gaussian) j["delta"] = gaussian_delta;
  return j;
}

PrivacyParams PrivacyParams::from_json(const json& j) {
  PrivacyParams p;
  if (j.contains("epsilon")) {
    const auto& e = j.at("epsilon");
    if (e.is_string()) {
      const auto s = e.get<std::string>();
      if (s != "inf") fail(Errc::bad_config, "epsilon must be a number or \"inf\"");
      p.epsilon = std::numeric_limits<double>::infinity();
    } else {
      p.epsilon = e.get<double>();
    }
  }
  p.gamma = j.value("gamma", p.gamma);
  p.clip_lo = j.value("clip_lo", p.clip_lo);
  p.clip_hi = j.value("clip_hi", p.clip_hi);
  if (j.contains("noise")) {
    const auto s = j.at("noise").get<std::string>();
    if (s == "laplace") {
      p.noise = NoiseFamily::laplace;
    } else if (s == "gaussian") {
      p.noise = NoiseFamily::gaussian;
    } else {
      fail(Errc::bad_config, "unknown noise family '" + s + "'");
    }
  }
  p.gaussian_delta = j.value("delta", p.gaussian_delta);
  if (j.contains("level")) {
    const auto s = j.at("level").get<std::string>();
    if (s == "feature") {
      p.level = NoiseLevel::feature;
    } else if (s == "model") {
      p.level = NoiseLevel::model;
    } else {
      fail(Errc::bad_config, "unknown noise level '" + s + "'");
    }
  }
  p.validate();
  return p;
}

}  // namespace ddml::dp
