#pragma once

#include <Eigen/Dense>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "ddml/glm.hpp"
#include "ddml/rng.hpp"

namespace ddml::data {

// Expanded, normalized examples: X rows live in [0,1]^p.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  long n() const { return static_cast<long>(X.rows()); }
};

// Draws raw features uniformly per FeatureDef, expands them, and samples the
// response from the GLM at the given true weights (Bernoulli for logistic,
// class draw from the softmax for multiclass, Gaussian with linear_noise_sd
// clamped to [0,1] for linear).
Dataset gen_synthetic(const glm::ModelSpec& spec, const glm::WeightVector& true_weights, long n,
                      Rng& rng, double linear_noise_sd = 0.05);

// Big-endian IDX pair (images magic 0x00000803, labels 0x00000801); pixels are
// scaled by 1/255 and each image flattens to rows*cols features. limit = 0
// reads everything.
Dataset read_idx(const std::string& images_path, const std::string& labels_path, long limit);

// {"spec": {...}, "examples": [{"raw": {...}, "response": y}, ...]} files used
// by the network agent; every raw map is expanded through the spec.
Dataset load_examples_json(const std::string& path, const glm::ModelSpec& spec);
void save_examples_json(const std::string& path, const glm::ModelSpec& spec,
                        const std::vector<glm::RawMap>& raws, const Eigen::VectorXd& y);

}  // namespace ddml::data
