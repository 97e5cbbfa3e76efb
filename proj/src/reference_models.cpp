#include "ddml/reference_models.hpp"

#include "ddml/rng.hpp"

namespace ddml::reference {

using glm::FeatureDef;
using glm::ModelSpec;
using glm::WeightVector;

ModelSpec known_weights_spec() {
  ModelSpec s;
  s.family = glm::Family::logistic;
  s.base_features = {FeatureDef::boolean("B"),   FeatureDef::boolean("E11"),
                     FeatureDef::boolean("E12"), FeatureDef::boolean("E21"),
                     FeatureDef::boolean("E22"), FeatureDef::boolean("E23"),
                     FeatureDef::numeric("D", 0.0, 4.0), FeatureDef::numeric("I", 0.0, 4.0)};
  s.crosses = {{"B", "E11"},   {"B", "E12"},   {"B", "E21"},   {"B", "E22"},  {"B", "E23"},
               {"B", "D"},     {"B", "I"},     {"E11", "E21"}, {"E11", "E22"}, {"E11", "E23"},
               {"E12", "E21"}, {"E12", "E22"}, {"E12", "E23"}, {"D", "E11"},  {"D", "E12"},
               {"I", "E11"},   {"I", "E12"},   {"D", "E21"},   {"D", "E22"},  {"D", "E23"},
               {"I", "E21"},   {"I", "E22"},   {"I", "E23"},   {"D", "I"}};
  s.version = 1;
  s.validate();
  return s;
}

WeightVector known_weights_true() {
  const std::vector<double> flat = {
      0.34,                                        // intercept
      -1.18, 1.05, 1.6, -1.51, 0.72, 1.36,         // B, E11, E12, E21, E22, E23
      -1.41, -1.67,                                // D, I
      -1.14, 1.3,                                  // B x E1*
      1.72, 0.18, -1.52,                           // B x E2*
      1.72, -1.17,                                 // B x D, B x I
      -0.12, -0.53, 1.00,                          // E11 x E2*
      -0.42, -1.64, -1.53,                         // E12 x E2*
      0.64, 0.48,                                  // D x E1*
      -0.17, 0.44,                                 // I x E1*
      -0.51, -0.68, 1.65,                          // D x E2*
      0.51, -1.64, 0.57,                           // I x E2*
      -0.80};                                      // D x I
  return WeightVector::from_flat(known_weights_spec(), flat);
}

ModelSpec desk_multiclass_spec(int features, int classes) {
  ModelSpec s;
  s.family = glm::Family::multiclass;
  s.num_classes = classes;
  s.base_features.reserve(static_cast<std::size_t>(features));
  for (int i = 0; i < features; ++i) {
    s.base_features.push_back(FeatureDef::numeric("x" + std::to_string(i), 0.0, 1.0));
  }
  s.version = 1;
  s.validate();
  return s;
}

WeightVector desk_multiclass_weights(const ModelSpec& spec, std::uint64_t seed, double scale) {
  Rng rng(seed, 0x7e5);
  WeightVector w = WeightVector::zeros(spec);
  for (Eigen::Index r = 0; r < w.coef.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.coef.cols(); ++c) w.coef(r, c) = rng.normal(0.0, scale);
  }
  return w;
}

}  // namespace ddml::reference
