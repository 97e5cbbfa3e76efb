#pragma once

#include "ddml/glm.hpp"

namespace ddml::reference {

// The 33-weight known-weights logistic model: boolean indicators B, E11, E12,
// E21, E22, E23, numeric D and I, and all 24 two-way crosses among the five
// underlying predictors. Indicator pairs are independent booleans so the
// design stays full rank (one-hot blocks plus an intercept are collinear and
// the generating weights would not be identifiable).
glm::ModelSpec known_weights_spec();
glm::WeightVector known_weights_true();

// Desk-scale 10-class synthetic benchmark: p uniform numeric features, class
// weights drawn once from a seeded stream.
glm::ModelSpec desk_multiclass_spec(int features, int classes = 10);
glm::WeightVector desk_multiclass_weights(const glm::ModelSpec& spec, std::uint64_t seed,
                                          double scale = 1.0);

}  // namespace ddml::reference
