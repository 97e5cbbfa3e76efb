#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddml/errors.hpp"

namespace ddml::glm {

enum class Family { linear, logistic, multiclass };

struct FeatureDef {
  enum class Kind { numeric, categorical, boolean };

  std::string name;
  Kind kind = Kind::numeric;
  double min = 0.0;                  // numeric only
  double max = 1.0;                  // numeric only
  std::vector<std::string> levels;   // categorical only

  int width() const { return kind == Kind::categorical ? static_cast<int>(levels.size()) : 1; }

  static FeatureDef numeric(std::string name, double min, double max);
  static FeatureDef categorical(std::string name, std::vector<std::string> levels);
  static FeatureDef boolean(std::string name);
};

// Raw (unexpanded) client-side value of one feature.
using RawValue = std::variant<bool, double, std::string>;
using RawMap = std::map<std::string, RawValue>;

// Server-controlled model schema. Determines the expanded dimension p:
// numerics and booleans contribute one column, categoricals one column per
// level, and each cross contributes width(u)*width(v) pairwise products.
struct ModelSpec {
  Family family = Family::logistic;
  int num_classes = 2;  // multiclass only
  std::vector<FeatureDef> base_features;
  std::vector<std::pair<std::string, std::string>> crosses;
  std::uint64_t version = 0;

  int dimension() const;                       // p
  int class_rows() const;                      // 1 for scalar families
  int feature_index(const std::string&) const; // index into base_features, -1 if absent
  void validate() const;

  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// Intercept + p weights per class row. coef is class_rows x (p+1); column 0
// holds the intercept.
struct WeightVector {
  Eigen::MatrixXd coef;

  static WeightVector zeros(const ModelSpec& spec);
  static WeightVector from_flat(const ModelSpec& spec, const std::vector<double>& flat);

  int rows() const { return static_cast<int>(coef.rows()); }
  int dim() const { return static_cast<int>(coef.cols()) - 1; }  // p
  bool same_shape(const WeightVector& o) const {
    return coef.rows() == o.coef.rows() && coef.cols() == o.coef.cols();
  }
  std::vector<double> flatten() const;  // row-major, [b0, b1..bp] per class
};

Eigen::VectorXd expand_features(const ModelSpec& spec, const RawMap& raw);

// Returns a length-1 vector (mean response) for linear/logistic, or the
// softmax class-probability vector for multiclass.
Eigen::VectorXd predict(const ModelSpec& spec, const WeightVector& w, const Eigen::VectorXd& x);

// Batch forms used by the simulator. X rows are expanded examples.
Eigen::MatrixXd gradient_matrix(const ModelSpec& spec, const WeightVector& w,
                                const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::VectorXd>& y);

WeightVector average_gradient(const ModelSpec& spec, const WeightVector& w,
                              const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const Eigen::Ref<const Eigen::VectorXd>& y);

double loss(const ModelSpec& spec, const WeightVector& w,
            const Eigen::Ref<const Eigen::MatrixXd>& X,
            const Eigen::Ref<const Eigen::VectorXd>& y);

double accuracy(const ModelSpec& spec, const WeightVector& w,
                const Eigen::Ref<const Eigen::MatrixXd>& X,
                const Eigen::Ref<const Eigen::VectorXd>& y);

WeightVector average_models(const std::vector<WeightVector>& models);

}  // namespace ddml::glm
