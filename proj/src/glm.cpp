#include "ddml/glm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

namespace ddml::glm {

using nlohmann::json;

namespace {

constexpr double kLogFloor = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Softmax probabilities for score matrix (n x C), numerically stabilized.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd p = (scores.colwise() - scores.rowwise().maxCoeff()).array().exp();
  return p.array().colwise() / p.rowwise().sum().array();
}

// Scores for all examples: [1 X] * coef^T, shape n x class_rows.
Eigen::MatrixXd scores_of(const WeightVector& w, const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd s = X * w.coef.rightCols(w.dim()).transpose();
  s.rowwise() += w.coef.col(0).transpose();
  return s;
}

void check_batch_shapes(const ModelSpec& spec, const WeightVector& w,
                        const Eigen::Ref<const Eigen::MatrixXd>& X,
                        const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (w.dim() != spec.dimension() || w.rows() != spec.class_rows())
    fail(Errc::shape_mismatch, "weight shape does not match spec");
  if (X.cols() != spec.dimension()) fail(Errc::shape_mismatch, "feature matrix width != p");
  if (X.rows() != y.size()) fail(Errc::shape_mismatch, "feature/response count differ");
}

}  // namespace

FeatureDef FeatureDef::numeric(std::string name, double min, double max) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = Kind::numeric;
  f.min = min;
  f.max = max;
  return f;
}

FeatureDef FeatureDef::categorical(std::string name, std::vector<std::string> levels) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = Kind::categorical;
  f.levels = std::move(levels);
  return f;
}

FeatureDef FeatureDef::boolean(std::string name) {
  FeatureDef f;
  f.name = std::move(name);
  f.kind = Kind::boolean;
  return f;
}

int ModelSpec::dimension() const {
  int p = 0;
  for (const auto& f : base_features) p += f.width();
  for (const auto& [a, b] : crosses) {
    p += base_features[feature_index(a)].width() * base_features[feature_index(b)].width();
  }
  return p;
}

int ModelSpec::class_rows() const { return family == Family::multiclass ? num_classes : 1; }

int ModelSpec::feature_index(const std::string& name) const {
  for (std::size_t i = 0; i < base_features.size(); ++i) {
    if (base_features[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void ModelSpec::validate() const {
  if (family == Family::multiclass && num_classes < 2)
    fail(Errc::bad_config, "multiclass needs num_classes >= 2");
  std::set<std::string> seen;
  for (const auto& f : base_features) {
    if (!seen.insert(f.name).second) fail(Errc::bad_config, "duplicate feature name " + f.name);
    if (f.kind == FeatureDef::Kind::numeric && !(f.min < f.max))
      fail(Errc::bad_config, "numeric feature " + f.name + " needs min < max");
    if (f.kind == FeatureDef::Kind::categorical) {
      std::set<std::string> lv(f.levels.begin(), f.levels.end());
      if (lv.size() < 2 || lv.size() != f.levels.size())
        fail(Errc::bad_config, "categorical feature " + f.name + " needs >=2 distinct levels");
    }
  }
  for (const auto& [a, b] : crosses) {
    if (a == b) fail(Errc::bad_config, "cross of feature " + a + " with itself");
    if (feature_index(a) < 0 || feature_index(b) < 0)
      fail(Errc::bad_config, "cross references unknown feature " + a + "x" + b);
  }
}

WeightVector WeightVector::zeros(const ModelSpec& spec) {
  WeightVector w;
  w.coef = Eigen::MatrixXd::Zero(spec.class_rows(), spec.dimension() + 1);
  return w;
}

WeightVector WeightVector::from_flat(const ModelSpec& spec, const std::vector<double>& flat) {
  const int rows = spec.class_rows();
  const int cols = spec.dimension() + 1;
  if (static_cast<int>(flat.size()) != rows * cols)
    fail(Errc::shape_mismatch, "flat weight length " + std::to_string(flat.size()) +
                                   " != " + std::to_string(rows * cols));
  WeightVector w;
  w.coef.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w.coef(r, c) = flat[static_cast<std::size_t>(r) * cols + c];
  return w;
}

std::vector<double> WeightVector::flatten() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(coef.size()));
  for (int r = 0; r < coef.rows(); ++r)
    for (int c = 0; c < coef.cols(); ++c) out.push_back(coef(r, c));
  return out;
}

Eigen::VectorXd expand_features(const ModelSpec& spec, const RawMap& raw) {
  const int p = spec.dimension();
  Eigen::VectorXd x(p);

  // Expand base blocks, remembering offsets for the cross pass.
  std::vector<int> offset(spec.base_features.size());
  int at = 0;
  for (std::size_t i = 0; i < spec.base_features.size(); ++i) {
    const FeatureDef& f = spec.base_features[i];
    offset[i] = at;
    auto it = raw.find(f.name);
    if (it == raw.end()) fail(Errc::unknown_feature, "missing raw value for " + f.name);
    const RawValue& v = it->second;
    switch (f.kind) {
      case FeatureDef::Kind::numeric: {
        const double* d = std::get_if<double>(&v);
        if (!d) fail(Errc::bad_config, "feature " + f.name + " expects a numeric value");
        double clamped = std::clamp(*d, f.min, f.max);
        x[at++] = (clamped - f.min) / (f.max - f.min);
        break;
      }
      case FeatureDef::Kind::boolean: {
        if (const bool* b = std::get_if<bool>(&v)) {
          x[at++] = *b ? 1.0 : 0.0;
        } else if (const double* d = std::get_if<double>(&v)) {
          x[at++] = (*d != 0.0) ? 1.0 : 0.0;
        } else {
          fail(Errc::bad_config, "feature " + f.name + " expects a boolean value");
        }
        break;
      }
      case FeatureDef::Kind::categorical: {
        const std::string* s = std::get_if<std::string>(&v);
        if (!s) fail(Errc::bad_config, "feature " + f.name + " expects a level name");
        auto lev = std::find(f.levels.begin(), f.levels.end(), *s);
        if (lev == f.levels.end())
          fail(Errc::unknown_level, "feature " + f.name + " has no level '" + *s + "'");
        for (std::size_t l = 0; l < f.levels.size(); ++l)
          x[at++] = (static_cast<std::ptrdiff_t>(l) == lev - f.levels.begin()) ? 1.0 : 0.0;
        break;
      }
    }
  }

  // Crosses: all pairwise products of the two expanded blocks, u-major.
  for (const auto& [a, b] : spec.crosses) {
    int ia = spec.feature_index(a), ib = spec.feature_index(b);
    int wa = spec.base_features[ia].width(), wb = spec.base_features[ib].width();
    for (int i = 0; i < wa; ++i)
      for (int j = 0; j < wb; ++j) x[at++] = x[offset[ia] + i] * x[offset[ib] + j];
  }
  return x;
}

Eigen::VectorXd predict(const ModelSpec& spec, const WeightVector& w, const Eigen::VectorXd& x) {
  if (w.dim() != spec.dimension() || w.rows() != spec.class_rows() || x.size() != spec.dimension())
    fail(Errc::shape_mismatch, "predict: weight/feature shapes do not match spec");
  Eigen::VectorXd eta = w.coef.col(0) + w.coef.rightCols(w.dim()) * x;
  switch (spec.family) {
    case Family::linear:
      return eta;
    case Family::logistic:
      return eta.unaryExpr([](double z) { return sigmoid(z); });
    case Family::multiclass: {
      Eigen::VectorXd p = (eta.array() - eta.maxCoeff()).exp();
      return p / p.sum();
    }
  }
  return eta;
}

Eigen::MatrixXd gradient_matrix(const ModelSpec& spec, const WeightVector& w,
                                const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::VectorXd>& y) {
  check_batch_shapes(spec, w, X, y);
  const auto n = X.rows();
  if (n == 0) fail(Errc::empty_batch, "average_gradient over empty batch");

  Eigen::MatrixXd g(w.rows(), w.dim() + 1);
  if (spec.family == Family::multiclass) {
    Eigen::MatrixXd r = softmax_rows(scores_of(w, X));  // n x C
    for (Eigen::Index i = 0; i < n; ++i) r(i, static_cast<int>(y[i])) -= 1.0;
    g.col(0) = r.colwise().mean().transpose();
    g.rightCols(w.dim()) = (r.transpose() * X) / static_cast<double>(n);
  } else {
    Eigen::VectorXd eta = scores_of(w, X).col(0);
    Eigen::VectorXd yhat =
        spec.family == Family::linear ? eta : eta.unaryExpr([](double z) { return sigmoid(z); });
    Eigen::VectorXd r = yhat - y;
    g(0, 0) = r.mean();
    g.row(0).tail(w.dim()) = (r.transpose() * X) / static_cast<double>(n);
  }
  return g;
}

WeightVector average_gradient(const ModelSpec& spec, const WeightVector& w,
                              const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const Eigen::Ref<const Eigen::VectorXd>& y) {
  WeightVector g;
  g.coef = gradient_matrix(spec, w, X, y);
  return g;
}

double loss(const ModelSpec& spec, const WeightVector& w,
            const Eigen::Ref<const Eigen::MatrixXd>& X,
            const Eigen::Ref<const Eigen::VectorXd>& y) {
  check_batch_shapes(spec, w, X, y);
  const auto n = X.rows();
  if (n == 0) fail(Errc::empty_batch, "loss over empty dataset");

  if (spec.family == Family::multiclass) {
    Eigen::MatrixXd p = softmax_rows(scores_of(w, X));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      total -= std::log(std::max(p(i, static_cast<int>(y[i])), kLogFloor));
    return total / static_cast<double>(n);
  }
  Eigen::VectorXd eta = scores_of(w, X).col(0);
  if (spec.family == Family::linear) {
    return (eta - y).squaredNorm() / static_cast<double>(n);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = std::clamp(sigmoid(eta[i]), kLogFloor, 1.0 - kLogFloor);
    total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(n);
}

double accuracy(const ModelSpec& spec, const WeightVector& w,
                const Eigen::Ref<const Eigen::MatrixXd>& X,
                const Eigen::Ref<const Eigen::VectorXd>& y) {
  check_batch_shapes(spec, w, X, y);
  const auto n = X.rows();
  if (n == 0) fail(Errc::empty_batch, "accuracy over empty dataset");

  Eigen::Index hits = 0;
  if (spec.family == Family::multiclass) {
    Eigen::MatrixXd s = scores_of(w, X);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index am = 0;
      s.row(i).maxCoeff(&am);
      hits += (am == static_cast<Eigen::Index>(y[i]));
    }
  } else if (spec.family == Family::logistic) {
    Eigen::VectorXd eta = scores_of(w, X).col(0);
    for (Eigen::Index i = 0; i < n; ++i) hits += ((eta[i] >= 0.0) == (y[i] >= 0.5));
  } else {
    // Informational only for linear runs: quarter-band hit rate.
    Eigen::VectorXd eta = scores_of(w, X).col(0);
    for (Eigen::Index i = 0; i < n; ++i) hits += (std::fabs(eta[i] - y[i]) <= 0.25);
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

WeightVector average_models(const std::vector<WeightVector>& models) {
  if (models.empty()) fail(Errc::empty_list, "average_models of nothing");
  WeightVector out = models.front();
  for (std::size_t i = 1; i < models.size(); ++i) {
    if (!models[i].same_shape(out)) fail(Errc::shape_mismatch, "average_models shape mismatch");
    out.coef += models[i].coef;
  }
  out.coef /= static_cast<double>(models.size());
  return out;
}

namespace {

std::string family_name(Family f) {
  switch (f) {
    case Family::linear: return "linear";
    case Family::logistic: return "logistic";
    case Family::multiclass: return "multiclass";
  }
  return "logistic";
}

Family family_of(const std::string& s) {
  if (s == "linear") return Family::linear;
  if (s == "logistic") return Family::logistic;
  if (s == "multiclass") return Family::multiclass;
  fail(Errc::bad_config, "unknown family '" + s + "'");
}

std::string kind_name(FeatureDef::Kind k) {
  switch (k) {
    case FeatureDef::Kind::numeric: return "numeric";
    case FeatureDef::Kind::categorical: return "categorical";
    case FeatureDef::Kind::boolean: return "boolean";
  }
  return "numeric";
}

}  // namespace

json ModelSpec::to_json() const {
  json jf = json::array();
  for (const auto& f : base_features) {
    json e{{"name", f.name}, {"kind", kind_name(f.kind)}};
    if (f.kind == FeatureDef::Kind::numeric) {
      e["min"] = f.min;
      e["max"] = f.max;
    } else if (f.kind == FeatureDef::Kind::categorical) {
      e["levels"] = f.levels;
    }
    jf.push_back(std::move(e));
  }
  json jc = json::array();
  for (const auto& [a, b] : crosses) jc.push_back(json::array({a, b}));
  json j{{"family", family_name(family)},
         {"features", std::move(jf)},
         {"crosses", std::move(jc)},
         {"version", version}};
  if (family == Family::multiclass) j["num_classes"] = num_classes;
  return j;
}

ModelSpec ModelSpec::from_json(const json& j) {
  ModelSpec s;
  s.family = family_of(j.at("family").get<std::string>());
  if (s.family == Family::multiclass) s.num_classes = j.at("num_classes").get<int>();
  for (const auto& e : j.at("features")) {
    FeatureDef f;
    f.name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "numeric") {
      f.kind = FeatureDef::Kind::numeric;
      f.min = e.at("min").get<double>();
      f.max = e.at("max").get<double>();
    } else if (kind == "categorical") {
      f.kind = FeatureDef::Kind::categorical;
      f.levels = e.at("levels").get<std::vector<std::string>>();
    } else if (kind == "boolean") {
      f.kind = FeatureDef::Kind::boolean;
    } else {
      fail(Errc::bad_config, "unknown feature kind '" + kind + "'");
    }
    s.base_features.push_back(std::move(f));
  }
  if (j.contains("crosses")) {
    for (const auto& c : j.at("crosses"))
      s.crosses.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
  }
  s.version = j.value("version", std::uint64_t{0});
  s.validate();
  return s;
}

}  // namespace ddml::glm
