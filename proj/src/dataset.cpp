#include "ddml/dataset.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

namespace ddml::data {

using nlohmann::json;

namespace {

glm::RawMap draw_raw(const glm::ModelSpec& spec, Rng& rng) {
  glm::RawMap raw;
  for (const auto& f : spec.base_features) {
    switch (f.kind) {
      case glm::FeatureDef::Kind::numeric:
        raw[f.name] = rng.uniform(f.min, f.max);
        break;
      case glm::FeatureDef::Kind::boolean:
        raw[f.name] = (rng.uniform() < 0.5);
        break;
      case glm::FeatureDef::Kind::categorical:
        raw[f.name] = f.levels[rng.uniform_index(f.levels.size())];
        break;
    }
  }
  return raw;
}

}  // namespace

Dataset gen_synthetic(const glm::ModelSpec& spec, const glm::WeightVector& true_weights, long n,
                      Rng& rng, double linear_noise_sd) {
  if (true_weights.dim() != spec.dimension() || true_weights.rows() != spec.class_rows())
    fail(Errc::shape_mismatch, "true weights do not match spec");
  Dataset d;
  d.X.resize(n, spec.dimension());
  d.y.resize(n);
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd x = glm::expand_features(spec, draw_raw(spec, rng));
    d.X.row(i) = x.transpose();
    Eigen::VectorXd pred = glm::predict(spec, true_weights, x);
    switch (spec.family) {
      case glm::Family::logistic:
        d.y[i] = rng.uniform() < pred[0] ? 1.0 : 0.0;
        break;
      case glm::Family::linear:
        d.y[i] = std::clamp(pred[0] + rng.normal(0.0, linear_noise_sd), 0.0, 1.0);
        break;
      case glm::Family::multiclass: {
        double u = rng.uniform();
        int cls = 0;
        double acc = 0.0;
        for (int c = 0; c < pred.size(); ++c) {
          acc += pred[c];
          if (u < acc) {
            cls = c;
            break;
          }
          cls = c;  // rounding tail lands in the last class
        }
        d.y[i] = cls;
        break;
      }
    }
  }
  return d;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4))
    fail(Errc::truncated_file, path + ": header ends early");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

Dataset read_idx(const std::string& images_path, const std::string& labels_path, long limit) {
  std::ifstream fi(images_path, std::ios::binary);
  if (!fi) fail(Errc::io, "cannot open " + images_path);
  std::ifstream fl(labels_path, std::ios::binary);
  if (!fl) fail(Errc::io, "cannot open " + labels_path);

  const std::uint32_t magic_i = read_be32(fi, images_path);
  if (magic_i != 0x00000803u)
    fail(Errc::bad_magic, images_path + ": expected image magic 0x00000803");
  const long n_images = read_be32(fi, images_path);
  const long rows = read_be32(fi, images_path);
  const long cols = read_be32(fi, images_path);

  const std::uint32_t magic_l = read_be32(fl, labels_path);
  if (magic_l != 0x00000801u)
    fail(Errc::bad_magic, labels_path + ": expected label magic 0x00000801");
  const long n_labels = read_be32(fl, labels_path);

  if (n_images != n_labels)
    fail(Errc::count_mismatch, "image count " + std::to_string(n_images) + " != label count " +
                                   std::to_string(n_labels));

  const long n = (limit > 0) ? std::min(limit, n_images) : n_images;
  const long p = rows * cols;
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  std::vector<unsigned char> buf(static_cast<std::size_t>(p));
  for (long i = 0; i < n; ++i) {
    if (!fi.read(reinterpret_cast<char*>(buf.data()), p))
      fail(Errc::truncated_file, images_path + ": image data ends early");
    for (long j = 0; j < p; ++j) d.X(i, j) = buf[static_cast<std::size_t>(j)] / 255.0;
    unsigned char lab;
    if (!fl.read(reinterpret_cast<char*>(&lab), 1))
      fail(Errc::truncated_file, labels_path + ": label data ends early");
    d.y[i] = lab;
  }
  return d;
}

Dataset load_examples_json(const std::string& path, const glm::ModelSpec& spec) {
  std::ifstream f(path);
  if (!f) fail(Errc::io, "cannot open " + path);
  json j;
  f >> j;
  const auto& ex = j.at("examples");
  Dataset d;
  d.X.resize(static_cast<long>(ex.size()), spec.dimension());
  d.y.resize(static_cast<long>(ex.size()));
  long i = 0;
  for (const auto& e : ex) {
    glm::RawMap raw;
    for (const auto& [name, v] : e.at("raw").items()) {
      if (v.is_boolean()) {
        raw[name] = v.get<bool>();
      } else if (v.is_number()) {
        raw[name] = v.get<double>();
      } else {
        raw[name] = v.get<std::string>();
      }
    }
    d.X.row(i) = glm::expand_features(spec, raw).transpose();
    d.y[i] = e.at("response").get<double>();
    ++i;
  }
  return d;
}

void save_examples_json(const std::string& path, const glm::ModelSpec& spec,
                        const std::vector<glm::RawMap>& raws, const Eigen::VectorXd& y) {
  if (static_cast<long>(raws.size()) != y.size())
    fail(Errc::count_mismatch, "raw/response count differ");
  json ex = json::array();
  for (std::size_t i = 0; i < raws.size(); ++i) {
    json r = json::object();
    for (const auto& [name, v] : raws[i]) {
      if (std::holds_alternative<bool>(v)) {
        r[name] = std::get<bool>(v);
      } else if (std::holds_alternative<double>(v)) {
        r[name] = std::get<double>(v);
      } else {
        r[name] = std::get<std::string>(v);
      }
    }
    ex.push_back(json{{"raw", std::move(r)}, {"response", y[static_cast<long>(i)]}});
  }
  std::ofstream f(path);
  if (!f) fail(Errc::io, "cannot write " + path);
  f << json{{"spec", spec.to_json()}, {"examples", std::move(ex)}}.dump(2) << "\n";
}

}  // namespace ddml::data
