#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddml/dataset.hpp"
#include "ddml/dp_client.hpp"
#include "ddml/pool.hpp"

namespace ddml::sim {

struct DatasetSource {
  enum class Kind { synthetic, idx } kind = Kind::synthetic;

  // synthetic_glm
  glm::WeightVector true_weights;
  long n = 6000;
  long n_test = 1000;
  double linear_noise_sd = 0.05;

  // idx_files; paths are taken as-is (the CLI resolves DDML_DATA_DIR)
  std::string images_path;
  std::string labels_path;
  std::string test_images_path;
  std::string test_labels_path;
  long limit = 0;
  long test_limit = 0;

  nlohmann::json to_json() const;
  static DatasetSource from_json(const nlohmann::json& j, const glm::ModelSpec& spec);
};

struct SimConfig {
  glm::ModelSpec spec;
  int k = 20;
  pool::Strategy strategy;
  dp::PrivacyParams privacy;
  long clients_n = 0;  // 0 -> derived from dataset size / examples_per_client
  int examples_per_client = 10;
  int passes = 20;
  std::uint64_t seed = 0;
  long eval_every = 1000;
  DatasetSource dataset;
  pool::SpamPolicy spam;
  // 0/1 = the sequential deterministic reference loop; >1 runs that many
  // client threads against the pool (statistically, not bitwise,
  // reproducible).
  int concurrent_clients = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);

  // Pool initialization variance: the client noise variance, computed with
  // epsilon = 1 when the run itself adds no noise.
  double init_sigma2() const;
};

struct MetricsRow {
  long samples_ingested = 0;
  long updates_applied = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double pool_variance_mean = 0.0;
};

struct SimResult {
  std::vector<MetricsRow> rows;
  glm::WeightVector final_average;
  pool::Counters counters;
};

SimResult run_sim(const SimConfig& cfg);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

struct GridSweep {
  std::vector<int> ks;
  std::vector<double> epsilons;
  std::vector<pool::Strategy> strategies;
  std::vector<long> batch_sizes;  // each N_s adds a k=1 server_batch cell

  static GridSweep from_json(const nlohmann::json& j);
};

struct GridCell {
  SimConfig config;
  std::string label;
  std::vector<MetricsRow> rows;
};

// Cross product of {k, epsilon, strategy}, plus one server-batch cell per
// (N_s, epsilon). All cells share the base seed so paired comparisons see
// common random numbers.
std::vector<GridCell> experiment_grid(const SimConfig& base, const GridSweep& sweep);

// Runs the grid and writes cell_###.csv plus manifest.json under out_dir.
void write_grid(const SimConfig& base, const GridSweep& sweep, const std::string& out_dir);

struct RecoveryResult {
  glm::WeightVector estimate;
  Eigen::MatrixXd abs_error;
  double max_error = 0.0;
  std::vector<MetricsRow> rows;
};

// Trains on a synthetic source and compares the pool average against the
// generating weights.
RecoveryResult recover_weights(const SimConfig& cfg);

}  // namespace ddml::sim
