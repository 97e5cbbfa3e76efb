#include "ddml/sim.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ddml/reference_models.hpp"

namespace ddml::sim {

using nlohmann::json;

json DatasetSource::to_json() const {
  if (kind == Kind::synthetic) {
    return json{{"type", "synthetic_glm"},
                {"true_weights", true_weights.flatten()},
                {"n", n},
                {"n_test", n_test},
                {"linear_noise_sd", linear_noise_sd}};
  }
  return json{{"type", "idx_files"},
              {"images_path", images_path},
              {"labels_path", labels_path},
              {"test_images_path", test_images_path},
              {"test_labels_path", test_labels_path},
              {"limit", limit},
              {"test_limit", test_limit}};
}

DatasetSource DatasetSource::from_json(const json& j, const glm::ModelSpec& spec) {
  DatasetSource d;
  const auto type = j.at("type").get<std::string>();
  if (type == "synthetic_glm") {
    d.kind = Kind::synthetic;
    d.true_weights =
        glm::WeightVector::from_flat(spec, j.at("true_weights").get<std::vector<double>>());
    d.n = j.value("n", d.n);
    d.n_test = j.value("n_test", d.n_test);
    d.linear_noise_sd = j.value("linear_noise_sd", d.linear_noise_sd);
  } else if (type == "idx_files") {
    d.kind = Kind::idx;
    d.images_path = j.at("images_path").get<std::string>();
    d.labels_path = j.at("labels_path").get<std::string>();
    d.test_images_path = j.value("test_images_path", std::string());
    d.test_labels_path = j.value("test_labels_path", std::string());
    d.limit = j.value("limit", d.limit);
    d.test_limit = j.value("test_limit", d.test_limit);
  } else {
    fail(Errc::bad_config, "unknown dataset type '" + type + "'");
  }
  return d;
}

void SimConfig::validate() const {
  spec.validate();
  privacy.validate();
  strategy.validate();
  if (examples_per_client < 1) fail(Errc::bad_config, "examples_per_client must be >= 1");
  if (passes < 1) fail(Errc::bad_config, "passes must be >= 1");
  if (eval_every < 1) fail(Errc::bad_config, "eval_every must be >= 1");
  if (k < 1) fail(Errc::bad_config, "k must be >= 1");
}

double SimConfig::init_sigma2() const {
  if (!privacy.no_noise()) return privacy.noise_variance(spec.dimension());
  dp::PrivacyParams unit = privacy;
  unit.epsilon = 1.0;
  return unit.noise_variance(spec.dimension());
}

namespace {

// Applies the optional "preset" shorthand before regular parsing.
json apply_preset(json j) {
  if (!j.contains("preset")) return j;
  json p = j.at("preset");
  std::string name = p.is_string() ? p.get<std::string>() : p.at("name").get<std::string>();
  if (name == "known_weights") {
    const auto spec = reference::known_weights_spec();
    j["spec"] = spec.to_json();
    json ds{{"type", "synthetic_glm"},
            {"true_weights", reference::known_weights_true().flatten()}};
    if (j.contains("dataset")) ds.update(j.at("dataset"));
    j["dataset"] = ds;
  } else if (name == "desk10") {
    const int features = p.is_object() ? p.value("features", 256) : 256;
    const int classes = p.is_object() ? p.value("classes", 10) : 10;
    const std::uint64_t wseed =
        p.is_object() ? p.value("weight_seed", std::uint64_t{0}) : std::uint64_t{0};
    const double scale = p.is_object() ? p.value("scale", 0.5) : 0.5;
    const auto spec = reference::desk_multiclass_spec(features, classes);
    j["spec"] = spec.to_json();
    json ds{{"type", "synthetic_glm"},
            {"true_weights",
             reference::desk_multiclass_weights(spec, wseed, scale).flatten()}};
    if (j.contains("dataset")) ds.update(j.at("dataset"));
    j["dataset"] = ds;
  } else {
    fail(Errc::bad_config, "unknown preset '" + name + "'");
  }
  j.erase("preset");
  return j;
}

}  // namespace

json SimConfig::to_json() const {
  return json{{"spec", spec.to_json()},
              {"k", k},
              {"strategy", strategy.to_json()},
              {"privacy", privacy.to_json()},
              {"clients_n", clients_n},
              {"examples_per_client", examples_per_client},
              {"passes", passes},
              {"seed", seed},
              {"eval_every", eval_every},
              {"dataset", dataset.to_json()},
              {"spam", spam.to_json()},
              {"concurrent_clients", concurrent_clients}};
}

SimConfig SimConfig::from_json(const json& raw) {
  const json j = apply_preset(raw);
  SimConfig c;
  c.spec = glm::ModelSpec::from_json(j.at("spec"));
  c.k = j.value("k", c.k);
  if (j.contains("strategy")) c.strategy = pool::Strategy::from_json(j.at("strategy"));
  if (j.contains("privacy")) c.privacy = dp::PrivacyParams::from_json(j.at("privacy"));
  c.clients_n = j.value("clients_n", c.clients_n);
  c.examples_per_client = j.value("examples_per_client", c.examples_per_client);
  c.passes = j.value("passes", c.passes);
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("dataset")) {
    c.dataset = DatasetSource::from_json(j.at("dataset"), c.spec);
  } else {
    // serving configs never touch data; simulate/grid fail on the empty set
    c.dataset.true_weights = glm::WeightVector::zeros(c.spec);
    c.dataset.n = 0;
    c.dataset.n_test = 0;
  }
  if (j.contains("spam")) c.spam = pool::SpamPolicy::from_json(j.at("spam"));
  c.concurrent_clients = j.value("concurrent_clients", c.concurrent_clients);
  c.validate();
  return c;
}

namespace {

struct LoadedData {
  data::Dataset train;
  data::Dataset test;
};

LoadedData load_data(const SimConfig& cfg) {
  LoadedData d;
  if (cfg.dataset.kind == DatasetSource::Kind::synthetic) {
    Rng rng(cfg.seed, 1);
    d.train = data::gen_synthetic(cfg.spec, cfg.dataset.true_weights, cfg.dataset.n, rng,
                                  cfg.dataset.linear_noise_sd);
    d.test = data::gen_synthetic(cfg.spec, cfg.dataset.true_weights, cfg.dataset.n_test, rng,
                                 cfg.dataset.linear_noise_sd);
  } else {
    d.train = data::read_idx(cfg.dataset.images_path, cfg.dataset.labels_path, cfg.dataset.limit);
    if (!cfg.dataset.test_images_path.empty()) {
      d.test = data::read_idx(cfg.dataset.test_images_path, cfg.dataset.test_labels_path,
                              cfg.dataset.test_limit);
    } else {
      d.test = d.train;  // fall back to in-sample accuracy
    }
    if (d.train.X.cols() != cfg.spec.dimension())
      fail(Errc::shape_mismatch, "idx feature width != spec dimension");
  }
  return d;
}

}  // namespace

namespace {

// One client round against the pool; shared by the sequential and concurrent
// loops.
bool one_update(const SimConfig& cfg, const data::Dataset& train, long client, long n_c,
                pool::InstancePool& pool, Rng& client_rng) {
  const auto X = train.X.middleRows(client * n_c, n_c);
  const auto y = train.y.segment(client * n_c, n_c);
  const auto [idx, drawn] = pool.draw();
  if (cfg.strategy.kind == pool::StrategyKind::server_batch) {
    Eigen::MatrixXd g = dp::clip(glm::gradient_matrix(cfg.spec, drawn, X, y),
                                 cfg.privacy.clip_lo, cfg.privacy.clip_hi);
    return pool.submit_gradient(g, n_c).status == pool::SubmitStatus::accepted;
  }
  const glm::WeightVector updated =
      dp::client_update(drawn, cfg.spec, X, y, cfg.privacy, client_rng);
  pool::DrawToken token{idx, drawn};
  return pool.submit(updated, token).status == pool::SubmitStatus::accepted;
}

// Many client activities sharing the pool through its atomic-slot operations.
// Metric rows are taken as the ingest counter crosses each eval boundary, so
// results are statistically (not bitwise) reproducible.
SimResult run_concurrent(const SimConfig& cfg, const LoadedData& data, pool::InstancePool& pool,
                         long clients, long total_updates) {
  const long n_c = cfg.examples_per_client;
  std::atomic<long> next{0};
  std::atomic<long> samples{0};
  std::atomic<long> applied{0};
  std::atomic<bool> done{false};

  std::vector<std::thread> workers;
  for (int w = 0; w < cfg.concurrent_clients; ++w) {
    workers.emplace_back([&, w] {
      Rng order_rng(cfg.seed, 0x200u + static_cast<std::uint64_t>(w));
      Rng client_rng(cfg.seed, 0x300u + static_cast<std::uint64_t>(w));
      while (next.fetch_add(1) < total_updates) {
        const long c =
            static_cast<long>(order_rng.uniform_index(static_cast<std::uint64_t>(clients)));
        applied += one_update(cfg, data.train, c, n_c, pool, client_rng);
        samples += n_c;
      }
      done = true;
    });
  }

  SimResult out;
  long next_eval = cfg.eval_every;
  auto evaluate = [&](long at) {
    MetricsRow row;
    row.samples_ingested = at;
    row.updates_applied = applied.load();
    const auto avg = pool.average();
    row.train_loss = glm::loss(cfg.spec, avg, data.train.X, data.train.y);
    row.test_accuracy = glm::accuracy(cfg.spec, avg, data.test.X, data.test.y);
    row.pool_variance_mean = pool.mean_weight_variance();
    out.rows.push_back(row);
  };
  while (!done.load()) {
    if (samples.load() >= next_eval) {
      evaluate(next_eval);
      next_eval += cfg.eval_every;
    } else {
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  }
  for (auto& t : workers) t.join();
  if (out.rows.empty() || out.rows.back().samples_ingested != samples.load()) {
    evaluate(samples.load());
  }
  out.final_average = pool.average();
  out.counters = pool.counters();
  return out;
}

}  // namespace

SimResult run_sim(const SimConfig& cfg) {
  cfg.validate();
  const LoadedData data = load_data(cfg);
  const long n_c = cfg.examples_per_client;
  long clients = data.train.n() / n_c;
  if (cfg.clients_n > 0) clients = std::min(clients, cfg.clients_n);
  if (clients < 1) fail(Errc::empty_batch, "dataset smaller than one client batch");

  Rng init_rng(cfg.seed, 2);
  const auto means = glm::WeightVector::zeros(cfg.spec);
  pool::InstancePool pool = pool::InstancePool::init(cfg.spec, cfg.k, means, cfg.init_sigma2(),
                                                     cfg.strategy, cfg.spam, init_rng, cfg.seed);

  Rng order_rng(cfg.seed, 4);
  Rng client_rng(cfg.seed, 5);

  const long total_updates = static_cast<long>(cfg.passes) * clients;

  if (cfg.concurrent_clients > 1) {
    return run_concurrent(cfg, data, pool, clients, total_updates);
  }

  SimResult out;
  long samples = 0;
  long applied = 0;
  long next_eval = cfg.eval_every;

  auto evaluate = [&]() {
    MetricsRow row;
    row.samples_ingested = samples;
    row.updates_applied = applied;
    const auto avg = pool.average();
    row.train_loss = glm::loss(cfg.spec, avg, data.train.X, data.train.y);
    row.test_accuracy = glm::accuracy(cfg.spec, avg, data.test.X, data.test.y);
    row.pool_variance_mean = pool.mean_weight_variance();
    out.rows.push_back(row);
  };

  for (long t = 0; t < total_updates; ++t) {
    const long c = static_cast<long>(order_rng.uniform_index(static_cast<std::uint64_t>(clients)));
    applied += one_update(cfg, data.train, c, n_c, pool, client_rng);
    samples += n_c;
    if (samples >= next_eval) {
      evaluate();
      while (next_eval <= samples) next_eval += cfg.eval_every;
    }
  }
  if (out.rows.empty() || out.rows.back().samples_ingested != samples) evaluate();

  out.final_average = pool.average();
  out.counters = pool.counters();
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string s = "samples_ingested,updates_applied,train_loss,test_accuracy,pool_variance_mean\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%ld,%.17g,%.17g,%.17g\n", r.samples_ingested,
                  r.updates_applied, r.train_loss, r.test_accuracy, r.pool_variance_mean);
    s += buf;
  }
  return s;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream f(path);
  if (!f) fail(Errc::io, "cannot write " + path);
  f << metrics_csv(rows);
}

GridSweep GridSweep::from_json(const json& j) {
  GridSweep s;
  if (j.contains("k")) s.ks = j.at("k").get<std::vector<int>>();
  if (j.contains("epsilon")) {
    for (const auto& e : j.at("epsilon")) {
      s.epsilons.push_back(e.is_string() ? std::numeric_limits<double>::infinity()
                                         : e.get<double>());
    }
  }
  if (j.contains("strategy")) {
    for (const auto& e : j.at("strategy")) s.strategies.push_back(pool::Strategy::from_json(e));
  }
  if (j.contains("batch_size")) s.batch_sizes = j.at("batch_size").get<std::vector<long>>();
  return s;
}

std::vector<GridCell> experiment_grid(const SimConfig& base, const GridSweep& sweep) {
  std::vector<int> ks = sweep.ks.empty() ? std::vector<int>{base.k} : sweep.ks;
  std::vector<double> eps =
      sweep.epsilons.empty() ? std::vector<double>{base.privacy.epsilon} : sweep.epsilons;
  std::vector<pool::Strategy> strategies =
      sweep.strategies.empty() ? std::vector<pool::Strategy>{base.strategy} : sweep.strategies;

  std::vector<GridCell> cells;
  auto label_eps = [](double e) {
    char buf[32];
    if (std::isinf(e)) return std::string("inf");
    std::snprintf(buf, sizeof(buf), "%g", e);
    return std::string(buf);
  };
  for (int k : ks) {
    for (double e : eps) {
      for (const auto& st : strategies) {
        GridCell cell;
        cell.config = base;
        cell.config.k = k;
        cell.config.privacy.epsilon = e;
        cell.config.strategy = st;
        cell.label = "k" + std::to_string(k) + "_eps" + label_eps(e) + "_" +
                     st.to_json().at("name").get<std::string>();
        cells.push_back(std::move(cell));
      }
    }
  }
  for (long ns : sweep.batch_sizes) {
    for (double e : eps) {
      GridCell cell;
      cell.config = base;
      cell.config.k = 1;
      cell.config.privacy.epsilon = e;
      cell.config.strategy.kind = pool::StrategyKind::server_batch;
      cell.config.strategy.batch_size = ns;
      cell.config.strategy.gamma = base.privacy.gamma;
      cell.label = "Ns" + std::to_string(ns) + "_eps" + label_eps(e) + "_server_batch";
      cells.push_back(std::move(cell));
    }
  }
  for (auto& cell : cells) cell.rows = run_sim(cell.config).rows;
  return cells;
}

void write_grid(const SimConfig& base, const GridSweep& sweep, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto cells = experiment_grid(base, sweep);
  json manifest;
  manifest["cells"] = json::array();
  char name[64];
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::snprintf(name, sizeof(name), "cell_%03zu.csv", i);
    write_metrics_csv((fs::path(out_dir) / name).string(), cells[i].rows);
    manifest["cells"].push_back(json{{"index", i},
                                     {"file", name},
                                     {"label", cells[i].label},
                                     {"k", cells[i].config.k},
                                     {"epsilon", cells[i].config.privacy.to_json()["epsilon"]},
                                     {"strategy", cells[i].config.strategy.to_json()},
                                     {"seed", cells[i].config.seed}});
  }
  std::ofstream f(fs::path(out_dir) / "manifest.json");
  if (!f) fail(Errc::io, "cannot write manifest under " + out_dir);
  f << manifest.dump(2) << "\n";
}

RecoveryResult recover_weights(const SimConfig& cfg) {
  if (cfg.dataset.kind != DatasetSource::Kind::synthetic)
    fail(Errc::bad_config, "recover_weights needs a synthetic source");
  SimResult r = run_sim(cfg);
  RecoveryResult out;
  out.estimate = r.final_average;
  out.abs_error = (r.final_average.coef - cfg.dataset.true_weights.coef).cwiseAbs();
  out.max_error = out.abs_error.maxCoeff();
  out.rows = std::move(r.rows);
  return out;
}

}  // namespace ddml::sim
