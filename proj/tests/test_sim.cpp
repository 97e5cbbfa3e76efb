#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ddml/reference_models.hpp"
#include "ddml/sim.hpp"

using namespace ddml;
using namespace ddml::sim;
using nlohmann::json;
using Catch::Approx;

namespace {

json small_linear_config() {
  glm::ModelSpec s;
  s.family = glm::Family::linear;
  for (int i = 0; i < 4; ++i)
    s.base_features.push_back(glm::FeatureDef::numeric("f" + std::to_string(i), 0, 1));
  glm::WeightVector w = glm::WeightVector::zeros(s);
  w.coef << 0.1, 0.3, -0.2, 0.25, 0.15;
  return json{{"spec", s.to_json()},
              {"k", 1},
              {"strategy", {{"name", "single_model"}}},
              {"privacy", {{"epsilon", "inf"}, {"gamma", 0.05}}},
              {"examples_per_client", 10},
              {"passes", 30},
              {"eval_every", 500},
              {"seed", 0},
              {"dataset",
               {{"type", "synthetic_glm"},
                {"true_weights", w.flatten()},
                {"n", 2000},
                {"n_test", 400},
                {"linear_noise_sd", 0.0}}}};
}

}  // namespace

TEST_CASE("noiseless convex run drives the training loss down", "[sim]") {
  const auto cfg = SimConfig::from_json(small_linear_config());
  const auto res = run_sim(cfg);
  REQUIRE(res.rows.size() >= 10);
  CHECK(res.rows.back().train_loss < 0.25 * res.rows.front().train_loss);
  for (std::size_t i = res.rows.size() / 2; i + 1 < res.rows.size(); ++i) {
    CHECK(res.rows[i + 1].train_loss <= res.rows[i].train_loss * 1.02 + 1e-7);
  }
  // samples_ingested is monotone
  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i) {
    CHECK(res.rows[i + 1].samples_ingested > res.rows[i].samples_ingested);
  }
}

TEST_CASE("same config and seed produce byte-identical CSV", "[sim]") {
  const auto cfg = SimConfig::from_json(small_linear_config());
  const auto a = metrics_csv(run_sim(cfg).rows);
  const auto b = metrics_csv(run_sim(cfg).rows);
  CHECK(a == b);
  auto cfg2 = cfg;
  cfg2.seed = 1;
  CHECK(metrics_csv(run_sim(cfg2).rows) != a);
}

TEST_CASE("strategies report rows on the same sample grid", "[sim]") {
  auto j = small_linear_config();
  j["k"] = 5;
  j["strategy"] = {{"name", "draw_and_discard"}};
  const auto dd = run_sim(SimConfig::from_json(j));
  j["strategy"] = {{"name", "accept_rate"}};
  const auto ar = run_sim(SimConfig::from_json(j));
  REQUIRE(dd.rows.size() == ar.rows.size());
  for (std::size_t i = 0; i < dd.rows.size(); ++i) {
    CHECK(dd.rows[i].samples_ingested == ar.rows[i].samples_ingested);
  }
}

TEST_CASE("accept_rate accepts ~1/k and draw_and_discard self-replaces ~1/k", "[sim]") {
  auto j = small_linear_config();
  j["k"] = 10;
  j["passes"] = 50;
  j["strategy"] = {{"name", "accept_rate"}};
  const auto ar = run_sim(SimConfig::from_json(j));
  const double submits = static_cast<double>(ar.counters.submits);
  const double frac = static_cast<double>(ar.counters.accepted) / submits;
  CHECK(std::fabs(frac - 0.1) <= 3 * std::sqrt(0.1 * 0.9 / submits));

  j["strategy"] = {{"name", "draw_and_discard"}};
  const auto dd = run_sim(SimConfig::from_json(j));
  const double self = static_cast<double>(dd.counters.discarded_preimages) /
                      static_cast<double>(dd.counters.submits);
  CHECK(std::fabs(self - 0.1) <= 3 * std::sqrt(0.1 * 0.9 / submits));
  CHECK(dd.counters.accepted == dd.counters.submits);
}

TEST_CASE("spam-rejecting pool never moves from its initialization", "[sim]") {
  auto j = small_linear_config();
  j["k"] = 8;
  j["strategy"] = {{"name", "draw_and_discard"}};
  j["passes"] = 2;
  j["spam"] = {{"enabled", true}, {"t", 1e-9}};
  const auto cfg = SimConfig::from_json(j);
  const auto res = run_sim(cfg);
  CHECK(res.counters.rejected_spam == res.counters.submits);
  CHECK(res.counters.accepted == 0);

  // estimate equals the initialization means' average
  Rng init_rng(cfg.seed, 2);
  auto ref = pool::InstancePool::init(cfg.spec, cfg.k, glm::WeightVector::zeros(cfg.spec),
                                      cfg.init_sigma2(), cfg.strategy, cfg.spam, init_rng,
                                      cfg.seed);
  CHECK(res.final_average.coef == ref.average().coef);
}

TEST_CASE("grid crosses sweeps and adds server-batch cells", "[sim]") {
  auto j = small_linear_config();
  j["passes"] = 2;
  j["strategy"] = {{"name", "draw_and_discard"}};
  j["dataset"]["n"] = 400;
  j["dataset"]["n_test"] = 100;
  const auto base = SimConfig::from_json(j);

  GridSweep none;
  CHECK(experiment_grid(base, none).size() == 1);

  GridSweep s = GridSweep::from_json(json{
      {"k", {1, 10, 20}},
      {"epsilon", {std::log(3.0), std::log(16.0), "inf"}},
  });
  const auto cells = experiment_grid(base, s);
  CHECK(cells.size() == 9);

  GridSweep s2 = GridSweep::from_json(json{{"k", {10}}, {"batch_size", {100}}});
  const auto cells2 = experiment_grid(base, s2);
  REQUIRE(cells2.size() == 2);
  CHECK(cells2[1].config.strategy.kind == pool::StrategyKind::server_batch);
  CHECK(cells2[1].config.k == 1);
  CHECK(cells2[1].config.strategy.gamma == base.privacy.gamma);

  const auto dir = (std::filesystem::temp_directory_path() / "ddml_grid_test").string();
  write_grid(base, s2, dir);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "manifest.json"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "cell_000.csv"));
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "cell_001.csv"));
  std::ifstream mf(std::filesystem::path(dir) / "manifest.json");
  json manifest;
  mf >> manifest;
  CHECK(manifest.at("cells").size() == 2);
}

TEST_CASE("recovery on an easy identifiable model converges", "[sim]") {
  glm::ModelSpec s;
  s.family = glm::Family::logistic;
  for (int i = 0; i < 3; ++i)
    s.base_features.push_back(glm::FeatureDef::numeric("f" + std::to_string(i), 0, 1));
  glm::WeightVector w = glm::WeightVector::zeros(s);
  w.coef << 0.4, 1.2, -0.8, 0.5;
  json j{{"spec", s.to_json()},
         {"k", 4},
         {"strategy", {{"name", "draw_and_discard"}}},
         {"privacy", {{"epsilon", "inf"}, {"gamma", 0.03}}},
         {"examples_per_client", 20},
         {"passes", 500},
         {"eval_every", 10000000},
         {"seed", 0},
         {"dataset",
          {{"type", "synthetic_glm"}, {"true_weights", w.flatten()}, {"n", 50000},
           {"n_test", 1000}}}};
  const auto rec = recover_weights(SimConfig::from_json(j));
  CHECK(rec.max_error <= 0.12);
  CHECK(rec.abs_error.maxCoeff() == rec.max_error);
}

TEST_CASE("known-weights preset wires the reference model", "[sim]") {
  json j{{"preset", "known_weights"},
         {"k", 30},
         {"privacy", {{"epsilon", "inf"}, {"gamma", 0.005}}},
         {"dataset", {{"n", 500}, {"n_test", 100}}},
         {"passes", 1}};
  const auto cfg = SimConfig::from_json(j);
  CHECK(cfg.spec.dimension() == 32);  // 33 weights with the intercept
  CHECK(cfg.dataset.true_weights.flatten().size() == 33);
  CHECK(cfg.dataset.n == 500);
}

TEST_CASE("final train loss is non-decreasing in k at a fixed sample budget", "[sim]") {
  json base{{"preset", {{"name", "desk10"}, {"features", 32}, {"classes", 10},
                        {"weight_seed", 7}, {"scale", 3.0}}},
            {"strategy", {{"name", "draw_and_discard"}}},
            {"privacy", {{"epsilon", "inf"}, {"gamma", 0.003}}},
            {"examples_per_client", 10},
            {"passes", 10},
            {"eval_every", 10000000},
            {"dataset", {{"n", 3000}, {"n_test", 300}}}};
  const int ks[] = {1, 10, 20, 50};
  double mean_loss[4] = {0, 0, 0, 0};
  for (int seed = 0; seed < 5; ++seed) {
    for (int i = 0; i < 4; ++i) {
      json j = base;
      j["k"] = ks[i];
      j["seed"] = seed;
      mean_loss[i] += run_sim(SimConfig::from_json(j)).rows.back().train_loss / 5.0;
    }
  }
  for (int i = 0; i + 1 < 4; ++i) CHECK(mean_loss[i] <= mean_loss[i + 1]);
}

TEST_CASE("concurrent client mode matches the sequential run statistically", "[sim]") {
  auto j = small_linear_config();
  j["k"] = 5;
  j["strategy"] = {{"name", "draw_and_discard"}};
  const auto seq = run_sim(SimConfig::from_json(j));
  j["concurrent_clients"] = 4;
  const auto cfg = SimConfig::from_json(j);
  const auto con = run_sim(cfg);
  CHECK(con.counters.submits == seq.counters.submits);
  CHECK(con.counters.accepted + con.counters.rejected_spam + con.counters.dropped ==
        con.counters.submits);
  for (std::size_t i = 0; i + 1 < con.rows.size(); ++i) {
    CHECK(con.rows[i + 1].samples_ingested > con.rows[i].samples_ingested);
  }
  // same learning problem, so the end states agree loosely
  CHECK(std::fabs(con.rows.back().train_loss - seq.rows.back().train_loss) <= 0.05);
}

TEST_CASE("config json round-trips", "[sim]") {
  const auto cfg = SimConfig::from_json(small_linear_config());
  const auto back = SimConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("init sigma uses eps=1 when the run is noiseless", "[sim]") {
  auto cfg = SimConfig::from_json(small_linear_config());
  cfg.privacy.epsilon = std::numeric_limits<double>::infinity();
  cfg.privacy.gamma = 0.001;
  CHECK(cfg.init_sigma2() == Approx(8e-6));
  cfg.privacy.epsilon = 2.0;
  CHECK(cfg.init_sigma2() == Approx(2e-6));
}
