#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddml/net.hpp"
#include "ddml/privacy.hpp"
#include "ddml/sim.hpp"
#include "ddml/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) ddml::fail(ddml::Errc::io, "cannot open " + path);
  json j;
  f >> j;
  return j;
}

// Relative IDX paths resolve against DDML_DATA_DIR when it is set.
std::string resolve_data_path(const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || fs::exists(p)) return p;
  if (const char* dir = std::getenv("DDML_DATA_DIR")) {
    fs::path cand = fs::path(dir) / p;
    if (fs::exists(cand)) return cand.string();
  }
  return p;
}

ddml::sim::SimConfig load_config(const std::string& path, bool seed_set, std::uint64_t seed) {
  json j = load_json(path);
  if (seed_set) j["seed"] = seed;  // flags override config-file values
  auto cfg = ddml::sim::SimConfig::from_json(j);
  cfg.dataset.images_path = resolve_data_path(cfg.dataset.images_path);
  cfg.dataset.labels_path = resolve_data_path(cfg.dataset.labels_path);
  cfg.dataset.test_images_path = resolve_data_path(cfg.dataset.test_images_path);
  cfg.dataset.test_labels_path = resolve_data_path(cfg.dataset.test_labels_path);
  return cfg;
}

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Draw-and-discard distributed learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 2;
  app.add_option("--seed", seed, "RNG seed (default 0, never wall clock)")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_option("--workers", workers, "worker threads for Monte-Carlo partitioning");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run one simulation from a JSON config");
  sim_cmd->fallthrough();
  std::string sim_config, sim_out = "metrics.csv";
  sim_cmd->add_option("config", sim_config, "SimConfig JSON path")->required();
  sim_cmd->add_option("-o,--out", sim_out, "metrics CSV output path");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "run an experiment grid from a JSON config");
  grid_cmd->fallthrough();
  std::string grid_config, grid_out = "grid_out";
  grid_cmd->add_option("config", grid_config, "config JSON with a \"sweep\" object")->required();
  grid_cmd->add_option("-o,--out", grid_out, "output directory");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "closed-form privacy report + CSV sweeps");
  an_cmd->fallthrough();
  int an_k = 20;
  double an_eps = std::log(32.0), an_gamma = 0.001, an_T = 10000, an_delta = 1e-8, an_t = 0.2;
  long an_trials = 100000;
  std::string an_out;
  an_cmd->add_option("--k", an_k, "instance count");
  an_cmd->add_option("--epsilon", an_eps, "privacy budget");
  an_cmd->add_option("--gamma", an_gamma, "learning rate");
  an_cmd->add_option("--T", an_T, "updates seen by adversary III");
  an_cmd->add_option("--delta", an_delta, "delta_T");
  an_cmd->add_option("--t", an_t, "pre-image distance fraction");
  an_cmd->add_option("--trials", an_trials, "Monte-Carlo trials for the pre-image sweep");
  an_cmd->add_option("--sweep-dir", an_out, "also write k/T/t CSV sweeps to this directory");

  // verify
  auto* ver_cmd = app.add_subcommand("verify", "run a named verification suite");
  ver_cmd->fallthrough();
  std::string suite;
  std::string suite_help = "one of: all";
  for (const auto& n : ddml::verify::suite_names()) suite_help += ", " + n;
  ver_cmd->add_option("suite", suite, suite_help)->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the draw/submit server");
  serve_cmd->fallthrough();
  std::string serve_config, serve_bind = "127.0.0.1:7070", serve_snapshot;
  serve_cmd->add_option("config", serve_config, "SimConfig JSON (spec, k, strategy, spam, privacy)")
      ->required();
  serve_cmd->add_option("--bind", serve_bind, "host:port (port 0 = ephemeral)");
  serve_cmd->add_option("--snapshot", serve_snapshot, "pool snapshot path written on shutdown");

  // agent
  auto* agent_cmd = app.add_subcommand("agent", "run a client agent against a server");
  agent_cmd->fallthrough();
  std::string agent_server = "127.0.0.1:7070", agent_data;
  long agent_rounds = 100;
  double agent_eps = 1.0, agent_gamma = 0.001;
  agent_cmd->add_option("--server", agent_server, "host:port");
  agent_cmd->add_option("--data", agent_data, "local examples JSON path")->required();
  agent_cmd->add_option("--rounds", agent_rounds, "draw/update/submit rounds");
  agent_cmd->add_option("--epsilon", agent_eps, "privacy budget (inf = no noise)");
  agent_cmd->add_option("--gamma", agent_gamma, "learning rate");

  // spam-test
  auto* spam_cmd = app.add_subcommand("spam-test", "run the spam band test on a snapshot");
  spam_cmd->fallthrough();
  std::string spam_snapshot, spam_weights;
  double spam_t = 3.0;
  spam_cmd->add_option("snapshot", spam_snapshot, "pool snapshot JSON")->required();
  spam_cmd->add_option("weights", spam_weights, "candidate weights JSON (flat array)")->required();
  spam_cmd->add_option("--t", spam_t, "std-dev multiplier");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, --help exits 0
  }

  try {
    if (*sim_cmd) {
      const auto cfg = load_config(sim_config, seed_set, seed);
      const auto res = ddml::sim::run_sim(cfg);
      ddml::sim::write_metrics_csv(sim_out, res.rows);
      std::cout << "wrote " << res.rows.size() << " rows to " << sim_out << "\n";
      return 0;
    }
    if (*grid_cmd) {
      json j = load_json(grid_config);
      const auto sweep = ddml::sim::GridSweep::from_json(j.value("sweep", json::object()));
      j.erase("sweep");
      if (seed_set) j["seed"] = seed;
      const auto base = ddml::sim::SimConfig::from_json(j);
      ddml::sim::write_grid(base, sweep, grid_out);
      std::cout << "wrote grid to " << grid_out << "/manifest.json\n";
      return 0;
    }
    if (*an_cmd) {
      json report = ddml::privacy::privacy_report(an_k, an_eps, an_gamma, an_T, an_delta);
      const auto pre = ddml::privacy::empirical_preimage_amplification(
          an_k, an_gamma, an_eps, an_t, an_trials, seed, workers);
      report["preimage"] = {
          {"k", an_k},
          {"t", an_t},
          {"trials", pre.trials},
          {"p_two_or_more_within_t_gamma", pre.estimate},
          {"std_error", pre.std_error},
          {"method", "monte_carlo"},
          {"protocol", "pools start at N(0,(k/2)sigma^2), burn in 50k pure-noise draw/discard "
                       "rounds, b* = drawn instance + Laplace(0,2gamma/eps), candidates counted "
                       "over all k instances"}};
      std::cout << report.dump(2) << "\n";
      if (!an_out.empty()) {
        fs::create_directories(an_out);
        {
          std::ofstream f(fs::path(an_out) / "k_vs_amplification.csv");
          f << "k,adv2_expected_loss,preimage_p_ge2\n";
          for (int k : {2, 5, 10, 20, 30, 60}) {
            const auto p = ddml::privacy::empirical_preimage_amplification(
                k, an_gamma, an_eps, an_t, an_trials, seed, workers);
            f << k << "," << ddml::privacy::adv2_expected_loss(k, an_eps) << "," << p.estimate
              << "\n";
          }
        }
        {
          std::ofstream f(fs::path(an_out) / "T_vs_epsT.csv");
          f << "T,eps_T_exact,eps_T_approx\n";
          for (double T : {1e2, 1e3, 1e4, 1e5, 1e6, 1e7}) {
            const auto a = ddml::privacy::eps_after_T(an_eps, an_gamma, T, an_delta);
            f << T << "," << a.exact << "," << a.approx << "\n";
          }
        }
        {
          std::ofstream f(fs::path(an_out) / "t_vs_preimage.csv");
          f << "t,p_ge2\n";
          for (int ti = 1; ti <= 9; ++ti) {
            const auto p = ddml::privacy::empirical_preimage_amplification(
                an_k, an_gamma, an_eps, ti / 10.0, an_trials, seed, workers);
            f << ti / 10.0 << "," << p.estimate << "\n";
          }
        }
        std::cout << "wrote sweeps to " << an_out << "\n";
      }
      return 0;
    }
    if (*ver_cmd) {
      ddml::verify::Options opt{seed, workers};
      std::vector<std::string> suites =
          suite == "all" ? ddml::verify::suite_names() : std::vector<std::string>{suite};
      bool all_pass = true;
      for (const auto& s : suites) {
        for (const auto& r : ddml::verify::run_suite(s, opt)) {
          std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " — " << r.detail << "\n";
          all_pass &= r.pass;
        }
      }
      return all_pass ? 0 : 1;
    }
    if (*serve_cmd) {
      const auto cfg = load_config(serve_config, seed_set, seed);
      ddml::Rng init_rng(cfg.seed, 2);
      auto pool = ddml::pool::InstancePool::init(
          cfg.spec, cfg.k, ddml::glm::WeightVector::zeros(cfg.spec), cfg.init_sigma2(),
          cfg.strategy, cfg.spam, init_rng, cfg.seed);
      const auto colon = serve_bind.rfind(':');
      if (colon == std::string::npos) ddml::fail(ddml::Errc::bad_config, "--bind needs host:port");
      ddml::net::Server server(pool, cfg.spec);
      server.snapshot_path = serve_snapshot;
      server.start(serve_bind.substr(0, colon), std::stoi(serve_bind.substr(colon + 1)));
      std::cout << "listening on " << serve_bind.substr(0, colon) << ":" << server.port()
                << " (k=" << pool.k() << ")\n";
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      std::cout << "stopped\n";
      return 0;
    }
    if (*agent_cmd) {
      const auto colon = agent_server.rfind(':');
      if (colon == std::string::npos) ddml::fail(ddml::Errc::bad_config, "--server needs host:port");
      const std::string host = agent_server.substr(0, colon);
      const int port = std::stoi(agent_server.substr(colon + 1));
      json jd = load_json(agent_data);
      const auto spec = ddml::glm::ModelSpec::from_json(jd.at("spec"));
      const auto local = ddml::data::load_examples_json(agent_data, spec);
      ddml::dp::PrivacyParams params;
      params.epsilon = agent_eps;
      params.gamma = agent_gamma;
      ddml::Rng rng(seed, 6);
      const auto s = ddml::net::client_agent(host, port, local, params, agent_rounds, rng);
      std::cout << json{{"rounds_run", s.rounds_run},
                        {"submitted", s.submitted},
                        {"accepted", s.accepted},
                        {"rejected_spam", s.rejected_spam},
                        {"dropped", s.dropped},
                        {"spec_version", s.spec_version}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (*spam_cmd) {
      json snap = load_json(spam_snapshot);
      snap["spam"] = json{{"enabled", true}, {"t", spam_t}};
      auto pool = ddml::pool::InstancePool::from_snapshot(snap, seed);
      json jw = load_json(spam_weights);
      const auto flat = (jw.is_array() ? jw : jw.at("weights")).get<std::vector<double>>();
      const auto inst = pool.instances_copy();
      ddml::glm::WeightVector w;
      w.coef.resize(inst.front().coef.rows(), inst.front().coef.cols());
      if (static_cast<long>(flat.size()) != w.coef.size())
        ddml::fail(ddml::Errc::shape_mismatch, "weights length != pool shape");
      for (Eigen::Index r = 0; r < w.coef.rows(); ++r)
        for (Eigen::Index c = 0; c < w.coef.cols(); ++c)
          w.coef(r, c) = flat[static_cast<std::size_t>(r * w.coef.cols() + c)];
      const auto d = pool.spam_check(w);
      std::cout << json{{"accept", d.accept}, {"offending", d.offending}, {"t", spam_t}}.dump(2)
                << "\n";
      return 0;
    }
  } catch (const ddml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
