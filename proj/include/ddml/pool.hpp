#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddml/glm.hpp"
#include "ddml/rng.hpp"

namespace ddml::pool {

enum class StrategyKind {
  draw_and_discard,
  same_instance_replace,
  accept_rate,           // accept with probability 1/k, else drop
  average_before_overwrite,
  server_batch,          // average batch_size raw gradients, then one step
  single_model
};

struct Strategy {
  StrategyKind kind = StrategyKind::draw_and_discard;
  StrategyKind base = StrategyKind::draw_and_discard;  // average_before_overwrite only
  long batch_size = 1;                                 // server_batch only
  double gamma = 0.001;                                // server_batch step size

  void validate() const;
  bool needs_token() const;
  bool forces_single_instance() const {
    return kind == StrategyKind::server_batch || kind == StrategyKind::single_model;
  }

  nlohmann::json to_json() const;
  static Strategy from_json(const nlohmann::json& j);
};

struct SpamPolicy {
  bool enabled = false;
  double t = 3.0;  // acceptance band is [mu - t*sigma, mu + t*sigma] per weight

  nlohmann::json to_json() const;
  static SpamPolicy from_json(const nlohmann::json& j);
};

enum class SubmitStatus { accepted, rejected_spam, dropped };

const char* submit_status_name(SubmitStatus s);

struct SubmitOutcome {
  SubmitStatus status = SubmitStatus::accepted;
  int replaced_index = -1;              // never exposed over the wire
  std::vector<int> offending;           // spam rejections: flat coordinate ids
};

struct SpamDecision {
  bool accept = true;
  std::vector<int> offending;
};

struct Counters {
  std::uint64_t draws = 0;
  std::uint64_t submits = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected_spam = 0;
  std::uint64_t dropped = 0;
  std::uint64_t discarded_preimages = 0;
};

// The simulator keeps the draw pairing; it never travels over the wire.
struct DrawToken {
  int index = -1;
  glm::WeightVector drawn;
};

struct PoolStats {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;  // unbiased, per weight
};

// Replayable record of every pool operation, in execution order.
struct TraceEvent {
  enum class Kind { draw, submit, submit_gradient } kind;
  std::vector<double> payload;  // flattened weights or gradient; empty for draw
  long examples = 1;            // submit_gradient weighting
};

// The k concurrently maintained model instances. Draws return copies; each
// submit atomically replaces exactly one slot. No lock spans a draw-submit
// round trip; interleaved submits may overwrite each other's targets.
class InstancePool {
 public:
  InstancePool(std::vector<glm::WeightVector> instances, Strategy strategy, SpamPolicy spam,
               std::uint64_t seed);

  // Per-weight normal draws around `means` with variance (k/2)*sigma2; k = 1
  // pools start exactly at the means.
  static InstancePool init(const glm::ModelSpec& spec, int k, const glm::WeightVector& means,
                           double sigma2, Strategy strategy, SpamPolicy spam, Rng& init_rng,
                           std::uint64_t pool_seed);

  int k() const { return static_cast<int>(instances_.size()); }
  const Strategy& strategy() const { return strategy_; }
  const SpamPolicy& spam_policy() const { return spam_; }

  std::pair<int, glm::WeightVector> draw();
  SubmitOutcome submit(const glm::WeightVector& updated,
                       const std::optional<DrawToken>& token = std::nullopt);
  // server_batch ingestion path: clients hand back raw clipped gradients.
  // batch_size counts accumulated examples; one averaged step fires once
  // `examples` contributions reach it.
  SubmitOutcome submit_gradient(const Eigen::MatrixXd& grad, long examples = 1);

  SpamDecision spam_check(const glm::WeightVector& updated) const;
  PoolStats stats() const;
  double mean_weight_variance() const;  // 0 for k = 1
  glm::WeightVector average() const;
  Counters counters() const;
  std::vector<glm::WeightVector> instances_copy() const;

  nlohmann::json snapshot() const;
  static InstancePool from_snapshot(const nlohmann::json& j, std::uint64_t seed);

  void enable_trace();
  std::vector<TraceEvent> take_trace();
  // Re-applies a recorded trace; with equal seeds and starting instances the
  // resulting pool is bit-identical to the one that produced the trace.
  void replay(const std::vector<TraceEvent>& trace);

 private:
  InstancePool(std::vector<glm::WeightVector> instances, Strategy strategy, SpamPolicy spam,
               std::uint64_t seed, const Counters& counters);

  SubmitOutcome submit_locked(const glm::WeightVector& updated,
                              const std::optional<DrawToken>& token);
  SubmitOutcome submit_gradient_locked(const Eigen::MatrixXd& grad, long examples);
  SpamDecision spam_check_locked(const glm::WeightVector& updated) const;
  void check_shape(const Eigen::MatrixXd& m) const;

  mutable std::mutex mu_;
  std::vector<glm::WeightVector> instances_;
  Strategy strategy_;
  SpamPolicy spam_;
  Rng rng_;
  Counters counters_;
  Eigen::MatrixXd grad_accum_;
  long grad_count_ = 0;
  bool tracing_ = false;
  std::vector<TraceEvent> trace_;
};

}  // namespace ddml::pool
