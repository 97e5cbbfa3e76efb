#include "ddml/pool.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace ddml::pool {

using nlohmann::json;

namespace {

const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::draw_and_discard: return "draw_and_discard";
    case StrategyKind::same_instance_replace: return "same_instance_replace";
    case StrategyKind::accept_rate: return "accept_rate";
    case StrategyKind::average_before_overwrite: return "average_before_overwrite";
    case StrategyKind::server_batch: return "server_batch";
    case StrategyKind::single_model: return "single_model";
  }
  return "draw_and_discard";
}

StrategyKind strategy_of(const std::string& s) {
  for (StrategyKind k :
       {StrategyKind::draw_and_discard, StrategyKind::same_instance_replace,
        StrategyKind::accept_rate, StrategyKind::average_before_overwrite,
        StrategyKind::server_batch, StrategyKind::single_model}) {
    if (s == strategy_name(k)) return k;
  }
  fail(Errc::bad_config, "unknown strategy '" + s + "'");
}

}  // namespace

const char* submit_status_name(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::accepted: return "accepted";
    case SubmitStatus::rejected_spam: return "rejected_spam";
    case SubmitStatus::dropped: return "dropped";
  }
  return "accepted";
}

void Strategy::validate() const {
  if (kind == StrategyKind::server_batch && batch_size < 1)
    fail(Errc::bad_config, "server_batch needs batch_size >= 1");
  if (kind == StrategyKind::server_batch && !(gamma > 0))
    fail(Errc::bad_config, "server_batch needs gamma > 0");
  if (kind == StrategyKind::average_before_overwrite &&
      base != StrategyKind::draw_and_discard && base != StrategyKind::same_instance_replace)
    fail(Errc::bad_config, "average_before_overwrite base must be draw_and_discard or "
                           "same_instance_replace");
}

bool Strategy::needs_token() const {
  return kind == StrategyKind::same_instance_replace || kind == StrategyKind::server_batch ||
         (kind == StrategyKind::average_before_overwrite &&
          base == StrategyKind::same_instance_replace);
}

json Strategy::to_json() const {
  json j{{"name", strategy_name(kind)}};
  if (kind == StrategyKind::average_before_overwrite) j["base"] = strategy_name(base);
  if (kind == StrategyKind::server_batch) {
    j["batch_size"] = batch_size;
    j["gamma"] = gamma;
  }
  return j;
}

Strategy Strategy::from_json(const json& j) {
  Strategy s;
  if (j.is_string()) {
    s.kind = strategy_of(j.get<std::string>());
  } else {
    s.kind = strategy_of(j.at("name").get<std::string>());
    if (j.contains("base")) s.base = strategy_of(j.at("base").get<std::string>());
    s.batch_size = j.value("batch_size", s.batch_size);
    s.gamma = j.value("gamma", s.gamma);
  }
  s.validate();
  return s;
}

json SpamPolicy::to_json() const { return json{{"enabled", enabled}, {"t", t}}; }

SpamPolicy SpamPolicy::from_json(const json& j) {
  SpamPolicy p;
  p.enabled = j.value("enabled", false);
  p.t = j.value("t", 3.0);
  if (!(p.t > 0)) fail(Errc::bad_config, "spam multiplier t must be positive");
  return p;
}

InstancePool::InstancePool(std::vector<glm::WeightVector> instances, Strategy strategy,
                           SpamPolicy spam, std::uint64_t seed)
    : instances_(std::move(instances)), strategy_(strategy), spam_(spam), rng_(seed, 0xdd) {
  if (instances_.empty()) fail(Errc::bad_config, "pool needs k >= 1 instances");
  strategy_.validate();
  for (const auto& w : instances_) {
    if (!w.same_shape(instances_.front())) fail(Errc::shape_mismatch, "mixed instance shapes");
  }
  if (strategy_.forces_single_instance() && k() != 1)
    fail(Errc::bad_config, std::string(strategy_name(strategy_.kind)) + " requires k = 1");
}

InstancePool::InstancePool(std::vector<glm::WeightVector> instances, Strategy strategy,
                           SpamPolicy spam, std::uint64_t seed, const Counters& counters)
    : InstancePool(std::move(instances), strategy, spam, seed) {
  counters_ = counters;
}

InstancePool InstancePool::init(const glm::ModelSpec& spec, int k, const glm::WeightVector& means,
                                double sigma2, Strategy strategy, SpamPolicy spam, Rng& init_rng,
                                std::uint64_t pool_seed) {
  if (k < 1) fail(Errc::bad_config, "k must be >= 1");
  if (means.dim() != spec.dimension() || means.rows() != spec.class_rows())
    fail(Errc::shape_mismatch, "init means do not match spec");
  std::vector<glm::WeightVector> inst;
  inst.reserve(static_cast<std::size_t>(k));
  const double sd = k > 1 ? std::sqrt(k / 2.0 * sigma2) : 0.0;
  for (int i = 0; i < k; ++i) {
    glm::WeightVector w = means;
    if (sd > 0.0) {
      for (Eigen::Index r = 0; r < w.coef.rows(); ++r)
        for (Eigen::Index c = 0; c < w.coef.cols(); ++c) w.coef(r, c) += init_rng.normal(0.0, sd);
    }
    inst.push_back(std::move(w));
  }
  return InstancePool(std::move(inst), strategy, spam, pool_seed);
}

void InstancePool::check_shape(const Eigen::MatrixXd& m) const {
  const auto& ref = instances_.front().coef;
  if (m.rows() != ref.rows() || m.cols() != ref.cols())
    fail(Errc::shape_mismatch, "submitted shape " + std::to_string(m.rows()) + "x" +
                                   std::to_string(m.cols()) + " != pool shape " +
                                   std::to_string(ref.rows()) + "x" + std::to_string(ref.cols()));
}

std::pair<int, glm::WeightVector> InstancePool::draw() {
  std::lock_guard<std::mutex> lk(mu_);
  ++counters_.draws;
  const int i = static_cast<int>(rng_.uniform_index(instances_.size()));
  if (tracing_) trace_.push_back({TraceEvent::Kind::draw, {}});
  return {i, instances_[static_cast<std::size_t>(i)]};
}

SpamDecision InstancePool::spam_check_locked(const glm::WeightVector& updated) const {
  if (k() < 2) fail(Errc::pool_too_small, "spam test needs k >= 2");
  check_shape(updated.coef);
  const auto& ref = instances_.front().coef;
  SpamDecision d;
  for (Eigen::Index r = 0; r < ref.rows(); ++r) {
    for (Eigen::Index c = 0; c < ref.cols(); ++c) {
      double mean = 0.0;
      for (const auto& w : instances_) mean += w.coef(r, c);
      mean /= k();
      double ss = 0.0;
      for (const auto& w : instances_) {
        const double dlt = w.coef(r, c) - mean;
        ss += dlt * dlt;
      }
      const double sd = std::sqrt(ss / (k() - 1));
      if (std::fabs(updated.coef(r, c) - mean) > spam_.t * sd) {
        d.offending.push_back(static_cast<int>(r * ref.cols() + c));
      }
    }
  }
  d.accept = d.offending.empty();
  return d;
}

SpamDecision InstancePool::spam_check(const glm::WeightVector& updated) const {
  std::lock_guard<std::mutex> lk(mu_);
  return spam_check_locked(updated);
}

SubmitOutcome InstancePool::submit(const glm::WeightVector& updated,
                                   const std::optional<DrawToken>& token) {
  std::lock_guard<std::mutex> lk(mu_);
  if (tracing_) trace_.push_back({TraceEvent::Kind::submit, updated.flatten()});
  return submit_locked(updated, token);
}

SubmitOutcome InstancePool::submit_locked(const glm::WeightVector& updated,
                                          const std::optional<DrawToken>& token) {
  check_shape(updated.coef);
  ++counters_.submits;

  if (spam_.enabled) {
    SpamDecision d = spam_check_locked(updated);
    if (!d.accept) {
      ++counters_.rejected_spam;
      return {SubmitStatus::rejected_spam, -1, std::move(d.offending)};
    }
  }

  if (strategy_.needs_token() && !token)
    fail(Errc::bad_config, "strategy requires the simulator's draw token");

  auto replace_at = [&](int j, const Eigen::MatrixXd& value) {
    instances_[static_cast<std::size_t>(j)].coef = value;
    ++counters_.accepted;
    if (token && token->index == j) ++counters_.discarded_preimages;
  };

  switch (strategy_.kind) {
    case StrategyKind::draw_and_discard: {
      const int j = static_cast<int>(rng_.uniform_index(instances_.size()));
      replace_at(j, updated.coef);
      return {SubmitStatus::accepted, j, {}};
    }
    case StrategyKind::same_instance_replace: {
      replace_at(token->index, updated.coef);
      return {SubmitStatus::accepted, token->index, {}};
    }
    case StrategyKind::accept_rate: {
      if (rng_.uniform() >= 1.0 / k()) {
        ++counters_.dropped;
        return {SubmitStatus::dropped, -1, {}};
      }
      const int j = static_cast<int>(rng_.uniform_index(instances_.size()));
      replace_at(j, updated.coef);
      return {SubmitStatus::accepted, j, {}};
    }
    case StrategyKind::average_before_overwrite: {
      const int j = strategy_.base == StrategyKind::same_instance_replace
                        ? token->index
                        : static_cast<int>(rng_.uniform_index(instances_.size()));
      Eigen::MatrixXd mixed =
          0.5 * (updated.coef + instances_[static_cast<std::size_t>(j)].coef);
      replace_at(j, mixed);
      return {SubmitStatus::accepted, j, {}};
    }
    case StrategyKind::server_batch: {
      Eigen::MatrixXd implied = (token->drawn.coef - updated.coef) / strategy_.gamma;
      return submit_gradient_locked(implied, 1);
    }
    case StrategyKind::single_model: {
      replace_at(0, updated.coef);
      return {SubmitStatus::accepted, 0, {}};
    }
  }
  fail(Errc::bad_config, "unhandled strategy");
}

SubmitOutcome InstancePool::submit_gradient(const Eigen::MatrixXd& grad, long examples) {
  std::lock_guard<std::mutex> lk(mu_);
  if (tracing_) {
    TraceEvent ev{TraceEvent::Kind::submit_gradient, {}, examples};
    ev.payload.reserve(static_cast<std::size_t>(grad.size()));
    for (Eigen::Index r = 0; r < grad.rows(); ++r)
      for (Eigen::Index c = 0; c < grad.cols(); ++c) ev.payload.push_back(grad(r, c));
    trace_.push_back(std::move(ev));
  }
  ++counters_.submits;
  return submit_gradient_locked(grad, examples);
}

// Callers account for counters_.submits.
SubmitOutcome InstancePool::submit_gradient_locked(const Eigen::MatrixXd& grad, long examples) {
  if (strategy_.kind != StrategyKind::server_batch)
    fail(Errc::bad_config, "submit_gradient is a server_batch operation");
  if (examples < 1) fail(Errc::bad_config, "gradient must carry >= 1 examples");
  check_shape(grad);
  if (grad_count_ == 0) grad_accum_ = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
  grad_accum_ += static_cast<double>(examples) * grad;
  grad_count_ += examples;
  ++counters_.accepted;
  if (grad_count_ >= strategy_.batch_size) {
    instances_[0].coef -= strategy_.gamma * (grad_accum_ / static_cast<double>(grad_count_));
    grad_count_ = 0;
  }
  return {SubmitStatus::accepted, 0, {}};
}

PoolStats InstancePool::stats() const {
  std::lock_guard<std::mutex> lk(mu_);
  const auto& ref = instances_.front().coef;
  PoolStats s;
  s.mean = Eigen::MatrixXd::Zero(ref.rows(), ref.cols());
  for (const auto& w : instances_) s.mean += w.coef;
  s.mean /= k();
  if (k() < 2) fail(Errc::pool_too_small, "variance needs k >= 2");
  s.variance = Eigen::MatrixXd::Zero(ref.rows(), ref.cols());
  for (const auto& w : instances_) s.variance += (w.coef - s.mean).cwiseAbs2();
  s.variance /= (k() - 1);
  return s;
}

double InstancePool::mean_weight_variance() const {
  if (k() < 2) return 0.0;
  return stats().variance.mean();
}

glm::WeightVector InstancePool::average() const {
  std::lock_guard<std::mutex> lk(mu_);
  return glm::average_models(instances_);
}

Counters InstancePool::counters() const {
  std::lock_guard<std::mutex> lk(mu_);
  return counters_;
}

std::vector<glm::WeightVector> InstancePool::instances_copy() const {
  std::lock_guard<std::mutex> lk(mu_);
  return instances_;
}

json InstancePool::snapshot() const {
  std::lock_guard<std::mutex> lk(mu_);
  const auto& ref = instances_.front().coef;
  json inst = json::array();
  for (const auto& w : instances_) inst.push_back(w.flatten());
  return json{{"k", k()},
              {"rows", ref.rows()},
              {"cols", ref.cols()},
              {"strategy", strategy_.to_json()},
              {"spam", spam_.to_json()},
              {"instances", std::move(inst)},
              {"counters",
               {{"draws", counters_.draws},
                {"submits", counters_.submits},
                {"accepted", counters_.accepted},
                {"rejected_spam", counters_.rejected_spam},
                {"dropped", counters_.dropped},
                {"discarded_preimages", counters_.discarded_preimages}}}};
}

InstancePool InstancePool::from_snapshot(const json& j, std::uint64_t seed) {
  const int k = j.at("k").get<int>();
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  std::vector<glm::WeightVector> inst;
  for (const auto& arr : j.at("instances")) {
    auto flat = arr.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
      fail(Errc::shape_mismatch, "snapshot instance length mismatch");
    glm::WeightVector w;
    w.coef.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        w.coef(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
    inst.push_back(std::move(w));
  }
  if (static_cast<int>(inst.size()) != k) fail(Errc::count_mismatch, "snapshot k != instances");
  Counters counters;
  if (j.contains("counters")) {
    const auto& c = j.at("counters");
    counters.draws = c.value("draws", std::uint64_t{0});
    counters.submits = c.value("submits", std::uint64_t{0});
    counters.accepted = c.value("accepted", std::uint64_t{0});
    counters.rejected_spam = c.value("rejected_spam", std::uint64_t{0});
    counters.dropped = c.value("dropped", std::uint64_t{0});
    counters.discarded_preimages = c.value("discarded_preimages", std::uint64_t{0});
  }
  return InstancePool(std::move(inst), Strategy::from_json(j.at("strategy")),
                      SpamPolicy::from_json(j.at("spam")), seed, counters);
}

void InstancePool::enable_trace() {
  std::lock_guard<std::mutex> lk(mu_);
  tracing_ = true;
  trace_.clear();
}

std::vector<TraceEvent> InstancePool::take_trace() {
  std::lock_guard<std::mutex> lk(mu_);
  tracing_ = false;
  return std::move(trace_);
}

void InstancePool::replay(const std::vector<TraceEvent>& trace) {
  const auto& ref = instances_.front().coef;
  for (const auto& ev : trace) {
    switch (ev.kind) {
      case TraceEvent::Kind::draw:
        draw();
        break;
      case TraceEvent::Kind::submit: {
        glm::WeightVector w;
        w.coef.resize(ref.rows(), ref.cols());
        if (static_cast<Eigen::Index>(ev.payload.size()) != ref.size())
          fail(Errc::shape_mismatch, "trace payload length mismatch");
        for (Eigen::Index r = 0; r < ref.rows(); ++r)
          for (Eigen::Index c = 0; c < ref.cols(); ++c)
            w.coef(r, c) = ev.payload[static_cast<std::size_t>(r * ref.cols() + c)];
        submit(w);
        break;
      }
      case TraceEvent::Kind::submit_gradient: {
        Eigen::MatrixXd g(ref.rows(), ref.cols());
        if (static_cast<Eigen::Index>(ev.payload.size()) != ref.size())
          fail(Errc::shape_mismatch, "trace payload length mismatch");
        for (Eigen::Index r = 0; r < ref.rows(); ++r)
          for (Eigen::Index c = 0; c < ref.cols(); ++c)
            g(r, c) = ev.payload[static_cast<std::size_t>(r * ref.cols() + c)];
        submit_gradient(g, ev.examples);
        break;
      }
    }
  }
}

}  // namespace ddml::pool
