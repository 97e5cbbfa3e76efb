#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ddml/dataset.hpp"
#include "ddml/dp_client.hpp"
#include "ddml/pool.hpp"

namespace ddml::net {

// Wire protocol: UTF-8 JSON objects, one per line, LF-terminated.
// Requests:  {"op":"spec"} | {"op":"draw"} | {"op":"submit","weights":[...]}
// Replies:   {"ok":true,"spec":{...}}
//            {"ok":true,"weights":[...],"version":n}
//            {"ok":true,"status":"accepted"|"rejected_spam"|"dropped"}
//            {"ok":false,"error":"..."}
// A submit reply never names the replaced instance.
std::string handle_request_line(const std::string& line, pool::InstancePool& pool,
                                const glm::ModelSpec& spec);

// Minimal asynchronous deployment of the draw/submit loop: one handler thread
// per connection, all sharing the pool's atomic-slot operations. The server
// owns the model schema; swapping in a higher-versioned spec of the same
// shape makes agents re-fetch it on their next draw.
class Server {
 public:
  Server(pool::InstancePool& pool, glm::ModelSpec spec);
  ~Server();

  // Binds and starts accepting. port = 0 picks an ephemeral port.
  void start(const std::string& host, int port);
  int port() const { return port_; }
  // Graceful shutdown; flushes a pool snapshot to snapshot_path if set.
  void stop();

  // Replaces the served schema; the expanded shape must match the pool.
  void set_spec(glm::ModelSpec spec);
  glm::ModelSpec spec() const;

  std::string snapshot_path;

 private:
  void accept_loop();
  void handle_connection(int fd);

  pool::InstancePool& pool_;
  mutable std::mutex spec_mu_;
  glm::ModelSpec spec_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex conn_mu_;
  std::vector<std::thread> connections_;
};

struct AgentSummary {
  long rounds_run = 0;
  long submitted = 0;
  long accepted = 0;
  long rejected_spam = 0;
  long dropped = 0;
  std::uint64_t spec_version = 0;
};

// Algorithm loop for one client: fetch the spec, then per round draw, update
// on the local examples, submit. Agents with no local examples idle. Network
// failures are retried with bounded exponential backoff.
AgentSummary client_agent(const std::string& host, int port, const data::Dataset& local,
                          const dp::PrivacyParams& params, long rounds, Rng& rng);

}  // namespace ddml::net
