#include "ddml/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

namespace ddml::net {

using nlohmann::json;

namespace {

json error_reply(const std::string& what) { return json{{"ok", false}, {"error", what}}; }

json handle_request(const json& req, pool::InstancePool& pool, const glm::ModelSpec& spec) {
  const auto op = req.at("op").get<std::string>();
  if (op == "spec") {
    return json{{"ok", true}, {"spec", spec.to_json()}};
  }
  if (op == "draw") {
    auto [idx, w] = pool.draw();
    (void)idx;  // never leaves the server
    return json{{"ok", true}, {"weights", w.flatten()}, {"version", spec.version}};
  }
  if (op == "submit") {
    auto flat = req.at("weights").get<std::vector<double>>();
    glm::WeightVector w = glm::WeightVector::from_flat(spec, flat);
    auto outcome = pool.submit(w);
    return json{{"ok", true}, {"status", pool::submit_status_name(outcome.status)}};
  }
  return error_reply("unknown op '" + op + "'");
}

}  // namespace

std::string handle_request_line(const std::string& line, pool::InstancePool& pool,
                                const glm::ModelSpec& spec) {
  json reply;
  try {
    reply = handle_request(json::parse(line), pool, spec);
  } catch (const Error& e) {
    reply = error_reply(errc_name(e.code()));
  } catch (const std::exception&) {
    reply = error_reply("BadRequest");
  }
  return reply.dump() + "\n";
}

Server::Server(pool::InstancePool& pool, glm::ModelSpec spec)
    : pool_(pool), spec_(std::move(spec)) {
  if (pool_.strategy().needs_token())
    fail(Errc::bad_config, "wire protocol carries no draw token; strategy unsupported");
}

Server::~Server() { stop(); }

void Server::set_spec(glm::ModelSpec spec) {
  spec.validate();
  const auto sample = pool_.instances_copy().front();
  if (spec.dimension() != sample.dim() || spec.class_rows() != sample.rows())
    fail(Errc::shape_mismatch, "new spec shape does not match the pool");
  std::lock_guard<std::mutex> lk(spec_mu_);
  spec_ = std::move(spec);
}

glm::ModelSpec Server::spec() const {
  std::lock_guard<std::mutex> lk(spec_mu_);
  return spec_;
}

void Server::start(const std::string& host, int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) fail(Errc::bind_failure, "socket: " + std::string(std::strerror(errno)));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    fail(Errc::bind_failure, "bad bind address " + host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(Errc::bind_failure, "bind: " + std::string(std::strerror(errno)));
  }
  if (::listen(listen_fd_, 128) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(Errc::bind_failure, "listen: " + std::string(std::strerror(errno)));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    std::lock_guard<std::mutex> lk(conn_mu_);
    connections_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void Server::handle_connection(int fd) {
  timeval tv{0, 200000};  // poll for shutdown 5x a second
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  std::string buf;
  char chunk[4096];
  while (running_) {
    ssize_t got = ::recv(fd, chunk, sizeof(chunk), 0);
    if (got < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) continue;
    if (got <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(got));
    std::size_t pos;
    while ((pos = buf.find('\n')) != std::string::npos) {
      std::string line = buf.substr(0, pos);
      buf.erase(0, pos + 1);
      if (line.empty()) continue;
      const std::string reply = handle_request_line(line, pool_, spec());
      std::size_t sent = 0;
      while (sent < reply.size()) {
        ssize_t n = ::send(fd, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) {
          ::close(fd);
          return;
        }
        sent += static_cast<std::size_t>(n);
      }
    }
  }
  ::close(fd);
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard<std::mutex> lk(conn_mu_);
    for (auto& t : connections_) {
      if (t.joinable()) t.join();
    }
    connections_.clear();
  }
  if (!snapshot_path.empty()) {
    std::ofstream f(snapshot_path);
    if (f) f << pool_.snapshot().dump() << "\n";
  }
}

namespace {

class Connection {
 public:
  Connection(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) fail(Errc::io, "socket: " + std::string(std::strerror(errno)));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd_);
      fail(Errc::io, "bad server address " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(Errc::io, "connect: " + std::string(std::strerror(errno)));
    }
  }
  ~Connection() {
    if (fd_ >= 0) ::close(fd_);
  }
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  json round_trip(const json& request) {
    const std::string msg = request.dump() + "\n";
    std::size_t sent = 0;
    while (sent < msg.size()) {
      ssize_t n = ::send(fd_, msg.data() + sent, msg.size() - sent, MSG_NOSIGNAL);
      if (n <= 0) fail(Errc::io, "send failed");
      sent += static_cast<std::size_t>(n);
    }
    std::size_t pos;
    while ((pos = buf_.find('\n')) == std::string::npos) {
      char chunk[4096];
      ssize_t got = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (got <= 0) fail(Errc::io, "connection closed mid-reply");
      buf_.append(chunk, static_cast<std::size_t>(got));
    }
    std::string line = buf_.substr(0, pos);
    buf_.erase(0, pos + 1);
    return json::parse(line);
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

// Bounded exponential backoff around one request; rethrows after max_tries.
json request_with_retry(const std::string& host, int port, std::unique_ptr<Connection>& conn,
                        const json& request, int max_tries = 5) {
  int delay_ms = 10;
  for (int attempt = 1;; ++attempt) {
    try {
      if (!conn) conn = std::make_unique<Connection>(host, port);
      return conn->round_trip(request);
    } catch (const Error&) {
      conn.reset();
      if (attempt >= max_tries) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms = std::min(delay_ms * 2, 500);
    }
  }
}

}  // namespace

AgentSummary client_agent(const std::string& host, int port, const data::Dataset& local,
                          const dp::PrivacyParams& params, long rounds, Rng& rng) {
  AgentSummary s;
  if (local.n() < 1) return s;  // N_c = 0: stay idle

  std::unique_ptr<Connection> conn;
  json spec_reply = request_with_retry(host, port, conn, json{{"op", "spec"}});
  if (!spec_reply.value("ok", false)) fail(Errc::protocol, "server refused spec request");
  glm::ModelSpec spec = glm::ModelSpec::from_json(spec_reply.at("spec"));
  s.spec_version = spec.version;

  for (long r = 0; r < rounds; ++r) {
    json draw = request_with_retry(host, port, conn, json{{"op", "draw"}});
    if (!draw.value("ok", false)) fail(Errc::protocol, "draw failed: " + draw.dump());
    if (draw.value("version", spec.version) != spec.version) {
      spec_reply = request_with_retry(host, port, conn, json{{"op", "spec"}});
      spec = glm::ModelSpec::from_json(spec_reply.at("spec"));
      s.spec_version = spec.version;
    }
    glm::WeightVector w =
        glm::WeightVector::from_flat(spec, draw.at("weights").get<std::vector<double>>());
    glm::WeightVector updated = dp::client_update(w, spec, local.X, local.y, params, rng);
    json reply = request_with_retry(
        host, port, conn, json{{"op", "submit"}, {"weights", updated.flatten()}});
    ++s.rounds_run;
    if (!reply.value("ok", false)) continue;
    ++s.submitted;
    const auto status = reply.value("status", std::string());
    if (status == "accepted") ++s.accepted;
    if (status == "rejected_spam") ++s.rejected_spam;
    if (status == "dropped") ++s.dropped;
  }
  return s;
}

}  // namespace ddml::net
