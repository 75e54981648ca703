#ifndef HWSAFE__POLICY__WIRE_HPP_
#define HWSAFE__POLICY__WIRE_HPP_

/**
 * @file
 * @brief Client and loopback stub for an external policy backend.
 *
 * Framing: 4-byte big-endian payload length, then a JSON document. One request and one reply
 * per connection.
 *
 *   request  {"schema_version": 1, "prompt_text": str, "features": [num], "action_names": [str]}
 *   reply    {"logits": [num, num, num], "value": num}
 */

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include <json.hpp>

#include "hwsafe/policy/actor_critic.hpp"

namespace hwsafe {

inline constexpr int kWireSchemaVersion = 1;
/// Largest accepted payload (bytes).
inline constexpr std::uint32_t kWireMaxPayload = 1u << 24;

class WireError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace wire {

using Clock = std::chrono::steady_clock;

/// Owns a file descriptor.
class Socket
{
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket &)             = delete;
  Socket & operator=(const Socket &) = delete;
  Socket(Socket && o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket & operator=(Socket && o) noexcept
  {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset()
  {
    if (fd_ >= 0) { ::close(fd_); }
    fd_ = -1;
  }

private:
  int fd_{-1};
};

inline int remaining_ms(Clock::time_point deadline)
{
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left > 0 ? static_cast<int>(left) : 0;
}

inline void wait_for(int fd, short events, Clock::time_point deadline)
{
  for (;;) {
    pollfd p{fd, events, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline));
    if (r > 0) { return; }
    if (r == 0) { throw WireError("timed out"); }
    if (errno != EINTR) { throw WireError(std::string("poll: ") + std::strerror(errno)); }
  }
}

inline void send_all(int fd, const char * data, std::size_t n, Clock::time_point deadline)
{
  while (n > 0) {
    wait_for(fd, POLLOUT, deadline);
    const ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) { continue; }
      throw WireError(std::string("send: ") + std::strerror(errno));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

inline void recv_all(int fd, char * data, std::size_t n, Clock::time_point deadline)
{
  while (n > 0) {
    wait_for(fd, POLLIN, deadline);
    const ssize_t k = ::recv(fd, data, n, 0);
    if (k == 0) { throw WireError("connection closed by peer"); }
    if (k < 0) {
      if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) { continue; }
      throw WireError(std::string("recv: ") + std::strerror(errno));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

inline void write_frame(int fd, const std::string & payload, Clock::time_point deadline)
{
  if (payload.size() > kWireMaxPayload) { throw WireError("payload too large"); }
  const std::uint32_t be = htonl(static_cast<std::uint32_t>(payload.size()));
  char header[4];
  std::memcpy(header, &be, 4);
  send_all(fd, header, 4, deadline);
  send_all(fd, payload.data(), payload.size(), deadline);
}

inline std::string read_frame(int fd, Clock::time_point deadline)
{
  char header[4];
  recv_all(fd, header, 4, deadline);
  std::uint32_t be = 0;
  std::memcpy(&be, header, 4);
  const std::uint32_t n = ntohl(be);
  if (n > kWireMaxPayload) { throw WireError("announced payload too large"); }
  std::string payload(n, '\0');
  recv_all(fd, payload.data(), n, deadline);
  return payload;
}

inline void set_nonblocking(int fd)
{
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) { throw WireError("fcntl failed"); }
}

inline Socket connect_loopback(std::uint16_t port, Clock::time_point deadline)
{
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) { throw WireError(std::string("socket: ") + std::strerror(errno)); }
  set_nonblocking(s.fd());
  sockaddr_in addr{};
  addr.sin_family      = AF_INET;
  addr.sin_port        = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(s.fd(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) < 0) {
    if (errno != EINPROGRESS) { throw WireError(std::string("connect: ") + std::strerror(errno)); }
    wait_for(s.fd(), POLLOUT, deadline);
    int err       = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) { throw WireError(std::string("connect: ") + std::strerror(err)); }
  }
  return s;
}

inline nlohmann::json make_request(const std::string & prompt, const Eigen::VectorXd & features)
{
  nlohmann::json j;
  j["schema_version"] = kWireSchemaVersion;
  j["prompt_text"]    = prompt;
  j["features"]       = std::vector<double>(features.data(), features.data() + features.size());
  auto names          = nlohmann::json::array();
  for (Action a : kAllActions) { names.push_back(std::string(action_name(a))); }
  j["action_names"] = names;
  return j;
}

/// Validate a reply body; throws WireError on any protocol violation.
inline PolicyOutput parse_reply(const std::string & payload)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception & e) {
    throw WireError(std::string("malformed reply: ") + e.what());
  }
  if (!j.is_object() || !j.contains("logits") || !j.contains("value")) { throw WireError("reply misses logits or value"); }
  const auto & lj = j["logits"];
  if (!lj.is_array() || lj.size() != kNumActions) { throw WireError("reply logits must be an array of 3 numbers"); }
  Eigen::Vector3d logits;
  for (int i = 0; i < kNumActions; ++i) {
    if (!lj[i].is_number()) { throw WireError("reply logits must be numbers"); }
    logits(i) = lj[i].get<double>();
  }
  if (!j["value"].is_number()) { throw WireError("reply value must be a number"); }
  const double value = j["value"].get<double>();
  if (!logits.allFinite() || !std::isfinite(value)) { throw WireError("reply contains non-finite numbers"); }
  return make_output(logits, value);
}

}  // namespace wire

struct WireConfig
{
  std::uint16_t port{0};
  std::chrono::milliseconds timeout{500};
};

/// One round trip to the backend. Throws WireError on timeout or protocol violation.
inline PolicyOutput query_backend(const WireConfig & cfg, const std::string & prompt, const Eigen::VectorXd & features)
{
  const auto deadline = wire::Clock::now() + cfg.timeout;
  wire::Socket s      = wire::connect_loopback(cfg.port, deadline);
  wire::write_frame(s.fd(), wire::make_request(prompt, features).dump(), deadline);
  return wire::parse_reply(wire::read_frame(s.fd(), deadline));
}

/// Outcome of a policy query that may have degraded to the local network.
struct PolicyQueryResult
{
  PolicyOutput output;
  bool fallback{false};
  /// reason for the fallback, empty otherwise
  std::string event;
};

/// Remote policy with a local network as fallback. Never throws on backend failure.
class ExternalPolicy
{
public:
  ExternalPolicy(WireConfig cfg, ActorCriticNet local) : cfg_(cfg), local_(std::move(local)) {}

  PolicyQueryResult query(const std::string & prompt, const Eigen::VectorXd & features) const
  {
    PolicyQueryResult r;
    try {
      r.output = query_backend(cfg_, prompt, features);
    } catch (const WireError & e) {
      r.fallback = true;
      r.event    = std::string("external policy unavailable, using local network: ") + e.what();
      r.output   = local_.forward(features);
    }
    return r;
  }

  const WireConfig & config() const { return cfg_; }
  const ActorCriticNet & local() const { return local_; }

private:
  WireConfig cfg_;
  ActorCriticNet local_;
};

/**
 * @brief Loopback backend for tests and demos.
 *
 * The handler maps a parsed request to a raw reply payload, so tests can also send malformed
 * replies. An optional delay is applied before replying.
 */
class StubPolicyServer
{
public:
  using Handler = std::function<std::string(const nlohmann::json &)>;

  explicit StubPolicyServer(Handler handler, std::chrono::milliseconds delay = std::chrono::milliseconds{0})
  : handler_(std::move(handler)), delay_(delay)
  {
    listener_ = wire::Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener_.valid()) { throw WireError("stub: socket failed"); }
    int one = 1;
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family      = AF_INET;
    addr.sin_port        = 0;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(listener_.fd(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) < 0
        || ::listen(listener_.fd(), 8) < 0) {
      throw WireError("stub: bind/listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listener_.fd(), reinterpret_cast<sockaddr *>(&addr), &len);
    port_   = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }

  StubPolicyServer(const StubPolicyServer &)             = delete;
  StubPolicyServer & operator=(const StubPolicyServer &) = delete;

  ~StubPolicyServer()
  {
    stop_ = true;
    ::shutdown(listener_.fd(), SHUT_RDWR);
    if (thread_.joinable()) { thread_.join(); }
  }

  std::uint16_t port() const { return port_; }
  int requests_served() const { return served_; }

  /// Handler replying with fixed numbers, serialized at full precision.
  static Handler constant(const Eigen::Vector3d & logits, double value)
  {
    return [logits, value](const nlohmann::json &) {
      nlohmann::json r;
      r["logits"] = {logits(0), logits(1), logits(2)};
      r["value"]  = value;
      return r.dump();
    };
  }

private:
  void serve()
  {
    while (!stop_) {
      pollfd p{listener_.fd(), POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) { continue; }
      wire::Socket conn(::accept(listener_.fd(), nullptr, nullptr));
      if (!conn.valid()) { continue; }
      try {
        const auto deadline = wire::Clock::now() + std::chrono::seconds(5);
        const auto request  = nlohmann::json::parse(wire::read_frame(conn.fd(), deadline));
        const std::string reply = handler_(request);
        if (delay_.count() > 0) { std::this_thread::sleep_for(delay_); }
        wire::write_frame(conn.fd(), reply, wire::Clock::now() + std::chrono::seconds(5));
        ++served_;
      } catch (const std::exception &) {
        // a broken client must not take the stub down
      }
    }
  }

  Handler handler_;
  std::chrono::milliseconds delay_;
  wire::Socket listener_;
  std::uint16_t port_{0};
  std::atomic<bool> stop_{false};
  std::atomic<int> served_{0};
  std::thread thread_;
};

}  // namespace hwsafe

#endif  // HWSAFE__POLICY__WIRE_HPP_
