#include "corridor_gym/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>

#include "corridor_gym/errors.hpp"
#include "json_fields.hpp"

namespace cgym {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json event_json(const SafetyEvent& e) {
  return {{"kind", to_string(e.kind)}, {"id_a", e.id_a},         {"id_b", e.id_b},
          {"onset_s", e.onset_time},   {"end_s", e.end_time},    {"min_dist_m", e.min_distance}};
}

ordered_json error_json(const std::string& message) { return {{"type", "error"}, {"message", message}}; }

AircraftId parse_id(const std::string& key) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), v);
  if (key.empty() || ec != std::errc() || p != key.data() + key.size() || v > UINT32_MAX) {
    throw ParseError("invalid aircraft id '" + key + "'");
  }
  return static_cast<AircraftId>(v);
}

void send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw InputError(std::string("socket send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

// Reads until a newline; returns false on EOF before a full line.
bool read_line(int fd, std::string& pending, std::string& line) {
  for (;;) {
    const auto nl = pending.find('\n');
    if (nl != std::string::npos) {
      line.assign(pending, 0, nl);
      pending.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    char buf[65536];
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    pending.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace

ordered_json step_result_to_json(const char* type, const StepResult& result) {
  ordered_json msg;
  msg["type"] = type;
  msg["time_s"] = result.time;
  ordered_json obs = ordered_json::object();
  ordered_json valid = ordered_json::object();
  ordered_json rewards = ordered_json::object();
  ordered_json actions = ordered_json::object();
  ordered_json dones = ordered_json::object();
  for (const auto& [id, a] : result.agents) {
    const std::string key = std::to_string(id);
    obs[key] = a.observation.features;
    valid[key] = a.observation.valid_count;
    if (a.reward) rewards[key] = *a.reward;
    if (a.action) actions[key] = to_index(*a.action);
    dones[key] = a.done;
  }
  dones["__all__"] = result.done;
  msg["observations"] = std::move(obs);
  msg["valid_counts"] = std::move(valid);
  msg["rewards"] = std::move(rewards);
  msg["actions"] = std::move(actions);
  msg["dones"] = std::move(dones);
  ordered_json events = ordered_json::array();
  for (const auto& e : result.events) events.push_back(event_json(e));
  msg["events"] = std::move(events);
  ordered_json states = ordered_json::array();
  for (const auto& s : result.snapshot) {
    states.push_back({{"id", s.id},
                      {"x_m", s.x},
                      {"y_m", s.y},
                      {"z_m", s.z},
                      {"heading_deg", s.heading},
                      {"speed_mps", s.speed},
                      {"accel_mps2", s.accel},
                      {"controllable", s.controllable}});
  }
  msg["states"] = std::move(states);
  return msg;
}

StepResult step_result_from_json(const json& msg) {
  using detail::field;
  const std::string where = "response";
  StepResult r;
  r.time = field<double>(msg, "time_s", where);
  const json& dones = detail::require(msg, "dones", where);
  r.done = field<bool>(dones, "__all__", where + ".dones");
  const json& obs = detail::require(msg, "observations", where);
  const json& valid = detail::require(msg, "valid_counts", where);
  const json& rewards = detail::require(msg, "rewards", where);
  const json& actions = detail::require(msg, "actions", where);
  for (auto it = obs.begin(); it != obs.end(); ++it) {
    const AircraftId id = parse_id(it.key());
    AgentStep a;
    a.observation.features = detail::get_as<std::vector<double>>(*it, where + ".observations." + it.key());
    a.observation.valid_count = field<std::size_t>(valid, it.key().c_str(), where + ".valid_counts");
    a.done = field<bool>(dones, it.key().c_str(), where + ".dones");
    if (rewards.contains(it.key())) a.reward = field<double>(rewards, it.key().c_str(), where + ".rewards");
    if (actions.contains(it.key())) {
      a.action = command_from_index(field<int>(actions, it.key().c_str(), where + ".actions"));
    }
    r.agents.emplace(id, std::move(a));
  }
  for (const auto& e : detail::array_field(msg, "events", where)) {
    SafetyEvent ev;
    ev.kind = parse_event_kind(field<std::string>(e, "kind", where + ".events"));
    ev.id_a = field<AircraftId>(e, "id_a", where + ".events");
    ev.id_b = field<AircraftId>(e, "id_b", where + ".events");
    ev.onset_time = field<double>(e, "onset_s", where + ".events");
    ev.end_time = field<double>(e, "end_s", where + ".events");
    ev.min_distance = field<double>(e, "min_dist_m", where + ".events");
    r.events.push_back(ev);
  }
  for (const auto& s : detail::array_field(msg, "states", where)) {
    const std::string sw = where + ".states";
    r.snapshot.push_back({field<AircraftId>(s, "id", sw), field<double>(s, "x_m", sw), field<double>(s, "y_m", sw),
                          field<double>(s, "z_m", sw), field<double>(s, "heading_deg", sw),
                          field<double>(s, "speed_mps", sw), field<double>(s, "accel_mps2", sw),
                          field<bool>(s, "controllable", sw)});
  }
  return r;
}

ProtocolSession::ProtocolSession(std::unique_ptr<Environment> env) : env_(std::move(env)) {
  if (!env_) throw ContractViolation("ProtocolSession needs an environment");
}

std::string ProtocolSession::handle(const std::string& line) {
  try {
    const json msg = detail::parse_document(line, "request");
    if (!msg.is_object()) throw ParseError("request must be a JSON object");
    const auto type = detail::field<std::string>(msg, "type", "request");
    if (type == "reset") {
      const StepResult r = env_->reset();
      started_ = true;
      return step_result_to_json("reset", r).dump();
    }
    if (type == "step") {
      if (!started_) throw ContractViolation("step before reset");
      std::map<AircraftId, SpeedCommand> actions;
      if (auto it = msg.find("actions"); it != msg.end()) {
        if (!it->is_object()) throw ParseError("request.actions must be an object");
        for (auto a = it->begin(); a != it->end(); ++a) {
          const AircraftId id = parse_id(a.key());
          if (!a->is_number_integer()) {
            throw ParseError("action for aircraft id " + a.key() + " must be an integer 0, 1 or 2");
          }
          const auto v = a->get<std::int64_t>();
          if (v < 0 || v >= static_cast<std::int64_t>(kNumSpeedCommands)) {
            throw ParseError("action " + std::to_string(v) + " for aircraft id " + a.key() + " is not 0, 1 or 2");
          }
          actions.emplace(id, command_from_index(static_cast<int>(v)));
        }
      }
      const StepResult r = env_->step(actions);
      return step_result_to_json("step", r).dump();
    }
    if (type == "close") {
      closed_ = true;
      return ordered_json{{"type", "close"}}.dump();
    }
    throw ParseError("unknown request type '" + type + "' (expected reset, step or close)");
  } catch (const Error& e) {
    return error_json(e.what()).dump();
  } catch (const json::exception& e) {
    return error_json(e.what()).dump();
  }
}

// ---------------------------------------------------------------------------
// Server

ProtocolServer::ProtocolServer(EnvironmentFactory factory, std::uint16_t port) : factory_(std::move(factory)) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw InputError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    throw InputError("cannot listen on port " + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

ProtocolServer::~ProtocolServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void ProtocolServer::start() { acceptor_ = std::thread([this] { accept_loop(); }); }

void ProtocolServer::serve_forever() { accept_loop(); }

void ProtocolServer::stop() {
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> conns;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    conns.swap(connections_);
  }
  for (auto& t : conns) t.join();
}

void ProtocolServer::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(mu_);
    open_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void ProtocolServer::handle_connection(int fd) {
  try {
    ProtocolSession session(factory_());
    std::string pending;
    std::string line;
    while (!session.closed() && read_line(fd, pending, line)) {
      if (line.empty()) continue;
      send_all(fd, session.handle(line) + "\n");
    }
  } catch (const std::exception& e) {
    try {
      send_all(fd, error_json(e.what()).dump() + "\n");
    } catch (...) {
    }
  }
  std::lock_guard lock(mu_);
  open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
  ::close(fd);
}

// ---------------------------------------------------------------------------
// Client

ProtocolClient::ProtocolClient(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
    throw InputError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
  const std::string err = std::strerror(errno);
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd_ >= 0) ::close(fd_);
    throw InputError("cannot connect to " + host + ":" + std::to_string(port) + ": " + err);
  }
}

ProtocolClient::~ProtocolClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string ProtocolClient::request_line(const std::string& line) {
  send_all(fd_, line + "\n");
  std::string response;
  if (!read_line(fd_, pending_, response)) throw InputError("server closed the connection");
  return response;
}

json ProtocolClient::request(const json& msg) {
  return detail::parse_document(request_line(msg.dump()), "response");
}

}  // namespace cgym
