#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "corridor_gym/env.hpp"

namespace cgym {

// Line-delimited JSON protocol for external agents; field reference in
// docs/protocol.md.
//
//   -> {"type":"reset"}
//   -> {"type":"step","actions":{"3":0,"7":2}}     0 Decelerate, 1 Hold, 2 Accelerate
//   <- {"type":"reset"|"step","time_s":..,"observations":{..},"valid_counts":{..},
//       "rewards":{..},"actions":{..},"dones":{..,"__all__":bool},"events":[..],"states":[..]}
//   <- {"type":"error","message":".."}
nlohmann::ordered_json step_result_to_json(const char* type, const StepResult& result);

// Inverse of step_result_to_json; throws ParseError.
StepResult step_result_from_json(const nlohmann::json& msg);

// One environment instance driven by request lines. Errors leave the
// environment untouched and yield an error response.
class ProtocolSession {
 public:
  explicit ProtocolSession(std::unique_ptr<Environment> env);

  // Returns one response line without the trailing newline. Sets
  // closed() after a {"type":"close"} request.
  std::string handle(const std::string& line);

  bool closed() const { return closed_; }

 private:
  std::unique_ptr<Environment> env_;
  bool started_ = false;
  bool closed_ = false;
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>()>;

// TCP server on 127.0.0.1; every accepted connection gets its own session
// and environment from `factory`.
class ProtocolServer {
 public:
  ProtocolServer(EnvironmentFactory factory, std::uint16_t port);  // port 0 = ephemeral
  ~ProtocolServer();

  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  std::uint16_t port() const { return port_; }

  void start();           // accept loop on a background thread
  void serve_forever();   // accept loop on the calling thread
  void stop();

 private:
  void accept_loop();
  void handle_connection(int fd);

  EnvironmentFactory factory_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> connections_;
  std::vector<int> open_fds_;
};

// Blocking line client, mainly for tests and scripted agents.
class ProtocolClient {
 public:
  ProtocolClient(const std::string& host, std::uint16_t port);
  ~ProtocolClient();

  ProtocolClient(const ProtocolClient&) = delete;
  ProtocolClient& operator=(const ProtocolClient&) = delete;

  // Sends one line and returns the response line. Throws InputError when the
  // connection drops.
  std::string request_line(const std::string& line);
  nlohmann::json request(const nlohmann::json& msg);

 private:
  int fd_ = -1;
  std::string pending_;
};

}  // namespace cgym
