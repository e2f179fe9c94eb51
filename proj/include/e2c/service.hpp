// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "e2c/pipeline.hpp"
#include "json.hpp"

namespace e2c::service {

/// Bounded, internally synchronised store of the most recent traces.
class TraceStore {
 public:
  explicit TraceStore(std::size_t capacity = 1000);

  void put(const std::string& turn_id, nlohmann::json trace);
  std::optional<nlohmann::json> get(const std::string& turn_id) const;
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<std::string> order_;
  std::map<std::string, nlohmann::json> traces_;
};

struct ServiceOptions {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> static_dir;
  std::size_t trace_capacity = 1000;
  std::optional<std::uint64_t> seed;  // overrides the manifest's fallback seed
};

/// HTTP front end for one engine:
///   POST /api/chat        {"session_id", "utterance"} -> {"response", "route", "turn_id", "trace_ref"}
///   GET  /api/trace/{id}  pipeline trace JSON
///   GET  /api/health      load status and per-component state
///   GET  /                static assets from static_dir
/// Until the engine is loaded every /api route except health answers 503.
class ChatService {
 public:
  explicit ChatService(ServiceOptions options);
  ~ChatService();
  ChatService(const ChatService&) = delete;
  ChatService& operator=(const ChatService&) = delete;

  /// Starts loading the manifest on a background thread.
  void load_async();
  /// Loads on the calling thread; rethrows load errors.
  void load();
  /// Installs an already built engine (tests).
  void set_engine(pipeline::Engine engine);
  bool ready() const { return state_.load() == State::kReady; }
  void wait_loaded() const;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  void run();
  void stop();

  /// Request handlers, independent of the socket layer.
  struct Reply {
    int status = 200;
    nlohmann::json body;
  };
  Reply chat(const std::string& request_body);
  Reply trace(const std::string& turn_id) const;
  Reply health() const;

 private:
  enum class State { kLoading, kReady, kFailed };
  struct Http;

  ServiceOptions options_;
  std::atomic<State> state_{State::kLoading};
  std::shared_ptr<const pipeline::Engine> engine_;
  std::string load_error_;
  mutable std::mutex load_mu_;
  std::thread loader_;
  std::atomic<std::uint64_t> next_turn_{0};
  TraceStore traces_;
  std::unique_ptr<Http> http_;
};

/// Splits "host:port"; a bare port means 127.0.0.1. Throws ConfigError.
std::pair<std::string, int> parse_bind(const std::string& bind);

}  // namespace e2c::service
