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

#include "e2c/service.hpp"

#include "e2c/textproc.hpp"
#include "httplib.h"

namespace e2c::service {

using nlohmann::json;

TraceStore::TraceStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("trace store capacity must be positive");
}

void TraceStore::put(const std::string& turn_id, json trace) {
  std::lock_guard lock(mu_);
  if (traces_.insert_or_assign(turn_id, std::move(trace)).second) order_.push_back(turn_id);
  while (order_.size() > capacity_) {
    traces_.erase(order_.front());
    order_.pop_front();
  }
}

std::optional<json> TraceStore::get(const std::string& turn_id) const {
  std::lock_guard lock(mu_);
  auto it = traces_.find(turn_id);
  if (it == traces_.end()) return std::nullopt;
  return it->second;
}

std::size_t TraceStore::size() const {
  std::lock_guard lock(mu_);
  return traces_.size();
}

struct ChatService::Http {
  httplib::Server server;
};

ChatService::ChatService(ServiceOptions options)
    : options_(std::move(options)), traces_(options_.trace_capacity), http_(std::make_unique<Http>()) {
  auto& svr = http_->server;
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  };
  svr.Post("/api/chat", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, chat(req.body));
  });
  svr.Get(R"(/api/trace/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, trace(req.matches[1]));
  });
  svr.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, health());
  });
  if (options_.static_dir) {
    if (!svr.set_mount_point("/", options_.static_dir->string())) {
      throw ConfigError("static dir not found: " + options_.static_dir->string());
    }
  } else {
    svr.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("e2c service: POST /api/chat, GET /api/trace/{id}, GET /api/health\n",
                      "text/plain");
    });
  }
}

ChatService::~ChatService() {
  stop();
  if (loader_.joinable()) loader_.join();
}

void ChatService::set_engine(pipeline::Engine engine) {
  const auto missing = engine.missing_components();
  if (!missing.empty()) throw Error("component not loaded: " + missing.front());
  std::lock_guard lock(load_mu_);
  engine_ = std::make_shared<const pipeline::Engine>(std::move(engine));
  state_ = State::kReady;
}

void ChatService::load() {
  try {
    auto manifest = pipeline::Manifest::load(options_.manifest);
    if (options_.seed) manifest.pipeline.seed = *options_.seed;
    set_engine(pipeline::load_engine(manifest));
  } catch (const std::exception& e) {
    std::lock_guard lock(load_mu_);
    load_error_ = e.what();
    state_ = State::kFailed;
    throw;
  }
}

void ChatService::load_async() {
  if (loader_.joinable()) return;
  loader_ = std::thread([this] {
    try {
      load();
    } catch (const std::exception&) {
      // kept in load_error_ and reported by /api/health
    }
  });
}

void ChatService::wait_loaded() const {
  while (state_.load() == State::kLoading) std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

int ChatService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = http_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!http_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void ChatService::run() { http_->server.listen_after_bind(); }

void ChatService::stop() {
  if (http_) http_->server.stop();
}

ChatService::Reply ChatService::chat(const std::string& request_body) {
  if (state_.load() != State::kReady) return {503, {{"error", "engine loading"}}};
  json req;
  try {
    req = json::parse(request_body);
  } catch (const json::exception&) {
    return {400, {{"error", "malformed request"}}};
  }
  if (!req.is_object() || !req.contains("utterance") || !req["utterance"].is_string()) {
    return {400, {{"error", "malformed request"}}};
  }
  const auto tokens = textproc::tokenize(req["utterance"].get<std::string>());
  if (tokens.empty()) return {400, {{"error", "empty input"}}};

  std::shared_ptr<const pipeline::Engine> engine;
  {
    std::lock_guard lock(load_mu_);
    engine = engine_;
  }
  const std::uint64_t id = next_turn_++;
  try {
    const auto turn = pipeline::respond(*engine, tokens, id);
    const std::string turn_id = std::to_string(id);
    traces_.put(turn_id, turn.trace.to_json());
    return {200,
            {{"response", textproc::detokenize(turn.final)},
             {"route", turn.trace.route_label},
             {"turn_id", turn_id},
             {"trace_ref", "/api/trace/" + turn_id}}};
  } catch (const std::exception& e) {
    return {500, {{"error", e.what()}}};
  }
}

ChatService::Reply ChatService::trace(const std::string& turn_id) const {
  if (state_.load() != State::kReady) return {503, {{"error", "engine loading"}}};
  if (auto t = traces_.get(turn_id)) return {200, *t};
  return {404, {{"error", "unknown trace"}}};
}

ChatService::Reply ChatService::health() const {
  const State st = state_.load();
  json components = json::object();
  for (const char* name : {"router", "style_generator", "general_generator", "graph", "style_lm",
                           "tagger", "fallbacks"}) {
    components[name] = st == State::kReady;
  }
  json body = {{"status", st == State::kReady ? "ready" : st == State::kFailed ? "failed" : "loading"},
               {"components", components},
               {"traces", traces_.size()}};
  if (st == State::kFailed) {
    std::lock_guard lock(load_mu_);
    body["error"] = load_error_;
    return {500, body};
  }
  return {st == State::kReady ? 200 : 503, body};
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  const std::string host = colon == std::string::npos ? "127.0.0.1" : bind.substr(0, colon);
  const std::string port_text = colon == std::string::npos ? bind : bind.substr(colon + 1);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535 || host.empty()) throw ConfigError("bad --bind '" + bind + "'");
  return {host, port};
}

}  // namespace e2c::service
