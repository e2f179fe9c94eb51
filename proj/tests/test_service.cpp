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

#include <gtest/gtest.h>

#include <thread>

#include "e2c/service.hpp"
#include "support.hpp"
// after Eigen: resolv.h defines _res
#include "httplib.h"

using namespace e2c;
using namespace e2c::service;
using nlohmann::json;

namespace {

ServiceOptions no_manifest() {
  ServiceOptions o;
  o.manifest = "/nonexistent/manifest.json";
  return o;
}

void ready_stub(ChatService& svc) {
  testkit::StubEngine stub;
  stub.style->set(split_ws("warp speed captain"), {split_ws("shields up captain"), -0.2});
  svc.set_engine(stub.engine);
}

}  // namespace

TEST(TraceStoreTest, EvictsOldest) {
  TraceStore store(3);
  for (int i = 0; i < 5; ++i) store.put(std::to_string(i), json{{"i", i}});
  EXPECT_EQ(store.size(), 3u);
  EXPECT_FALSE(store.get("0"));
  EXPECT_FALSE(store.get("1"));
  EXPECT_EQ((*store.get("4"))["i"], 4);
  EXPECT_THROW(TraceStore(0), ConfigError);
}

TEST(TraceStoreTest, ConcurrentWritersKeepTheBound) {
  TraceStore store(1000);
  std::vector<std::thread> writers;
  for (int w = 0; w < 4; ++w) {
    writers.emplace_back([&store, w] {
      for (int i = 0; i < 600; ++i) store.put(std::to_string(w) + "-" + std::to_string(i), json(i));
    });
  }
  for (auto& t : writers) t.join();
  EXPECT_EQ(store.size(), 1000u);
  // the globally last put is some writer's final entry
  int finals = 0;
  for (int w = 0; w < 4; ++w) finals += store.get(std::to_string(w) + "-599") ? 1 : 0;
  EXPECT_GE(finals, 1);
  EXPECT_FALSE(store.get("0-0") && store.get("1-0") && store.get("2-0") && store.get("3-0"));
}

TEST(ChatHandlers, UnavailableUntilLoaded) {
  ChatService svc(no_manifest());
  EXPECT_EQ(svc.chat(R"({"session_id":"s","utterance":"hi"})").status, 503);
  EXPECT_EQ(svc.trace("0").status, 503);
  const auto h = svc.health();
  EXPECT_EQ(h.status, 503);
  EXPECT_EQ(h.body["status"], "loading");
}

TEST(ChatHandlers, FailedLoadIsReported) {
  ChatService svc(no_manifest());
  EXPECT_THROW(svc.load(), Error);
  const auto h = svc.health();
  EXPECT_EQ(h.body["status"], "failed");
  EXPECT_TRUE(h.body.contains("error"));
}

TEST(ChatHandlers, ChatAndTrace) {
  ChatService svc(no_manifest());
  ready_stub(svc);
  EXPECT_EQ(svc.health().status, 200);
  auto r = svc.chat(R"({"session_id":"s1","utterance":"hello"})");
  ASSERT_EQ(r.status, 200);
  EXPECT_FALSE(r.body["response"].get<std::string>().empty());
  EXPECT_EQ(r.body["turn_id"], "0");
  EXPECT_EQ(r.body["trace_ref"], "/api/trace/0");
  EXPECT_TRUE(r.body.contains("route"));

  r = svc.chat(R"({"session_id":"s1","utterance":"Warp speed, captain"})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["turn_id"], "1");
  const auto t = svc.trace("1");
  ASSERT_EQ(t.status, 200);
  EXPECT_EQ(t.body["turn_id"], "1");
  EXPECT_EQ(t.body["response"], r.body["response"]);
  EXPECT_EQ(svc.trace("99").status, 404);
}

TEST(ChatHandlers, BadRequests) {
  ChatService svc(no_manifest());
  ready_stub(svc);
  auto r = svc.chat(R"({"session_id":"s1","utterance":"   "})");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body, json({{"error", "empty input"}}));
  EXPECT_EQ(svc.chat(R"({"session_id":"s1","utterance":""})").body["error"], "empty input");
  EXPECT_EQ(svc.chat("not json").status, 400);
  EXPECT_EQ(svc.chat(R"({"session_id":"s1"})").status, 400);
  EXPECT_EQ(svc.chat(R"({"utterance":5})").status, 400);
}

TEST(ChatHttp, EndToEndOverSocket) {
  ChatService svc(no_manifest());
  const int port = svc.bind("127.0.0.1", 0);
  std::thread server([&svc] { svc.run(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 200; ++i) {
    if (client.Get("/api/health")) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  auto res = client.Post("/api/chat", R"({"session_id":"s","utterance":"hi"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 503);

  ready_stub(svc);
  res = client.Post("/api/chat", R"({"session_id":"s","utterance":"hello there"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto body = json::parse(res->body);
  EXPECT_FALSE(body["response"].get<std::string>().empty());
  auto trace = client.Get(body["trace_ref"].get<std::string>());
  ASSERT_TRUE(trace);
  EXPECT_EQ(trace->status, 200);
  EXPECT_EQ(client.Get("/api/trace/nope")->status, 404);
  EXPECT_EQ(client.Get("/api/health")->status, 200);
  EXPECT_EQ(client.Get("/")->status, 200);
  svc.stop();
  server.join();
}

TEST(ChatHttp, StatelessAcrossInstances) {
  ChatService a(no_manifest()), b(no_manifest());
  ready_stub(a);
  ready_stub(b);
  for (const char* text : {"hello", "warp speed captain", "pizza"}) {
    const std::string req = json{{"session_id", "s"}, {"utterance", text}}.dump();
    EXPECT_EQ(a.chat(req).body, b.chat(req).body);
  }
}

TEST(BindParsing, HostPortForms) {
  EXPECT_EQ(parse_bind("0.0.0.0:9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
  EXPECT_EQ(parse_bind("8081"), (std::pair<std::string, int>{"127.0.0.1", 8081}));
  EXPECT_THROW(parse_bind("host:port"), ConfigError);
  EXPECT_THROW(parse_bind("host:70000"), ConfigError);
}
