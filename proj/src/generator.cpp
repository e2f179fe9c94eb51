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

#include "e2c/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "e2c/textproc.hpp"
#include "json.hpp"

namespace e2c::gen {

using nlohmann::json;

RetrievalGenerator RetrievalGenerator::build(const std::vector<corpus::DialogPair>& pairs) {
  if (pairs.empty()) throw Error("retrieval index: no pairs");
  RetrievalGenerator g;
  for (const auto& p : pairs) {
    g.posts_.push_back(p.post);
    g.responses_.push_back(p.response);
  }
  g.vocab_ = classify::fit_tfidf(g.posts_, std::numeric_limits<std::size_t>::max(), true);
  for (const auto& post : g.posts_) g.vectors_.push_back(g.vocab_.transform(post));
  return g;
}

double RetrievalGenerator::best_similarity(const Tokens& post, std::size_t* index) const {
  if (responses_.empty()) throw Error("retrieval index is empty");
  auto q = vocab_.transform(post);
  double best = -1.0;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    double s = q.dot(vectors_[i]);
    if (s > best) {
      best = s;
      best_i = i;
    }
  }
  if (index) *index = best_i;
  return best;
}

std::size_t RetrievalGenerator::best_index(const Tokens& post) const {
  std::size_t i = 0;
  best_similarity(post, &i);
  return i;
}

GeneratorOutput RetrievalGenerator::retrieve(const Tokens& post) const {
  std::size_t i = 0;
  double sim = best_similarity(post, &i);
  sim = std::clamp(sim, kSimilarityFloor, 1.0);
  return {responses_[i], std::log(sim)};
}

std::string RetrievalGenerator::to_json() const {
  json pairs = json::array();
  for (std::size_t i = 0; i < posts_.size(); ++i) pairs.push_back({posts_[i], responses_[i]});
  json j = {{"format", "e2c.retrieval"}, {"version", 1}, {"pairs", pairs}};
  return j.dump();
}

RetrievalGenerator RetrievalGenerator::from_json(std::string_view text) {
  json j = json::parse(text);
  if (j.value("format", "") != "e2c.retrieval" || j.value("version", 0) != 1) {
    throw Error("not an e2c.retrieval v1 index");
  }
  std::vector<corpus::DialogPair> pairs;
  for (const auto& p : j.at("pairs")) {
    pairs.push_back({p.at(0).get<Tokens>(), p.at(1).get<Tokens>(), "", 1});
  }
  return build(pairs);
}

void RetrievalGenerator::save(const std::filesystem::path& path) const {
  write_file(path, to_json());
}

RetrievalGenerator RetrievalGenerator::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

StandardResponseSet::StandardResponseSet(std::vector<Response> responses, std::uint64_t seed)
    : responses_(std::move(responses)), seed_(seed) {
  if (responses_.empty()) throw Error("standard response set is empty");
  for (const auto& r : responses_) {
    if (r.tokens.empty()) throw Error("standard response set contains an empty response");
  }
}

StandardResponseSet StandardResponseSet::parse(const std::vector<std::string>& lines,
                                               std::uint64_t seed) {
  static constexpr std::string_view kPrefix = "klingon:";
  std::vector<Response> out;
  for (const auto& raw : lines) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    Response r;
    if (line.starts_with(kPrefix)) {
      r.klingon = true;
      line = trim(std::string_view(line).substr(kPrefix.size()));
    }
    r.text = line;
    r.tokens = textproc::tokenize(line);
    if (!r.tokens.empty()) out.push_back(std::move(r));
  }
  return StandardResponseSet(std::move(out), seed);
}

StandardResponseSet StandardResponseSet::load(const std::filesystem::path& path,
                                              std::uint64_t seed) {
  return parse(read_lines(path), seed);
}

const StandardResponseSet::Response& StandardResponseSet::select(
    std::uint64_t turn_counter) const {
  const std::uint64_t h = splitmix64(seed_ ^ splitmix64(turn_counter));
  return responses_[h % responses_.size()];
}

bool StandardResponseSet::contains(const Tokens& tokens) const {
  return std::any_of(responses_.begin(), responses_.end(),
                     [&](const Response& r) { return r.tokens == tokens; });
}

}  // namespace e2c::gen
