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

#include "e2c/wordgraph.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace e2c::graph {

using nlohmann::json;
using textproc::TaggedSentence;
using textproc::TaggedToken;

WordGraph::WordGraph() {
  intern(bos());
  intern(eos());
}

int WordGraph::intern(const GraphNode& node) {
  if (auto it = ids_.find(node); it != ids_.end()) return it->second;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  ids_.emplace(node, id);
  auto& same_word = by_word_[node.word];
  same_word.push_back(id);
  std::sort(same_word.begin(), same_word.end(),
            [this](int a, int b) { return nodes_[a].pos < nodes_[b].pos; });
  out_.emplace_back();
  in_.emplace_back();
  return id;
}

int WordGraph::id_of(const GraphNode& node) const {
  auto it = ids_.find(node);
  return it == ids_.end() ? -1 : it->second;
}

void WordGraph::add_edge(int from, int to, long count) {
  out_[from][to] += count;
  in_[to][from] += count;
}

WordGraph WordGraph::build(const std::vector<TaggedSentence>& tagged_sentences) {
  WordGraph g;
  bool any = false;
  for (const auto& sentence : tagged_sentences) {
    if (sentence.empty()) continue;
    any = true;
    int prev = 0;
    for (const auto& tok : sentence) {
      if (tok.word.empty()) throw Error("word graph: empty token");
      int id = g.intern({tok.word, tok.pos});
      g.add_edge(prev, id, 1);
      prev = id;
    }
    g.add_edge(prev, 1, 1);
  }
  if (!any) throw Error("empty word graph corpus");
  return g;
}

std::vector<GraphNode> WordGraph::nodes_with_word(const std::string& word) const {
  std::vector<GraphNode> out;
  if (auto it = by_word_.find(word); it != by_word_.end()) {
    for (int id : it->second) out.push_back(nodes_[id]);
  }
  return out;
}

std::vector<GraphNode> WordGraph::resolve(const TaggedToken& token) const {
  if (token.word == kBos) return {bos()};
  if (token.word == kEos) return {eos()};
  GraphNode exact{token.word, token.pos};
  if (has_node(exact)) return {exact};
  return nodes_with_word(token.word);
}

long WordGraph::edge_count(const GraphNode& from, const GraphNode& to) const {
  int a = id_of(from), b = id_of(to);
  if (a < 0 || b < 0) return 0;
  auto it = out_[a].find(b);
  return it == out_[a].end() ? 0 : it->second;
}

std::map<GraphNode, long> WordGraph::successors(const GraphNode& node) const {
  std::map<GraphNode, long> out;
  if (int id = id_of(node); id >= 0) {
    for (const auto& [to, c] : out_[id]) out[nodes_[to]] = c;
  }
  return out;
}

std::map<GraphNode, long> WordGraph::predecessors(const GraphNode& node) const {
  std::map<GraphNode, long> out;
  if (int id = id_of(node); id >= 0) {
    for (const auto& [from, c] : in_[id]) out[nodes_[from]] = c;
  }
  return out;
}

std::vector<GraphNode> WordGraph::nodes() const {
  std::vector<GraphNode> out(nodes_.begin() + 2, nodes_.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::map<std::pair<GraphNode, GraphNode>, long> WordGraph::edges() const {
  std::map<std::pair<GraphNode, GraphNode>, long> out;
  for (std::size_t a = 0; a < out_.size(); ++a) {
    for (const auto& [b, c] : out_[a]) out[{nodes_[a], nodes_[b]}] = c;
  }
  return out;
}

std::size_t WordGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& m : out_) n += m.size();
  return n;
}

std::string WordGraph::to_json() const {
  json nodes = json::array();
  for (const auto& n : this->nodes()) nodes.push_back({n.word, n.pos});
  json edges = json::array();
  for (const auto& [e, c] : this->edges()) {
    edges.push_back({e.first.word, e.first.pos, e.second.word, e.second.pos, c});
  }
  json j = {{"format", "e2c.word_graph"}, {"version", 1}, {"nodes", nodes}, {"edges", edges}};
  return j.dump();
}

WordGraph WordGraph::from_json(std::string_view text) {
  json j = json::parse(text);
  if (j.value("format", "") != "e2c.word_graph" || j.value("version", 0) != 1) {
    throw Error("not an e2c.word_graph v1 file");
  }
  WordGraph g;
  for (const auto& n : j.at("nodes")) g.intern({n.at(0), n.at(1)});
  for (const auto& e : j.at("edges")) {
    int a = g.id_of({e.at(0), e.at(1)});
    int b = g.id_of({e.at(2), e.at(3)});
    long c = e.at(4);
    if (a < 0 || b < 0) throw Error("word graph edge references an unknown node");
    if (c < 1) throw Error("word graph edge with count < 1");
    g.add_edge(a, b, c);
  }
  return g;
}

void WordGraph::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

WordGraph WordGraph::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

std::vector<InsertionCandidate> insertion_candidates(const WordGraph& graph,
                                                     const TaggedSentence& input) {
  std::vector<InsertionCandidate> out;
  const auto n = input.size();
  for (std::size_t p = 0; p <= n; ++p) {
    auto left = p == 0 ? std::vector<GraphNode>{WordGraph::bos()} : graph.resolve(input[p - 1]);
    auto right = p == n ? std::vector<GraphNode>{WordGraph::eos()} : graph.resolve(input[p]);
    if (left.empty() || right.empty()) continue;

    std::map<GraphNode, long> into;  // candidate -> weight of edges from the left neighbor(s)
    for (const auto& l : left) {
      for (const auto& [c, w] : graph.successors(l)) into[c] += w;
    }
    // word -> (witness weight, pos); std::map keeps words sorted
    std::map<std::string, std::pair<long, std::string>> best;
    for (const auto& [c, w_in] : into) {
      if (c == WordGraph::eos() || c == WordGraph::bos()) continue;
      long w_out = 0;
      for (const auto& r : right) w_out += graph.edge_count(c, r);
      if (w_out == 0) continue;
      const long weight = w_in + w_out;
      auto [it, inserted] = best.try_emplace(c.word, weight, c.pos);
      if (!inserted && weight > it->second.first) it->second = {weight, c.pos};
    }
    for (const auto& [word, wp] : best) {
      InsertionCandidate cand;
      cand.inserted_word = word;
      cand.position = static_cast<int>(p);
      cand.source_pos = wp.second;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == p) cand.tokens.push_back(word);
        cand.tokens.push_back(input[i].word);
      }
      if (p == n) cand.tokens.push_back(word);
      out.push_back(std::move(cand));
    }
  }
  return out;
}

double normalized_score(const lm::BigramLM& lm, const Tokens& sentence) {
  return lm.log_prob(sentence) / static_cast<double>(sentence.size() + 1);
}

namespace {

bool contains_keyword(const Tokens& tokens, const std::set<std::string>& keywords) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [&](const std::string& t) { return keywords.count(t) > 0; });
}

std::vector<ScoredCandidate> rank_once(const WordGraph& graph, const lm::BigramLM& lm,
                                       const std::set<std::string>& keywords,
                                       const Tokens& input, const textproc::Tagger& tagger) {
  std::vector<ScoredCandidate> pool;
  std::set<Tokens> seen;
  auto add = [&](Tokens tokens, std::optional<InsertionCandidate> ins) {
    if (!seen.insert(tokens).second) return;
    ScoredCandidate sc;
    sc.score = normalized_score(lm, tokens);
    sc.has_keyword = contains_keyword(tokens, keywords);
    sc.tokens = std::move(tokens);
    sc.insertion = std::move(ins);
    pool.push_back(std::move(sc));
  };
  add(input, std::nullopt);
  for (auto& c : insertion_candidates(graph, tagger.tag(input))) add(c.tokens, c);

  // Scores are compared at 12 decimal places so that floating-point noise
  // cannot break a genuine tie.
  auto quantized = [](double s) { return std::llround(s * 1e12); };
  std::stable_sort(pool.begin(), pool.end(), [&](const ScoredCandidate& a, const ScoredCandidate& b) {
    auto qa = quantized(a.score), qb = quantized(b.score);
    if (qa != qb) return qa > qb;
    if (a.has_keyword != b.has_keyword) return a.has_keyword;
    return join(a.tokens) < join(b.tokens);
  });
  return pool;
}

}  // namespace

ShiftResult style_shift(const WordGraph& graph, const lm::BigramLM& lm,
                        const std::set<std::string>& keywords, const Tokens& input,
                        const textproc::Tagger& tagger, const ShiftOptions& options) {
  if (input.empty()) throw Error("style_shift: empty input");
  if (options.passes < 1) throw Error("style_shift: passes must be >= 1");
  ShiftResult result;
  Tokens current = input;
  for (int pass = 0; pass < options.passes; ++pass) {
    result.ranked = rank_once(graph, lm, keywords, current, tagger);
    current = result.ranked.front().tokens;
  }
  result.best = current;
  return result;
}

}  // namespace e2c::graph
