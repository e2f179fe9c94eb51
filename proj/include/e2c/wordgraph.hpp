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

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "e2c/common.hpp"
#include "e2c/ngram_lm.hpp"
#include "e2c/textproc.hpp"

namespace e2c::graph {

struct GraphNode {
  std::string word;
  std::string pos;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
  friend auto operator<=>(const GraphNode&, const GraphNode&) = default;
};

struct InsertionCandidate {
  Tokens tokens;
  std::string inserted_word;
  int position = 0;  // 0 = before the first word, n = after the last
  std::string source_pos;
};

/// Directed adjacency graph over (word, POS) nodes. A word seen with two
/// tags is two nodes. Sentences are wrapped in the boundary nodes
/// `<s>`/`</s>` (whose tag is the token itself).
class WordGraph {
 public:
  /// Throws Error on an empty corpus.
  static WordGraph build(const std::vector<textproc::TaggedSentence>& tagged_sentences);

  static GraphNode bos() { return {std::string(kBos), std::string(kBos)}; }
  static GraphNode eos() { return {std::string(kEos), std::string(kEos)}; }

  bool has_node(const GraphNode& node) const { return ids_.count(node) > 0; }
  /// Every node carrying `word`, in tag order.
  std::vector<GraphNode> nodes_with_word(const std::string& word) const;
  /// The exact (word, pos) node when present, else every node sharing the
  /// word. Boundary tokens resolve to their boundary node.
  std::vector<GraphNode> resolve(const textproc::TaggedToken& token) const;

  long edge_count(const GraphNode& from, const GraphNode& to) const;
  std::map<GraphNode, long> successors(const GraphNode& node) const;
  std::map<GraphNode, long> predecessors(const GraphNode& node) const;

  /// Word nodes only; the boundary nodes are excluded.
  std::vector<GraphNode> nodes() const;
  std::map<std::pair<GraphNode, GraphNode>, long> edges() const;
  std::size_t node_count() const { return nodes_.size() - 2; }
  std::size_t edge_count() const;

  std::string to_json() const;
  static WordGraph from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static WordGraph load(const std::filesystem::path& path);

 private:
  WordGraph();
  int intern(const GraphNode& node);
  int id_of(const GraphNode& node) const;
  void add_edge(int from, int to, long count);

  std::vector<GraphNode> nodes_;  // 0 = <s>, 1 = </s>
  std::map<GraphNode, int> ids_;
  std::map<std::string, std::vector<int>> by_word_;
  std::vector<std::map<int, long>> out_;
  std::vector<std::map<int, long>> in_;
};

/// Single-word insertions at each gap 0..n: node c qualifies at gap p when
/// left(p) -> c and c -> right(p) are both edges. Neighbors are matched by
/// WordGraph::resolve. One candidate per (position, word), ordered by
/// position and then word; when several tags of a word qualify the one with
/// the heaviest witnessing edges is reported.
std::vector<InsertionCandidate> insertion_candidates(const WordGraph& graph,
                                                     const textproc::TaggedSentence& input);

/// log_prob / (n + 1): per-token log-probability including `</s>`.
double normalized_score(const lm::BigramLM& lm, const Tokens& sentence);

struct ScoredCandidate {
  Tokens tokens;
  double score = 0.0;
  bool has_keyword = false;
  std::optional<InsertionCandidate> insertion;  // absent for the unmodified input
};

struct ShiftResult {
  Tokens best;
  std::vector<ScoredCandidate> ranked;  // best first
};

struct ShiftOptions {
  int passes = 1;
};

/// Ranks the input and its insertion candidates by normalized_score. Scores
/// equal to 12 decimal places fall back to keyword presence, then to the
/// joined sentence in lexicographic order. With passes > 1 the winner of a
/// pass is shifted again; `ranked` is from the final pass.
ShiftResult style_shift(const WordGraph& graph, const lm::BigramLM& lm,
                        const std::set<std::string>& keywords, const Tokens& input,
                        const textproc::Tagger& tagger, const ShiftOptions& options = {});

}  // namespace e2c::graph
