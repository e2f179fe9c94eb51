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
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "e2c/common.hpp"

namespace e2c::corpus {

struct Utterance {
  std::optional<std::string> speaker;  // upper-cased, whitespace-collapsed
  Tokens tokens;                       // never empty
  std::string raw;
};

struct DialogPair {
  Tokens post;
  Tokens response;
  std::string domain;
  int context_depth = 1;  // utterances concatenated into the post

  friend bool operator==(const DialogPair&, const DialogPair&) = default;
};

struct CorpusStats {
  std::size_t pair_count = 0;
  double mean_utterance_length = 0.0;  // tokens, over posts and responses
};

/// A set of pairs plus the exact union of their tokens.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<DialogPair> pairs);

  void append(const std::vector<DialogPair>& pairs);

  const std::vector<DialogPair>& pairs() const { return pairs_; }
  const std::set<std::string>& vocabulary() const { return vocabulary_; }
  bool empty() const { return pairs_.empty(); }
  std::size_t size() const { return pairs_.size(); }

 private:
  std::vector<DialogPair> pairs_;
  std::set<std::string> vocabulary_;
};

/// Removes `( ... )` and `[ ... ]` spans (nesting aware). An unclosed
/// opener drops the rest of the line; stray closers are dropped.
std::string strip_stage_directions(std::string_view line);

/// Cleans one transcript line. Returns nullopt when nothing is left.
std::optional<Utterance> clean_line(std::string_view line);

std::vector<Utterance> clean_transcript(const std::vector<std::string>& raw_lines);

/// A trimmed line that is exactly `---` or starts with `#`.
bool is_scene_marker(std::string_view line);

/// Groups raw lines into scenes. Blank lines and scene markers end a scene.
std::vector<std::vector<std::string>> split_scenes(const std::vector<std::string>& lines);

/// Adjacency pairs first, then context windows of increasing depth up to
/// max_context. Context posts join their utterances with `<sep>`.
std::vector<DialogPair> build_pairs(const std::vector<Utterance>& scene, int max_context,
                                    const std::string& domain = "");

CorpusStats corpus_stats(const Corpus& corpus);

/// Cleaned utterances of a transcript file, grouped by scene.
std::vector<std::vector<Utterance>> load_scenes(const std::filesystem::path& path);

/// Reads a transcript and builds its context-augmented pairs.
Corpus load_transcript(const std::filesystem::path& path, const std::string& domain,
                       int max_context);

// Tab-separated `post \t response \t domain \t context_depth`, tokens
// joined by single spaces.
std::string pairs_to_tsv(const std::vector<DialogPair>& pairs);
std::vector<DialogPair> pairs_from_tsv(std::string_view text);

}  // namespace e2c::corpus
