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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "e2c/common.hpp"

namespace e2c::lm {

/// Add-k smoothed bigram model over sentences wrapped as `<s> w1 .. wn </s>`.
///
///   P(w | h) = (c(h, w) + k) / (c(h) + k |V|)
///
/// where V is every vocabulary token except `<s>` (it is never predicted).
/// `<unk>` is always in the vocabulary, so any input is scoreable. Tokens
/// seen fewer than `min_count` times in training are folded into `<unk>`.
/// Log probabilities use the natural log.
class BigramLM {
 public:
  static BigramLM train(const std::vector<Tokens>& sentences, double smoothing_k = 1.0,
                        int min_count = 1);

  /// Probability of `word` following `history`; both are mapped through
  /// map_token first. Throws when history is `</s>` or word is `<s>`.
  double prob(const std::string& history, const std::string& word) const;
  double log_prob(const Tokens& sentence) const;
  /// exp(-log_prob / (n + 1)). Throws Error("empty sentence") for n = 0.
  double perplexity(const Tokens& sentence) const;

  /// The token itself if in vocabulary, `<unk>` otherwise.
  const std::string& map_token(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  /// Sorted vocabulary including the reserved tokens.
  const std::vector<std::string>& vocab() const { return vocab_; }
  /// |V| in the smoothing denominator.
  std::size_t predictable_size() const { return vocab_.size() - 1; }

  long unigram_count(const std::string& token) const;
  long bigram_count(const std::string& history, const std::string& word) const;
  /// All nonzero bigram counts, sorted.
  std::map<std::pair<std::string, std::string>, long> bigram_counts() const;

  double smoothing_k() const { return k_; }
  int min_count() const { return min_count_; }

  std::string to_json() const;
  static BigramLM from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BigramLM load(const std::filesystem::path& path);

 private:
  BigramLM() = default;
  void index_vocab();
  int id_of(const std::string& token) const;  // -1 when absent
  double prob_ids(int h, int w) const;
  std::uint64_t key(int h, int w) const {
    return static_cast<std::uint64_t>(h) * vocab_.size() + static_cast<std::uint64_t>(w);
  }

  double k_ = 1.0;
  int min_count_ = 1;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  std::vector<long> unigram_;
  std::unordered_map<std::uint64_t, long> bigram_;
  int bos_ = -1, eos_ = -1, unk_ = -1;
};

inline BigramLM train_lm(const std::vector<Tokens>& sentences, double smoothing_k = 1.0,
                         int min_count = 1) {
  return BigramLM::train(sentences, smoothing_k, min_count);
}

/// Token-weighted: exp(sum of -log_prob / sum of (n + 1)).
double corpus_perplexity(const BigramLM& lm, const std::vector<Tokens>& sentences);

/// Arithmetic mean of per-sentence perplexities.
double mean_sentence_perplexity(const BigramLM& lm, const std::vector<Tokens>& sentences);

}  // namespace e2c::lm
