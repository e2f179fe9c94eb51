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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "e2c/classifier.hpp"
#include "e2c/common.hpp"
#include "e2c/corpus.hpp"

namespace e2c::gen {

struct GeneratorOutput {
  Tokens tokens;
  double confidence = 0.0;  // mean per-token log-probability, <= 0
};

/// A response source for one domain.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GeneratorOutput generate(const Tokens& post) const = 0;
  virtual std::string kind() const = 0;
};

/// Nearest-post lookup over a TF-IDF index of pair posts.
class RetrievalGenerator final : public Generator {
 public:
  /// Throws Error on an empty pair list.
  static RetrievalGenerator build(const std::vector<corpus::DialogPair>& pairs);

  /// Response of the pair whose post has the highest cosine similarity
  /// (ties -> lowest index); confidence = ln(max(similarity, 1e-6)).
  GeneratorOutput retrieve(const Tokens& post) const;
  GeneratorOutput generate(const Tokens& post) const override { return retrieve(post); }
  std::string kind() const override { return "retrieval"; }

  std::size_t size() const { return responses_.size(); }
  /// Index of the pair retrieve() would answer with.
  std::size_t best_index(const Tokens& post) const;

  std::string to_json() const;
  static RetrievalGenerator from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static RetrievalGenerator load(const std::filesystem::path& path);

  static constexpr double kSimilarityFloor = 1e-6;

 private:
  RetrievalGenerator() = default;
  double best_similarity(const Tokens& post, std::size_t* index) const;

  std::vector<Tokens> posts_;
  std::vector<Tokens> responses_;
  classify::TfidfVocabulary vocab_;
  std::vector<classify::SparseVector> vectors_;
};

/// Test and demo stub: delegates to a callable.
class ScriptedGenerator final : public Generator {
 public:
  using Script = std::function<GeneratorOutput(const Tokens&)>;
  explicit ScriptedGenerator(Script script) : script_(std::move(script)) {}
  /// Always answers with the same output.
  explicit ScriptedGenerator(GeneratorOutput fixed)
      : script_([fixed](const Tokens&) { return fixed; }) {}

  GeneratorOutput generate(const Tokens& post) const override { return script_(post); }
  std::string kind() const override { return "scripted"; }

 private:
  Script script_;
};

/// Canned replies used when a generated response is rejected.
class StandardResponseSet {
 public:
  struct Response {
    std::string text;
    Tokens tokens;
    bool klingon = false;
  };

  StandardResponseSet(std::vector<Response> responses, std::uint64_t seed);

  /// One response per line; lines prefixed `klingon:` form the Klingon
  /// sub-list. Blank lines are skipped.
  static StandardResponseSet load(const std::filesystem::path& path, std::uint64_t seed);
  static StandardResponseSet parse(const std::vector<std::string>& lines, std::uint64_t seed);

  /// responses[splitmix64(seed ^ splitmix64(turn_counter)) % size]
  const Response& select(std::uint64_t turn_counter) const;
  Tokens fallback(std::uint64_t turn_counter) const { return select(turn_counter).tokens; }
  bool contains(const Tokens& tokens) const;

  const std::vector<Response>& responses() const { return responses_; }
  std::size_t size() const { return responses_.size(); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<Response> responses_;
  std::uint64_t seed_;
};

}  // namespace e2c::gen
