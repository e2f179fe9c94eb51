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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "e2c/classifier.hpp"
#include "e2c/common.hpp"
#include "e2c/generator.hpp"
#include "e2c/ngram_lm.hpp"
#include "e2c/textproc.hpp"
#include "e2c/wordgraph.hpp"
#include "json.hpp"

namespace e2c::pipeline {

struct PipelineConfig {
  double reference_perplexity = 0.0;  // style corpus under the style LM
  double gate_low = 0.3;              // window is [low * ref, high * ref]
  double gate_high = 2.0;
  double confidence_floor = -3.5;  // nats per token
  std::uint64_t seed = 0;          // fallback selection
  int shift_passes = 1;

  /// Throws ConfigError unless ref > 0, 0 < low < 1 < high, floor <= 0.
  void validate() const;
  double window_low() const { return gate_low * reference_perplexity; }
  double window_high() const { return gate_high * reference_perplexity; }
};

enum class Verdict { kAccept, kFallbackLowConfidence, kFallbackPerplexity };

std::string to_string(Verdict v);

struct StageDurations {
  double route_ms = 0, generate_ms = 0, shift_ms = 0, gate_ms = 0, total_ms = 0;
};

struct PipelineTrace {
  std::uint64_t turn_id = 0;
  Tokens input;

  std::string route_label;
  double route_probability = 0.0;

  std::string generator_kind;
  Tokens raw_output;
  double confidence = 0.0;

  /// Ranked style-shift candidates; present on the general path only.
  std::optional<std::vector<graph::ScoredCandidate>> candidates;
  Tokens candidate;  // what reached the gate

  std::optional<double> perplexity;  // absent when the candidate is empty
  double window_low = 0.0;
  double window_high = 0.0;
  double reference_perplexity = 0.0;
  double confidence_floor = 0.0;
  Verdict verdict = Verdict::kAccept;

  Tokens final;
  StageDurations durations;

  /// Stable field names; see README. Timing is omitted when
  /// include_timing is false so the output is reproducible.
  nlohmann::json to_json(bool include_timing = true) const;
};

/// Every trained component plus the gate settings. Immutable once built;
/// respond() only reads it.
struct Engine {
  std::shared_ptr<const classify::TfidfRouter> router;
  std::shared_ptr<const gen::Generator> style_generator;
  std::shared_ptr<const gen::Generator> general_generator;
  std::shared_ptr<const graph::WordGraph> graph;
  std::shared_ptr<const lm::BigramLM> style_lm;
  std::shared_ptr<const textproc::Tagger> tagger;
  std::shared_ptr<const gen::StandardResponseSet> fallbacks;
  std::set<std::string> keywords;
  PipelineConfig config;

  std::vector<std::string> missing_components() const;
};

struct Turn {
  Tokens final;
  PipelineTrace trace;
};

/// route -> generate -> (style shift on the general route) -> gate.
/// The gate rejects low generator confidence first, then a perplexity
/// outside the configured window; rejected turns answer from the
/// standard response set. Throws Error("empty input") for an empty
/// utterance and Error("component not loaded: <name>") for a missing part.
Turn respond(const Engine& engine, const Tokens& utterance, std::uint64_t turn_id);

/// Token-weighted perplexity of the style corpus under the style LM.
double compute_reference_perplexity(const std::vector<Tokens>& style_corpus,
                                    const lm::BigramLM& style_lm);

/// Engine manifest: artifact paths (relative to the manifest's directory)
/// plus the pipeline settings.
struct GeneratorSpec {
  std::string kind;  // "seq2seq" | "retrieval"
  std::filesystem::path path;
  int beam_width = 1;
  int max_length = 30;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::string style_domain;
  std::filesystem::path router, tagger, graph, lm, keywords, fallbacks, style_vocab, eval_set;
  GeneratorSpec style_generator, general_generator;
  PipelineConfig pipeline;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static Manifest load(const std::filesystem::path& path);
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

std::shared_ptr<const gen::Generator> load_generator(const GeneratorSpec& spec,
                                                     const Manifest& manifest);
Engine load_engine(const Manifest& manifest);

}  // namespace e2c::pipeline
