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
#include <optional>
#include <string>
#include <vector>

#include "e2c/classifier.hpp"
#include "e2c/pipeline.hpp"
#include "e2c/seq2seq.hpp"
#include "json.hpp"

namespace e2c::training {

struct GeneratorTraining {
  std::string kind = "seq2seq";  // "seq2seq" | "retrieval"
  seq2seq::ModelConfig model;
  seq2seq::TrainConfig train;
  seq2seq::DecodeConfig decode;
};

/// Parsed train-all configuration. Input paths are resolved against the
/// config file's directory.
struct TrainConfig {
  std::uint64_t seed = 7;
  std::string style_domain = "startrek";
  std::string general_domain = "general";
  int max_context = 2;

  std::filesystem::path style_transcript, general_transcript;
  std::vector<std::filesystem::path> extra_negative;
  std::filesystem::path tagger_corpus, stopwords, keywords, fallbacks, eval_set;

  std::filesystem::path lm_corpus;
  double lm_smoothing_k = 1.0;
  int lm_min_count = 1;

  classify::RouterConfig classifier;
  GeneratorTraining generator;
  pipeline::PipelineConfig pipeline;  // reference_perplexity is computed

  /// Throws ConfigError naming the first missing or invalid field, or an
  /// input path that cannot be read.
  static TrainConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static TrainConfig load(const std::filesystem::path& path);
};

struct Summary {
  std::size_t style_pairs = 0, general_pairs = 0;
  std::size_t router_features = 0, router_train = 0, router_test = 0;
  std::optional<double> heldout_accuracy;
  std::size_t tagger_words = 0;
  std::size_t graph_nodes = 0, graph_edges = 0;
  std::size_t lm_vocab = 0, style_vocab = 0;
  double reference_perplexity = 0.0;
  std::optional<double> style_final_loss, general_final_loss;
  std::vector<std::filesystem::path> artifacts;

  std::string to_text() const;
};

/// Trains every component and writes the artifacts plus manifest.json
/// into out_dir. With dry_run the inputs are validated and nothing is
/// written.
Summary train_all(const TrainConfig& config, const std::filesystem::path& out_dir,
                  bool dry_run = false, const seq2seq::EpochCallback& progress = {});

}  // namespace e2c::training
