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
#include "e2c/pipeline.hpp"
#include "json.hpp"

namespace e2c::eval {

struct EvalItem {
  std::string expected_domain;
  std::string utterance;
};

struct EvalSet {
  std::vector<EvalItem> items;

  /// TSV with header `domain\tutterance`.
  static EvalSet load(const std::filesystem::path& path);
  static EvalSet parse(const std::vector<std::string>& lines);
  std::map<std::string, std::size_t> composition() const;
};

enum class OverlapMode { kToken, kType };

/// Percentage of response tokens (or distinct types) found in style_vocab,
/// pooled over all responses. Throws Error when there are no tokens.
double vocabulary_overlap(const std::vector<Tokens>& responses,
                          const std::set<std::string>& style_vocab,
                          OverlapMode mode = OverlapMode::kToken);

struct EvalRow {
  std::size_t index = 0;
  std::string input;
  std::string expected_domain;
  Tokens response;
  std::string route;
  std::string verdict;
  std::optional<double> perplexity;
  std::optional<double> overlap;
  std::optional<std::string> error;
};

struct EvalReport {
  std::optional<double> average_perplexity;  // token-weighted over responses
  std::optional<double> vocabulary_overlap;  // percentage
  OverlapMode overlap_mode = OverlapMode::kToken;
  std::map<std::string, std::size_t> composition;
  std::vector<EvalRow> rows;

  /// Reals are rounded to 6 decimals so the text is stable.
  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Turn ids are the item indices, so the report is a pure function of its
/// inputs. Per-item failures are recorded on the row.
EvalReport run_eval(const pipeline::Engine& engine, const EvalSet& eval_set,
                    const lm::BigramLM& style_lm, const std::set<std::string>& style_vocab,
                    OverlapMode mode = OverlapMode::kToken);

// ------------------------------------------------------------ annotation

struct AnnotationRow {
  std::string annotator;
  std::string item;
  std::optional<int> grammar, coherence, style;
};

/// CSV with header `annotator,item,grammar,coherence,style`; extra columns
/// are ignored. Blank cells are kept as missing; anything other than 0 or 1
/// is rejected.
struct AnnotationSheet {
  std::vector<AnnotationRow> rows;

  static AnnotationSheet parse_csv(std::string_view text);
  static AnnotationSheet load(const std::filesystem::path& path);
};

struct AnnotationSummary {
  double grammar = 0, coherence = 0, style = 0;  // percentages
  double average = 0;                            // mean of the three
  std::size_t annotators = 0, items = 0;
};

/// metric% = 100 * sum / (annotators * items). Throws Error starting with
/// "missing cells" when any (annotator, item, metric) is absent.
AnnotationSummary aggregate_annotations(const AnnotationSheet& sheet);

/// One blank row per evaluated item, with input and response columns.
std::string annotation_template(const EvalReport& report);

std::vector<std::string> parse_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

}  // namespace e2c::eval
