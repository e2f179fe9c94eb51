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
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "e2c/common.hpp"
#include "e2c/textproc.hpp"

namespace e2c::classify {

/// Sorted (index, value) pairs; indices strictly increasing, values nonzero.
struct SparseVector {
  std::vector<std::pair<int, double>> entries;

  bool empty() const { return entries.empty(); }
  double norm() const;
  double dot(const std::vector<double>& dense) const;
  double dot(const SparseVector& other) const;
};

/// Unigram and (optionally) adjacent-bigram features, bigrams joined by a
/// single space. Duplicates are kept, so the result doubles as term counts.
std::vector<std::string> extract_features(const Tokens& doc, bool use_bigrams);

/// Feature columns are assigned in lexicographic feature order.
class TfidfVocabulary {
 public:
  TfidfVocabulary() = default;
  TfidfVocabulary(std::map<std::string, int> features, std::vector<double> idf,
                  std::size_t max_features, bool use_bigrams);

  std::size_t size() const { return idf_.size(); }
  /// -1 for out-of-vocabulary features.
  int index_of(const std::string& feature) const;
  double idf(int index) const { return idf_.at(static_cast<std::size_t>(index)); }
  const std::map<std::string, int>& features() const { return features_; }
  const std::vector<double>& idf_values() const { return idf_; }
  std::size_t max_features() const { return max_features_; }
  bool use_bigrams() const { return use_bigrams_; }

  /// tf * idf per feature, zeros dropped, L2-normalized when nonzero.
  SparseVector transform(const Tokens& document) const;

 private:
  std::map<std::string, int> features_;
  std::vector<double> idf_;
  std::size_t max_features_ = 10000;
  bool use_bigrams_ = true;
};

/// idf(f) = ln(N / df(f)). Keeps the max_features candidates with the
/// largest summed tf-idf mass; ties go to the lexicographically smaller
/// feature. Throws Error("empty corpus") for an empty collection.
TfidfVocabulary fit_tfidf(const std::vector<Tokens>& documents, std::size_t max_features = 10000,
                          bool use_bigrams = true);

inline SparseVector transform(const TfidfVocabulary& vocab, const Tokens& document) {
  return vocab.transform(document);
}

double sigmoid(double z);

/// Binary logistic regression objective:
///   mean_i [softplus(z_i) - y_i z_i] + (l2 / 2) |w|^2,   z_i = w.x_i + b
/// The bias is not penalized.
struct LogisticProblem {
  std::vector<SparseVector> features;
  std::vector<double> labels;  // 0 or 1
  std::size_t dimension = 0;
  double l2 = 0.0;
};

double logistic_loss(const LogisticProblem& problem, const std::vector<double>& weights,
                     double bias);
void logistic_gradient(const LogisticProblem& problem, const std::vector<double>& weights,
                       double bias, std::vector<double>& grad_weights, double& grad_bias);

struct RouterConfig {
  double l2 = 1e-4;
  double learning_rate = 0.5;
  int epochs = 200;
  std::uint64_t seed = 13;
  double test_fraction = 0.2;
  std::size_t max_features = 10000;
  bool use_bigrams = true;
};

struct RouteResult {
  std::string label;
  double probability = 0.5;  // of the positive label
};

class TfidfRouter {
 public:
  TfidfRouter() = default;
  TfidfRouter(TfidfVocabulary vocabulary, std::vector<double> weights, double bias,
              std::string positive_label, std::string negative_label,
              textproc::StopWords stopwords, RouterConfig config);

  /// Stop words are removed before feature extraction. The positive label
  /// wins at probability >= 0.5.
  RouteResult route(const Tokens& utterance) const;

  const TfidfVocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  const std::string& positive_label() const { return positive_label_; }
  const std::string& negative_label() const { return negative_label_; }
  const textproc::StopWords& stopwords() const { return stopwords_; }
  const RouterConfig& config() const { return config_; }

  std::string to_json() const;
  static TfidfRouter from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TfidfRouter load(const std::filesystem::path& path);

 private:
  TfidfVocabulary vocabulary_;
  std::vector<double> weights_;
  double bias_ = 0.0;
  std::string positive_label_ = "positive";
  std::string negative_label_ = "negative";
  textproc::StopWords stopwords_;
  RouterConfig config_;
};

struct RouterTraining {
  TfidfRouter router;
  std::optional<double> heldout_accuracy;  // absent when the test split is empty
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<double> loss_history;  // objective before each epoch, plus the final value
};

/// Pools both classes, shuffles with config.seed, holds out test_fraction,
/// fits TF-IDF on the training part and runs full-batch gradient descent.
RouterTraining train_router(const std::vector<Tokens>& positive,
                            const std::vector<Tokens>& negative, const RouterConfig& config,
                            const std::string& positive_label = "positive",
                            const std::string& negative_label = "negative",
                            const textproc::StopWords& stopwords = {});

}  // namespace e2c::classify
