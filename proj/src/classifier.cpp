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

#include "e2c/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "json.hpp"

namespace e2c::classify {

using nlohmann::json;

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * v;
  return std::sqrt(s);
}

double SparseVector::dot(const std::vector<double>& dense) const {
  double s = 0.0;
  for (const auto& [i, v] : entries) s += v * dense[static_cast<std::size_t>(i)];
  return s;
}

double SparseVector::dot(const SparseVector& other) const {
  double s = 0.0;
  auto a = entries.begin();
  auto b = other.entries.begin();
  while (a != entries.end() && b != other.entries.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      s += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return s;
}

std::vector<std::string> extract_features(const Tokens& doc, bool use_bigrams) {
  std::vector<std::string> out(doc.begin(), doc.end());
  if (use_bigrams) {
    for (std::size_t i = 1; i < doc.size(); ++i) out.push_back(doc[i - 1] + " " + doc[i]);
  }
  return out;
}

TfidfVocabulary::TfidfVocabulary(std::map<std::string, int> features, std::vector<double> idf,
                                 std::size_t max_features, bool use_bigrams)
    : features_(std::move(features)),
      idf_(std::move(idf)),
      max_features_(max_features),
      use_bigrams_(use_bigrams) {
  if (features_.size() != idf_.size()) throw Error("tfidf: feature/idf size mismatch");
  if (features_.size() > max_features_) throw Error("tfidf: more features than max_features");
  std::vector<bool> seen(idf_.size(), false);
  for (const auto& [f, i] : features_) {
    if (i < 0 || static_cast<std::size_t>(i) >= idf_.size() || seen[i]) {
      throw Error("tfidf: feature indices must be dense");
    }
    seen[i] = true;
  }
  for (double v : idf_) {
    if (!(v >= 0)) throw Error("tfidf: negative idf");
  }
}

int TfidfVocabulary::index_of(const std::string& feature) const {
  auto it = features_.find(feature);
  return it == features_.end() ? -1 : it->second;
}

SparseVector TfidfVocabulary::transform(const Tokens& document) const {
  std::map<int, double> tf;
  for (const auto& f : extract_features(document, use_bigrams_)) {
    int i = index_of(f);
    if (i >= 0) tf[i] += 1.0;
  }
  SparseVector v;
  for (const auto& [i, count] : tf) {
    double value = count * idf_[i];
    if (value != 0.0) v.entries.emplace_back(i, value);
  }
  double n = v.norm();
  if (n > 0) {
    for (auto& e : v.entries) e.second /= n;
  }
  return v;
}

TfidfVocabulary fit_tfidf(const std::vector<Tokens>& documents, std::size_t max_features,
                          bool use_bigrams) {
  if (documents.empty()) throw Error("empty corpus");
  struct Stat {
    long df = 0;
    long tf = 0;
  };
  std::unordered_map<std::string, Stat> stats;
  for (const auto& doc : documents) {
    std::unordered_map<std::string, long> counts;
    for (auto& f : extract_features(doc, use_bigrams)) ++counts[std::move(f)];
    for (const auto& [f, c] : counts) {
      auto& s = stats[f];
      s.df += 1;
      s.tf += c;
    }
  }
  const auto n_docs = static_cast<double>(documents.size());
  struct Candidate {
    std::string feature;
    double idf;
    double mass;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(stats.size());
  for (const auto& [f, s] : stats) {
    double idf = std::log(n_docs / static_cast<double>(s.df));
    candidates.push_back({f, idf, static_cast<double>(s.tf) * idf});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.mass != b.mass) return a.mass > b.mass;
    return a.feature < b.feature;
  });
  if (candidates.size() > max_features) candidates.resize(max_features);
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.feature < b.feature; });

  std::map<std::string, int> features;
  std::vector<double> idf;
  for (const auto& c : candidates) {
    features.emplace(c.feature, static_cast<int>(idf.size()));
    idf.push_back(c.idf);
  }
  return TfidfVocabulary(std::move(features), std::move(idf), max_features, use_bigrams);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
}  // namespace

double logistic_loss(const LogisticProblem& problem, const std::vector<double>& weights,
                     double bias) {
  const auto n = problem.features.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = problem.features[i].dot(weights) + bias;
    loss += softplus(z) - problem.labels[i] * z;
  }
  if (n > 0) loss /= static_cast<double>(n);
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return loss + 0.5 * problem.l2 * sq;
}

void logistic_gradient(const LogisticProblem& problem, const std::vector<double>& weights,
                       double bias, std::vector<double>& grad_weights, double& grad_bias) {
  const auto n = problem.features.size();
  grad_weights.assign(weights.size(), 0.0);
  grad_bias = 0.0;
  const double scale = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = (sigmoid(problem.features[i].dot(weights) + bias) - problem.labels[i]) * scale;
    for (const auto& [j, v] : problem.features[i].entries) grad_weights[j] += r * v;
    grad_bias += r;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) grad_weights[j] += problem.l2 * weights[j];
}

TfidfRouter::TfidfRouter(TfidfVocabulary vocabulary, std::vector<double> weights, double bias,
                         std::string positive_label, std::string negative_label,
                         textproc::StopWords stopwords, RouterConfig config)
    : vocabulary_(std::move(vocabulary)),
      weights_(std::move(weights)),
      bias_(bias),
      positive_label_(std::move(positive_label)),
      negative_label_(std::move(negative_label)),
      stopwords_(std::move(stopwords)),
      config_(config) {
  if (weights_.size() != vocabulary_.size()) throw Error("router: weight/vocabulary size mismatch");
}

RouteResult TfidfRouter::route(const Tokens& utterance) const {
  auto x = vocabulary_.transform(textproc::remove_stopwords(utterance, stopwords_));
  double p = sigmoid(x.dot(weights_) + bias_);
  return {p >= 0.5 ? positive_label_ : negative_label_, p};
}

std::string TfidfRouter::to_json() const {
  json feats = json::array();
  std::vector<std::string> by_index(vocabulary_.size());
  for (const auto& [f, i] : vocabulary_.features()) by_index[i] = f;
  json j = {
      {"format", "e2c.router"},
      {"version", 1},
      {"labels", {{"positive", positive_label_}, {"negative", negative_label_}}},
      {"config",
       {{"l2", config_.l2},
        {"learning_rate", config_.learning_rate},
        {"epochs", config_.epochs},
        {"seed", config_.seed},
        {"test_fraction", config_.test_fraction},
        {"max_features", config_.max_features},
        {"use_bigrams", config_.use_bigrams}}},
      {"features", by_index},
      {"idf", vocabulary_.idf_values()},
      {"weights", weights_},
      {"bias", bias_},
      {"stopwords", stopwords_.words()},
  };
  return j.dump();
}

TfidfRouter TfidfRouter::from_json(std::string_view text) {
  json j = json::parse(text);
  if (j.value("format", "") != "e2c.router" || j.value("version", 0) != 1) {
    throw Error("not an e2c.router v1 model");
  }
  const auto& c = j.at("config");
  RouterConfig config;
  config.l2 = c.at("l2");
  config.learning_rate = c.at("learning_rate");
  config.epochs = c.at("epochs");
  config.seed = c.at("seed");
  config.test_fraction = c.at("test_fraction");
  config.max_features = c.at("max_features");
  config.use_bigrams = c.at("use_bigrams");
  auto names = j.at("features").get<std::vector<std::string>>();
  std::map<std::string, int> features;
  for (std::size_t i = 0; i < names.size(); ++i) features.emplace(names[i], static_cast<int>(i));
  TfidfVocabulary vocab(std::move(features), j.at("idf").get<std::vector<double>>(),
                        config.max_features, config.use_bigrams);
  return TfidfRouter(std::move(vocab), j.at("weights").get<std::vector<double>>(), j.at("bias"),
                     j.at("labels").at("positive"), j.at("labels").at("negative"),
                     textproc::StopWords(j.at("stopwords").get<std::set<std::string>>()), config);
}

void TfidfRouter::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

TfidfRouter TfidfRouter::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

RouterTraining train_router(const std::vector<Tokens>& positive,
                            const std::vector<Tokens>& negative, const RouterConfig& config,
                            const std::string& positive_label, const std::string& negative_label,
                            const textproc::StopWords& stopwords) {
  if (positive.empty()) throw Error("router: no documents for label '" + positive_label + "'");
  if (negative.empty()) throw Error("router: no documents for label '" + negative_label + "'");
  if (!(config.test_fraction >= 0 && config.test_fraction < 1)) {
    throw Error("router: test_fraction must be in [0, 1)");
  }

  struct Doc {
    Tokens tokens;
    double label;
  };
  std::vector<Doc> docs;
  docs.reserve(positive.size() + negative.size());
  for (const auto& d : positive) docs.push_back({textproc::remove_stopwords(d, stopwords), 1.0});
  for (const auto& d : negative) docs.push_back({textproc::remove_stopwords(d, stopwords), 0.0});
  Rng rng(config.seed);
  rng.shuffle(docs);

  const auto n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(docs.size()) * config.test_fraction));
  const std::size_t n_train = docs.size() - n_test;

  std::vector<Tokens> train_docs;
  for (std::size_t i = 0; i < n_train; ++i) train_docs.push_back(docs[i].tokens);
  auto vocab = fit_tfidf(train_docs, config.max_features, config.use_bigrams);

  LogisticProblem problem;
  problem.dimension = vocab.size();
  problem.l2 = config.l2;
  for (std::size_t i = 0; i < n_train; ++i) {
    problem.features.push_back(vocab.transform(docs[i].tokens));
    problem.labels.push_back(docs[i].label);
  }

  std::vector<double> w(vocab.size(), 0.0), gw;
  double b = 0.0, gb = 0.0;
  RouterTraining out;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    out.loss_history.push_back(logistic_loss(problem, w, b));
    logistic_gradient(problem, w, b, gw, gb);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= config.learning_rate * gw[j];
    b -= config.learning_rate * gb;
  }
  double final_loss = logistic_loss(problem, w, b);
  if (!std::isfinite(final_loss)) throw Error("router: training diverged");
  out.loss_history.push_back(final_loss);

  out.router = TfidfRouter(std::move(vocab), std::move(w), b, positive_label, negative_label,
                           stopwords, config);
  out.train_size = n_train;
  out.test_size = n_test;
  if (n_test > 0) {
    std::size_t correct = 0;
    for (std::size_t i = n_train; i < docs.size(); ++i) {
      auto r = out.router.route(docs[i].tokens);
      bool predicted_positive = r.label == positive_label;
      if (predicted_positive == (docs[i].label == 1.0)) ++correct;
    }
    out.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(n_test);
  }
  return out;
}

}  // namespace e2c::classify
