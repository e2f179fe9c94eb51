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

// Independent oracles and small fixtures shared by the unit tests and the
// acceptance runner. Nothing here calls into the code it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "e2c/classifier.hpp"
#include "e2c/common.hpp"
#include "e2c/corpus.hpp"
#include "e2c/generator.hpp"
#include "e2c/ngram_lm.hpp"
#include "e2c/pipeline.hpp"
#include "e2c/seq2seq.hpp"
#include "e2c/textproc.hpp"
#include "e2c/wordgraph.hpp"

namespace e2c::testkit {

// ------------------------------------------------------------ bigram LM

/// Count-and-smooth by linear scans over the wrapped corpus.
class OracleLM {
 public:
  OracleLM(const std::vector<Tokens>& corpus, double k, int min_count) : k_(k) {
    std::map<std::string, int> freq;
    for (const auto& s : corpus) {
      for (const auto& t : s) freq[t] += 1;
    }
    for (const auto& [t, n] : freq) {
      if (n >= min_count) kept_.insert(t);
    }
    for (const auto& s : corpus) wrapped_.push_back(wrap(s));
    predictable_ = kept_;
    predictable_.insert("</s>");
    predictable_.insert("<unk>");
  }

  std::vector<std::string> wrap(const Tokens& s) const {
    std::vector<std::string> out{"<s>"};
    for (const auto& t : s) out.push_back(kept_.count(t) ? t : "<unk>");
    out.push_back("</s>");
    return out;
  }

  double prob(const std::string& h, const std::string& w) const {
    double c_hw = 0, c_h = 0;
    for (const auto& s : wrapped_) {
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] != h) continue;
        c_h += 1;
        if (s[i + 1] == w) c_hw += 1;
      }
    }
    return (c_hw + k_) / (c_h + k_ * static_cast<double>(predictable_.size()));
  }

  double log_prob(const Tokens& sentence) const {
    const auto s = wrap(sentence);
    double total = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) total += std::log(prob(s[i], s[i + 1]));
    return total;
  }

  double perplexity(const Tokens& sentence) const {
    return std::exp(-log_prob(sentence) / static_cast<double>(sentence.size() + 1));
  }

  double corpus_perplexity(const std::vector<Tokens>& sentences) const {
    double nll = 0, n = 0;
    for (const auto& s : sentences) {
      nll -= log_prob(s);
      n += static_cast<double>(s.size() + 1);
    }
    return std::exp(nll / n);
  }

  const std::set<std::string>& predictable() const { return predictable_; }

 private:
  double k_;
  std::set<std::string> kept_;
  std::set<std::string> predictable_;
  std::vector<std::vector<std::string>> wrapped_;
};

inline std::vector<Tokens> random_corpus(Rng& rng, std::size_t max_sentences,
                                         std::size_t alphabet, std::size_t max_len = 8) {
  std::vector<Tokens> out(1 + rng.index(max_sentences));
  for (auto& s : out) {
    s.resize(1 + rng.index(max_len));
    for (auto& t : s) t = "w" + std::to_string(rng.index(alphabet));
  }
  return out;
}

/// Two classes sharing filler vocabulary; every positive document holds
/// "alpha" and every negative one "beta".
inline std::pair<std::vector<Tokens>, std::vector<Tokens>> separable_fixture(std::uint64_t seed,
                                                                             std::size_t per_class) {
  static const Tokens filler = {"ship", "the", "crew", "report", "now", "deck", "open", "signal",
                                "log", "time", "room", "light", "door", "hall", "plan", "day"};
  Rng rng(seed);
  auto doc = [&](const std::string& marker) {
    Tokens d(2 + rng.index(5));
    for (auto& t : d) t = filler[rng.index(filler.size())];
    d.insert(d.begin() + static_cast<std::ptrdiff_t>(rng.index(d.size() + 1)), marker);
    return d;
  };
  std::vector<Tokens> pos, neg;
  for (std::size_t i = 0; i < per_class; ++i) {
    pos.push_back(doc("alpha"));
    neg.push_back(doc("beta"));
  }
  return {pos, neg};
}

/// Max over coordinates is too strict near zero; this is the usual
/// ||a - n|| / (||a|| + ||n||).
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom == 0 ? 0 : std::sqrt(diff) / denom;
}

/// Random 10-feature logistic problem.
inline classify::LogisticProblem random_logistic_problem(Rng& rng, std::size_t dimension = 10) {
  classify::LogisticProblem p;
  p.dimension = dimension;
  p.l2 = 0.01 + 0.1 * rng.uniform();
  const std::size_t n = 3 + rng.index(10);
  for (std::size_t i = 0; i < n; ++i) {
    classify::SparseVector x;
    for (std::size_t j = 0; j < dimension; ++j) {
      if (rng.uniform() < 0.5) x.entries.push_back({static_cast<int>(j), rng.uniform(-2, 2)});
    }
    p.features.push_back(x);
    p.labels.push_back(rng.uniform() < 0.5 ? 0.0 : 1.0);
  }
  return p;
}

/// Central differences of the logistic objective; the bias is the last
/// coordinate.
inline std::pair<std::vector<double>, std::vector<double>> logistic_gradients(
    const classify::LogisticProblem& p, const std::vector<double>& w, double b) {
  std::vector<double> gw;
  double gb = 0;
  classify::logistic_gradient(p, w, b, gw, gb);
  std::vector<double> analytic = gw;
  analytic.push_back(gb);
  std::vector<double> numeric;
  const double h = 1e-6;
  for (std::size_t j = 0; j <= w.size(); ++j) {
    auto wp = w, wm = w;
    double bp = b, bm = b;
    if (j < w.size()) {
      wp[j] += h;
      wm[j] -= h;
    } else {
      bp += h;
      bm -= h;
    }
    numeric.push_back((classify::logistic_loss(p, wp, bp) - classify::logistic_loss(p, wm, bm)) / (2 * h));
  }
  return {analytic, numeric};
}

// ------------------------------------------------------- pair windows

/// Every (window of d consecutive utterances -> next utterance), d <= max.
inline std::multiset<std::pair<std::string, std::string>> window_oracle(
    const std::vector<std::string>& utterances, int max_context) {
  std::multiset<std::pair<std::string, std::string>> out;
  const int n = static_cast<int>(utterances.size());
  for (int target = 1; target < n; ++target) {
    for (int d = 1; d <= max_context && d <= target; ++d) {
      std::string post;
      for (int i = target - d; i < target; ++i) {
        if (!post.empty()) post += " <sep> ";
        post += utterances[static_cast<std::size_t>(i)];
      }
      out.insert({post, utterances[static_cast<std::size_t>(target)]});
    }
  }
  return out;
}

inline std::vector<corpus::Utterance> make_scene(const std::vector<std::string>& lines) {
  std::vector<corpus::Utterance> scene;
  for (const auto& l : lines) scene.push_back({std::nullopt, split_ws(l), l});
  return scene;
}

inline std::multiset<std::pair<std::string, std::string>> as_text(
    const std::vector<corpus::DialogPair>& pairs) {
  std::multiset<std::pair<std::string, std::string>> out;
  for (const auto& p : pairs) out.insert({join(p.post, " "), join(p.response, " ")});
  return out;
}

/// n distinct posts of three words, each mapped to an arbitrary response of
/// two to four words; only memorisation can reproduce them.
inline std::vector<corpus::DialogPair> toy_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::set<Tokens> posts;
  std::vector<corpus::DialogPair> out;
  while (out.size() < n) {
    Tokens post(3);
    for (auto& t : post) t = "p" + std::to_string(rng.index(12));
    if (!posts.insert(post).second) continue;
    Tokens response(2 + rng.index(3));
    for (auto& t : response) t = "r" + std::to_string(rng.index(16));
    out.push_back({post, response, "toy", 1});
  }
  return out;
}

/// Analytic gradient of one example against central differences at
/// `per_block` random coordinates of every parameter block.
inline double seq2seq_gradient_error(const seq2seq::Seq2SeqModel& model,
                                     const seq2seq::Example& example, Rng& rng,
                                     int per_block, std::size_t* checked = nullptr) {
  auto probe = model;
  auto grad = seq2seq::Params::shaped(model.config(), model.vocab().size());
  grad.set_zero();
  model.loss_and_gradient(example, grad);
  auto grad_blocks = grad.blocks();
  auto blocks = probe.params().blocks();
  std::vector<double> analytic, numeric;
  const double h = 1e-5;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto size = blocks[b].rows * blocks[b].cols;
    if (size == 0) continue;
    for (int k = 0; k < per_block; ++k) {
      const auto i = static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(size)));
      double& x = blocks[b].data[i];
      const double saved = x;
      x = saved + h;
      const double up = probe.loss(example);
      x = saved - h;
      const double down = probe.loss(example);
      x = saved;
      analytic.push_back(grad_blocks[b].data[i]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  if (checked) *checked = analytic.size();
  return relative_error(analytic, numeric);
}

// ------------------------------------------------------- word graph

inline textproc::TaggedSentence tagged(const std::string& text) {
  textproc::TaggedSentence out;
  for (const auto& item : split_ws(text)) {
    const auto cut = item.rfind('/');
    out.push_back({item.substr(0, cut), item.substr(cut + 1)});
  }
  return out;
}

inline Tokens words_of(const textproc::TaggedSentence& s) {
  Tokens out;
  for (const auto& t : s) out.push_back(t.word);
  return out;
}

/// Name-insertion fixture: a tiny style corpus whose graph lets "how are
/// you" gain a leading name and "i am sorry" a trailing one.
struct NameFixture {
  std::vector<textproc::TaggedSentence> corpus;
  textproc::TaggerModel tagger;
  graph::WordGraph graph;
  lm::BigramLM lm;
  std::set<std::string> keywords{"uhura", "miranda", "captain", "spock"};

  static std::vector<textproc::TaggedSentence> sentences() {
    return {tagged("uhura/NNP how/WRB are/VBP you/PRP"),
            tagged("i/PRP am/VBP sorry/JJ miranda/NNP"),
            tagged("captain/NN kirk/NNP smiles/VBZ"),
            tagged("spock/NNP raises/VBZ an/DT eyebrow/NN")};
  }
  static std::vector<Tokens> token_corpus() {
    std::vector<Tokens> out;
    for (const auto& s : sentences()) out.push_back(words_of(s));
    return out;
  }

  NameFixture()
      : corpus(sentences()),
        tagger(textproc::train_tagger(corpus)),
        graph(graph::WordGraph::build(corpus)),
        lm(lm::BigramLM::train(token_corpus())) {}
};

/// Levenshtein distance restricted to insertions: true when `longer` is
/// `shorter` with exactly one token added.
inline bool one_insertion(const Tokens& shorter, const Tokens& longer) {
  if (longer.size() != shorter.size() + 1) return false;
  for (std::size_t skip = 0; skip < longer.size(); ++skip) {
    bool same = true;
    for (std::size_t i = 0, j = 0; i < longer.size(); ++i) {
      if (i == skip) continue;
      if (longer[i] != shorter[j++]) {
        same = false;
        break;
      }
    }
    if (same) return true;
  }
  return false;
}

/// Re-checks both witnessing edges of a candidate against the graph.
inline bool witnessed(const graph::WordGraph& g, const textproc::TaggedSentence& input,
                      const graph::InsertionCandidate& c) {
  auto side = [&](int index) -> std::vector<graph::GraphNode> {
    if (index < 0) return {graph::WordGraph::bos()};
    if (index >= static_cast<int>(input.size())) return {graph::WordGraph::eos()};
    const auto& t = input[static_cast<std::size_t>(index)];
    if (g.has_node({t.word, t.pos})) return {{t.word, t.pos}};
    return g.nodes_with_word(t.word);
  };
  const graph::GraphNode mid{c.inserted_word, c.source_pos};
  bool in = false, out = false;
  for (const auto& l : side(c.position - 1)) in = in || g.edge_count(l, mid) > 0;
  for (const auto& r : side(c.position)) out = out || g.edge_count(mid, r) > 0;
  return in && out;
}

// ------------------------------------------------------- stub engine

/// Generator answering from a lookup table keyed by the post; unknown posts
/// get an empty, zero-confidence answer.
class TableGenerator final : public gen::Generator {
 public:
  void set(const Tokens& post, gen::GeneratorOutput out) { table_[post] = std::move(out); }
  gen::GeneratorOutput generate(const Tokens& post) const override {
    auto it = table_.find(post);
    return it == table_.end() ? gen::GeneratorOutput{} : it->second;
  }
  std::string kind() const override { return "table"; }

 private:
  std::map<Tokens, gen::GeneratorOutput> table_;
};

inline std::vector<Tokens> stub_style_corpus() {
  return {split_ws("warp speed captain"),   split_ws("shields up captain"),
          split_ws("red alert all hands"),  split_ws("phasers ready captain"),
          split_ws("warp factor two sir"),  split_ws("aye captain warp speed"),
          split_ws("hailing frequencies open sir")};
}

inline std::vector<Tokens> stub_general_corpus() {
  return {split_ws("pizza tonight maybe"), split_ws("coffee with milk please"),
          split_ws("the movie was fun"),  split_ws("lunch at noon okay"),
          split_ws("my sister likes pizza"), split_ws("coffee is ready now"),
          split_ws("see the movie tonight")};
}

struct StubEngine {
  std::shared_ptr<TableGenerator> style = std::make_shared<TableGenerator>();
  std::shared_ptr<TableGenerator> general = std::make_shared<TableGenerator>();
  pipeline::Engine engine;

  explicit StubEngine(std::uint64_t seed = 5) {
    classify::RouterConfig rc;
    rc.test_fraction = 0.0;
    rc.epochs = 300;
    rc.learning_rate = 2.0;
    rc.seed = seed;
    auto routing = classify::train_router(stub_style_corpus(), stub_general_corpus(), rc,
                                          "startrek", "general");
    std::vector<textproc::TaggedSentence> tagged_style;
    std::vector<textproc::TaggedSentence> tag_corpus;
    for (const auto& s : stub_style_corpus()) {
      textproc::TaggedSentence t;
      for (const auto& w : s) t.push_back({w, w == "captain" || w == "sir" ? "NN" : "JJ"});
      tag_corpus.push_back(t);
    }
    auto tagger = std::make_shared<textproc::TaggerModel>(textproc::train_tagger(tag_corpus));
    for (const auto& s : stub_style_corpus()) tagged_style.push_back(tagger->tag(s));
    auto style_lm = std::make_shared<lm::BigramLM>(lm::BigramLM::train(stub_style_corpus()));

    engine.router = std::make_shared<classify::TfidfRouter>(routing.router);
    engine.style_generator = style;
    engine.general_generator = general;
    engine.graph = std::make_shared<graph::WordGraph>(graph::WordGraph::build(tagged_style));
    engine.style_lm = style_lm;
    engine.tagger = tagger;
    engine.fallbacks = std::make_shared<gen::StandardResponseSet>(gen::StandardResponseSet::parse(
        {"i cannot answer that.", "please restate.", "klingon: Qapla'!", "klingon: nuqneH"}, seed));
    engine.keywords = {"captain", "sir"};
    engine.config.reference_perplexity =
        pipeline::compute_reference_perplexity(stub_style_corpus(), *style_lm);
    engine.config.seed = seed;
  }
};

}  // namespace e2c::testkit
