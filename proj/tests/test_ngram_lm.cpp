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

#include <gtest/gtest.h>

#include <cmath>

#include "e2c/ngram_lm.hpp"
#include "support.hpp"

using namespace e2c;
using e2c::lm::BigramLM;

TEST(BigramCounts, DirectCounting) {
  const auto lm = BigramLM::train({{"a", "b"}});
  EXPECT_EQ(lm.bigram_counts(), (std::map<std::pair<std::string, std::string>, long>{
                                    {{"<s>", "a"}, 1}, {{"a", "b"}, 1}, {{"b", "</s>"}, 1}}));
  const auto twice = BigramLM::train({{"a"}, {"a"}});
  EXPECT_EQ(twice.unigram_count("a"), 2);
  EXPECT_EQ(twice.unigram_count("<s>"), 2);
  EXPECT_EQ(twice.unigram_count("</s>"), 2);
}

TEST(BigramCounts, MinCountRemapsToUnk) {
  const auto lm = BigramLM::train({{"a", "b"}, {"a", "c"}}, 1.0, 2);
  EXPECT_FALSE(lm.contains("b"));
  EXPECT_FALSE(lm.contains("c"));
  EXPECT_EQ(lm.bigram_count("a", "<unk>"), 2);
  EXPECT_EQ(lm.map_token("b"), "<unk>");
}

TEST(BigramProb, HandArithmetic) {
  const auto lm = BigramLM::train({{"a"}});
  EXPECT_EQ(lm.predictable_size(), 3u);
  EXPECT_NEAR(lm.prob("<s>", "a"), 0.5, 1e-15);
  EXPECT_NEAR(lm.prob("a", "</s>"), 0.5, 1e-15);
  EXPECT_NEAR(lm.log_prob({"a"}), std::log(0.25), 1e-12);
  EXPECT_NEAR(lm.perplexity({"a"}), 2.0, 1e-12);
  EXPECT_GT(lm.log_prob({"a"}), lm.log_prob({"b"}));
  // never-seen history is uniform
  EXPECT_NEAR(lm.prob("<unk>", "a"), 1.0 / 3.0, 1e-15);
}

TEST(BigramProb, EmptySentence) {
  const auto lm = BigramLM::train({{"a"}});
  EXPECT_NEAR(lm.log_prob({}), std::log(lm.prob("<s>", "</s>")), 1e-15);
  EXPECT_THROW(lm.perplexity({}), Error);
  EXPECT_THROW(lm.prob("</s>", "a"), Error);
  EXPECT_THROW(lm.prob("a", "<s>"), Error);
  EXPECT_THROW(BigramLM::train({}), Error);
}

TEST(BigramProb, UniformModelPerplexityIsVocabularySize) {
  // with an enormous k every conditional is (almost exactly) 1/|V|
  const auto lm = BigramLM::train({{"a", "b"}, {"c"}}, 1e12);
  const double v = static_cast<double>(lm.predictable_size());
  EXPECT_NEAR(lm.perplexity({"b", "a", "zz"}), v, 1e-6);
}

TEST(BigramOracle, RandomCorporaMatchBruteForce) {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const auto corpus = testkit::random_corpus(rng, 20, 3 + rng.index(8));
    const double k = 0.1 + 2.0 * rng.uniform();
    const int min_count = 1 + static_cast<int>(rng.index(3));
    const auto lm = BigramLM::train(corpus, k, min_count);
    const testkit::OracleLM oracle(corpus, k, min_count);
    EXPECT_EQ(lm.predictable_size(), oracle.predictable().size());
    auto probes = testkit::random_corpus(rng, 10, 12);
    probes.insert(probes.end(), corpus.begin(), corpus.end());
    for (const auto& s : probes) {
      EXPECT_NEAR(lm.log_prob(s), oracle.log_prob(s), 1e-9);
      EXPECT_NEAR(lm.perplexity(s), oracle.perplexity(s), 1e-9 * oracle.perplexity(s));
    }
    EXPECT_NEAR(lm::corpus_perplexity(lm, probes), oracle.corpus_perplexity(probes), 1e-9);
  }
}

TEST(BigramOracle, EveryHistoryNormalizes) {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const auto corpus = testkit::random_corpus(rng, 20, 2 + rng.index(10));
    const auto lm = BigramLM::train(corpus, 0.05 + rng.uniform(), 1 + static_cast<int>(rng.index(2)));
    for (const auto& h : lm.vocab()) {
      if (h == "</s>") continue;
      double total = 0;
      for (const auto& w : lm.vocab()) {
        if (w != "<s>") total += lm.prob(h, w);
      }
      EXPECT_NEAR(total, 1.0, 1e-9) << h;
    }
  }
}

TEST(CorpusPerplexity, TokenWeighted) {
  const auto lm = BigramLM::train({{"a", "b"}, {"b", "c", "a"}});
  const Tokens s1 = {"a", "b"}, s2 = {"c"};
  EXPECT_NEAR(lm::corpus_perplexity(lm, {s1}), lm.perplexity(s1), 1e-12);
  EXPECT_NEAR(lm::corpus_perplexity(lm, {s1, s1}), lm.perplexity(s1), 1e-12);
  const double expected = std::exp(-(lm.log_prob(s1) + lm.log_prob(s2)) / 5.0);
  EXPECT_NEAR(lm::corpus_perplexity(lm, {s1, s2}), expected, 1e-12);
  EXPECT_NE(lm::corpus_perplexity(lm, {s1, s2}), lm::mean_sentence_perplexity(lm, {s1, s2}));
  EXPECT_THROW(lm::corpus_perplexity(lm, {}), Error);
}

TEST(CorpusPerplexity, OwnCorpusBeatsDisjointModel) {
  const std::vector<Tokens> style = {{"warp", "speed", "captain"}, {"shields", "up", "captain"},
                                     {"warp", "factor", "two"}};
  const std::vector<Tokens> other = {{"pizza", "tonight"}, {"coffee", "please"}};
  const auto own = BigramLM::train(style);
  const auto disjoint = BigramLM::train(other);
  EXPECT_LT(lm::corpus_perplexity(own, style), lm::corpus_perplexity(disjoint, style));
}

TEST(BigramPersistence, RoundTripPreservesScores) {
  Rng rng(5);
  const auto corpus = testkit::random_corpus(rng, 20, 9);
  const auto lm = BigramLM::train(corpus, 0.5, 2);
  const auto back = BigramLM::from_json(lm.to_json());
  EXPECT_EQ(back.to_json(), lm.to_json());
  for (const auto& s : corpus) EXPECT_EQ(back.log_prob(s), lm.log_prob(s));
  EXPECT_THROW(BigramLM::from_json("{}"), Error);
}
