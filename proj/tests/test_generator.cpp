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

#include "e2c/generator.hpp"
#include "support.hpp"

using namespace e2c;
using namespace e2c::gen;

namespace {

std::vector<corpus::DialogPair> pairs() {
  return {{split_ws("warp speed now"), split_ws("aye captain"), "startrek", 1},
          {split_ws("raise the shields"), split_ws("shields up"), "startrek", 1},
          {split_ws("red alert"), split_ws("all hands to stations"), "startrek", 1}};
}

}  // namespace

TEST(Retrieval, ExactPostIsRetrievedWithFullConfidence) {
  const auto r = RetrievalGenerator::build(pairs());
  const auto out = r.retrieve(split_ws("raise the shields"));
  EXPECT_EQ(out.tokens, split_ws("shields up"));
  EXPECT_NEAR(out.confidence, 0.0, 1e-12);
}

TEST(Retrieval, ConfidenceIsLogCosine) {
  const auto r = RetrievalGenerator::build(pairs());
  const Tokens query = split_ws("warp now please");
  const auto vocab = classify::fit_tfidf({split_ws("warp speed now"), split_ws("raise the shields"),
                                          split_ws("red alert")},
                                         std::numeric_limits<std::size_t>::max(), true);
  const double cosine = vocab.transform(query).dot(vocab.transform(split_ws("warp speed now")));
  const auto out = r.retrieve(query);
  EXPECT_EQ(out.tokens, split_ws("aye captain"));
  EXPECT_NEAR(out.confidence, std::log(cosine), 1e-12);
}

TEST(Retrieval, NoOverlapFloorsAndTiesGoToFirst) {
  const auto r = RetrievalGenerator::build(pairs());
  const auto out = r.retrieve({"pizza"});
  EXPECT_EQ(r.best_index({"pizza"}), 0u);
  EXPECT_NEAR(out.confidence, std::log(RetrievalGenerator::kSimilarityFloor), 1e-12);
  EXPECT_THROW(RetrievalGenerator::build({}), Error);
}

TEST(Retrieval, RoundTrip) {
  const auto r = RetrievalGenerator::build(pairs());
  const auto back = RetrievalGenerator::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_EQ(back.retrieve(split_ws("red alert now")).tokens, r.retrieve(split_ws("red alert now")).tokens);
}

TEST(StandardResponses, ParseAndSelect) {
  const auto set = StandardResponseSet::parse({"I do not know.", "", "klingon: Qapla'!", "Try again."}, 9);
  ASSERT_EQ(set.size(), 3u);
  EXPECT_TRUE(set.responses()[1].klingon);
  EXPECT_EQ(set.responses()[1].text, "Qapla'!");
  for (std::uint64_t turn = 0; turn < 50; ++turn) {
    const auto expected = splitmix64(9 ^ splitmix64(turn)) % set.size();
    EXPECT_EQ(&set.select(turn), &set.responses()[expected]);
    EXPECT_TRUE(set.contains(set.fallback(turn)));
  }
  EXPECT_THROW(StandardResponseSet::parse({"", " "}, 1), Error);
}
