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

#include <array>
#include <sstream>

#include "e2c/evalharness.hpp"
#include "support.hpp"

using namespace e2c;
using namespace e2c::eval;

namespace {

const std::filesystem::path kData = E2C_DATA_DIR;

// counts[m] ones for metric m, spread over an A x I sheet in row order
std::string sheet_csv(int annotators, int items, const std::array<int, 3>& ones) {
  std::string csv = "annotator,item,grammar,coherence,style\n";
  int cell = 0;
  for (int a = 0; a < annotators; ++a) {
    for (int i = 0; i < items; ++i, ++cell) {
      csv += "a" + std::to_string(a) + ",i" + std::to_string(i);
      for (int m = 0; m < 3; ++m) csv += cell < ones[static_cast<std::size_t>(m)] ? ",1" : ",0";
      csv += "\n";
    }
  }
  return csv;
}

}  // namespace

TEST(Overlap, HandCases) {
  EXPECT_NEAR(vocabulary_overlap({{"warp", "speed", "now"}}, {"warp", "speed"}), 200.0 / 3.0, 1e-12);
  EXPECT_EQ(vocabulary_overlap({{"a", "b"}, {"a"}}, {"a", "b"}), 100.0);
  EXPECT_EQ(vocabulary_overlap({{"a", "a", "x"}, {"x"}}, {"a"}), 50.0);
  EXPECT_EQ(vocabulary_overlap({{"a", "a", "x"}}, {"a"}, OverlapMode::kType), 50.0);
  EXPECT_EQ(vocabulary_overlap({{"."}}, {"."}), 100.0);
  EXPECT_THROW(vocabulary_overlap({}, {"a"}), Error);
  EXPECT_THROW(vocabulary_overlap({{}}, {"a"}), Error);
}

TEST(Overlap, UniverseGivesHundredPercent) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto responses = testkit::random_corpus(rng, 10, 20);
    std::set<std::string> universe;
    for (const auto& r : responses) universe.insert(r.begin(), r.end());
    EXPECT_EQ(vocabulary_overlap(responses, universe), 100.0);
    const double partial = vocabulary_overlap(responses, {"w1", "w2"});
    EXPECT_GE(partial, 0.0);
    EXPECT_LE(partial, 100.0);
  }
}

TEST(Annotations, PublishedAverage) {
  // 10 annotators x 20 items; 187, 147 and 172 ones out of 200
  const auto s = aggregate_annotations(AnnotationSheet::parse_csv(sheet_csv(10, 20, {187, 147, 172})));
  EXPECT_DOUBLE_EQ(s.grammar, 93.5);
  EXPECT_DOUBLE_EQ(s.coherence, 73.5);
  EXPECT_DOUBLE_EQ(s.style, 86.0);
  EXPECT_NEAR(s.average, 84.33, 0.01);
  EXPECT_EQ(s.annotators, 10u);
  EXPECT_EQ(s.items, 20u);
}

TEST(Annotations, AllOnesAndQuarterCase) {
  auto s = aggregate_annotations(AnnotationSheet::parse_csv(sheet_csv(3, 4, {12, 12, 12})));
  EXPECT_EQ(s.average, 100.0);
  s = aggregate_annotations(AnnotationSheet::parse_csv(
      "annotator,item,grammar,coherence,style\nx,1,1,0,0\nx,2,1,0,0\ny,1,0,0,0\ny,2,1,0,0\n"));
  EXPECT_EQ(s.grammar, 75.0);
  EXPECT_EQ(s.coherence, 0.0);
}

TEST(Annotations, HandSummedTwoByThree) {
  const std::string csv =
      "annotator,item,grammar,coherence,style\n"
      "ann1,q1,1,1,0\nann1,q2,0,1,1\nann1,q3,1,1,1\n"
      "ann2,q1,1,0,0\nann2,q2,1,1,0\nann2,q3,0,1,1\n";
  const auto s = aggregate_annotations(AnnotationSheet::parse_csv(csv));
  EXPECT_NEAR(s.grammar, 100.0 * 4 / 6, 1e-12);
  EXPECT_NEAR(s.coherence, 100.0 * 5 / 6, 1e-12);
  EXPECT_NEAR(s.style, 100.0 * 3 / 6, 1e-12);
  EXPECT_NEAR(s.average, 100.0 * 12 / 18, 1e-12);
}

TEST(Annotations, PermutationInvariant) {
  const std::string csv = sheet_csv(4, 5, {13, 7, 17});
  auto lines = split_ws(csv);  // no spaces inside the rows
  const std::string header = lines.front();
  lines.erase(lines.begin());
  const auto base = aggregate_annotations(AnnotationSheet::parse_csv(csv));
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(lines);
    const auto s = aggregate_annotations(AnnotationSheet::parse_csv(header + "\n" + join(lines, "\n")));
    EXPECT_DOUBLE_EQ(s.grammar, base.grammar);
    EXPECT_DOUBLE_EQ(s.coherence, base.coherence);
    EXPECT_DOUBLE_EQ(s.style, base.style);
  }
}

TEST(Annotations, MissingAndInvalidCells) {
  try {
    aggregate_annotations(AnnotationSheet::parse_csv(
        "annotator,item,grammar,coherence,style\na,1,1,,1\nb,2,1,1,1\n"));
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_EQ(msg.rfind("missing cells", 0), 0u) << msg;
    EXPECT_NE(msg.find("coherence"), std::string::npos);
    EXPECT_NE(msg.find("annotator a item 2"), std::string::npos);
  }
  EXPECT_THROW(AnnotationSheet::parse_csv("annotator,item,grammar,coherence,style\na,1,2,1,1\n"), Error);
  EXPECT_THROW(AnnotationSheet::parse_csv("annotator,item,grammar\na,1,1\n"), Error);
}

TEST(Annotations, TemplateRoundTrip) {
  EvalReport report;
  for (std::size_t i = 0; i < 20; ++i) {
    EvalRow row;
    row.index = i;
    row.input = "hello, \"there\" " + std::to_string(i);
    row.response = {"hi", ",", "friend"};
    report.rows.push_back(row);
  }
  const auto csv = annotation_template(report);
  const auto sheet = AnnotationSheet::parse_csv(csv);
  ASSERT_EQ(sheet.rows.size(), 20u);
  std::istringstream lines(csv);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "annotator,item,grammar,coherence,style,input,response");
  const auto fields = parse_csv_line(first);
  ASSERT_EQ(fields.size(), 7u);
  EXPECT_EQ(fields[5], "hello, \"there\" 0");
  EXPECT_EQ(fields[6], "hi, friend");
  try {
    aggregate_annotations(sheet);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("missing cells", 0), 0u);
  }
}

TEST(EvalSetTest, ShippedSetComposition) {
  const auto set = EvalSet::load(kData / "fixtures/eval_set.tsv");
  EXPECT_EQ(set.items.size(), 20u);
  EXPECT_EQ(set.composition(), (std::map<std::string, std::size_t>{{"general", 10}, {"startrek", 10}}));
  EXPECT_THROW(EvalSet::parse({"domain\tutterance", "no tab here"}), Error);
}

TEST(RunEval, FixedEchoEngine) {
  testkit::StubEngine stub;
  const Tokens answer = split_ws("shields up captain");
  EvalSet set;
  for (const auto* text : {"warp speed captain", "pizza tonight maybe", "red alert all hands"}) {
    set.items.push_back({"x", text});
    stub.style->set(split_ws(text), {answer, -0.1});
    stub.general->set(split_ws(text), {answer, -0.1});
  }
  std::set<std::string> vocab;
  for (const auto& s : testkit::stub_style_corpus()) vocab.insert(s.begin(), s.end());
  const auto report = run_eval(stub.engine, set, *stub.engine.style_lm, vocab);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.response, answer);
    EXPECT_FALSE(row.error);
  }
  EXPECT_EQ(*report.vocabulary_overlap, 100.0);
  EXPECT_NEAR(*report.average_perplexity, stub.engine.style_lm->perplexity(answer), 1e-9);
  EXPECT_EQ(report.to_json().dump(), run_eval(stub.engine, set, *stub.engine.style_lm, vocab).to_json().dump());
}

TEST(RunEval, ItemErrorsAreRecorded) {
  testkit::StubEngine stub;
  EvalSet set;
  set.items.push_back({"x", "..."});
  set.items.push_back({"x", ""});
  stub.style->set(split_ws(". . ."), {split_ws("shields up captain"), -0.1});
  stub.general->set(split_ws(". . ."), {split_ws("shields up captain"), -0.1});
  const auto report = run_eval(stub.engine, set, *stub.engine.style_lm, {"captain"});
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_FALSE(report.rows[0].error);
  ASSERT_TRUE(report.rows[1].error);
  EXPECT_EQ(*report.rows[1].error, "empty input");
  EXPECT_NE(report.to_table().find("ERROR: empty input"), std::string::npos);
}
