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

#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = E2C_DATA_DIR;
const std::string kCli = E2C_CLI;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  Run r;
  const std::string cmd = kCli + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("e2c_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path config_without(const std::string& section, const std::string& field) {
  json j = json::parse(e2c::read_file(kData / "fixtures/config.json"));
  for (const char* key : {"stopwords", "keywords", "fallbacks", "eval_set"}) {
    j[key] = (kData / "fixtures" / j[key].get<std::string>()).string();
  }
  for (auto& [key, value] : j["corpora"].items()) {
    if (value.is_string()) value = (kData / "fixtures" / value.get<std::string>()).string();
  }
  j["corpora"]["extra_negative"] = json::array({(kData / "fixtures/tweets.txt").string()});
  j["tagger"]["corpus"] = (kData / "fixtures/tagged_corpus.txt").string();
  j["lm"]["corpus"] = (kData / "fixtures/style_transcript.txt").string();
  if (section.empty()) {
    j.erase(field);
  } else {
    j[section].erase(field);
  }
  const auto path = scratch("cfg_" + section + field) / "config.json";
  e2c::write_file(path, j.dump(2));
  return path;
}

}  // namespace

TEST(Cli, DryRunWritesNothing) {
  const auto out = fs::temp_directory_path() / "e2c_cli_dry_out";
  fs::remove_all(out);
  const auto r = run("train-all " + (kData / "fixtures/config.json").string() + " --dry-run --out " + out.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, MissingLmCorpusIsConfigError) {
  const auto r = run("train-all " + config_without("lm", "corpus").string() + " --dry-run");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("lm.corpus"), std::string::npos) << r.out;
}

TEST(Cli, MissingFallbacksIsConfigError) {
  const auto r = run("train-all " + config_without("", "fallbacks").string() + " --dry-run");
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("fallbacks"), std::string::npos);
}

TEST(Cli, UnreadableConfigAndBadArguments) {
  EXPECT_EQ(run("train-all /nonexistent/config.json").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("classify").code, 2);
  EXPECT_EQ(run("classify /nonexistent/router.json hello").code, 1);
  EXPECT_EQ(run("chat --manifest /nonexistent/manifest.json < /dev/null").code, 2);
}

TEST(Cli, AnnotateAndPerplexity) {
  const auto dir = scratch("annotate");
  e2c::write_file(dir / "sheet.csv",
                  "annotator,item,grammar,coherence,style\na,1,1,1,0\na,2,1,0,1\nb,1,1,1,1\nb,2,0,1,1\n");
  auto r = run("annotate " + (dir / "sheet.csv").string() + " --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["grammar"], 75.0);
  EXPECT_EQ(j["average"], 75.0);

  e2c::write_file(dir / "blank.csv", "annotator,item,grammar,coherence,style\n,1,,,\n");
  r = run("annotate " + (dir / "blank.csv").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("missing cells"), std::string::npos);

  const auto lm = e2c::lm::BigramLM::train({{"a"}});
  lm.save(dir / "lm.json");
  e2c::write_file(dir / "text.txt", "a\n\n");
  r = run("perplexity " + (dir / "lm.json").string() + " " + (dir / "text.txt").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "2.0000\n");
}

TEST(Cli, ShiftPrintsRankedTable) {
  const auto dir = scratch("shift");
  const e2c::testkit::NameFixture fx;
  fx.graph.save(dir / "graph.json");
  fx.lm.save(dir / "lm.json");
  fx.tagger.save(dir / "tagger.json");
  auto r = run("shift " + (dir / "graph.json").string() + " " + (dir / "lm.json").string() +
               " \"how are you\" --tagger " + (dir / "tagger.json").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto first_row = r.out.substr(r.out.find('\n') + 1);
  EXPECT_EQ(first_row.rfind("1", 0), 0u);
  EXPECT_NE(first_row.substr(0, first_row.find('\n')).find("uhura how are you"), std::string::npos);

  r = run("shift " + (dir / "graph.json").string() + " " + (dir / "lm.json").string() +
          " \"how are you\" --json --tagger " + (dir / "tagger.json").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["best"], json::array({"uhura", "how", "are", "you"}));
}

TEST(Cli, ClassifyMatchesRoute) {
  const auto dir = scratch("classify");
  const auto [pos, neg] = e2c::testkit::separable_fixture(9, 30);
  const auto t = e2c::classify::train_router(pos, neg, {}, "startrek", "general");
  t.router.save(dir / "router.json");
  const auto r = run("classify " + (dir / "router.json").string() + " \"alpha ship now\" --json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto expected = t.router.route(e2c::textproc::tokenize("alpha ship now"));
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["label"], expected.label);
  EXPECT_EQ(j["probability"].get<double>(), expected.probability);
}
