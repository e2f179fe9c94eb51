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

// e2c command-line front end. Exit codes: 0 ok, 1 runtime error, 2 config error.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "e2c/classifier.hpp"
#include "e2c/evalharness.hpp"
#include "e2c/ngram_lm.hpp"
#include "e2c/pipeline.hpp"
#include "e2c/service.hpp"
#include "e2c/textproc.hpp"
#include "e2c/training.hpp"
#include "e2c/wordgraph.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDefaultManifest = "artifacts/manifest.json";

// --manifest beats E2C_MANIFEST beats the default.
fs::path manifest_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("E2C_MANIFEST"); env && *env) return env;
  return kDefaultManifest;
}

struct EngineBundle {
  e2c::pipeline::Manifest manifest;
  e2c::pipeline::Engine engine;
};

EngineBundle open_engine(const std::string& flag, std::optional<std::uint64_t> seed) {
  auto manifest = e2c::pipeline::Manifest::load(manifest_path(flag));
  if (seed) manifest.pipeline.seed = *seed;
  auto engine = e2c::pipeline::load_engine(manifest);
  return {std::move(manifest), std::move(engine)};
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

int cmd_train_all(const std::string& config_path, const std::string& out_dir, bool dry_run,
                  std::optional<std::uint64_t> seed, bool quiet) {
  auto config = e2c::training::TrainConfig::load(config_path);
  if (seed) {
    config.seed = *seed;
    config.classifier.seed = *seed;
    config.generator.train.seed = *seed;
    config.pipeline.seed = *seed;
  }
  e2c::seq2seq::EpochCallback progress;
  if (!quiet) {
    progress = [](int epoch, double loss) {
      if (epoch % 25 == 0) std::cerr << "  epoch " << epoch << " loss " << fixed(loss, 4) << "\n";
    };
  }
  const auto summary = e2c::training::train_all(config, out_dir, dry_run, progress);
  if (dry_run) {
    std::cout << "config ok: " << summary.style_pairs << " style pairs, " << summary.general_pairs
              << " general pairs; nothing written\n";
  } else {
    std::cout << summary.to_text();
  }
  return 0;
}

void print_turn_summary(const e2c::pipeline::PipelineTrace& t) {
  std::cout << "  [route=" << t.route_label << " p=" << fixed(t.route_probability, 3)
            << " gate=" << e2c::pipeline::to_string(t.verdict)
            << " confidence=" << fixed(t.confidence, 3) << " ppl="
            << (t.perplexity ? fixed(*t.perplexity, 2) : std::string("-")) << " window=["
            << fixed(t.window_low, 2) << ", " << fixed(t.window_high, 2) << "]]\n";
}

int cmd_chat(const std::string& manifest_flag, std::optional<std::uint64_t> seed) {
  const auto bundle = open_engine(manifest_flag, seed);
  bool show_trace = false;
  std::uint64_t turn = 0;
  std::string line;
  while (true) {
    std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    const std::string text = e2c::trim(line);
    if (text.empty()) continue;
    if (text == ":quit") break;
    if (text == ":trace") {
      show_trace = !show_trace;
      std::cout << "trace " << (show_trace ? "on" : "off") << "\n";
      continue;
    }
    const auto tokens = e2c::textproc::tokenize(text);
    if (tokens.empty()) continue;
    const auto result = e2c::pipeline::respond(bundle.engine, tokens, turn++);
    std::cout << e2c::textproc::detokenize(result.final) << "\n";
    print_turn_summary(result.trace);
    if (show_trace) std::cout << result.trace.to_json().dump(2) << "\n";
  }
  return 0;
}

int cmd_serve(const std::string& manifest_flag, const std::string& bind,
              const std::string& static_dir, std::optional<std::uint64_t> seed) {
  const auto [host, port] = e2c::service::parse_bind(bind);
  const fs::path manifest = manifest_path(manifest_flag);
  e2c::pipeline::Manifest::load(manifest);  // fail fast on a bad manifest

  e2c::service::ServiceOptions options;
  options.manifest = manifest;
  if (!static_dir.empty()) options.static_dir = static_dir;
  options.seed = seed;
  e2c::service::ChatService service(options);
  const int bound = service.bind(host, port);
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  service.load_async();
  service.run();
  return 0;
}

int cmd_eval(const std::string& manifest_flag, const std::string& eval_set_flag, bool as_json,
             const std::string& template_path, const std::string& overlap,
             std::optional<std::uint64_t> seed) {
  const auto bundle = open_engine(manifest_flag, seed);
  const auto& m = bundle.manifest;
  fs::path eval_path = eval_set_flag.empty() ? m.resolve(m.eval_set) : fs::path(eval_set_flag);
  if (eval_path.empty()) throw e2c::ConfigError("no eval set: pass --eval-set or list one in the manifest");
  if (m.style_vocab.empty()) throw e2c::ConfigError("manifest: missing field 'style_vocab'");
  const auto eval_set = e2c::eval::EvalSet::load(eval_path);
  const auto vocab = e2c::textproc::load_word_list(m.resolve(m.style_vocab));
  const auto mode = overlap == "type" ? e2c::eval::OverlapMode::kType : e2c::eval::OverlapMode::kToken;
  const auto report = e2c::eval::run_eval(bundle.engine, eval_set, *bundle.engine.style_lm, vocab, mode);
  if (as_json) {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::cout << report.to_table();
  }
  if (!template_path.empty()) {
    e2c::write_file(template_path, e2c::eval::annotation_template(report));
    std::cerr << "wrote " << template_path << "\n";
  }
  return 0;
}

int cmd_shift(const std::string& graph_path, const std::string& lm_path, const std::string& sentence,
              const std::string& tagger_path, const std::string& keywords_path, int passes,
              bool as_json) {
  const auto graph = e2c::graph::WordGraph::load(graph_path);
  const auto lm = e2c::lm::BigramLM::load(lm_path);
  const auto tagger = e2c::textproc::TaggerModel::load(tagger_path);
  std::set<std::string> keywords;
  if (!keywords_path.empty()) keywords = e2c::textproc::load_word_list(keywords_path);
  e2c::graph::ShiftOptions options;
  options.passes = passes;
  const auto result = e2c::graph::style_shift(graph, lm, keywords, e2c::textproc::tokenize(sentence),
                                              tagger, options);
  if (as_json) {
    json ranked = json::array();
    for (const auto& c : result.ranked) {
      ranked.push_back({{"tokens", c.tokens},
                        {"text", e2c::textproc::detokenize(c.tokens)},
                        {"score", c.score},
                        {"has_keyword", c.has_keyword},
                        {"inserted_word", c.insertion ? json(c.insertion->inserted_word) : json(nullptr)},
                        {"position", c.insertion ? json(c.insertion->position) : json(nullptr)}});
    }
    std::cout << json{{"best", result.best}, {"ranked", ranked}}.dump(2) << "\n";
    return 0;
  }
  std::cout << std::left << std::setw(5) << "rank" << std::setw(12) << "score" << std::setw(9)
            << "keyword" << std::setw(12) << "inserted" << "sentence\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const auto& c = result.ranked[i];
    std::cout << std::setw(5) << i + 1 << std::setw(12) << fixed(c.score, 5) << std::setw(9)
              << (c.has_keyword ? "yes" : "no") << std::setw(12)
              << (c.insertion ? c.insertion->inserted_word : std::string("-"))
              << e2c::join(c.tokens, " ") << "\n";
  }
  return 0;
}

int cmd_classify(const std::string& router_path, const std::string& text, bool as_json) {
  const auto router = e2c::classify::TfidfRouter::load(router_path);
  const auto r = router.route(e2c::textproc::tokenize(text));
  if (as_json) {
    std::cout << json{{"label", r.label}, {"probability", r.probability}}.dump() << "\n";
  } else {
    std::cout << r.label << " " << fixed(r.probability, 4) << "\n";
  }
  return 0;
}

int cmd_perplexity(const std::string& lm_path, const std::string& text_path, bool as_json) {
  const auto lm = e2c::lm::BigramLM::load(lm_path);
  std::vector<e2c::Tokens> sentences;
  for (const auto& line : e2c::read_lines(text_path)) {
    auto tokens = e2c::textproc::tokenize(line);
    if (!tokens.empty()) sentences.push_back(std::move(tokens));
  }
  const double ppl = e2c::lm::corpus_perplexity(lm, sentences);
  if (as_json) {
    std::cout << json{{"perplexity", ppl}, {"sentences", sentences.size()}}.dump() << "\n";
  } else {
    std::cout << fixed(ppl, 4) << "\n";
  }
  return 0;
}

int cmd_annotate(const std::string& sheet_path, bool as_json) {
  const auto s = e2c::eval::aggregate_annotations(e2c::eval::AnnotationSheet::load(sheet_path));
  if (as_json) {
    std::cout << json{{"grammar", s.grammar},     {"coherence", s.coherence},
                      {"style", s.style},         {"average", s.average},
                      {"annotators", s.annotators}, {"items", s.items}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "annotators " << s.annotators << ", items " << s.items << "\n"
              << "grammar   " << fixed(s.grammar, 2) << "%\n"
              << "coherence " << fixed(s.coherence, 2) << "%\n"
              << "style     " << fixed(s.style, 2) << "%\n"
              << "average   " << fixed(s.average, 2) << "%\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"e2c: domain-styled chatbot toolkit"};
  app.require_subcommand(1);

  std::string manifest, config, out_dir = "artifacts", bind = "127.0.0.1:8080", static_dir;
  std::string eval_set, template_path, overlap = "token";
  std::string graph_path, lm_path, router_path, text, tagger_path, keywords_path, text_path, sheet;
  std::optional<std::uint64_t> seed;
  bool dry_run = false, as_json = false, quiet = false;
  int passes = 1;

  auto* train = app.add_subcommand("train-all", "train every component from a config file");
  train->add_option("config", config, "training config (JSON)")->required();
  train->add_option("--out", out_dir, "artifact directory")->capture_default_str();
  train->add_flag("--dry-run", dry_run, "validate the config and inputs, write nothing");
  train->add_option("--seed", seed, "override the config seed");
  train->add_flag("--quiet", quiet, "no training progress on stderr");

  auto* chat = app.add_subcommand("chat", "interactive chat; :trace toggles traces, :quit exits");
  chat->add_option("--manifest", manifest, "engine manifest (default: $E2C_MANIFEST or artifacts/manifest.json)");
  chat->add_option("--seed", seed, "override the fallback seed");

  auto* serve = app.add_subcommand("serve", "HTTP chat service");
  serve->add_option("--manifest", manifest, "engine manifest (default: $E2C_MANIFEST or artifacts/manifest.json)");
  serve->add_option("--bind", bind, "host:port")->capture_default_str();
  serve->add_option("--static-dir", static_dir, "directory served at /");
  serve->add_option("--seed", seed, "override the fallback seed");

  auto* eval = app.add_subcommand("eval", "run the evaluation set through the engine");
  eval->add_option("--manifest", manifest, "engine manifest (default: $E2C_MANIFEST or artifacts/manifest.json)");
  eval->add_option("--eval-set", eval_set, "TSV eval set (default: the manifest's)");
  eval->add_flag("--json", as_json, "print the report as JSON");
  eval->add_option("--annotation-template", template_path, "also write a blank annotation CSV");
  eval->add_option("--overlap", overlap, "token or type")
      ->check(CLI::IsMember({"token", "type"}))
      ->capture_default_str();
  eval->add_option("--seed", seed, "override the fallback seed");

  auto* shift = app.add_subcommand("shift", "style-shift one sentence with a word graph");
  shift->add_option("graph", graph_path, "word graph file")->required();
  shift->add_option("lm", lm_path, "language model file")->required();
  shift->add_option("sentence", text, "input sentence")->required();
  shift->add_option("--tagger", tagger_path, "tagger model file")->required();
  shift->add_option("--keywords", keywords_path, "keyword list");
  shift->add_option("--passes", passes, "insertion passes")->capture_default_str();
  shift->add_flag("--json", as_json, "machine-readable output");

  auto* classify = app.add_subcommand("classify", "route one utterance");
  classify->add_option("router", router_path, "router model file")->required();
  classify->add_option("text", text, "utterance")->required();
  classify->add_flag("--json", as_json, "machine-readable output");

  auto* perplexity = app.add_subcommand("perplexity", "corpus perplexity of a text file");
  perplexity->add_option("model", lm_path, "language model file")->required();
  perplexity->add_option("textfile", text_path, "one sentence per line")->required();
  perplexity->add_flag("--json", as_json, "machine-readable output");

  auto* annotate = app.add_subcommand("annotate", "aggregate a filled annotation sheet");
  annotate->add_option("sheet", sheet, "CSV annotation sheet")->required();
  annotate->add_flag("--json", as_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train_all(config, out_dir, dry_run, seed, quiet);
    if (*chat) return cmd_chat(manifest, seed);
    if (*serve) return cmd_serve(manifest, bind, static_dir, seed);
    if (*eval) return cmd_eval(manifest, eval_set, as_json, template_path, overlap, seed);
    if (*shift) return cmd_shift(graph_path, lm_path, text, tagger_path, keywords_path, passes, as_json);
    if (*classify) return cmd_classify(router_path, text, as_json);
    if (*perplexity) return cmd_perplexity(lm_path, text_path, as_json);
    if (*annotate) return cmd_annotate(sheet, as_json);
  } catch (const e2c::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
