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

#include "e2c/pipeline.hpp"

#include <chrono>

#include "e2c/seq2seq.hpp"

namespace e2c::pipeline {

using nlohmann::json;

void PipelineConfig::validate() const {
  if (!(reference_perplexity > 0)) throw ConfigError("pipeline.reference_perplexity must be > 0");
  if (!(gate_low > 0 && gate_low < 1)) throw ConfigError("pipeline.gate_low must be in (0, 1)");
  if (!(gate_high > 1)) throw ConfigError("pipeline.gate_high must be > 1");
  if (!(confidence_floor <= 0)) throw ConfigError("pipeline.confidence_floor must be <= 0");
  if (shift_passes < 1) throw ConfigError("pipeline.shift_passes must be >= 1");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kAccept:
      return "accept";
    case Verdict::kFallbackLowConfidence:
      return "fallback_low_confidence";
    case Verdict::kFallbackPerplexity:
      return "fallback_perplexity";
  }
  return "unknown";
}

json PipelineTrace::to_json(bool include_timing) const {
  json cands = nullptr;
  if (candidates) {
    cands = json::array();
    for (const auto& c : *candidates) {
      json row = {{"tokens", c.tokens},
                  {"text", textproc::detokenize(c.tokens)},
                  {"score", c.score},
                  {"has_keyword", c.has_keyword},
                  {"inserted_word", nullptr},
                  {"position", nullptr}};
      if (c.insertion) {
        row["inserted_word"] = c.insertion->inserted_word;
        row["position"] = c.insertion->position;
      }
      cands.push_back(std::move(row));
    }
  }
  json j = {
      {"turn_id", std::to_string(turn_id)},
      {"input", input},
      {"route", {{"label", route_label}, {"probability", route_probability}}},
      {"generator", {{"kind", generator_kind}, {"tokens", raw_output}, {"confidence", confidence}}},
      {"candidates", cands},
      {"candidate", candidate},
      {"gate",
       {{"confidence", confidence},
        {"confidence_floor", confidence_floor},
        {"perplexity", perplexity ? json(*perplexity) : json(nullptr)},
        {"reference_perplexity", reference_perplexity},
        {"low", window_low},
        {"high", window_high},
        {"verdict", to_string(verdict)}}},
      {"final", final},
      {"response", textproc::detokenize(final)},
  };
  if (include_timing) {
    j["durations_ms"] = {{"route", durations.route_ms},
                         {"generate", durations.generate_ms},
                         {"shift", durations.shift_ms},
                         {"gate", durations.gate_ms},
                         {"total", durations.total_ms}};
  }
  return j;
}

std::vector<std::string> Engine::missing_components() const {
  std::vector<std::string> missing;
  if (!router) missing.emplace_back("router");
  if (!style_generator) missing.emplace_back("style_generator");
  if (!general_generator) missing.emplace_back("general_generator");
  if (!graph) missing.emplace_back("graph");
  if (!style_lm) missing.emplace_back("style_lm");
  if (!tagger) missing.emplace_back("tagger");
  if (!fallbacks) missing.emplace_back("fallbacks");
  return missing;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

Turn respond(const Engine& engine, const Tokens& utterance, std::uint64_t turn_id) {
  if (utterance.empty()) throw Error("empty input");
  if (auto missing = engine.missing_components(); !missing.empty()) {
    throw Error("component not loaded: " + missing.front());
  }
  const auto& cfg = engine.config;
  const auto turn_start = Clock::now();

  Turn turn;
  auto& tr = turn.trace;
  tr.turn_id = turn_id;
  tr.input = utterance;
  tr.reference_perplexity = cfg.reference_perplexity;
  tr.window_low = cfg.window_low();
  tr.window_high = cfg.window_high();
  tr.confidence_floor = cfg.confidence_floor;

  auto t0 = Clock::now();
  const auto route = engine.router->route(utterance);
  tr.route_label = route.label;
  tr.route_probability = route.probability;
  tr.durations.route_ms = ms_since(t0);

  const bool style_path = route.label == engine.router->positive_label();
  const auto& generator = style_path ? *engine.style_generator : *engine.general_generator;
  t0 = Clock::now();
  const auto raw = generator.generate(utterance);
  tr.generator_kind = generator.kind();
  tr.raw_output = raw.tokens;
  tr.confidence = raw.confidence;
  tr.durations.generate_ms = ms_since(t0);

  tr.candidate = raw.tokens;
  if (!style_path && !raw.tokens.empty()) {
    t0 = Clock::now();
    auto shifted = graph::style_shift(*engine.graph, *engine.style_lm, engine.keywords,
                                      raw.tokens, *engine.tagger, {cfg.shift_passes});
    tr.candidate = shifted.best;
    tr.candidates = std::move(shifted.ranked);
    tr.durations.shift_ms = ms_since(t0);
  } else if (!style_path) {
    tr.candidates.emplace();
  }

  t0 = Clock::now();
  if (!tr.candidate.empty()) tr.perplexity = engine.style_lm->perplexity(tr.candidate);
  if (raw.confidence < cfg.confidence_floor) {
    tr.verdict = Verdict::kFallbackLowConfidence;
  } else if (!tr.perplexity || *tr.perplexity < tr.window_low || *tr.perplexity > tr.window_high) {
    tr.verdict = Verdict::kFallbackPerplexity;
  } else {
    tr.verdict = Verdict::kAccept;
  }
  tr.final = tr.verdict == Verdict::kAccept ? tr.candidate : engine.fallbacks->fallback(turn_id);
  tr.durations.gate_ms = ms_since(t0);
  tr.durations.total_ms = ms_since(turn_start);

  turn.final = tr.final;
  return turn;
}

double compute_reference_perplexity(const std::vector<Tokens>& style_corpus,
                                    const lm::BigramLM& style_lm) {
  return lm::corpus_perplexity(style_lm, style_corpus);
}

// -------------------------------------------------------------- manifest

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

namespace {

json generator_json(const GeneratorSpec& g) {
  return {{"kind", g.kind},
          {"path", g.path.generic_string()},
          {"beam_width", g.beam_width},
          {"max_length", g.max_length}};
}

GeneratorSpec generator_from(const json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_object()) throw ConfigError("manifest: missing field '" + field + "'");
  const auto& g = j[field];
  GeneratorSpec spec;
  spec.kind = g.value("kind", "");
  if (spec.kind != "seq2seq" && spec.kind != "retrieval") {
    throw ConfigError("manifest: " + field + ".kind must be 'seq2seq' or 'retrieval'");
  }
  if (!g.contains("path")) throw ConfigError("manifest: missing field '" + field + ".path'");
  spec.path = g["path"].get<std::string>();
  spec.beam_width = g.value("beam_width", 1);
  spec.max_length = g.value("max_length", 30);
  return spec;
}

std::filesystem::path path_field(const json& j, const std::string& field, bool required = true) {
  if (!j.contains(field) || j[field].is_null()) {
    if (required) throw ConfigError("manifest: missing field '" + field + "'");
    return {};
  }
  return j[field].get<std::string>();
}

}  // namespace

json Manifest::to_json() const {
  return {{"format", "e2c.manifest"},
          {"version", 1},
          {"style_domain", style_domain},
          {"router", router.generic_string()},
          {"tagger", tagger.generic_string()},
          {"graph", graph.generic_string()},
          {"lm", lm.generic_string()},
          {"keywords", keywords.generic_string()},
          {"fallbacks", fallbacks.generic_string()},
          {"style_vocab", style_vocab.generic_string()},
          {"eval_set", eval_set.empty() ? json(nullptr) : json(eval_set.generic_string())},
          {"style_generator", generator_json(style_generator)},
          {"general_generator", generator_json(general_generator)},
          {"pipeline",
           {{"reference_perplexity", pipeline.reference_perplexity},
            {"gate_low", pipeline.gate_low},
            {"gate_high", pipeline.gate_high},
            {"confidence_floor", pipeline.confidence_floor},
            {"seed", pipeline.seed},
            {"shift_passes", pipeline.shift_passes}}}};
}

Manifest Manifest::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (j.value("format", "") != "e2c.manifest" || j.value("version", 0) != 1) {
    throw ConfigError("not an e2c.manifest v1 file");
  }
  Manifest m;
  m.base_dir = base_dir;
  m.style_domain = j.value("style_domain", "startrek");
  m.router = path_field(j, "router");
  m.tagger = path_field(j, "tagger");
  m.graph = path_field(j, "graph");
  m.lm = path_field(j, "lm");
  m.keywords = path_field(j, "keywords", false);
  m.fallbacks = path_field(j, "fallbacks");
  m.style_vocab = path_field(j, "style_vocab", false);
  m.eval_set = path_field(j, "eval_set", false);
  m.style_generator = generator_from(j, "style_generator");
  m.general_generator = generator_from(j, "general_generator");
  if (!j.contains("pipeline")) throw ConfigError("manifest: missing field 'pipeline'");
  const auto& p = j["pipeline"];
  if (!p.contains("reference_perplexity")) {
    throw ConfigError("manifest: missing field 'pipeline.reference_perplexity'");
  }
  m.pipeline.reference_perplexity = p["reference_perplexity"];
  m.pipeline.gate_low = p.value("gate_low", 0.3);
  m.pipeline.gate_high = p.value("gate_high", 2.0);
  m.pipeline.confidence_floor = p.value("confidence_floor", -3.5);
  m.pipeline.seed = p.value("seed", std::uint64_t{0});
  m.pipeline.shift_passes = p.value("shift_passes", 1);
  m.pipeline.validate();
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ConfigError("cannot read manifest " + path.string());
  }
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::shared_ptr<const gen::Generator> load_generator(const GeneratorSpec& spec,
                                                     const Manifest& manifest) {
  const auto path = manifest.resolve(spec.path);
  if (spec.kind == "seq2seq") {
    auto model = std::make_shared<const seq2seq::Seq2SeqModel>(seq2seq::Seq2SeqModel::load(path));
    return std::make_shared<seq2seq::Seq2SeqGenerator>(
        model, seq2seq::DecodeConfig{spec.beam_width, spec.max_length});
  }
  if (spec.kind == "retrieval") {
    return std::make_shared<gen::RetrievalGenerator>(gen::RetrievalGenerator::load(path));
  }
  throw ConfigError("unknown generator kind '" + spec.kind + "'");
}

Engine load_engine(const Manifest& m) {
  Engine e;
  e.router = std::make_shared<const classify::TfidfRouter>(classify::TfidfRouter::load(m.resolve(m.router)));
  e.tagger = std::make_shared<const textproc::TaggerModel>(textproc::TaggerModel::load(m.resolve(m.tagger)));
  e.graph = std::make_shared<const graph::WordGraph>(graph::WordGraph::load(m.resolve(m.graph)));
  e.style_lm = std::make_shared<const lm::BigramLM>(lm::BigramLM::load(m.resolve(m.lm)));
  e.style_generator = load_generator(m.style_generator, m);
  e.general_generator = load_generator(m.general_generator, m);
  e.fallbacks = std::make_shared<const gen::StandardResponseSet>(
      gen::StandardResponseSet::load(m.resolve(m.fallbacks), m.pipeline.seed));
  if (!m.keywords.empty()) e.keywords = textproc::load_word_list(m.resolve(m.keywords));
  e.config = m.pipeline;
  return e;
}

}  // namespace e2c::pipeline
