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

#include "e2c/training.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "e2c/corpus.hpp"
#include "e2c/generator.hpp"
#include "e2c/ngram_lm.hpp"
#include "e2c/textproc.hpp"
#include "e2c/wordgraph.hpp"

namespace e2c::training {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Walks a dotted field name; nullptr when any part is absent or null.
const json* find(const json& root, const std::string& dotted) {
  const json* cur = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (!cur->is_object() || !cur->contains(key) || (*cur)[key].is_null()) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) return cur;
    start = dot + 1;
  }
}

template <typename T>
T get_or(const json& root, const std::string& field, T fallback) {
  const json* v = find(root, field);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + field + "' has the wrong type");
  }
}

fs::path readable_path(const json* v, const std::string& field, const fs::path& base) {
  if (!v) throw ConfigError("config: missing field '" + field + "'");
  if (!v->is_string()) throw ConfigError("config field '" + field + "' must be a path string");
  fs::path p = v->get<std::string>();
  if (p.is_relative()) p = base / p;
  std::ifstream probe(p);
  if (!probe) throw ConfigError("config field '" + field + "': cannot read " + p.string());
  return p;
}

fs::path input_path(const json& root, const std::string& field, const fs::path& base) {
  return readable_path(find(root, field), field, base);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

std::vector<Tokens> utterance_tokens(const std::vector<std::vector<corpus::Utterance>>& scenes) {
  std::vector<Tokens> out;
  for (const auto& scene : scenes) {
    for (const auto& u : scene) out.push_back(u.tokens);
  }
  return out;
}

std::vector<corpus::DialogPair> scene_pairs(const std::vector<std::vector<corpus::Utterance>>& scenes,
                                            int max_context, const std::string& domain) {
  std::vector<corpus::DialogPair> pairs;
  for (const auto& scene : scenes) {
    auto p = corpus::build_pairs(scene, max_context, domain);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  return pairs;
}

}  // namespace

TrainConfig TrainConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  TrainConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.style_domain = get_or<std::string>(j, "style_domain", c.style_domain);
  c.general_domain = get_or<std::string>(j, "general_domain", c.general_domain);
  c.max_context = get_or<int>(j, "max_context", c.max_context);
  require(c.max_context >= 1, "max_context must be >= 1");
  require(c.style_domain != c.general_domain, "style_domain and general_domain must differ");

  c.style_transcript = input_path(j, "corpora.style", base);
  c.general_transcript = input_path(j, "corpora.general", base);
  if (const json* extra = find(j, "corpora.extra_negative")) {
    require(extra->is_array(), "corpora.extra_negative must be a list");
    for (std::size_t i = 0; i < extra->size(); ++i) {
      c.extra_negative.push_back(
          readable_path(&(*extra)[i], "corpora.extra_negative[" + std::to_string(i) + "]", base));
    }
  }
  c.tagger_corpus = input_path(j, "tagger.corpus", base);
  c.stopwords = input_path(j, "stopwords", base);
  c.keywords = input_path(j, "keywords", base);
  c.fallbacks = input_path(j, "fallbacks", base);
  if (find(j, "eval_set")) c.eval_set = input_path(j, "eval_set", base);

  c.lm_corpus = input_path(j, "lm.corpus", base);
  c.lm_smoothing_k = get_or<double>(j, "lm.smoothing_k", c.lm_smoothing_k);
  c.lm_min_count = get_or<int>(j, "lm.min_count", c.lm_min_count);
  require(c.lm_smoothing_k > 0, "lm.smoothing_k must be > 0");
  require(c.lm_min_count >= 1, "lm.min_count must be >= 1");

  auto& rc = c.classifier;
  rc.seed = c.seed;
  rc.l2 = get_or<double>(j, "classifier.l2", rc.l2);
  rc.learning_rate = get_or<double>(j, "classifier.learning_rate", rc.learning_rate);
  rc.epochs = get_or<int>(j, "classifier.epochs", rc.epochs);
  rc.test_fraction = get_or<double>(j, "classifier.test_fraction", rc.test_fraction);
  rc.max_features = get_or<std::size_t>(j, "classifier.max_features", rc.max_features);
  rc.use_bigrams = get_or<bool>(j, "classifier.use_bigrams", rc.use_bigrams);
  require(rc.l2 >= 0 && rc.learning_rate > 0 && rc.epochs >= 0, "classifier settings out of range");
  require(rc.test_fraction >= 0 && rc.test_fraction < 1, "classifier.test_fraction must be in [0, 1)");

  auto& g = c.generator;
  g.kind = get_or<std::string>(j, "generator.kind", g.kind);
  require(g.kind == "seq2seq" || g.kind == "retrieval", "generator.kind must be 'seq2seq' or 'retrieval'");
  g.model.embedding_dim = get_or<int>(j, "generator.embedding_dim", g.model.embedding_dim);
  g.model.hidden_dim = get_or<int>(j, "generator.hidden_dim", g.model.hidden_dim);
  g.model.num_layers = get_or<int>(j, "generator.num_layers", g.model.num_layers);
  g.model.attention = get_or<bool>(j, "generator.attention", g.model.attention);
  g.model.min_count = get_or<int>(j, "generator.min_count", g.model.min_count);
  g.train.epochs = get_or<int>(j, "generator.epochs", g.train.epochs);
  g.train.learning_rate = get_or<double>(j, "generator.learning_rate", g.train.learning_rate);
  g.train.clip_norm = get_or<double>(j, "generator.clip_norm", g.train.clip_norm);
  g.train.batch_size = get_or<int>(j, "generator.batch_size", g.train.batch_size);
  g.train.seed = c.seed;
  g.decode.beam_width = get_or<int>(j, "generator.beam_width", g.decode.beam_width);
  g.decode.max_length = get_or<int>(j, "generator.max_length", g.decode.max_length);
  require(g.model.embedding_dim > 0 && g.model.hidden_dim > 0 && g.model.num_layers > 0,
          "generator dimensions must be positive");
  require(g.train.epochs >= 0 && g.train.batch_size > 0 && g.train.learning_rate > 0,
          "generator training settings out of range");
  require(g.decode.beam_width >= 1 && g.decode.max_length >= 1, "generator decode settings out of range");

  auto& p = c.pipeline;
  p.seed = c.seed;
  p.gate_low = get_or<double>(j, "pipeline.gate_low", p.gate_low);
  p.gate_high = get_or<double>(j, "pipeline.gate_high", p.gate_high);
  p.confidence_floor = get_or<double>(j, "pipeline.confidence_floor", p.confidence_floor);
  p.shift_passes = get_or<int>(j, "pipeline.shift_passes", p.shift_passes);
  auto probe = p;
  probe.reference_perplexity = 1.0;
  probe.validate();
  return c;
}

TrainConfig TrainConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

std::string Summary::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "pairs: " << style_pairs << " style, " << general_pairs << " general\n";
  out << "router: " << router_features << " features, " << router_train << " train / "
      << router_test << " held out";
  if (heldout_accuracy) out << ", held-out accuracy " << *heldout_accuracy;
  out << "\n";
  out << "tagger: " << tagger_words << " lexicon words\n";
  out << "word graph: " << graph_nodes << " nodes, " << graph_edges << " edges\n";
  out << "style lm: " << lm_vocab << " types, reference perplexity " << reference_perplexity << "\n";
  out << "style vocabulary: " << style_vocab << " types\n";
  if (style_final_loss) out << "style generator final loss: " << *style_final_loss << "\n";
  if (general_final_loss) out << "general generator final loss: " << *general_final_loss << "\n";
  for (const auto& a : artifacts) out << "wrote " << a.generic_string() << "\n";
  return out.str();
}

Summary train_all(const TrainConfig& config, const fs::path& out_dir, bool dry_run,
                  const seq2seq::EpochCallback& progress) {
  Summary s;

  const auto style_scenes = corpus::load_scenes(config.style_transcript);
  const auto general_scenes = corpus::load_scenes(config.general_transcript);
  const auto style_pairs = scene_pairs(style_scenes, config.max_context, config.style_domain);
  const auto general_pairs = scene_pairs(general_scenes, config.max_context, config.general_domain);
  if (style_pairs.empty()) throw ConfigError("corpora.style yields no dialog pairs");
  if (general_pairs.empty()) throw ConfigError("corpora.general yields no dialog pairs");
  s.style_pairs = style_pairs.size();
  s.general_pairs = general_pairs.size();

  auto negatives = utterance_tokens(general_scenes);
  for (const auto& extra : config.extra_negative) {
    const auto more = utterance_tokens(corpus::load_scenes(extra));
    negatives.insert(negatives.end(), more.begin(), more.end());
  }
  const auto positives = utterance_tokens(style_scenes);
  const auto tagged = textproc::load_tagged_corpus(config.tagger_corpus);
  if (tagged.empty()) throw ConfigError("tagger.corpus is empty");
  const auto lm_sentences = utterance_tokens(corpus::load_scenes(config.lm_corpus));
  if (lm_sentences.empty()) throw ConfigError("lm.corpus has no sentences");
  const auto stopwords = textproc::StopWords::load(config.stopwords);
  gen::StandardResponseSet::load(config.fallbacks, config.seed);  // validates
  if (dry_run) return s;

  const auto routing = classify::train_router(positives, negatives, config.classifier,
                                              config.style_domain, config.general_domain, stopwords);
  s.router_features = routing.router.vocabulary().size();
  s.router_train = routing.train_size;
  s.router_test = routing.test_size;
  s.heldout_accuracy = routing.heldout_accuracy;

  const auto tagger = textproc::train_tagger(tagged);
  s.tagger_words = tagger.lexicon().size();

  std::vector<textproc::TaggedSentence> tagged_style;
  for (const auto& sentence : positives) tagged_style.push_back(tagger.tag(sentence));
  const auto graph = graph::WordGraph::build(tagged_style);
  s.graph_nodes = graph.node_count();
  s.graph_edges = graph.edge_count();

  const auto style_lm = lm::train_lm(lm_sentences, config.lm_smoothing_k, config.lm_min_count);
  s.lm_vocab = style_lm.vocab().size();
  pipeline::PipelineConfig pcfg = config.pipeline;
  pcfg.reference_perplexity = pipeline::compute_reference_perplexity(lm_sentences, style_lm);
  pcfg.validate();
  s.reference_perplexity = pcfg.reference_perplexity;

  std::set<std::string> style_vocab;
  for (const auto& t : positives) style_vocab.insert(t.begin(), t.end());
  s.style_vocab = style_vocab.size();

  fs::create_directories(out_dir);
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(out_dir / name, text);
    s.artifacts.push_back(out_dir / name);
  };

  emit("router.json", routing.router.to_json());
  emit("tagger.json", tagger.to_json());
  emit("graph.json", graph.to_json());
  emit("lm.json", style_lm.to_json());
  emit("style_vocab.txt", join(Tokens(style_vocab.begin(), style_vocab.end()), "\n") + "\n");
  emit("keywords.txt", read_file(config.keywords));
  emit("fallbacks.txt", read_file(config.fallbacks));
  if (!config.eval_set.empty()) emit("eval_set.tsv", read_file(config.eval_set));

  const auto& g = config.generator;
  auto train_generator = [&](const std::vector<corpus::DialogPair>& pairs, const std::string& domain,
                             std::uint64_t seed, std::optional<double>& final_loss) {
    const std::string file = domain + "_generator.json";
    if (g.kind == "retrieval") {
      emit(file, gen::RetrievalGenerator::build(pairs).to_json());
    } else {
      seq2seq::TrainConfig tc = g.train;
      tc.seed = seed;
      seq2seq::TrainingLog log;
      const auto model = seq2seq::train_seq2seq(g.model, pairs, tc, &log, progress);
      final_loss = log.final_loss;
      emit(file, model.to_json());
    }
    return pipeline::GeneratorSpec{g.kind, file, g.decode.beam_width, g.decode.max_length};
  };

  pipeline::Manifest m;
  m.base_dir = out_dir;
  m.style_domain = config.style_domain;
  m.router = "router.json";
  m.tagger = "tagger.json";
  m.graph = "graph.json";
  m.lm = "lm.json";
  m.keywords = "keywords.txt";
  m.fallbacks = "fallbacks.txt";
  m.style_vocab = "style_vocab.txt";
  if (!config.eval_set.empty()) m.eval_set = "eval_set.tsv";
  m.style_generator = train_generator(style_pairs, config.style_domain, config.seed, s.style_final_loss);
  m.general_generator =
      train_generator(general_pairs, config.general_domain, splitmix64(config.seed), s.general_final_loss);
  m.pipeline = pcfg;
  emit("manifest.json", m.to_json().dump(2) + "\n");
  return s;
}

}  // namespace e2c::training
