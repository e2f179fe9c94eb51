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

#include "e2c/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace e2c::lm {

using nlohmann::json;

namespace {
const std::string kBosStr{kBos};
const std::string kEosStr{kEos};
const std::string kUnkStr{kUnk};

bool is_boundary(const std::string& t) { return t == kBos || t == kEos; }
}  // namespace

void BigramLM::index_vocab() {
  std::sort(vocab_.begin(), vocab_.end());
  vocab_.erase(std::unique(vocab_.begin(), vocab_.end()), vocab_.end());
  ids_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_[vocab_[i]] = static_cast<int>(i);
  bos_ = ids_.at(kBosStr);
  eos_ = ids_.at(kEosStr);
  unk_ = ids_.at(kUnkStr);
}

int BigramLM::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

BigramLM BigramLM::train(const std::vector<Tokens>& sentences, double smoothing_k,
                         int min_count) {
  if (sentences.empty()) throw Error("empty LM corpus");
  if (!(smoothing_k > 0)) throw Error("smoothing_k must be > 0");
  if (min_count < 1) throw Error("min_count must be >= 1");

  std::map<std::string, long> freq;
  for (const auto& s : sentences) {
    for (const auto& t : s) ++freq[t];
  }

  BigramLM lm;
  lm.k_ = smoothing_k;
  lm.min_count_ = min_count;
  lm.vocab_ = {kBosStr, kEosStr, kUnkStr};
  for (const auto& [tok, n] : freq) {
    if (n >= min_count && !is_boundary(tok)) lm.vocab_.push_back(tok);
  }
  lm.index_vocab();
  lm.unigram_.assign(lm.vocab_.size(), 0);

  std::vector<int> ids;
  for (const auto& s : sentences) {
    ids.clear();
    ids.push_back(lm.bos_);
    for (const auto& t : s) {
      int id = lm.id_of(t);
      ids.push_back(id < 0 || is_boundary(t) ? lm.unk_ : id);
    }
    ids.push_back(lm.eos_);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ++lm.unigram_[ids[i]];
      if (i > 0) ++lm.bigram_[lm.key(ids[i - 1], ids[i])];
    }
  }
  return lm;
}

const std::string& BigramLM::map_token(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return vocab_[unk_];
  return vocab_[it->second];
}

double BigramLM::prob_ids(int h, int w) const {
  const auto v = static_cast<double>(predictable_size());
  long hw = 0;
  if (auto it = bigram_.find(key(h, w)); it != bigram_.end()) hw = it->second;
  return (static_cast<double>(hw) + k_) / (static_cast<double>(unigram_[h]) + k_ * v);
}

double BigramLM::prob(const std::string& history, const std::string& word) const {
  int h = id_of(map_token(history));
  int w = id_of(map_token(word));
  if (h == eos_) throw Error("</s> cannot be a history");
  if (w == bos_) throw Error("<s> cannot be predicted");
  return prob_ids(h, w);
}

double BigramLM::log_prob(const Tokens& sentence) const {
  double total = 0.0;
  int prev = bos_;
  for (const auto& t : sentence) {
    int w = is_boundary(t) ? unk_ : id_of(map_token(t));
    total += std::log(prob_ids(prev, w));
    prev = w;
  }
  total += std::log(prob_ids(prev, eos_));
  return total;
}

double BigramLM::perplexity(const Tokens& sentence) const {
  if (sentence.empty()) throw Error("empty sentence");
  return std::exp(-log_prob(sentence) / static_cast<double>(sentence.size() + 1));
}

long BigramLM::unigram_count(const std::string& token) const {
  int id = id_of(token);
  return id < 0 ? 0 : unigram_[id];
}

long BigramLM::bigram_count(const std::string& history, const std::string& word) const {
  int h = id_of(history), w = id_of(word);
  if (h < 0 || w < 0) return 0;
  auto it = bigram_.find(key(h, w));
  return it == bigram_.end() ? 0 : it->second;
}

std::map<std::pair<std::string, std::string>, long> BigramLM::bigram_counts() const {
  std::map<std::pair<std::string, std::string>, long> out;
  const auto n = vocab_.size();
  for (const auto& [k, c] : bigram_) out[{vocab_[k / n], vocab_[k % n]}] = c;
  return out;
}

std::string BigramLM::to_json() const {
  json uni = json::object();
  for (std::size_t i = 0; i < vocab_.size(); ++i) uni[vocab_[i]] = unigram_[i];
  json bi = json::array();
  for (const auto& [hw, c] : bigram_counts()) bi.push_back({hw.first, hw.second, c});
  json j = {{"format", "e2c.bigram_lm"}, {"version", 1},       {"smoothing_k", k_},
            {"min_count", min_count_},   {"vocab", vocab_},     {"unigram_counts", uni},
            {"bigram_counts", bi}};
  return j.dump();
}

BigramLM BigramLM::from_json(std::string_view text) {
  json j = json::parse(text);
  if (j.value("format", "") != "e2c.bigram_lm" || j.value("version", 0) != 1) {
    throw Error("not an e2c.bigram_lm v1 model");
  }
  BigramLM lm;
  lm.k_ = j.at("smoothing_k");
  lm.min_count_ = j.at("min_count");
  lm.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  lm.index_vocab();
  lm.unigram_.assign(lm.vocab_.size(), 0);
  for (const auto& [tok, c] : j.at("unigram_counts").items()) {
    int id = lm.id_of(tok);
    if (id < 0) throw Error("unigram count for unknown token '" + tok + "'");
    lm.unigram_[id] = c.get<long>();
  }
  for (const auto& row : j.at("bigram_counts")) {
    int h = lm.id_of(row.at(0)), w = lm.id_of(row.at(1));
    if (h < 0 || w < 0) throw Error("bigram count for unknown token");
    lm.bigram_[lm.key(h, w)] = row.at(2).get<long>();
  }
  return lm;
}

void BigramLM::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

BigramLM BigramLM::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

double corpus_perplexity(const BigramLM& lm, const std::vector<Tokens>& sentences) {
  if (sentences.empty()) throw Error("empty sentence collection");
  double nll = 0.0;
  double n = 0.0;
  for (const auto& s : sentences) {
    if (s.empty()) throw Error("empty sentence");
    nll -= lm.log_prob(s);
    n += static_cast<double>(s.size() + 1);
  }
  return std::exp(nll / n);
}

double mean_sentence_perplexity(const BigramLM& lm, const std::vector<Tokens>& sentences) {
  if (sentences.empty()) throw Error("empty sentence collection");
  double sum = 0.0;
  for (const auto& s : sentences) sum += lm.perplexity(s);
  return sum / static_cast<double>(sentences.size());
}

}  // namespace e2c::lm
