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

#include "e2c/textproc.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"

namespace e2c::textproc {

using nlohmann::json;

bool is_split_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':': case '\'': case '"':
      return true;
    default:
      return false;
  }
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    auto uc = static_cast<unsigned char>(c);
    if (std::isspace(uc)) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(uc < 128 ? static_cast<char>(std::tolower(uc)) : c);
    }
  }
  flush();
  return out;
}

std::string detokenize(const Tokens& tokens) {
  std::string out;
  bool glue_next = false;
  for (const auto& t : tokens) {
    const bool punct = t.size() == 1 && is_split_punct(t[0]) && t[0] != '"';
    if (!out.empty() && !punct && !glue_next) out.push_back(' ');
    out += t;
    glue_next = t == "'";
  }
  return out;
}

const std::vector<std::string>& penn_tagset() {
  static const std::vector<std::string> tags = {
      "CC",  "CD",  "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR", "JJS",  "LS",   "MD",  "NN",
      "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB",  "RBR",  "RBS",  "RP",  "SYM",
      "TO",  "UH",  "VB",   "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT",  "WP",   "WP$", "WRB",
      // punctuation
      ".",   ",",   ":",    "``",  "''",  "-LRB-", "-RRB-", "#", "$"};
  return tags;
}

bool is_valid_tag(std::string_view tag) {
  const auto& tags = penn_tagset();
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

const std::vector<SuffixRule>& default_suffix_rules() {
  static const std::vector<SuffixRule> rules = {
      {"ation", "NN"}, {"ness", "NN"}, {"ment", "NN"}, {"ship", "NN"}, {"tion", "NN"},
      {"able", "JJ"},  {"ible", "JJ"}, {"less", "JJ"}, {"ing", "VBG"}, {"ful", "JJ"},
      {"ous", "JJ"},   {"ive", "JJ"},  {"ish", "JJ"},  {"est", "JJS"}, {"ed", "VBD"},
      {"ly", "RB"},    {"s", "NNS"},
  };
  return rules;
}

namespace {

void check_tag(const std::string& tag, std::string_view where) {
  if (!is_valid_tag(tag)) throw Error("unknown POS tag '" + tag + "' in " + std::string(where));
}

template <typename Map>
std::string majority(const Map& counts) {
  // std::map iterates in lexicographic order, so strict > keeps the smallest
  // tag among ties.
  std::string best;
  long best_count = -1;
  for (const auto& [tag, n] : counts) {
    if (n > best_count) {
      best = tag;
      best_count = n;
    }
  }
  return best;
}

}  // namespace

TaggerModel::TaggerModel(std::map<std::string, LexiconEntry> lexicon,
                         std::vector<SuffixRule> suffix_rules, std::string default_tag)
    : lexicon_(std::move(lexicon)),
      suffix_rules_(std::move(suffix_rules)),
      default_tag_(std::move(default_tag)) {
  for (const auto& [word, entry] : lexicon_) check_tag(entry.tag, "lexicon entry '" + word + "'");
  for (const auto& rule : suffix_rules_) check_tag(rule.tag, "suffix rule '" + rule.suffix + "'");
  check_tag(default_tag_, "default tag");
}

const std::string& TaggerModel::tag_word(const std::string& word) const {
  if (auto it = lexicon_.find(word); it != lexicon_.end()) return it->second.tag;
  for (const auto& rule : suffix_rules_) {
    if (word.size() > rule.suffix.size() && word.ends_with(rule.suffix)) return rule.tag;
  }
  return default_tag_;
}

TaggedSentence TaggerModel::tag(const Tokens& tokens) const {
  TaggedSentence out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back({t, tag_word(t)});
  return out;
}

std::string TaggerModel::to_json() const {
  json lex = json::object();
  for (const auto& [word, entry] : lexicon_) {
    lex[word] = {{"tag", entry.tag}, {"counts", entry.counts}};
  }
  json rules = json::array();
  for (const auto& r : suffix_rules_) rules.push_back({r.suffix, r.tag});
  json j = {{"format", "e2c.tagger"},
            {"version", 1},
            {"default_tag", default_tag_},
            {"suffix_rules", rules},
            {"lexicon", lex}};
  return j.dump(1);
}

TaggerModel TaggerModel::from_json(std::string_view text) {
  json j = json::parse(text);
  if (j.value("format", "") != "e2c.tagger" || j.value("version", 0) != 1) {
    throw Error("not an e2c.tagger v1 model");
  }
  std::map<std::string, LexiconEntry> lexicon;
  for (const auto& [word, entry] : j.at("lexicon").items()) {
    lexicon[word] = {entry.at("tag").get<std::string>(),
                     entry.at("counts").get<std::map<std::string, long>>()};
  }
  std::vector<SuffixRule> rules;
  for (const auto& r : j.at("suffix_rules")) rules.push_back({r.at(0), r.at(1)});
  return TaggerModel(std::move(lexicon), std::move(rules), j.at("default_tag"));
}

void TaggerModel::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

TaggerModel TaggerModel::load(const std::filesystem::path& path) {
  return from_json(read_file(path));
}

TaggerModel train_tagger(const std::vector<TaggedSentence>& corpus,
                         std::vector<SuffixRule> suffix_rules) {
  std::map<std::string, std::map<std::string, long>> word_tags;
  std::map<std::string, long> tag_totals;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      check_tag(tok.pos, "tagged corpus");
      ++word_tags[tok.word][tok.pos];
      ++tag_totals[tok.pos];
    }
  }
  if (tag_totals.empty()) throw Error("empty tagger corpus");

  std::map<std::string, LexiconEntry> lexicon;
  for (auto& [word, counts] : word_tags) {
    lexicon[word] = {majority(counts), std::move(counts)};
  }
  return TaggerModel(std::move(lexicon), std::move(suffix_rules), majority(tag_totals));
}

std::vector<TaggedSentence> parse_tagged_corpus(const std::vector<std::string>& lines) {
  std::vector<TaggedSentence> out;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    TaggedSentence sentence;
    for (const auto& item : split_ws(lines[ln])) {
      auto cut = item.rfind('_');
      if (cut == std::string::npos || cut == 0 || cut + 1 == item.size()) {
        throw Error("malformed tagged token '" + item + "' on line " + std::to_string(ln + 1));
      }
      sentence.push_back({item.substr(0, cut), item.substr(cut + 1)});
      for (auto& c : sentence.back().word) {
        auto uc = static_cast<unsigned char>(c);
        if (uc < 128) c = static_cast<char>(std::tolower(uc));
      }
    }
    if (!sentence.empty()) out.push_back(std::move(sentence));
  }
  return out;
}

std::vector<TaggedSentence> load_tagged_corpus(const std::filesystem::path& path) {
  return parse_tagged_corpus(read_lines(path));
}

std::set<std::string> load_word_list(const std::filesystem::path& path) {
  std::set<std::string> words;
  for (const auto& raw : read_lines(path)) {
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    for (auto& c : line) {
      auto uc = static_cast<unsigned char>(c);
      if (uc < 128) c = static_cast<char>(std::tolower(uc));
    }
    words.insert(std::move(line));
  }
  return words;
}

StopWords StopWords::load(const std::filesystem::path& path) {
  return StopWords(load_word_list(path));
}

Tokens remove_stopwords(const Tokens& tokens, const StopWords& stopwords) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!stopwords.contains(t)) out.push_back(t);
  }
  return out;
}

}  // namespace e2c::textproc
