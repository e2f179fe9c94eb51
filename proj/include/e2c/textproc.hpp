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

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "e2c/common.hpp"

namespace e2c::textproc {

/// Lower-cases ASCII letters, splits on whitespace and splits each of
/// `. , ! ? ; : ' "` into its own token. Non-ASCII bytes pass through.
Tokens tokenize(std::string_view text);

bool is_split_punct(char c);

/// Inverse of tokenize for display: punctuation attaches to the previous
/// token and an apostrophe glues its neighbours ("i ' m" -> "i'm").
std::string detokenize(const Tokens& tokens);

struct TaggedToken {
  std::string word;
  std::string pos;

  friend bool operator==(const TaggedToken&, const TaggedToken&) = default;
  friend auto operator<=>(const TaggedToken&, const TaggedToken&) = default;
};

using TaggedSentence = std::vector<TaggedToken>;

/// The 36 Penn Treebank tags plus its punctuation tags.
const std::vector<std::string>& penn_tagset();
bool is_valid_tag(std::string_view tag);

/// Anything that can assign one tag per token.
class Tagger {
 public:
  virtual ~Tagger() = default;
  virtual TaggedSentence tag(const Tokens& tokens) const = 0;
};

struct SuffixRule {
  std::string suffix;
  std::string tag;
};

/// Ordered suffix table used for words missing from the lexicon; the first
/// rule whose suffix is a proper suffix of the word wins.
const std::vector<SuffixRule>& default_suffix_rules();

struct LexiconEntry {
  std::string tag;                     // majority tag
  std::map<std::string, long> counts;  // tag -> occurrences
};

/// Unigram lexicon tagger: lexicon lookup, then suffix rules, then a
/// corpus-wide default tag.
class TaggerModel final : public Tagger {
 public:
  TaggerModel(std::map<std::string, LexiconEntry> lexicon, std::vector<SuffixRule> suffix_rules,
              std::string default_tag);

  TaggedSentence tag(const Tokens& tokens) const override;
  const std::string& tag_word(const std::string& word) const;

  const std::map<std::string, LexiconEntry>& lexicon() const { return lexicon_; }
  const std::vector<SuffixRule>& suffix_rules() const { return suffix_rules_; }
  const std::string& default_tag() const { return default_tag_; }

  std::string to_json() const;
  static TaggerModel from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TaggerModel load(const std::filesystem::path& path);

 private:
  std::map<std::string, LexiconEntry> lexicon_;
  std::vector<SuffixRule> suffix_rules_;
  std::string default_tag_;
};

/// Throws Error("empty tagger corpus") when no tokens are supplied.
TaggerModel train_tagger(const std::vector<TaggedSentence>& corpus,
                         std::vector<SuffixRule> suffix_rules = default_suffix_rules());

/// One sentence per line, tokens written as `word_TAG` (split at the last
/// underscore). Blank lines are skipped.
std::vector<TaggedSentence> parse_tagged_corpus(const std::vector<std::string>& lines);
std::vector<TaggedSentence> load_tagged_corpus(const std::filesystem::path& path);

class StopWords {
 public:
  StopWords() = default;
  explicit StopWords(std::set<std::string> words) : words_(std::move(words)) {}

  /// One word per line; blank lines and `#` comments ignored.
  static StopWords load(const std::filesystem::path& path);

  bool contains(const std::string& word) const { return words_.count(word) > 0; }
  const std::set<std::string>& words() const { return words_; }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string> words_;
};

Tokens remove_stopwords(const Tokens& tokens, const StopWords& stopwords);

/// Reads a plain word-list file (keywords, stop words): one entry per line,
/// lower-cased, blank lines and `#` comments skipped.
std::set<std::string> load_word_list(const std::filesystem::path& path);

}  // namespace e2c::textproc
