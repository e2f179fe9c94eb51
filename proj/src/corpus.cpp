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

#include "e2c/corpus.hpp"

#include <cctype>
#include <regex>
#include <sstream>

#include "e2c/textproc.hpp"

namespace e2c::corpus {

Corpus::Corpus(std::vector<DialogPair> pairs) { append(pairs); }

void Corpus::append(const std::vector<DialogPair>& pairs) {
  for (const auto& p : pairs) {
    if (p.post.empty() || p.response.empty()) throw Error("dialog pair with an empty side");
    if (p.context_depth < 1) throw Error("dialog pair with context_depth < 1");
    vocabulary_.insert(p.post.begin(), p.post.end());
    vocabulary_.insert(p.response.begin(), p.response.end());
    pairs_.push_back(p);
  }
}

std::string strip_stage_directions(std::string_view line) {
  std::string out;
  std::vector<char> open;  // stack of pending closers
  for (char c : line) {
    if (c == '(' || c == '[') {
      open.push_back(c == '(' ? ')' : ']');
      continue;
    }
    if (c == ')' || c == ']') {
      if (!open.empty() && open.back() == c) {
        open.pop_back();
        if (open.empty()) out.push_back(' ');
      }
      continue;
    }
    if (open.empty()) out.push_back(c);
  }
  return out;
}

std::optional<Utterance> clean_line(std::string_view line) {
  static const std::regex speaker_re(R"(^\s*([A-Za-z][A-Za-z0-9 .'\-]{0,39}?)\s*:(.*)$)");
  Utterance u;
  u.raw = std::string(line);
  std::string text = strip_stage_directions(line);
  std::smatch m;
  if (std::regex_match(text, m, speaker_re)) {
    std::string name;
    for (const auto& part : split_ws(m[1].str())) {
      if (!name.empty()) name.push_back(' ');
      name += part;
    }
    for (auto& c : name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    u.speaker = std::move(name);
    text = m[2].str();
  }
  u.tokens = textproc::tokenize(text);
  if (u.tokens.empty()) return std::nullopt;
  return u;
}

std::vector<Utterance> clean_transcript(const std::vector<std::string>& raw_lines) {
  std::vector<Utterance> out;
  for (const auto& line : raw_lines) {
    if (auto u = clean_line(line)) out.push_back(std::move(*u));
  }
  return out;
}

bool is_scene_marker(std::string_view line) {
  std::string t = trim(line);
  return t == "---" || (!t.empty() && t.front() == '#');
}

std::vector<std::vector<std::string>> split_scenes(const std::vector<std::string>& lines) {
  std::vector<std::vector<std::string>> scenes;
  std::vector<std::string> cur;
  for (const auto& line : lines) {
    if (trim(line).empty() || is_scene_marker(line)) {
      if (!cur.empty()) scenes.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(line);
    }
  }
  if (!cur.empty()) scenes.push_back(std::move(cur));
  return scenes;
}

std::vector<DialogPair> build_pairs(const std::vector<Utterance>& scene, int max_context,
                                    const std::string& domain) {
  if (max_context < 1) throw Error("max_context must be >= 1");
  std::vector<DialogPair> pairs;
  const auto n = static_cast<int>(scene.size());
  for (int depth = 1; depth <= max_context; ++depth) {
    for (int start = 0; start + depth < n; ++start) {
      DialogPair p;
      for (int k = start; k < start + depth; ++k) {
        if (k > start) p.post.emplace_back(kSep);
        p.post.insert(p.post.end(), scene[k].tokens.begin(), scene[k].tokens.end());
      }
      p.response = scene[start + depth].tokens;
      p.domain = domain;
      p.context_depth = depth;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.pair_count = corpus.size();
  if (s.pair_count == 0) return s;
  double total = 0;
  for (const auto& p : corpus.pairs()) {
    total += static_cast<double>(p.post.size() + p.response.size());
  }
  s.mean_utterance_length = total / static_cast<double>(2 * s.pair_count);
  return s;
}

std::vector<std::vector<Utterance>> load_scenes(const std::filesystem::path& path) {
  std::vector<std::vector<Utterance>> scenes;
  for (const auto& raw : split_scenes(read_lines(path))) {
    auto scene = clean_transcript(raw);
    if (!scene.empty()) scenes.push_back(std::move(scene));
  }
  return scenes;
}

Corpus load_transcript(const std::filesystem::path& path, const std::string& domain,
                       int max_context) {
  Corpus corpus;
  for (const auto& scene : load_scenes(path)) {
    corpus.append(build_pairs(scene, max_context, domain));
  }
  return corpus;
}

std::string pairs_to_tsv(const std::vector<DialogPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += join(p.post);
    out += '\t';
    out += join(p.response);
    out += '\t';
    out += p.domain;
    out += '\t';
    out += std::to_string(p.context_depth);
    out += '\n';
  }
  return out;
}

std::vector<DialogPair> pairs_from_tsv(std::string_view text) {
  std::vector<DialogPair> pairs;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      fields.push_back(line.substr(start, tab - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 4) throw Error("pair TSV line " + std::to_string(ln) + ": expected 4 fields");
    DialogPair p{split_ws(fields[0]), split_ws(fields[1]), fields[2], 1};
    try {
      p.context_depth = std::stoi(fields[3]);
    } catch (const std::exception&) {
      throw Error("pair TSV line " + std::to_string(ln) + ": bad context_depth");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace e2c::corpus
