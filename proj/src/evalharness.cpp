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

#include "e2c/evalharness.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "e2c/textproc.hpp"

namespace e2c::eval {

using nlohmann::json;

EvalSet EvalSet::parse(const std::vector<std::string>& lines) {
  EvalSet set;
  bool header = true;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string line = trim(lines[ln]);
    if (line.empty() || line.front() == '#') continue;
    if (header) {
      header = false;
      if (line.starts_with("domain\t")) continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("eval set line " + std::to_string(ln + 1) + ": expected `domain<TAB>utterance`");
    }
    set.items.push_back({trim(line.substr(0, tab)), trim(line.substr(tab + 1))});
  }
  return set;
}

EvalSet EvalSet::load(const std::filesystem::path& path) { return parse(read_lines(path)); }

std::map<std::string, std::size_t> EvalSet::composition() const {
  std::map<std::string, std::size_t> out;
  for (const auto& item : items) ++out[item.expected_domain];
  return out;
}

double vocabulary_overlap(const std::vector<Tokens>& responses,
                          const std::set<std::string>& style_vocab, OverlapMode mode) {
  std::size_t hits = 0, total = 0;
  if (mode == OverlapMode::kToken) {
    for (const auto& r : responses) {
      for (const auto& t : r) {
        ++total;
        hits += style_vocab.count(t);
      }
    }
  } else {
    std::set<std::string> types;
    for (const auto& r : responses) types.insert(r.begin(), r.end());
    total = types.size();
    for (const auto& t : types) hits += style_vocab.count(t);
  }
  if (total == 0) throw Error("vocabulary overlap of zero tokens");
  return 100.0 * static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

double round6(double v) { return std::round(v * 1e6) / 1e6; }

json opt(const std::optional<double>& v) { return v ? json(round6(*v)) : json(nullptr); }

std::string mode_name(OverlapMode m) { return m == OverlapMode::kToken ? "token" : "type"; }

}  // namespace

EvalReport run_eval(const pipeline::Engine& engine, const EvalSet& eval_set,
                    const lm::BigramLM& style_lm, const std::set<std::string>& style_vocab,
                    OverlapMode mode) {
  EvalReport report;
  report.overlap_mode = mode;
  report.composition = eval_set.composition();
  std::vector<Tokens> responses;
  for (std::size_t i = 0; i < eval_set.items.size(); ++i) {
    const auto& item = eval_set.items[i];
    EvalRow row;
    row.index = i;
    row.input = item.utterance;
    row.expected_domain = item.expected_domain;
    try {
      auto turn = pipeline::respond(engine, textproc::tokenize(item.utterance), i);
      row.response = turn.final;
      row.route = turn.trace.route_label;
      row.verdict = pipeline::to_string(turn.trace.verdict);
      row.perplexity = style_lm.perplexity(turn.final);
      row.overlap = vocabulary_overlap({turn.final}, style_vocab, mode);
      responses.push_back(turn.final);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  if (!responses.empty()) {
    report.average_perplexity = lm::corpus_perplexity(style_lm, responses);
    report.vocabulary_overlap = vocabulary_overlap(responses, style_vocab, mode);
  }
  return report;
}

json EvalReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"index", r.index},
                         {"input", r.input},
                         {"expected_domain", r.expected_domain},
                         {"response", textproc::detokenize(r.response)},
                         {"response_tokens", r.response},
                         {"route", r.route},
                         {"verdict", r.verdict},
                         {"perplexity", opt(r.perplexity)},
                         {"overlap", opt(r.overlap)},
                         {"error", r.error ? json(*r.error) : json(nullptr)}});
  }
  return {{"format", "e2c.eval_report"},
          {"version", 1},
          {"average_perplexity", opt(average_perplexity)},
          {"vocabulary_overlap", opt(vocabulary_overlap)},
          {"overlap_mode", mode_name(overlap_mode)},
          {"composition", composition},
          {"rows", rows_json}};
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(4) << "#" << std::setw(10) << "route" << std::setw(26) << "verdict"
      << std::setw(10) << "ppl" << std::setw(9) << "overlap" << "input -> response\n";
  for (const auto& r : rows) {
    out << std::setw(4) << r.index << std::setw(10) << r.route << std::setw(26) << r.verdict;
    if (r.perplexity) out << std::setw(10) << *r.perplexity; else out << std::setw(10) << "-";
    if (r.overlap) out << std::setw(9) << *r.overlap; else out << std::setw(9) << "-";
    out << r.input << " -> "
        << (r.error ? "ERROR: " + *r.error : textproc::detokenize(r.response)) << "\n";
  }
  out << "average perplexity: ";
  if (average_perplexity) out << *average_perplexity; else out << "-";
  out << "\nvocabulary overlap (" << mode_name(overlap_mode) << "): ";
  if (vocabulary_overlap) out << *vocabulary_overlap << "%"; else out << "-";
  out << "\n";
  return out.str();
}

// ------------------------------------------------------------------ CSV

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw Error("CSV: unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

AnnotationSheet AnnotationSheet::parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) header = parse_csv_line(line);
  }
  static const std::vector<std::string> required = {"annotator", "item", "grammar", "coherence",
                                                    "style"};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const auto& name : required) {
    if (!col.count(name)) throw Error("annotation sheet: missing column '" + name + "'");
  }

  AnnotationSheet sheet;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = parse_csv_line(line);
    auto cell = [&](const std::string& name) {
      const auto i = col.at(name);
      return i < fields.size() ? trim(fields[i]) : std::string();
    };
    auto binary = [&](const std::string& name) -> std::optional<int> {
      const std::string v = cell(name);
      if (v.empty()) return std::nullopt;
      if (v == "0") return 0;
      if (v == "1") return 1;
      throw Error("annotation sheet line " + std::to_string(ln) + ": " + name + " must be 0 or 1, got '" + v + "'");
    };
    sheet.rows.push_back({cell("annotator"), cell("item"), binary("grammar"), binary("coherence"),
                          binary("style")});
  }
  return sheet;
}

AnnotationSheet AnnotationSheet::load(const std::filesystem::path& path) {
  return parse_csv(read_file(path));
}

AnnotationSummary aggregate_annotations(const AnnotationSheet& sheet) {
  std::set<std::string> annotators, items;
  std::map<std::pair<std::string, std::string>, const AnnotationRow*> cells;
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < sheet.rows.size(); ++i) {
    const auto& r = sheet.rows[i];
    const std::string where = "row " + std::to_string(i + 1);
    if (r.annotator.empty()) missing.push_back(where + " annotator");
    if (r.item.empty()) missing.push_back(where + " item");
    if (!r.grammar) missing.push_back(where + " grammar");
    if (!r.coherence) missing.push_back(where + " coherence");
    if (!r.style) missing.push_back(where + " style");
    if (r.annotator.empty() || r.item.empty()) continue;
    annotators.insert(r.annotator);
    items.insert(r.item);
    if (!cells.emplace(std::make_pair(r.annotator, r.item), &r).second) {
      throw Error("annotation sheet: duplicate cell for annotator '" + r.annotator + "', item '" + r.item + "'");
    }
  }
  for (const auto& a : annotators) {
    for (const auto& it : items) {
      if (!cells.count({a, it})) missing.push_back("annotator " + a + " item " + it);
    }
  }
  if (sheet.rows.empty()) missing.emplace_back("sheet has no rows");
  if (!missing.empty()) {
    std::string msg = "missing cells: ";
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i > 0) msg += "; ";
      msg += missing[i];
    }
    throw Error(msg);
  }

  AnnotationSummary s;
  s.annotators = annotators.size();
  s.items = items.size();
  double g = 0, c = 0, st = 0;
  for (const auto& [key, r] : cells) {
    g += *r->grammar;
    c += *r->coherence;
    st += *r->style;
  }
  const double n = static_cast<double>(s.annotators * s.items);
  s.grammar = 100.0 * g / n;
  s.coherence = 100.0 * c / n;
  s.style = 100.0 * st / n;
  s.average = (s.grammar + s.coherence + s.style) / 3.0;
  return s;
}

std::string annotation_template(const EvalReport& report) {
  std::string out = "annotator,item,grammar,coherence,style,input,response\n";
  for (const auto& r : report.rows) {
    out += "," + std::to_string(r.index + 1) + ",,,," + csv_escape(r.input) + "," +
           csv_escape(textproc::detokenize(r.response)) + "\n";
  }
  return out;
}

}  // namespace e2c::eval
