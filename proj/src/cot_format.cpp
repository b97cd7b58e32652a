#include "egomind/cot_format.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "egomind/errors.hpp"

namespace egomind::cot {

namespace {

constexpr std::string_view kOpenThink = "<think>";
constexpr std::string_view kCloseThink = "</think>";
constexpr std::string_view kOpenAnswer = "<answer>";
constexpr std::string_view kCloseAnswer = "</answer>";
constexpr std::array<std::string_view, 4> kTags = {kOpenThink, kCloseThink, kOpenAnswer,
                                                   kCloseAnswer};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string_view ltrim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  return s;
}

bool blank(std::string_view s) { return trim(s).empty(); }

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

struct Line {
  std::string_view text;
  std::size_t offset;  // into the normalized document
};

std::vector<Line> split_lines(std::string_view body, std::size_t base) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start <= body.size()) {
    auto nl = body.find('\n', start);
    if (nl == std::string_view::npos) nl = body.size();
    lines.push_back({body.substr(start, nl - start), base + start});
    start = nl + 1;
  }
  return lines;
}

std::string join_lines(const std::vector<std::string_view>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return std::string(trim(out));
}

class Locator {
 public:
  explicit Locator(std::string_view text) : text_(text) {}

  ParseError error(ParseError::Kind kind, std::size_t offset, std::string message) const {
    offset = std::min(offset, text_.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return ParseError{kind, line, col, std::move(message)};
  }

 private:
  std::string_view text_;
};

std::vector<std::string> split_items(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto sep = s.find(';', start);
    if (sep == std::string_view::npos) sep = s.size();
    auto item = trim(s.substr(start, sep - start));
    if (!item.empty()) out.emplace_back(item);
    start = sep + 1;
  }
  return out;
}

std::vector<NarrativeBlock> parse_narrative(std::string_view body, const Markers& m) {
  std::vector<NarrativeBlock> blocks;
  std::vector<std::string_view> pending;
  std::optional<NarrativeBlock::Kind> kind;

  auto flush = [&] {
    auto text = join_lines(pending);
    if (kind || !text.empty()) {
      blocks.push_back({kind.value_or(NarrativeBlock::Kind::Frame), std::move(text)});
    }
    pending.clear();
  };

  for (const auto& line : split_lines(body, 0)) {
    auto l = ltrim(line.text);
    if (istarts_with(l, m.frame_block)) {
      flush();
      kind = NarrativeBlock::Kind::Frame;
      pending.push_back(l.substr(m.frame_block.size()));
    } else if (istarts_with(l, m.transition_block)) {
      flush();
      kind = NarrativeBlock::Kind::Transition;
      pending.push_back(l.substr(m.transition_block.size()));
    } else {
      pending.push_back(line.text);
    }
  }
  flush();
  return blocks;
}

PsaSection parse_psa(std::string_view body, const Markers& m) {
  PsaSection psa;
  std::vector<std::string_view> notes;
  bool in_relations = false;
  for (const auto& line : split_lines(body, 0)) {
    auto l = trim(line.text);
    if (l.empty()) continue;
    if (istarts_with(l, m.targets_label)) {
      psa.targets = split_items(l.substr(m.targets_label.size()));
      in_relations = false;
    } else if (istarts_with(l, m.candidates_label)) {
      psa.candidates = split_items(l.substr(m.candidates_label.size()));
      in_relations = false;
    } else if (istarts_with(l, m.relations_label)) {
      psa.relations = split_items(l.substr(m.relations_label.size()));
      in_relations = true;
    } else if (in_relations && l.front() == '-') {
      auto item = trim(l.substr(1));
      if (!item.empty()) psa.relations.emplace_back(item);
    } else {
      in_relations = false;
      notes.push_back(l);
    }
  }
  psa.notes = join_lines(notes);
  return psa;
}

bool contains_tag(std::string_view s) {
  return std::any_of(kTags.begin(), kTags.end(),
                     [&](std::string_view t) { return s.find(t) != std::string_view::npos; });
}

}  // namespace

std::string_view to_string(ParseError::Kind k) {
  switch (k) {
    case ParseError::Kind::Tag: return "tag";
    case ParseError::Kind::Section: return "section";
    case ParseError::Kind::Order: return "order";
    case ParseError::Kind::Answer: return "answer";
  }
  return "unknown";
}

std::string ParseError::to_string() const {
  return std::string(cot::to_string(kind)) + " error at " + std::to_string(line) + ":" +
         std::to_string(column) + ": " + message;
}

ParseFailure::ParseFailure(ParseError e) : std::runtime_error(e.to_string()), error_(std::move(e)) {}

ParseResult try_parse(std::string_view raw, const Grammar& grammar) {
  std::string text;
  text.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') continue;
    text.push_back(raw[i]);
  }
  const Locator at(text);
  using K = ParseError::Kind;

  // Tag layer: each tag exactly once, in order, nothing between the blocks.
  std::array<std::vector<std::size_t>, 4> hits;
  for (std::size_t pos = text.find('<'); pos != std::string::npos; pos = text.find('<', pos + 1)) {
    for (std::size_t t = 0; t < kTags.size(); ++t) {
      if (text.compare(pos, kTags[t].size(), kTags[t]) == 0) hits[t].push_back(pos);
    }
  }
  for (std::size_t t = 0; t < kTags.size(); ++t) {
    if (hits[t].size() > 1) {
      return at.error(K::Tag, hits[t][1], "duplicate " + std::string(kTags[t]));
    }
  }
  for (std::size_t t = 0; t < kTags.size(); ++t) {
    if (hits[t].empty()) return at.error(K::Tag, text.size(), "missing " + std::string(kTags[t]));
  }
  const std::size_t open_think = hits[0][0];
  const std::size_t close_think = hits[1][0];
  const std::size_t open_answer = hits[2][0];
  const std::size_t close_answer = hits[3][0];
  if (close_think < open_think) {
    return at.error(K::Tag, close_think, "</think> appears before <think>");
  }
  if (open_answer < close_think) {
    return at.error(K::Tag, open_answer,
                    open_answer > open_think ? "<answer> nested inside <think>"
                                             : "<answer> appears before <think>");
  }
  if (close_answer < open_answer) {
    return at.error(K::Tag, close_answer, "</answer> appears before <answer>");
  }
  const std::string_view view(text);
  const std::size_t think_body = open_think + kOpenThink.size();
  const std::size_t after_think = close_think + kCloseThink.size();
  const std::size_t answer_body = open_answer + kOpenAnswer.size();
  const std::size_t after_answer = close_answer + kCloseAnswer.size();
  if (!blank(view.substr(after_think, open_answer - after_think))) {
    return at.error(K::Tag, after_think, "unexpected text between </think> and <answer>");
  }
  if (!grammar.lenient) {
    if (!blank(view.substr(0, open_think))) {
      return at.error(K::Tag, 0, "unexpected text before <think>");
    }
    if (!blank(view.substr(after_answer))) {
      return at.error(K::Tag, after_answer, "unexpected text after </answer>");
    }
  }

  // Section layer.
  const Markers& m = grammar.markers;
  const std::array<std::string_view, 4> headers = {trim(m.summary), trim(m.rpc), trim(m.psa),
                                                   trim(m.reasoning)};
  const auto lines = split_lines(view.substr(think_body, close_think - think_body), think_body);
  struct Header {
    std::size_t section;
    std::size_t line;
  };
  std::vector<Header> found;
  std::array<bool, 4> seen{};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto l = trim(lines[i].text);
    for (std::size_t s = 0; s < headers.size(); ++s) {
      if (!iequals(l, headers[s])) continue;
      if (seen[s]) {
        return at.error(K::Section, lines[i].offset, "duplicate section '" + std::string(headers[s]) + "'");
      }
      seen[s] = true;
      found.push_back({s, i});
    }
  }
  for (std::size_t s = 0; s < headers.size(); ++s) {
    if (!seen[s]) {
      return at.error(K::Section, close_think, "missing section '" + std::string(headers[s]) + "'");
    }
  }
  for (std::size_t k = 0; k < found.size(); ++k) {
    if (found[k].section != k) {
      return at.error(K::Order, lines[found[k].line].offset,
                      "section '" + std::string(headers[found[k].section]) + "' out of order");
    }
  }
  for (std::size_t i = 0; i < found.front().line; ++i) {
    if (!blank(lines[i].text)) {
      return at.error(K::Section, lines[i].offset, "text before the first section");
    }
  }

  auto answer = trim(view.substr(answer_body, close_answer - answer_body));
  if (answer.empty()) return at.error(K::Answer, open_answer, "empty answer");

  std::array<std::string_view, 4> bodies;
  for (std::size_t k = 0; k < found.size(); ++k) {
    std::size_t begin = lines[found[k].line].offset + lines[found[k].line].text.size();
    std::size_t end = k + 1 < found.size() ? lines[found[k + 1].line].offset : close_think;
    bodies[k] = view.substr(begin, end - begin);
  }

  CoTDocument doc;
  doc.summary = std::string(trim(bodies[0]));
  doc.rpc_narrative = parse_narrative(bodies[1], m);
  doc.psa_section = parse_psa(bodies[2], m);
  doc.reasoning = std::string(trim(bodies[3]));
  doc.answer = std::string(answer);
  return doc;
}

CoTDocument parse(std::string_view text, const Grammar& grammar) {
  auto result = try_parse(text, grammar);
  if (auto* err = std::get_if<ParseError>(&result)) throw ParseFailure(std::move(*err));
  return std::get<CoTDocument>(std::move(result));
}

int format_reward(std::string_view text, const Grammar& grammar) noexcept {
  try {
    return std::holds_alternative<CoTDocument>(try_parse(text, grammar)) ? 1 : 0;
  } catch (...) {
    return 0;
  }
}

std::string normalize_item(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> validate(const CoTDocument& doc) {
  std::vector<std::string> issues;
  if (doc.summary.empty()) issues.emplace_back("summary is empty");
  if (doc.reasoning.empty()) issues.emplace_back("reasoning is empty");
  if (doc.answer.empty()) issues.emplace_back("answer is empty");
  const auto& rpc = doc.rpc_narrative;
  if (rpc.size() % 2 == 0) {
    issues.emplace_back("role-play caption has " + std::to_string(rpc.size()) +
                        " blocks; expected an odd count starting and ending with a frame");
  }
  for (std::size_t i = 0; i < rpc.size(); ++i) {
    auto expected = i % 2 == 0 ? NarrativeBlock::Kind::Frame : NarrativeBlock::Kind::Transition;
    if (rpc[i].kind != expected) {
      issues.push_back("role-play caption block " + std::to_string(i + 1) + " should be a " +
                       (expected == NarrativeBlock::Kind::Frame ? "frame" : "transition"));
      break;
    }
  }
  std::vector<std::string> candidates;
  for (const auto& c : doc.psa_section.candidates) candidates.push_back(normalize_item(c));
  for (const auto& t : doc.psa_section.targets) {
    if (std::find(candidates.begin(), candidates.end(), normalize_item(t)) == candidates.end()) {
      issues.push_back("target '" + t + "' is not among the candidates");
    }
  }
  return issues;
}

std::string render(const CoTDocument& doc, const Grammar& grammar) {
  for (const auto& issue : validate(doc)) throw RenderError(issue);

  const Markers& m = grammar.markers;
  const std::array<std::string_view, 4> headers = {trim(m.summary), trim(m.rpc), trim(m.psa),
                                                   trim(m.reasoning)};

  auto check_text = [&](std::string_view field, std::string_view s, bool multiline) {
    if (trim(s) != s) throw RenderError(std::string(field) + " has surrounding whitespace");
    if (s.find('\r') != std::string_view::npos) throw RenderError(std::string(field) + " contains CR");
    if (contains_tag(s)) throw RenderError(std::string(field) + " contains a reserved tag");
    if (!multiline && s.find('\n') != std::string_view::npos) {
      throw RenderError(std::string(field) + " must be a single line");
    }
    for (const auto& line : split_lines(s, 0)) {
      auto l = trim(line.text);
      for (auto h : headers) {
        if (iequals(l, h)) throw RenderError(std::string(field) + " contains a section header");
      }
    }
  };
  auto check_no_prefix = [&](std::string_view field, std::string_view s,
                             std::initializer_list<std::string_view> prefixes) {
    for (const auto& line : split_lines(s, 0)) {
      auto l = ltrim(line.text);
      for (auto p : prefixes) {
        if (istarts_with(l, p)) {
          throw RenderError(std::string(field) + " has a line starting with '" + std::string(p) + "'");
        }
      }
    }
  };

  check_text("summary", doc.summary, true);
  check_text("reasoning", doc.reasoning, true);
  check_text("answer", doc.answer, true);
  for (const auto& b : doc.rpc_narrative) {
    check_text("narrative block", b.text, true);
    if (b.text.empty()) throw RenderError("narrative block is empty");
    check_no_prefix("narrative block", b.text, {m.frame_block, m.transition_block});
  }
  const auto& psa = doc.psa_section;
  check_text("psa notes", psa.notes, true);
  for (const auto& line : split_lines(psa.notes, 0)) {
    if (!psa.notes.empty() && (blank(line.text) || trim(line.text) != line.text)) {
      throw RenderError("psa notes must consist of trimmed, non-blank lines");
    }
  }
  check_no_prefix("psa notes", psa.notes, {m.targets_label, m.candidates_label, m.relations_label});
  auto check_items = [&](std::string_view field, const std::vector<std::string>& items) {
    for (const auto& item : items) {
      check_text(field, item, false);
      if (item.empty() || item.find(';') != std::string::npos) {
        throw RenderError(std::string(field) + " item is empty or contains ';'");
      }
    }
  };
  check_items("targets", psa.targets);
  check_items("candidates", psa.candidates);
  check_items("relations", psa.relations);

  auto join_items = [](const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "; " : "") + items[i];
    return out;
  };
  auto labelled = [](std::string_view label, const std::string& rest) {
    return rest.empty() ? std::string(label) : std::string(label) + " " + rest;
  };

  std::string out;
  out += kOpenThink;
  out += "\n";
  out += std::string(headers[0]) + "\n" + doc.summary + "\n";
  out += std::string(headers[1]) + "\n";
  for (const auto& b : doc.rpc_narrative) {
    out += (b.kind == NarrativeBlock::Kind::Frame ? m.frame_block : m.transition_block) + " " +
           b.text + "\n";
  }
  out += std::string(headers[2]) + "\n";
  if (!psa.notes.empty()) out += psa.notes + "\n";
  out += labelled(m.targets_label, join_items(psa.targets)) + "\n";
  out += labelled(m.candidates_label, join_items(psa.candidates)) + "\n";
  out += std::string(m.relations_label) + "\n";
  for (const auto& r : psa.relations) out += "- " + r + "\n";
  out += std::string(headers[3]) + "\n" + doc.reasoning + "\n";
  out += kCloseThink;
  out += "\n";
  out += kOpenAnswer;
  out += doc.answer;
  out += kCloseAnswer;
  return out;
}

nlohmann::json to_json(const CoTDocument& doc) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : doc.rpc_narrative) {
    blocks.push_back({{"kind", b.kind == NarrativeBlock::Kind::Frame ? "frame" : "transition"},
                      {"text", b.text}});
  }
  return {{"summary", doc.summary},
          {"rpc_narrative", blocks},
          {"psa_section",
           {{"targets", doc.psa_section.targets},
            {"candidates", doc.psa_section.candidates},
            {"relations", doc.psa_section.relations},
            {"notes", doc.psa_section.notes}}},
          {"reasoning", doc.reasoning},
          {"answer", doc.answer}};
}

}  // namespace egomind::cot
