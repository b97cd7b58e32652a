#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

// The structured chain-of-thought document:
//
//   <think>
//   ## Summary
//   ...
//   ## Role-Play Caption
//   [Frame] ...
//   [Transition] ...
//   [Frame] ...
//   ## Progressive Spatial Analysis
//   Targets: a; b
//   Candidates: a; b; c
//   Relations:
//   - a is near c
//   ## Reasoning
//   ...
//   </think>
//   <answer>C</answer>
namespace egomind::cot {

struct Markers {
  std::string summary = "## Summary";
  std::string rpc = "## Role-Play Caption";
  std::string psa = "## Progressive Spatial Analysis";
  std::string reasoning = "## Reasoning";
  std::string frame_block = "[Frame]";
  std::string transition_block = "[Transition]";
  std::string targets_label = "Targets:";
  std::string candidates_label = "Candidates:";
  std::string relations_label = "Relations:";
};

struct Grammar {
  Markers markers;
  // Lenient mode tolerates arbitrary text before <think> and after </answer>;
  // the default only allows whitespace there.
  bool lenient = false;
};

struct NarrativeBlock {
  enum class Kind { Frame, Transition };
  Kind kind = Kind::Frame;
  std::string text;
  bool operator==(const NarrativeBlock&) const = default;
};

struct PsaSection {
  std::vector<std::string> targets;
  std::vector<std::string> candidates;
  std::vector<std::string> relations;
  // Free-form lines that are not part of the three lists.
  std::string notes;
  bool operator==(const PsaSection&) const = default;
};

struct CoTDocument {
  std::string summary;
  std::vector<NarrativeBlock> rpc_narrative;
  PsaSection psa_section;
  std::string reasoning;
  std::string answer;
  bool operator==(const CoTDocument&) const = default;
};

struct ParseError {
  enum class Kind { Tag, Section, Order, Answer };
  Kind kind = Kind::Tag;
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based
  std::string message;

  std::string to_string() const;
};

std::string_view to_string(ParseError::Kind k);

class ParseFailure : public std::runtime_error {
 public:
  explicit ParseFailure(ParseError e);
  const ParseError& error() const { return error_; }

 private:
  ParseError error_;
};

using ParseResult = std::variant<CoTDocument, ParseError>;

// Never throws on any input; runs in time linear in the text length.
ParseResult try_parse(std::string_view text, const Grammar& grammar = {});

// Throws ParseFailure.
CoTDocument parse(std::string_view text, const Grammar& grammar = {});

// Canonical text. Throws RenderError if the document violates its invariants
// or contains text that would not survive a parse.
std::string render(const CoTDocument& doc, const Grammar& grammar = {});

// 1 when the text has the tag structure and all four sections, else 0.
int format_reward(std::string_view text, const Grammar& grammar = {}) noexcept;

// Structural checks that do not affect the format reward: block alternation,
// targets contained in candidates, non-empty fields.
std::vector<std::string> validate(const CoTDocument& doc);

// Lowercase with whitespace runs collapsed, for set comparisons.
std::string normalize_item(std::string_view s);

nlohmann::json to_json(const CoTDocument& doc);

}  // namespace egomind::cot
