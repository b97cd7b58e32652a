#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace egomind {

using Json = nlohmann::json;

// The eight benchmark task families, in report column order.
enum class TaskType {
  ObjectCount,
  AbsoluteDistance,
  ObjectSize,
  RoomSize,
  RelativeDistance,
  RelativeDirection,
  RoutePlan,
  AppearanceOrder,
};

inline constexpr std::array<TaskType, 8> kAllTaskTypes = {
    TaskType::ObjectCount,       TaskType::AbsoluteDistance, TaskType::ObjectSize,
    TaskType::RoomSize,          TaskType::RelativeDistance, TaskType::RelativeDirection,
    TaskType::RoutePlan,         TaskType::AppearanceOrder,
};

std::string_view to_string(TaskType t);
TaskType task_type_from_string(std::string_view s);
// Short column header, e.g. "Obj. Cnt."
std::string_view column_name(TaskType t);
bool is_numeric(TaskType t);
inline bool is_multiple_choice(TaskType t) { return !is_numeric(t); }

struct ObjectRef {
  std::string category;
  std::set<std::string> attributes;

  // "red chair"
  std::string label() const;
  bool operator==(const ObjectRef&) const = default;
};

struct Option {
  char letter = 'A';
  std::string text;
  bool operator==(const Option&) const = default;
};

// Either an option letter or a number with unit.
struct Answer {
  enum class Kind { Choice, Number };
  Kind kind = Kind::Choice;
  char letter = 0;
  double value = 0.0;
  std::string unit;

  static Answer choice(char letter) { return {Kind::Choice, letter, 0.0, {}}; }
  static Answer number(double value, std::string unit = {}) {
    return {Kind::Number, 0, value, std::move(unit)};
  }
  bool is_choice() const { return kind == Kind::Choice; }
  // "C" or "3.5 m" (full precision)
  std::string to_string() const;
  bool operator==(const Answer&) const = default;
};

struct StructuredQuestion {
  std::string question_id;
  TaskType task_type = TaskType::ObjectCount;
  std::vector<ObjectRef> explicit_targets;
  std::vector<Option> options;
  std::optional<Answer> ground_truth;
  std::string text;
  // Family-specific mode: "closest"/"farthest" (relative_distance),
  // "2way"/"4way" (relative_direction); empty otherwise.
  std::string variant;

  bool operator==(const StructuredQuestion&) const = default;
};

// Throws PreconditionError when the MCQ/numeric invariants do not hold.
void validate(const StructuredQuestion& q);

// Full prompt text: question text followed by lettered options, if any.
std::string render_question(const StructuredQuestion& q);

Json to_json(const ObjectRef& r);
Json to_json(const Answer& a);
Json to_json(const StructuredQuestion& q);
ObjectRef object_ref_from_json(const Json& j);
// Accepts "C", 4.5, "4.5", or {"value": 4.5, "unit": "m"}.
Answer answer_from_json(const Json& j);
StructuredQuestion question_from_json(const Json& j);

}  // namespace egomind
