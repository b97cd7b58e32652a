#include "egomind/question.hpp"

#include <cmath>
#include <cstdio>

#include "egomind/errors.hpp"

namespace egomind {

namespace {

constexpr std::array<std::string_view, 8> kTaskNames = {
    "object_count",      "absolute_distance", "object_size", "room_size",
    "relative_distance", "relative_direction", "route_plan", "appearance_order",
};

constexpr std::array<std::string_view, 8> kColumnNames = {
    "Obj. Cnt.", "Abs. Dist.", "Obj. Size",  "Room Size",
    "Rel. Dist.", "Rel. Dir.", "Route Plan", "Appr. Order",
};

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(TaskType t) { return kTaskNames[static_cast<std::size_t>(t)]; }

TaskType task_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == s) return static_cast<TaskType>(i);
  }
  throw PreconditionError("unknown task type '" + std::string(s) + "'");
}

std::string_view column_name(TaskType t) { return kColumnNames[static_cast<std::size_t>(t)]; }

bool is_numeric(TaskType t) {
  switch (t) {
    case TaskType::ObjectCount:
    case TaskType::AbsoluteDistance:
    case TaskType::ObjectSize:
    case TaskType::RoomSize:
      return true;
    default:
      return false;
  }
}

std::string ObjectRef::label() const {
  std::string out;
  for (const auto& a : attributes) out += a + " ";
  return out + category;
}

std::string Answer::to_string() const {
  if (is_choice()) return std::string(1, letter);
  auto out = format_number(value);
  if (!unit.empty()) out += " " + unit;
  return out;
}

void validate(const StructuredQuestion& q) {
  if (!q.ground_truth) return;
  const Answer& gt = *q.ground_truth;
  if (!q.options.empty()) {
    if (!gt.is_choice()) {
      throw PreconditionError("question " + q.question_id + ": options present but truth is numeric");
    }
    bool found = false;
    for (const auto& o : q.options) found = found || o.letter == gt.letter;
    if (!found) {
      throw PreconditionError("question " + q.question_id + ": truth letter not among options");
    }
  } else {
    if (gt.is_choice()) {
      throw PreconditionError("question " + q.question_id + ": letter truth without options");
    }
    if (!std::isfinite(gt.value) || gt.value < 0) {
      throw PreconditionError("question " + q.question_id +
                              ": numeric truth must be finite and non-negative");
    }
  }
  if (is_multiple_choice(q.task_type) != !q.options.empty()) {
    throw PreconditionError("question " + q.question_id + ": task family " +
                            std::string(to_string(q.task_type)) +
                            " does not match the presence of options");
  }
}

std::string render_question(const StructuredQuestion& q) {
  std::string out = q.text;
  for (const auto& o : q.options) {
    out += "\n";
    out += o.letter;
    out += ". " + o.text;
  }
  return out;
}

Json to_json(const ObjectRef& r) {
  return Json{{"category", r.category}, {"attributes", r.attributes}};
}

Json to_json(const Answer& a) {
  if (a.is_choice()) return std::string(1, a.letter);
  return Json{{"value", a.value}, {"unit", a.unit}};
}

Json to_json(const StructuredQuestion& q) {
  Json targets = Json::array();
  for (const auto& t : q.explicit_targets) targets.push_back(to_json(t));
  Json options = Json::array();
  for (const auto& o : q.options) {
    options.push_back(Json{{"letter", std::string(1, o.letter)}, {"text", o.text}});
  }
  return Json{{"question_id", q.question_id},
              {"task_type", to_string(q.task_type)},
              {"explicit_targets", targets},
              {"options", options},
              {"ground_truth", q.ground_truth ? to_json(*q.ground_truth) : Json(nullptr)},
              {"text", q.text},
              {"variant", q.variant}};
}

ObjectRef object_ref_from_json(const Json& j) {
  return ObjectRef{j.at("category").get<std::string>(),
                   j.value("attributes", std::set<std::string>{})};
}

Answer answer_from_json(const Json& j) {
  if (j.is_number()) return Answer::number(j.get<double>());
  if (j.is_object()) {
    return Answer::number(j.at("value").get<double>(), j.value("unit", std::string{}));
  }
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'Z') return Answer::choice(s[0]);
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      std::string unit = s.substr(used);
      auto first = unit.find_first_not_of(' ');
      unit = first == std::string::npos ? std::string{} : unit.substr(first);
      return Answer::number(v, unit);
    } catch (const std::logic_error&) {
      throw PreconditionError("unparseable answer '" + s + "'");
    }
  }
  throw PreconditionError("unparseable answer " + j.dump());
}

StructuredQuestion question_from_json(const Json& j) {
  StructuredQuestion q;
  q.question_id = j.value("question_id", std::string{});
  q.task_type = task_type_from_string(j.at("task_type").get<std::string>());
  for (const auto& t : j.value("explicit_targets", Json::array())) {
    q.explicit_targets.push_back(object_ref_from_json(t));
  }
  for (const auto& o : j.value("options", Json::array())) {
    auto letter = o.at("letter").get<std::string>();
    if (letter.size() != 1) throw PreconditionError("option letter must be one character");
    q.options.push_back(Option{letter[0], o.at("text").get<std::string>()});
  }
  if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
    q.ground_truth = answer_from_json(j.at("ground_truth"));
  }
  q.text = j.value("text", std::string{});
  q.variant = j.value("variant", std::string{});
  validate(q);
  return q;
}

}  // namespace egomind
