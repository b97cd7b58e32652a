#include "egomind/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "egomind/errors.hpp"
#include "egomind/reward.hpp"
#include "egomind/reward_batch.hpp"

namespace egomind::eval {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

struct Found {
  std::size_t pos;
  std::string text;
};

std::optional<Found> find_last_number(std::string_view t) {
  std::optional<Found> last;
  std::size_t i = 0;
  while (i < t.size()) {
    if (!is_digit(t[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    // A number glued to letters ("chair#2" is fine, "x2" is not) is not an answer.
    const bool glued = start > 0 && std::isalpha(static_cast<unsigned char>(t[start - 1]));
    while (i < t.size() && is_digit(t[i])) ++i;
    if (i + 1 < t.size() && t[i] == '.' && is_digit(t[i + 1])) {
      ++i;
      while (i < t.size() && is_digit(t[i])) ++i;
    }
    if (glued) continue;
    if (start > 0 && t[start - 1] == '-' && (start < 2 || !is_alnum(t[start - 2]))) --start;
    last = Found{start, std::string(t.substr(start, i - start))};
  }
  return last;
}

std::optional<Found> find_last_letter(std::string_view t) {
  std::optional<Found> last;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 'A' || t[i] > 'D') continue;
    const bool left_ok = i == 0 || !is_alnum(t[i - 1]);
    const bool right_ok = i + 1 == t.size() || !is_alnum(t[i + 1]);
    if (left_ok && right_ok) last = Found{i, std::string(1, t[i])};
  }
  return last;
}

std::string format_pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::Tag: return "tag";
    case ExtractionMethod::Fallback: return "fallback";
    case ExtractionMethod::None: return "none";
  }
  return "none";
}

std::optional<double> last_number(std::string_view text) {
  auto f = find_last_number(text);
  if (!f) return std::nullopt;
  return std::stod(f->text);
}

std::optional<char> last_option_letter(std::string_view text) {
  auto f = find_last_letter(text);
  if (!f) return std::nullopt;
  return f->text[0];
}

Extraction extract_answer(std::string_view raw, std::optional<TaskType> hint,
                          const cot::Grammar& grammar) {
  auto parsed = cot::try_parse(raw, grammar);
  if (auto* doc = std::get_if<cot::CoTDocument>(&parsed)) {
    return {doc->answer, ExtractionMethod::Tag};
  }
  std::optional<Found> pick;
  if (hint) {
    pick = is_numeric(*hint) ? find_last_number(raw) : find_last_letter(raw);
  } else {
    auto n = find_last_number(raw);
    auto l = find_last_letter(raw);
    pick = !n ? l : !l ? n : (n->pos > l->pos ? n : l);
  }
  if (!pick) return {"", ExtractionMethod::None};
  return {pick->text, ExtractionMethod::Fallback};
}

double score_answer(std::string_view answer, const Answer& truth, TaskType task,
                    const std::vector<double>& thresholds) {
  if (is_numeric(task)) {
    if (truth.is_choice()) throw PreconditionError("numeric family with a letter truth");
    auto v = last_number(answer);
    if (!v) return 0.0;
    return reward::mra(*v, truth.value, thresholds);
  }
  if (!truth.is_choice()) throw PreconditionError("multiple-choice family with a numeric truth");
  return reward::mcq_accuracy(answer, truth.letter);
}

std::optional<double> aggregate_overall(const std::map<TaskType, TaskScore>& per_task) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [t, s] : per_task) {
    if (s.n == 0) continue;
    sum += s.score;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

ScoreReport score_lines(const std::vector<std::string>& lines, const ScoreConfig& config) {
  ScoreReport report;
  report.run_id = config.run_id;
  report.thresholds = config.thresholds.empty() ? reward::default_mra_thresholds() : config.thresholds;
  report.w_format = config.w_format;
  report.w_accuracy = config.w_accuracy;
  for (TaskType t : kAllTaskTypes) report.per_task[t] = {};

  auto fail = [&](std::size_t line, const std::string& qid, const std::string& msg) {
    if (config.strict) {
      throw PreconditionError("line " + std::to_string(line) + (qid.empty() ? "" : " (" + qid + ")") +
                              ": " + msg);
    }
    report.errors.push_back({line, qid, msg});
  };

  std::set<std::string> seen;
  // Numeric records are scored in one batch at the end.
  std::vector<std::size_t> numeric_idx;
  std::vector<double> numeric_pred;
  std::vector<double> numeric_truth;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const Json::exception& e) {
      fail(lineno, "", std::string("not JSON: ") + e.what());
      continue;
    }
    PredictionRecord rec;
    try {
      rec.question_id = j.at("question_id").get<std::string>();
      rec.task_type = task_type_from_string(j.at("task_type").get<std::string>());
    } catch (const std::exception& e) {
      fail(lineno, rec.question_id, std::string("record has no usable question_id/task_type: ") + e.what());
      continue;
    }
    if (!seen.insert(rec.question_id).second) {
      fail(lineno, rec.question_id, "duplicate question_id");
      continue;
    }
    bool ok = true;
    try {
      const auto& out = j.at(config.output_field);
      rec.raw_model_output = out.is_string() ? out.get<std::string>() : out.dump();
      rec.ground_truth = answer_from_json(j.at("ground_truth"));
      if (is_numeric(rec.task_type) == rec.ground_truth.is_choice()) {
        throw PreconditionError("ground truth kind does not fit task family");
      }
    } catch (const std::exception& e) {
      fail(lineno, rec.question_id, e.what());
      ok = false;
    }
    if (ok) {
      rec.extracted = extract_answer(rec.raw_model_output, rec.task_type);
      if (is_numeric(rec.task_type)) {
        auto v = last_number(rec.extracted.answer);
        if (v) {
          numeric_idx.push_back(report.records.size());
          numeric_pred.push_back(*v);
          numeric_truth.push_back(rec.ground_truth.value);
        }
      } else {
        rec.score = reward::mcq_accuracy(rec.extracted.answer, rec.ground_truth.letter);
      }
    }
    report.records.push_back(std::move(rec));
  }

  const auto scores = reward::mra_batch(numeric_pred, numeric_truth, report.thresholds);
  for (std::size_t k = 0; k < numeric_idx.size(); ++k) report.records[numeric_idx[k]].score = scores[k];

  // Summed in sorted order so record order cannot change the last bit.
  std::map<TaskType, std::vector<double>> by_task;
  for (const auto& r : report.records) by_task[r.task_type].push_back(r.score);
  for (auto& [t, values] : by_task) {
    std::sort(values.begin(), values.end());
    auto& s = report.per_task[t];
    s.n = values.size();
    s.score = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  }
  report.overall = aggregate_overall(report.per_task);
  return report;
}

ScoreReport score_run(const std::string& path, const ScoreConfig& config) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read predictions " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return score_lines(lines, config);
}

std::string format_report(const ScoreReport& r, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << "task,column,n,score,score_pct\n";
    std::size_t total = 0;
    for (TaskType t : kAllTaskTypes) {
      const auto& s = r.per_task.at(t);
      total += s.n;
      out << to_string(t) << ',' << column_name(t) << ',' << s.n << ',';
      if (s.n > 0) out << format_exact(s.score) << ',' << format_pct(s.score);
      else out << ',';
      out << '\n';
    }
    out << "overall,Overall," << total << ',';
    if (r.overall) out << format_exact(*r.overall) << ',' << format_pct(r.overall);
    else out << ',';
    out << '\n';
    return out.str();
  }

  std::vector<std::string> header{"Overall"};
  std::vector<std::string> row{format_pct(r.overall)};
  for (TaskType t : kAllTaskTypes) {
    header.emplace_back(column_name(t));
    const auto& s = r.per_task.at(t);
    row.push_back(s.n > 0 ? format_pct(s.score) : "-");
  }
  std::vector<std::size_t> width;
  for (std::size_t i = 0; i < header.size(); ++i) width.push_back(std::max(header[i].size(), row[i].size()));
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? " | " : "") << std::string(width[i] - cells[i].size(), ' ') << cells[i];
    }
    out << '\n';
  };
  emit(header);
  for (std::size_t i = 0; i < width.size(); ++i) out << (i ? "-+-" : "") << std::string(width[i], '-');
  out << '\n';
  emit(row);
  if (!r.overall) out << "no data\n";
  if (!r.errors.empty()) {
    out << "\nerrors (" << r.errors.size() << "):\n";
    for (const auto& e : r.errors) {
      out << "  line " << e.line << (e.question_id.empty() ? "" : " " + e.question_id) << ": "
          << e.message << '\n';
    }
  }
  return out.str();
}

void emit_report(const ScoreReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path);
  out << format_report(report, format);
  if (!out) throw IoError("write failed for " + path);
}

std::map<std::string, std::optional<double>> read_report_csv(const std::string& csv_text) {
  std::map<std::string, std::optional<double>> out;
  std::istringstream in(csv_text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() < 3) throw PreconditionError("short CSV row: " + line);
    out[cells[0]] = cells.size() > 3 && !cells[3].empty() ? std::optional(std::stod(cells[3])) : std::nullopt;
  }
  return out;
}

Json to_json(const ScoreReport& r) {
  Json tasks = Json::object();
  for (const auto& [t, s] : r.per_task) {
    tasks[std::string(to_string(t))] = {{"n", s.n}, {"score", s.n ? Json(s.score) : Json(nullptr)}};
  }
  Json errors = Json::array();
  for (const auto& e : r.errors) {
    errors.push_back({{"line", e.line}, {"question_id", e.question_id}, {"message", e.message}});
  }
  return {{"run_id", r.run_id},
          {"per_task", tasks},
          {"overall", r.overall ? Json(*r.overall) : Json(nullptr)},
          {"thresholds", r.thresholds},
          {"weights", {{"format", r.w_format}, {"accuracy", r.w_accuracy}}},
          {"errors", errors}};
}

}  // namespace egomind::eval
