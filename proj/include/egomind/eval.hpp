#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egomind/cot_format.hpp"
#include "egomind/question.hpp"

// Scoring of prediction files per task family and the overall aggregate.
namespace egomind::eval {

enum class ExtractionMethod { Tag, Fallback, None };
std::string_view to_string(ExtractionMethod m);

struct Extraction {
  std::string answer;
  ExtractionMethod method = ExtractionMethod::None;
};

// Answer-tag content when the whole document parses; otherwise the last
// standalone option letter (A-D) or last number in the text. The hint picks
// which of the two the fallback looks for; without one, whichever occurs last.
Extraction extract_answer(std::string_view raw_output, std::optional<TaskType> hint = std::nullopt,
                          const cot::Grammar& grammar = {});

std::optional<double> last_number(std::string_view text);
std::optional<char> last_option_letter(std::string_view text);

// Score in [0, 1] of an extracted answer against the truth: exact letter
// match for multiple choice, MRA for numbers.
double score_answer(std::string_view answer, const Answer& truth, TaskType task,
                    const std::vector<double>& thresholds);

struct PredictionRecord {
  std::string question_id;
  TaskType task_type = TaskType::ObjectCount;
  std::string raw_model_output;
  Answer ground_truth;
  Extraction extracted;
  double score = 0.0;
};

struct RecordError {
  std::size_t line = 0;  // 1-based line in the predictions file
  std::string question_id;
  std::string message;
};

struct TaskScore {
  std::size_t n = 0;
  double score = 0.0;  // mean over records, in [0, 1]
};

struct ScoreConfig {
  std::vector<double> thresholds;  // empty = default MRA thresholds
  bool strict = false;             // abort on the first bad record
  std::string output_field = "raw_model_output";
  std::string run_id;
  double w_format = 0.2;
  double w_accuracy = 0.8;
};

struct ScoreReport {
  std::map<TaskType, TaskScore> per_task;  // every family, n = 0 when absent
  std::optional<double> overall;           // unweighted mean of tasks with n > 0
  std::vector<PredictionRecord> records;
  std::vector<RecordError> errors;
  std::string run_id;
  std::vector<double> thresholds;
  double w_format = 0.2;
  double w_accuracy = 0.8;
};

// Unweighted mean of the per-task scores that have data.
std::optional<double> aggregate_overall(const std::map<TaskType, TaskScore>& per_task);

// One JSON object per line: {question_id, task_type, <output_field>, ground_truth}.
// Records with known family but a bad truth score 0; records that cannot be
// attributed to a family are excluded. Both are listed in errors. Strict mode
// throws PreconditionError instead.
ScoreReport score_lines(const std::vector<std::string>& lines, const ScoreConfig& config = {});
ScoreReport score_run(const std::string& predictions_path, const ScoreConfig& config = {});

enum class ReportFormat { TextTable, Csv };

// Text: Overall then the eight family columns, scores x100 with two decimals,
// "-" where there is no data. CSV columns: task,column,n,score,score_pct with
// one row per family plus "overall"; score is the raw fraction at %.17g.
std::string format_report(const ScoreReport& report, ReportFormat format);
void emit_report(const ScoreReport& report, ReportFormat format, const std::string& path);

// Reads the CSV layout back: task name ("overall" included) -> score fraction,
// absent when the row has no data.
std::map<std::string, std::optional<double>> read_report_csv(const std::string& csv_text);

Json to_json(const ScoreReport& report);

}  // namespace egomind::eval
