#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egomind/backend.hpp"
#include "egomind/cot_format.hpp"
#include "egomind/question.hpp"

// CoT data generation: six sequential backend stages per job, an append-only
// journal for resumption, quality filtering and SFT/RL sample assembly.
namespace egomind::gen {

enum class Stage { CaptionFrames, InferTransitions, SynthesizeRpc, ExtractContext, MergeCot, QualityCheck };
inline constexpr std::array<Stage, 6> kStages = {
    Stage::CaptionFrames, Stage::InferTransitions, Stage::SynthesizeRpc,
    Stage::ExtractContext, Stage::MergeCot,        Stage::QualityCheck};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

inline constexpr std::array<std::string_view, 3> kCriteria = {
    "Hallucination Check", "Logical Consistency", "Format & Correctness"};

struct Verdict {
  std::string criterion;
  bool pass = false;
  std::string rationale;
  bool operator==(const Verdict&) const = default;
};

// Expects one "<criterion>: PASS|FAIL [- rationale]" line per criterion, in
// any order; other lines are ignored. Throws VerdictParseError.
std::vector<Verdict> parse_verdicts(std::string_view text);
std::string format_verdicts(const std::vector<Verdict>& verdicts);

struct JobStatus {
  enum class Kind { Pending, StageComplete, Done, Failed };
  Kind kind = Kind::Pending;
  int completed = 0;   // stages finished, for StageComplete
  std::string reason;  // for Failed

  // "pending", "stage-complete(3)", "done", "failed(backend-exhausted)"
  std::string to_string() const;
};

struct GenerationJob {
  std::string sample_id;
  // Image references (URLs, data URIs, *.png/*.jpg paths) or textual
  // observations standing in for frames.
  std::vector<std::string> frames;
  StructuredQuestion question;

  std::map<Stage, std::string> stage_outputs;
  std::map<Stage, int> attempts;
  JobStatus status;
  std::vector<Verdict> verdicts;
  std::string failure_raw;  // reply text behind a malformed verdict
  std::int64_t token_usage = 0;

  bool has(Stage s) const { return stage_outputs.contains(s); }
  std::optional<Stage> next_stage() const;
  bool passed_quality() const;
};

// Stage outputs must form a prefix of the stage order; done needs verdicts.
void validate(const GenerationJob& job);

// Job file records: {sample_id, frames, question}.
GenerationJob job_from_json(const Json& j);
Json job_to_json(const GenerationJob& job);
std::vector<GenerationJob> load_jobs(const std::string& path);

struct Templates {
  std::string system;
  std::map<Stage, std::string> stage;
  std::string instruction;  // the answer-format instruction block
  std::string sft_prompt;   // {{question}} and {{instruction}}

  static Templates defaults();
  // Reads system.txt, <stage>.txt, instruction.txt and sft_prompt.txt; every
  // file must exist.
  static Templates load_dir(const std::string& dir);
};

// {{name}} substitution; unknown or unterminated placeholders throw ConfigError.
std::string instantiate(std::string_view tpl, const std::map<std::string, std::string>& vars);

struct PipelineConfig {
  int parallelism = 1;
  int retry_limit = 3;  // maximum attempts per stage, including the first
  double backoff_base_ms = 200.0;
  double backoff_max_ms = 5000.0;
  std::int64_t token_budget = 0;  // per batch; 0 = unlimited
  double temperature = 0.0;
  int max_output_tokens = 2048;
  std::map<Stage, std::string> model_hints = default_model_hints();
  cot::Grammar grammar;
  std::vector<double> mra_thresholds;  // empty = defaults

  static std::map<Stage, std::string> default_model_hints();
};

// Append-only JSON-Lines store of stage results keyed by (sample_id, stage).
// One appender per file; append() is serialized internally.
class Journal {
 public:
  struct Record {
    std::string sample_id;
    Stage stage = Stage::CaptionFrames;
    std::optional<std::string> output;  // absent for failure records
    std::string error;
    std::string raw;
    int attempts = 0;
    std::int64_t token_usage = 0;
  };

  explicit Journal(std::string directory);
  const std::string& path() const { return path_; }

  // Every record in file order; a corrupt line throws JournalError naming
  // the path and line number.
  std::vector<Record> load() const;
  void append(const Record& record);

 private:
  std::string path_;
  std::mutex mu_;
  std::ofstream out_;
};

// Shared across the jobs of one batch.
struct BatchState {
  std::atomic<std::int64_t> tokens_spent{0};
};

// Runs one stage. Backend exhaustion, budget exhaustion and malformed
// verdicts mark the job failed rather than throwing.
void run_stage(GenerationJob& job, Stage stage, ChatBackend& backend, const Templates& templates,
               const PipelineConfig& config, Journal* journal = nullptr,
               BatchState* batch = nullptr);

// The prompt a stage sends, exposed for tests and dry runs.
BackendRequest build_request(const GenerationJob& job, Stage stage, const Templates& templates,
                             const PipelineConfig& config);

struct ManifestEntry {
  std::string sample_id;
  std::string status;
  std::vector<Verdict> verdicts;
  std::int64_t token_usage = 0;
  std::map<Stage, int> attempts;
};

struct Manifest {
  std::vector<ManifestEntry> jobs;
  std::size_t done = 0;
  std::size_t failed = 0;
  std::int64_t token_usage = 0;
};

// Restores completed stages from <persist_dir>/journal.jsonl, then runs the
// remaining stages of every job. Sample ids must be unique.
Manifest run_pipeline(std::vector<GenerationJob>& jobs, ChatBackend& backend,
                      const Templates& templates, const PipelineConfig& config,
                      const std::string& persist_dir);

struct SftSample {
  std::string sample_id;
  std::string question_id;
  TaskType task_type = TaskType::ObjectCount;
  std::string prompt_text;
  std::string target_text;
  std::optional<Answer> ground_truth;
};

struct RlSample {
  std::string question_id;
  TaskType task_type = TaskType::ObjectCount;
  std::string prompt_text;
  Answer ground_truth;
};

std::string build_prompt(const StructuredQuestion& question, const Templates& templates);

// Throws AssemblyError unless the job is done, every verdict passes and the
// target parses.
SftSample assemble_sft_sample(const GenerationJob& job, const Templates& templates,
                              const cot::Grammar& grammar = {});
// Uses answer_key when given, else the question's ground truth; throws
// AssemblyError when neither exists.
RlSample assemble_rl_sample(const StructuredQuestion& question, const Templates& templates,
                            const std::optional<Answer>& answer_key = std::nullopt);

Json to_json(const SftSample& s);
Json to_json(const RlSample& s);
Json to_json(const ManifestEntry& e);

struct OutputSummary {
  std::size_t sft_records = 0;
  std::size_t sft_refused = 0;
  std::size_t rl_records = 0;
};

// Writes sft.jsonl, rl.jsonl and manifest.jsonl into out_dir.
OutputSummary write_outputs(const std::string& out_dir, const std::vector<GenerationJob>& jobs,
                            const Manifest& manifest, const Templates& templates,
                            const cot::Grammar& grammar = {});

}  // namespace egomind::gen
