#include "egomind/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <set>
#include <sstream>
#include <thread>

#include "egomind/errors.hpp"
#include "egomind/eval.hpp"
#include "egomind/reward.hpp"

namespace egomind::gen {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 6> kStageNames = {
    "caption_frames", "infer_transitions", "synthesize_rpc",
    "extract_context", "merge_cot", "quality_check"};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

bool looks_like_image(const std::string& f) {
  auto ends = [&](std::string_view suf) {
    return f.size() >= suf.size() && iequals(std::string_view(f).substr(f.size() - suf.size()), suf);
  };
  return f.rfind("http://", 0) == 0 || f.rfind("https://", 0) == 0 || f.rfind("data:image/", 0) == 0 ||
         f.rfind("file://", 0) == 0 || ends(".png") || ends(".jpg") || ends(".jpeg");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read template " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Format & Correctness is re-checked locally: the document must parse and its
// answer must match the ground truth.
std::optional<std::string> local_format_failure(const GenerationJob& job, const PipelineConfig& cfg) {
  auto it = job.stage_outputs.find(Stage::MergeCot);
  if (it == job.stage_outputs.end()) return "no merged document";
  auto parsed = cot::try_parse(it->second, cfg.grammar);
  if (auto* err = std::get_if<cot::ParseError>(&parsed)) {
    return "local check: document does not parse (" + err->to_string() + ")";
  }
  if (!job.question.ground_truth) return std::nullopt;
  const auto& doc = std::get<cot::CoTDocument>(parsed);
  const auto thresholds =
      cfg.mra_thresholds.empty() ? reward::default_mra_thresholds() : cfg.mra_thresholds;
  const double s = eval::score_answer(doc.answer, *job.question.ground_truth, job.question.task_type,
                                      thresholds);
  if (s < 1.0) {
    return "local check: answer '" + doc.answer + "' does not match ground truth " +
           job.question.ground_truth->to_string();
  }
  return std::nullopt;
}

void apply_verdicts(GenerationJob& job, const PipelineConfig& cfg) {
  job.verdicts = parse_verdicts(job.stage_outputs.at(Stage::QualityCheck));
  if (auto why = local_format_failure(job, cfg)) {
    for (auto& v : job.verdicts) {
      if (v.criterion == kCriteria[2]) {
        v.pass = false;
        v.rationale = *why;
      }
    }
  }
}

void refresh_status(GenerationJob& job) {
  if (job.status.kind == JobStatus::Kind::Failed) return;
  int n = 0;
  for (Stage s : kStages) {
    if (!job.has(s)) break;
    ++n;
  }
  if (n == static_cast<int>(kStages.size())) job.status = {JobStatus::Kind::Done, n, {}};
  else if (n > 0) job.status = {JobStatus::Kind::StageComplete, n, {}};
  else job.status = {};
}

void fail(GenerationJob& job, std::string reason) {
  job.status = {JobStatus::Kind::Failed, 0, std::move(reason)};
}

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[static_cast<std::size_t>(s)]; }

Stage stage_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == s) return static_cast<Stage>(i);
  }
  throw PreconditionError("unknown stage '" + std::string(s) + "'");
}

std::vector<Verdict> parse_verdicts(std::string_view text) {
  std::map<std::string, Verdict> found;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    auto t = trim(line);
    while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = trim(t.substr(1));
    for (auto criterion : kCriteria) {
      if (t.size() <= criterion.size() || !iequals(std::string_view(t).substr(0, criterion.size()), criterion)) {
        continue;
      }
      auto rest = trim(std::string_view(t).substr(criterion.size()));
      if (rest.empty() || rest.front() != ':') continue;
      rest = trim(std::string_view(rest).substr(1));
      Verdict v{std::string(criterion), false, {}};
      if (rest.size() >= 4 && iequals(std::string_view(rest).substr(0, 4), "PASS")) {
        v.pass = true;
        rest = rest.substr(4);
      } else if (rest.size() >= 4 && iequals(std::string_view(rest).substr(0, 4), "FAIL")) {
        rest = rest.substr(4);
      } else {
        throw VerdictParseError("'" + std::string(criterion) + "' is neither PASS nor FAIL");
      }
      rest = trim(rest);
      if (!rest.empty() && (rest.front() == '-' || rest.front() == ':')) rest = trim(rest.substr(1));
      v.rationale = rest;
      if (found.contains(v.criterion)) {
        throw VerdictParseError("verdict for '" + v.criterion + "' given twice");
      }
      found[v.criterion] = v;
    }
  }
  std::vector<Verdict> out;
  for (auto criterion : kCriteria) {
    auto it = found.find(std::string(criterion));
    if (it == found.end()) throw VerdictParseError("missing verdict for '" + std::string(criterion) + "'");
    out.push_back(it->second);
  }
  return out;
}

std::string format_verdicts(const std::vector<Verdict>& verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    out += v.criterion + ": " + (v.pass ? "PASS" : "FAIL");
    if (!v.rationale.empty()) out += " - " + v.rationale;
    out += "\n";
  }
  return out;
}

std::string JobStatus::to_string() const {
  switch (kind) {
    case Kind::Pending: return "pending";
    case Kind::StageComplete: return "stage-complete(" + std::to_string(completed) + ")";
    case Kind::Done: return "done";
    case Kind::Failed: return "failed(" + reason + ")";
  }
  return "pending";
}

std::optional<Stage> GenerationJob::next_stage() const {
  for (Stage s : kStages) {
    if (!has(s)) return s;
  }
  return std::nullopt;
}

bool GenerationJob::passed_quality() const {
  return status.kind == JobStatus::Kind::Done && verdicts.size() == kCriteria.size() &&
         std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

void validate(const GenerationJob& job) {
  bool gap = false;
  for (Stage s : kStages) {
    if (!job.has(s)) gap = true;
    else if (gap) {
      throw StructuralError("job " + job.sample_id + " has output for " + std::string(to_string(s)) +
                            " but not for an earlier stage");
    }
  }
  if (job.status.kind == JobStatus::Kind::Done &&
      (!job.has(Stage::MergeCot) || job.verdicts.size() != kCriteria.size())) {
    throw StructuralError("job " + job.sample_id + " is done without a document and verdicts");
  }
}

GenerationJob job_from_json(const Json& j) {
  GenerationJob job;
  job.sample_id = j.at("sample_id").get<std::string>();
  if (job.sample_id.empty()) throw PreconditionError("job has an empty sample_id");
  job.frames = j.value("frames", std::vector<std::string>{});
  const auto& q = j.at("question");
  if (q.is_string()) job.question.text = q.get<std::string>();
  else job.question = question_from_json(q);
  if (job.question.question_id.empty()) job.question.question_id = job.sample_id;
  return job;
}

Json job_to_json(const GenerationJob& job) {
  return {{"sample_id", job.sample_id}, {"frames", job.frames}, {"question", egomind::to_json(job.question)}};
}

std::vector<GenerationJob> load_jobs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read jobs " + path);
  std::vector<GenerationJob> jobs;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      jobs.push_back(job_from_json(Json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad job record: " + e.what());
    }
  }
  return jobs;
}

Templates Templates::defaults() {
  Templates t;
  t.system =
      "You annotate first-person indoor videos. Be literal about what is visible and follow the "
      "requested output layout exactly.";
  t.stage[Stage::CaptionFrames] =
      "Describe each of the following video frames as the person holding the camera. For every "
      "frame, name the visible objects with their colour or material and say where they are "
      "relative to each other. Give every distinct object a short id such as chair#1 and reuse "
      "the same id whenever the object appears again. Write one paragraph per frame, starting "
      "with [Frame k].\n\nThe descriptions will be used to answer:\n{{question}}";
  t.stage[Stage::InferTransitions] =
      "Below are first-person descriptions of consecutive video frames. For each pair of "
      "neighbouring frames, say in one sentence how the camera moved between them, for example "
      "\"I move forward, then I turn right.\" Write one line per pair, starting with "
      "[Transition k].\n\n{{captions}}";
  t.stage[Stage::SynthesizeRpc] =
      "Rewrite the frame descriptions and camera movements below as one first-person walkthrough. "
      "Alternate [Frame] paragraphs with [Transition] sentences in their original order and keep "
      "every object id unchanged.\n\nFrames:\n{{captions}}\n\nMovements:\n{{transitions}}";
  t.stage[Stage::ExtractContext] =
      "Read the question and the walkthrough. Decide what kind of spatial task it is and which "
      "objects it names. Write them on a line \"Targets: a; b\", the other objects that help "
      "relate them on a line \"Candidates: ...\" (targets included), and the spatial relations "
      "among the candidates under \"Relations:\" as \"- \" bullets.\n\nQuestion:\n{{question}}\n\n"
      "Walkthrough:\n{{rpc}}";
  t.stage[Stage::MergeCot] =
      "Combine the material below into a single answer document.\n\n{{instruction}}\n\n"
      "Question:\n{{question}}\n\nWalkthrough:\n{{rpc}}\n\nSpatial context:\n{{context}}";
  t.stage[Stage::QualityCheck] =
      "Review the reasoning document below against the frame descriptions and the reference "
      "answer. Reply with exactly three lines:\n"
      "Hallucination Check: PASS or FAIL - reason\n"
      "Logical Consistency: PASS or FAIL - reason\n"
      "Format & Correctness: PASS or FAIL - reason\n\n"
      "Question:\n{{question}}\n\nReference answer: {{ground_truth}}\n\n"
      "Frame descriptions:\n{{captions}}\n\nDocument:\n{{cot}}";
  t.instruction =
      "Think before answering. Put your thinking inside <think> </think> and only the final "
      "answer inside <answer> </answer>. Inside <think>, write four sections in this order: "
      "\"## Summary\" restating the task, \"## Role-Play Caption\" narrating the video in the first "
      "person with [Frame] paragraphs alternating with [Transition] sentences, \"## Progressive "
      "Spatial Analysis\" with the lines Targets:, Candidates: and Relations:, and \"## Reasoning\". "
      "Answer multiple-choice questions with the option letter and numeric questions with a "
      "number.";
  t.sft_prompt = "{{question}}\n\n{{instruction}}";
  return t;
}

Templates Templates::load_dir(const std::string& dir) {
  const fs::path root(dir);
  Templates t;
  t.system = read_file(root / "system.txt");
  for (Stage s : kStages) t.stage[s] = read_file(root / (std::string(to_string(s)) + ".txt"));
  t.instruction = read_file(root / "instruction.txt");
  t.sft_prompt = read_file(root / "sft_prompt.txt");
  // Editors add a trailing newline; the built-in templates have none.
  for (auto* s : {&t.system, &t.instruction, &t.sft_prompt}) {
    while (!s->empty() && s->back() == '\n') s->pop_back();
  }
  for (auto& [k, v] : t.stage) {
    while (!v.empty() && v.back() == '\n') v.pop_back();
  }
  return t;
}

std::string instantiate(std::string_view tpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    auto open = tpl.find("{{", i);
    if (open == std::string_view::npos) {
      out += tpl.substr(i);
      break;
    }
    out += tpl.substr(i, open - i);
    auto close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in template");
    const std::string name = trim(tpl.substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("unknown template placeholder '" + name + "'");
    out += it->second;
    i = close + 2;
  }
  return out;
}

std::map<Stage, std::string> PipelineConfig::default_model_hints() {
  return {{Stage::CaptionFrames, "gpt-4o"},   {Stage::InferTransitions, "gpt-4o"},
          {Stage::SynthesizeRpc, "qwen2.5-72b-instruct"}, {Stage::ExtractContext, "gpt-4o"},
          {Stage::MergeCot, "gpt-4o"},        {Stage::QualityCheck, "gpt-4o"}};
}

// --- journal ---------------------------------------------------------------

Journal::Journal(std::string directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create persistence directory " + directory + ": " + ec.message());
  path_ = (fs::path(directory) / "journal.jsonl").string();
}

std::vector<Journal::Record> Journal::load() const {
  std::vector<Record> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = Json::parse(line);
      Record r;
      r.sample_id = j.at("sample_id").get<std::string>();
      r.stage = stage_from_string(j.at("stage").get<std::string>());
      if (j.contains("output")) r.output = j.at("output").get<std::string>();
      r.error = j.value("error", std::string{});
      r.raw = j.value("raw", std::string{});
      r.attempts = j.value("attempts", 0);
      r.token_usage = j.value("token_usage", std::int64_t{0});
      if (!r.output && r.error.empty()) throw PreconditionError("record has neither output nor error");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw JournalError(path_ + ":" + std::to_string(lineno) + ": corrupt journal record: " + e.what());
    }
  }
  return out;
}

void Journal::append(const Record& r) {
  Json j{{"sample_id", r.sample_id},
         {"stage", to_string(r.stage)},
         {"attempts", r.attempts},
         {"token_usage", r.token_usage}};
  if (r.output) j["output"] = *r.output;
  if (!r.error.empty()) j["error"] = r.error;
  if (!r.raw.empty()) j["raw"] = r.raw;
  const std::string line = j.dump() + "\n";
  std::lock_guard lock(mu_);
  if (!out_.is_open()) {
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw IoError("cannot append to " + path_);
  }
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw IoError("write failed for " + path_);
}

// --- stages ----------------------------------------------------------------

BackendRequest build_request(const GenerationJob& job, Stage stage, const Templates& templates,
                             const PipelineConfig& config) {
  auto out = [&](Stage s) -> const std::string& {
    auto it = job.stage_outputs.find(s);
    if (it == job.stage_outputs.end()) {
      throw PreconditionError("stage " + std::string(to_string(stage)) + " of " + job.sample_id +
                              " needs " + std::string(to_string(s)) + " first");
    }
    return it->second;
  };
  std::map<std::string, std::string> vars{{"question", render_question(job.question)},
                                          {"instruction", templates.instruction}};
  switch (stage) {
    case Stage::CaptionFrames: break;
    case Stage::InferTransitions: vars["captions"] = out(Stage::CaptionFrames); break;
    case Stage::SynthesizeRpc:
      vars["captions"] = out(Stage::CaptionFrames);
      vars["transitions"] = out(Stage::InferTransitions);
      break;
    case Stage::ExtractContext: vars["rpc"] = out(Stage::SynthesizeRpc); break;
    case Stage::MergeCot:
      vars["rpc"] = out(Stage::SynthesizeRpc);
      vars["context"] = out(Stage::ExtractContext);
      break;
    case Stage::QualityCheck:
      vars["captions"] = out(Stage::CaptionFrames);
      vars["cot"] = out(Stage::MergeCot);
      vars["ground_truth"] = job.question.ground_truth ? job.question.ground_truth->to_string() : "unknown";
      break;
  }
  auto tpl = templates.stage.find(stage);
  if (tpl == templates.stage.end()) {
    throw ConfigError("no template for stage " + std::string(to_string(stage)));
  }

  BackendRequest req;
  auto hint = config.model_hints.find(stage);
  req.model_hint = hint == config.model_hints.end() ? std::string{} : hint->second;
  req.system_text = templates.system;
  req.temperature = config.temperature;
  req.max_output_tokens = config.max_output_tokens;
  req.user_parts.push_back(ContentPart::text(instantiate(tpl->second, vars)));
  if (stage == Stage::CaptionFrames) {
    for (std::size_t i = 0; i < job.frames.size(); ++i) {
      const auto& f = job.frames[i];
      if (looks_like_image(f)) req.user_parts.push_back(ContentPart::image(f));
      else req.user_parts.push_back(ContentPart::text("[Frame " + std::to_string(i) + "] " + f));
    }
  }
  req.metadata = {{"sample_id", job.sample_id}, {"stage", std::string(to_string(stage))}};
  return req;
}

void run_stage(GenerationJob& job, Stage stage, ChatBackend& backend, const Templates& templates,
               const PipelineConfig& config, Journal* journal, BatchState* batch) {
  if (job.status.kind == JobStatus::Kind::Failed) return;
  if (job.next_stage() != stage) {
    throw PreconditionError("stage " + std::string(to_string(stage)) + " of " + job.sample_id +
                            " is not the next pending stage");
  }
  const BackendRequest req = build_request(job, stage, templates, config);
  const int limit = std::max(1, config.retry_limit);

  std::optional<BackendResponse> resp;
  std::string last_error;
  int& attempts = job.attempts[stage];
  for (int k = 0; k < limit && !resp; ++k) {
    if (batch && config.token_budget > 0 && batch->tokens_spent.load() >= config.token_budget) {
      fail(job, "token-budget-exhausted");
      if (journal) journal->append({job.sample_id, stage, std::nullopt, "token-budget-exhausted", {}, attempts, 0});
      return;
    }
    ++attempts;
    try {
      resp = backend.complete(req);
    } catch (const BackendError& e) {
      last_error = e.what();
      if (k + 1 < limit && config.backoff_base_ms > 0) {
        const double delay = std::min(config.backoff_max_ms, config.backoff_base_ms * std::pow(2.0, k));
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
      }
    }
  }
  if (!resp) {
    fail(job, "backend-exhausted");
    if (journal) journal->append({job.sample_id, stage, std::nullopt, "backend-exhausted: " + last_error, {}, attempts, 0});
    return;
  }
  job.token_usage += resp->token_usage;
  if (batch) batch->tokens_spent += resp->token_usage;

  if (stage == Stage::QualityCheck) {
    try {
      (void)parse_verdicts(resp->text);
    } catch (const VerdictParseError& e) {
      job.failure_raw = resp->text;
      fail(job, "malformed-verdict");
      if (journal) {
        journal->append({job.sample_id, stage, std::nullopt, std::string("malformed-verdict: ") + e.what(),
                         resp->text, attempts, resp->token_usage});
      }
      return;
    }
  }
  job.stage_outputs[stage] = resp->text;
  if (journal) journal->append({job.sample_id, stage, resp->text, {}, {}, attempts, resp->token_usage});
  if (stage == Stage::QualityCheck) apply_verdicts(job, config);
  refresh_status(job);
}

Manifest run_pipeline(std::vector<GenerationJob>& jobs, ChatBackend& backend,
                      const Templates& templates, const PipelineConfig& config,
                      const std::string& persist_dir) {
  std::set<std::string> ids;
  for (const auto& j : jobs) {
    if (!ids.insert(j.sample_id).second) throw PreconditionError("duplicate sample_id " + j.sample_id);
  }
  Journal journal(persist_dir);

  // Resume: restore the completed prefix of each job, last write wins.
  std::map<std::string, std::map<Stage, std::string>> restored;
  std::map<std::string, std::int64_t> restored_tokens;
  std::map<std::string, std::map<Stage, int>> restored_attempts;
  for (const auto& r : journal.load()) {
    restored_tokens[r.sample_id] += r.token_usage;
    restored_attempts[r.sample_id][r.stage] += r.attempts;
    if (r.output) restored[r.sample_id][r.stage] = *r.output;
  }
  for (auto& job : jobs) {
    job.status = {};
    job.token_usage = restored_tokens[job.sample_id];
    job.attempts = restored_attempts[job.sample_id];
    auto it = restored.find(job.sample_id);
    if (it == restored.end()) continue;
    for (Stage s : kStages) {
      auto o = it->second.find(s);
      if (o == it->second.end()) break;
      job.stage_outputs[s] = o->second;
    }
    if (job.has(Stage::QualityCheck)) apply_verdicts(job, config);
    refresh_status(job);
  }

  BatchState batch;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr crash;
  std::mutex crash_mu;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      auto& job = jobs[i];
      try {
        while (!abort.load() && job.status.kind != JobStatus::Kind::Failed) {
          auto s = job.next_stage();
          if (!s) break;
          run_stage(job, *s, backend, templates, config, &journal, &batch);
        }
      } catch (const Error& e) {
        fail(job, e.what());
      } catch (...) {
        std::lock_guard lock(crash_mu);
        if (!crash) crash = std::current_exception();
        abort = true;
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config.parallelism)), jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (crash) std::rethrow_exception(crash);

  Manifest m;
  for (const auto& job : jobs) {
    m.jobs.push_back({job.sample_id, job.status.to_string(), job.verdicts, job.token_usage, job.attempts});
    m.token_usage += job.token_usage;
    if (job.status.kind == JobStatus::Kind::Done) ++m.done;
    if (job.status.kind == JobStatus::Kind::Failed) ++m.failed;
  }
  return m;
}

// --- samples ---------------------------------------------------------------

std::string build_prompt(const StructuredQuestion& question, const Templates& templates) {
  return instantiate(templates.sft_prompt,
                     {{"question", render_question(question)}, {"instruction", templates.instruction}});
}

SftSample assemble_sft_sample(const GenerationJob& job, const Templates& templates,
                              const cot::Grammar& grammar) {
  if (job.status.kind != JobStatus::Kind::Done) {
    throw AssemblyError("job " + job.sample_id + " is not done (" + job.status.to_string() + ")");
  }
  for (const auto& v : job.verdicts) {
    if (!v.pass) throw AssemblyError("job " + job.sample_id + " failed " + v.criterion);
  }
  if (job.verdicts.size() != kCriteria.size()) {
    throw AssemblyError("job " + job.sample_id + " has no complete quality verdicts");
  }
  const auto& target = job.stage_outputs.at(Stage::MergeCot);
  if (cot::format_reward(target, grammar) != 1) {
    throw AssemblyError("job " + job.sample_id + " target does not parse");
  }
  return {job.sample_id, job.question.question_id, job.question.task_type,
          build_prompt(job.question, templates), target, job.question.ground_truth};
}

RlSample assemble_rl_sample(const StructuredQuestion& question, const Templates& templates,
                            const std::optional<Answer>& answer_key) {
  const auto& truth = answer_key ? answer_key : question.ground_truth;
  if (!truth) throw AssemblyError("question " + question.question_id + " has no ground truth");
  validate(question);
  return {question.question_id, question.task_type, build_prompt(question, templates), *truth};
}

Json to_json(const SftSample& s) {
  return {{"sample_id", s.sample_id},
          {"question_id", s.question_id},
          {"task_type", egomind::to_string(s.task_type)},
          {"prompt_text", s.prompt_text},
          {"target_text", s.target_text},
          {"ground_truth", s.ground_truth ? egomind::to_json(*s.ground_truth) : Json(nullptr)}};
}

Json to_json(const RlSample& s) {
  return {{"question_id", s.question_id},
          {"task_type", egomind::to_string(s.task_type)},
          {"prompt_text", s.prompt_text},
          {"ground_truth", egomind::to_json(s.ground_truth)}};
}

Json to_json(const ManifestEntry& e) {
  Json verdicts = Json::array();
  for (const auto& v : e.verdicts) {
    verdicts.push_back({{"criterion", v.criterion}, {"pass", v.pass}, {"rationale", v.rationale}});
  }
  Json attempts = Json::object();
  for (const auto& [s, n] : e.attempts) attempts[std::string(to_string(s))] = n;
  return {{"kind", "job"},
          {"sample_id", e.sample_id},
          {"status", e.status},
          {"verdicts", verdicts},
          {"token_usage", e.token_usage},
          {"attempts", attempts}};
}

OutputSummary write_outputs(const std::string& out_dir, const std::vector<GenerationJob>& jobs,
                            const Manifest& manifest, const Templates& templates,
                            const cot::Grammar& grammar) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
    if (!f) throw IoError("cannot write " + (fs::path(out_dir) / name).string());
    return f;
  };
  auto sft = open("sft.jsonl");
  auto rl = open("rl.jsonl");
  auto man = open("manifest.jsonl");

  OutputSummary sum;
  for (const auto& job : jobs) {
    if (job.status.kind == JobStatus::Kind::Done) {
      try {
        sft << to_json(assemble_sft_sample(job, templates, grammar)).dump() << '\n';
        ++sum.sft_records;
      } catch (const AssemblyError&) {
        ++sum.sft_refused;
      }
    }
    if (job.question.ground_truth) {
      rl << to_json(assemble_rl_sample(job.question, templates)).dump() << '\n';
      ++sum.rl_records;
    }
  }
  for (const auto& e : manifest.jobs) man << to_json(e).dump() << '\n';
  man << Json{{"kind", "totals"},
              {"jobs", manifest.jobs.size()},
              {"done", manifest.done},
              {"failed", manifest.failed},
              {"token_usage", manifest.token_usage},
              {"sft_records", sum.sft_records},
              {"sft_refused", sum.sft_refused},
              {"rl_records", sum.rl_records}}
             .dump()
      << '\n';
  if (!sft || !rl || !man) throw IoError("write failed in " + out_dir);
  return sum;
}

}  // namespace egomind::gen
