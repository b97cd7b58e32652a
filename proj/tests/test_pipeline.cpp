#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "egomind/errors.hpp"
#include "egomind/pipeline.hpp"
#include "pipeline_support.hpp"
#include "support.hpp"

using namespace egomind;
using namespace egomind::gen;
using egomind::testing::CountingBackend;
using egomind::testing::fast_config;
using egomind::testing::golden_set;
using egomind::testing::scratch_dir;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kAllPass =
    "Hallucination Check: PASS - fine\nLogical Consistency: PASS - fine\n"
    "Format & Correctness: PASS - fine";

std::string with_fixture_text(const std::vector<Json>& fixtures, const std::string& id, Stage s) {
  for (const auto& f : fixtures)
    if (f.at("sample_id") == id && f.at("stage") == to_string(s)) return f.at("text");
  FAIL("no fixture");
  return {};
}

}  // namespace

TEST_CASE("stage names") {
  CHECK(to_string(Stage::CaptionFrames) == "caption_frames");
  CHECK(to_string(Stage::QualityCheck) == "quality_check");
  for (auto s : kStages) CHECK(stage_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(stage_from_string("dream"), PreconditionError);
  CHECK(JobStatus{JobStatus::Kind::StageComplete, 3, {}}.to_string() == "stage-complete(3)");
  CHECK(JobStatus{JobStatus::Kind::Failed, 0, "backend-exhausted"}.to_string() == "failed(backend-exhausted)");
}

TEST_CASE("verdicts") {
  auto v = parse_verdicts(
      "Some preamble\nFormat & Correctness: FAIL - answer tag missing\n"
      "hallucination check: pass\nLogical Consistency: PASS - ok");
  REQUIRE(v.size() == 3);
  CHECK(v[0].criterion == "Hallucination Check");
  CHECK(v[0].pass);
  CHECK(v[2].criterion == "Format & Correctness");
  CHECK_FALSE(v[2].pass);
  CHECK(v[2].rationale == "answer tag missing");
  CHECK(parse_verdicts(format_verdicts(v)) == v);

  CHECK_THROWS_AS(parse_verdicts("Hallucination Check: PASS\nLogical Consistency: PASS"), VerdictParseError);
  CHECK_THROWS_AS(parse_verdicts(std::string(kAllPass) + "\nLogical Consistency: FAIL"), VerdictParseError);
  CHECK_THROWS_AS(parse_verdicts("Hallucination Check: MAYBE\nLogical Consistency: PASS\n"
                                 "Format & Correctness: PASS"),
                  VerdictParseError);
}

TEST_CASE("templates") {
  CHECK(instantiate("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
  CHECK_THROWS_AS(instantiate("{{nope}}", {}), ConfigError);
  CHECK_THROWS_AS(instantiate("{{x", {{"x", "1"}}), ConfigError);
  auto t = Templates::defaults();
  CHECK(t.stage.size() == 6);

  // the shipped template files are the built-in defaults
  auto shipped = Templates::load_dir(EGOMIND_SOURCE_DIR "/templates");
  CHECK(shipped.system == t.system);
  CHECK(shipped.stage == t.stage);
  CHECK(shipped.instruction == t.instruction);
  CHECK(shipped.sft_prompt == t.sft_prompt);

  auto dir = scratch_dir("tpl");
  CHECK_THROWS_AS(Templates::load_dir(dir), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("jobs: json and invariants") {
  auto g = golden_set(2);
  auto j = g.jobs[0];
  auto back = job_from_json(job_to_json(j));
  CHECK(back.sample_id == j.sample_id);
  CHECK(back.frames == j.frames);
  CHECK(back.question == j.question);
  CHECK_NOTHROW(validate(j));
  j.stage_outputs[Stage::SynthesizeRpc] = "x";
  CHECK_THROWS_AS(validate(j), StructuralError);

  Json free_text{{"sample_id", "f"}, {"frames", {"a.png"}}, {"question", "How many chairs?"}};
  auto f = job_from_json(free_text);
  CHECK(f.question.text == "How many chairs?");
}

TEST_CASE("build_request") {
  GenerationJob job;
  job.sample_id = "s1";
  job.frames = {"https://x/y.png", "I see a chair (chair#1).", "data:image/png;base64,AAA"};
  job.question.question_id = "q";
  job.question.task_type = TaskType::RoomSize;
  job.question.text = "How big is the room?";
  auto cfg = fast_config();
  auto r = build_request(job, Stage::CaptionFrames, Templates::defaults(), cfg);
  CHECK(r.metadata.at("sample_id") == "s1");
  CHECK(r.metadata.at("stage") == "caption_frames");
  CHECK(r.model_hint == cfg.model_hints.at(Stage::CaptionFrames));
  CHECK(cfg.model_hints.at(Stage::SynthesizeRpc) != cfg.model_hints.at(Stage::CaptionFrames));
  int images = 0, frame_text = 0;
  for (const auto& p : r.user_parts) {
    images += p.kind == ContentPart::Kind::ImageUrl;
    frame_text += p.value.rfind("[Frame 1] ", 0) == 0;
  }
  CHECK(images == 2);
  CHECK(frame_text == 1);
  CHECK_NOTHROW(validate(r));
  CHECK_THROWS_AS(build_request(job, Stage::MergeCot, Templates::defaults(), cfg), Error);
}

TEST_CASE("run_stage: happy path, retries, malformed verdicts") {
  auto g = golden_set(1);
  auto dir = scratch_dir("stage");
  Journal journal(dir);
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  const auto tpl = Templates::defaults();
  auto cfg = fast_config();

  auto job = g.jobs[0];
  run_stage(job, Stage::CaptionFrames, backend, tpl, cfg, &journal);
  CHECK(job.has(Stage::CaptionFrames));
  CHECK(job.status.to_string() == "stage-complete(1)");
  CHECK(journal.load().size() == 1);
  CHECK_THROWS_AS(run_stage(job, Stage::MergeCot, backend, tpl, cfg), PreconditionError);

  auto flaky = g.jobs[0];
  backend.inject_failures(flaky.sample_id, "caption_frames", 2);
  run_stage(flaky, Stage::CaptionFrames, backend, tpl, cfg);
  CHECK(flaky.has(Stage::CaptionFrames));
  CHECK(flaky.attempts[Stage::CaptionFrames] == 3);

  auto dead = g.jobs[0];
  backend.inject_failures(dead.sample_id, "caption_frames", 3);
  run_stage(dead, Stage::CaptionFrames, backend, tpl, cfg, &journal);
  CHECK(dead.status.to_string() == "failed(backend-exhausted)");
  CHECK(dead.attempts[Stage::CaptionFrames] == 3);
  CHECK_FALSE(journal.load().back().output.has_value());

  MockBackend garbled;
  egomind::testing::load(garbled, g.fixtures);
  garbled.add_fixture(g.jobs[0].sample_id, "quality_check", "Looks fine to me!");
  auto judge = g.jobs[0];
  for (auto s : kStages) run_stage(judge, s, garbled, tpl, cfg, &journal);
  CHECK(judge.status.to_string() == "failed(malformed-verdict)");
  CHECK(judge.failure_raw == "Looks fine to me!");
  CHECK(journal.load().back().raw == "Looks fine to me!");
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupted merge fails Format & Correctness only") {
  auto g = golden_set(3);
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  auto merged = with_fixture_text(g.fixtures, g.jobs[1].sample_id, Stage::MergeCot);
  backend.add_fixture(g.jobs[1].sample_id, "merge_cot", merged.substr(0, merged.find("</think>")));

  auto dir = scratch_dir("corrupt");
  auto jobs = g.jobs;
  auto manifest = run_pipeline(jobs, backend, Templates::defaults(), fast_config(), dir + "/state");
  CHECK(manifest.done == 3);
  int fc_failures = 0;
  for (const auto& j : jobs)
    for (const auto& v : j.verdicts) fc_failures += !v.pass;
  CHECK(fc_failures == 1);
  CHECK_FALSE(jobs[1].passed_quality());
  CHECK(jobs[1].verdicts[2].criterion == "Format & Correctness");
  CHECK_FALSE(jobs[1].verdicts[2].pass);
  CHECK_THROWS_AS(assemble_sft_sample(jobs[1], Templates::defaults()), AssemblyError);

  auto sum = write_outputs(dir + "/out", jobs, manifest, Templates::defaults());
  CHECK(sum.sft_records == 2);
  CHECK(sum.sft_refused == 1);
  for (const auto& line : read_lines(dir + "/out/sft.jsonl"))
    CHECK(Json::parse(line)["sample_id"] != jobs[1].sample_id);
  std::filesystem::remove_all(dir);
}

TEST_CASE("wrong answer in the merged document fails Format & Correctness") {
  auto g = golden_set(1);
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  auto doc = cot::parse(with_fixture_text(g.fixtures, g.jobs[0].sample_id, Stage::MergeCot));
  const auto& truth = *g.jobs[0].question.ground_truth;
  doc.answer = truth.is_choice() ? std::string(1, truth.letter == 'A' ? 'B' : 'A') : "9999";
  backend.add_fixture(g.jobs[0].sample_id, "merge_cot", cot::render(doc));
  auto jobs = g.jobs;
  auto dir = scratch_dir("wrong");
  run_pipeline(jobs, backend, Templates::defaults(), fast_config(), dir);
  CHECK_FALSE(jobs[0].verdicts[2].pass);
  CHECK(jobs[0].verdicts[0].pass);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_pipeline: golden batch") {
  auto dir = scratch_dir("golden");
  std::vector<GenerationJob> none;
  MockBackend empty;
  auto m0 = run_pipeline(none, empty, Templates::defaults(), fast_config(), dir + "/empty");
  CHECK(m0.jobs.empty());
  CHECK(m0.token_usage == 0);

  auto g = golden_set(10);
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  CountingBackend counter(backend);
  auto jobs = g.jobs;
  auto cfg = fast_config();
  cfg.parallelism = 4;
  auto m = run_pipeline(jobs, counter, Templates::defaults(), cfg, dir + "/a");
  CHECK(m.done == 10);
  CHECK(m.failed == 0);
  CHECK(m.token_usage == counter.tokens());
  std::int64_t per_job = 0;
  for (const auto& e : m.jobs) per_job += e.token_usage;
  CHECK(per_job == m.token_usage);
  for (const auto& j : jobs) {
    CHECK(j.passed_quality());
    CHECK(cot::format_reward(j.stage_outputs.at(Stage::MergeCot)) == 1);
  }
  auto sum = write_outputs(dir + "/a/out", jobs, m, Templates::defaults());
  CHECK(sum.sft_records == 10);
  CHECK(sum.rl_records == 10);
  auto instruction = Templates::defaults().instruction;
  for (const auto& line : read_lines(dir + "/a/out/sft.jsonl")) {
    auto rec = Json::parse(line);
    std::string target = rec["target_text"];
    CHECK(cot::render(cot::parse(target)) == target);
    CHECK(rec["prompt_text"].get<std::string>().find(instruction) != std::string::npos);
  }
  auto manifest = read_lines(dir + "/a/out/manifest.jsonl");
  CHECK(manifest.size() == 11);
  CHECK(Json::parse(manifest.back())["token_usage"] == m.token_usage);

  // byte-identical outputs from a second fresh run
  MockBackend again;
  egomind::testing::load(again, g.fixtures);
  auto jobs2 = g.jobs;
  auto m2 = run_pipeline(jobs2, again, Templates::defaults(), fast_config(), dir + "/b");
  write_outputs(dir + "/b/out", jobs2, m2, Templates::defaults());
  for (const char* f : {"sft.jsonl", "rl.jsonl", "manifest.jsonl"})
    CHECK(slurp(dir + "/a/out/" + f) == slurp(dir + "/b/out/" + f));

  // a finished batch resumes without a single backend call
  MockBackend idle;
  auto jobs3 = g.jobs;
  auto m3 = run_pipeline(jobs3, idle, Templates::defaults(), fast_config(), dir + "/a");
  CHECK(idle.total_calls() == 0);
  CHECK(m3.done == 10);
  CHECK(m3.token_usage == m.token_usage);

  auto dup = g.jobs;
  dup.push_back(dup[0]);
  CHECK_THROWS_AS(run_pipeline(dup, idle, Templates::defaults(), fast_config(), dir + "/c"), PreconditionError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("kill and resume: no stage runs twice") {
  auto g = golden_set(10, 4);
  for (int parallelism : {1, 3}) {
    for (std::int64_t kill_at : {0, 1, 17, 33, 59}) {
      auto dir = scratch_dir("resume");
      auto cfg = fast_config();
      cfg.parallelism = parallelism;
      MockBackend first;
      egomind::testing::load(first, g.fixtures);
      first.crash_after(kill_at);
      auto jobs = g.jobs;
      CHECK_THROWS_AS(run_pipeline(jobs, first, Templates::defaults(), cfg, dir), SimulatedCrash);
      CHECK(first.total_calls() == kill_at);

      std::map<std::string, std::set<Stage>> before;
      for (const auto& r : Journal(dir).load())
        if (r.output) before[r.sample_id].insert(r.stage);

      MockBackend second;
      egomind::testing::load(second, g.fixtures);
      auto resumed = g.jobs;
      auto m = run_pipeline(resumed, second, Templates::defaults(), cfg, dir);
      CHECK(m.done == 10);
      CHECK(first.total_calls() + second.total_calls() == 60);
      for (const auto& j : resumed) {
        for (auto s : kStages) {
          CHECK(first.calls(j.sample_id, std::string(to_string(s))) +
                    second.calls(j.sample_id, std::string(to_string(s))) ==
                1);
        }
        for (auto s : before[j.sample_id]) CHECK(j.has(s));
      }
      std::filesystem::remove_all(dir);
    }
  }
}

TEST_CASE("failed jobs resume their failed stage") {
  auto g = golden_set(2);
  auto dir = scratch_dir("retry");
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  backend.inject_failures(g.jobs[0].sample_id, "extract_context", 3);
  auto jobs = g.jobs;
  auto m = run_pipeline(jobs, backend, Templates::defaults(), fast_config(), dir);
  CHECK(m.failed == 1);
  CHECK(jobs[0].status.to_string() == "failed(backend-exhausted)");
  CHECK(jobs[0].has(Stage::SynthesizeRpc));

  auto again = g.jobs;
  auto m2 = run_pipeline(again, backend, Templates::defaults(), fast_config(), dir);
  CHECK(m2.done == 2);
  CHECK(backend.calls(g.jobs[0].sample_id, "caption_frames") == 1);
  CHECK(backend.calls(g.jobs[0].sample_id, "extract_context") == 1);
  CHECK(again[0].attempts[Stage::ExtractContext] == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("token budget") {
  auto g = golden_set(4);
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  auto cfg = fast_config();
  cfg.token_budget = 1;
  auto jobs = g.jobs;
  auto dir = scratch_dir("budget");
  auto m = run_pipeline(jobs, backend, Templates::defaults(), cfg, dir);
  CHECK(m.failed == 4);
  CHECK(backend.total_calls() == 1);
  CHECK(jobs[1].status.to_string() == "failed(token-budget-exhausted)");
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt journal is fatal and names the record") {
  auto g = golden_set(2);
  auto dir = scratch_dir("journal");
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  auto jobs = g.jobs;
  run_pipeline(jobs, backend, Templates::defaults(), fast_config(), dir);
  {
    std::ofstream out(dir + "/journal.jsonl", std::ios::app);
    out << "{\"sample_id\": \"x\", \"stage\": \n";
  }
  auto lines = read_lines(dir + "/journal.jsonl").size();
  try {
    auto again = g.jobs;
    run_pipeline(again, backend, Templates::defaults(), fast_config(), dir);
    FAIL("expected JournalError");
  } catch (const JournalError& e) {
    std::string msg = e.what();
    CHECK(msg.find("journal.jsonl:" + std::to_string(lines)) != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("assembly") {
  auto g = golden_set(2);
  MockBackend backend;
  egomind::testing::load(backend, g.fixtures);
  backend.add_fixture(g.jobs[1].sample_id, "quality_check",
                      "Hallucination Check: FAIL - mentions a piano\nLogical Consistency: PASS\n"
                      "Format & Correctness: PASS");
  auto jobs = g.jobs;
  auto dir = scratch_dir("assemble");
  run_pipeline(jobs, backend, Templates::defaults(), fast_config(), dir);
  auto tpl = Templates::defaults();
  auto ok = assemble_sft_sample(jobs[0], tpl);
  CHECK(ok.prompt_text.find(tpl.instruction) != std::string::npos);
  CHECK(ok.prompt_text.find(jobs[0].question.text) != std::string::npos);
  CHECK(cot::format_reward(ok.target_text) == 1);
  CHECK_THROWS_AS(assemble_sft_sample(jobs[1], tpl), AssemblyError);
  CHECK_THROWS_AS(assemble_sft_sample(g.jobs[0], tpl), AssemblyError);

  StructuredQuestion mcq;
  mcq.question_id = "m";
  mcq.task_type = TaskType::RelativeDirection;
  mcq.options = {{'A', "left"}, {'B', "right"}};
  mcq.ground_truth = Answer::choice('B');
  mcq.text = "Which side?";
  auto rl = assemble_rl_sample(mcq, tpl);
  CHECK(rl.ground_truth == Answer::choice('B'));
  CHECK(to_json(rl)["ground_truth"] == "B");
  CHECK(rl.prompt_text.find("left") != std::string::npos);

  StructuredQuestion num;
  num.question_id = "n";
  num.task_type = TaskType::AbsoluteDistance;
  num.text = "How far?";
  CHECK_THROWS_AS(assemble_rl_sample(num, tpl), AssemblyError);
  auto keyed = assemble_rl_sample(num, tpl, Answer::number(2.5, "m"));
  CHECK(keyed.ground_truth.value == 2.5);
  CHECK(keyed.ground_truth.unit == "m");
  std::filesystem::remove_all(dir);
}
