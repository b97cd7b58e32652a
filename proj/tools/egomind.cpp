// egomind: command-line front end for the simulator, CoT validator, scorer,
// GRPO auditor and data-generation pipeline.
//
// Exit codes: 0 success, 1 validation failures present, 2 operational error.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egomind/config.hpp"
#include "egomind/episode_jobs.hpp"
#include "egomind/errors.hpp"
#include "egomind/eval.hpp"
#include "egomind/pipeline.hpp"
#include "egomind/reward_batch.hpp"

namespace fs = std::filesystem;
using namespace egomind;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kOperational = 2;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  int parallelism = 0;
  bool strict = false;
  std::string backend_url;
};

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- simulate ------------------------------------------------------------------

struct SimulateArgs {
  int n_scenes = 1;
  std::string jobs_out;
  std::string fixtures_out;
  bool verify = false;
};

int cmd_simulate(const AppConfig& cfg, const Globals& g, const SimulateArgs& a) {
  if (a.n_scenes < 0) throw PreconditionError("--n-scenes must be non-negative");
  const std::uint64_t seed = g.seed.value_or(cfg.run.seed);
  const auto episodes = sim::simulate_batch(seed, a.n_scenes, cfg.run.min_objects, cfg.run.max_objects,
                                            cfg.scene, cfg.sim);
  const std::string out = g.out.empty() ? (fs::path(cfg.out_dir) / "dataset.jsonl").string() : g.out;
  auto data = open_out(out);
  std::size_t questions = 0;
  std::size_t skipped = 0;
  std::size_t mismatches = 0;
  for (const auto& ep : episodes) {
    data << sim::to_json(ep).dump() << '\n';
    questions += ep.questions.size();
    skipped += ep.skipped.size();
    if (!a.verify) continue;
    for (const auto& q : ep.questions) {
      const auto again = sim::oracle_answer(ep.scene, ep.trajectory, q, cfg.sim);
      if (!q.ground_truth || again.to_string() != q.ground_truth->to_string()) {
        std::cerr << "oracle mismatch: " << q.question_id << '\n';
        ++mismatches;
      }
    }
    for (std::size_t f = 0; f < ep.observations.size(); ++f) {
      for (const auto& node : ep.observations[f].objects) {
        const auto& o = ep.scene.object(node.id);
        if (!sim::is_visible(ep.trajectory[f], o.x, o.y)) {
          std::cerr << "unsound observation: " << ep.scene.scene_id << " frame " << f << " " << o.id << '\n';
          ++mismatches;
        }
      }
    }
  }
  if (!a.jobs_out.empty()) {
    auto jobs = open_out(a.jobs_out);
    for (const auto& ep : episodes) {
      for (const auto& job : gen::jobs_from_episode(ep)) jobs << gen::job_to_json(job).dump() << '\n';
    }
  }
  if (!a.fixtures_out.empty()) {
    auto fx = open_out(a.fixtures_out);
    for (const auto& ep : episodes) {
      for (const auto& rec : gen::oracle_fixtures(ep, cfg.sim, cfg.grammar)) fx << rec.dump() << '\n';
    }
  }
  std::cout << "wrote " << episodes.size() << " scenes, " << questions << " questions to " << out;
  if (skipped) std::cout << " (" << skipped << " family/scene pairs skipped)";
  std::cout << '\n';
  if (a.verify) std::cout << "oracle self-consistency: " << (mismatches ? "FAIL" : "PASS") << '\n';
  return mismatches ? kInvalid : kOk;
}

// --- validate-cot ----------------------------------------------------------------

struct ValidateArgs {
  std::string file;
  std::string field;
};

int cmd_validate_cot(const AppConfig& cfg, const Globals& g, const ValidateArgs& a) {
  struct Doc {
    std::size_t line;
    std::string id;
    std::optional<std::string> text;
    std::string problem;
  };
  std::vector<Doc> docs;
  if (fs::path(a.file).extension() == ".jsonl") {
    const auto lines = read_lines(a.file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (blank(lines[i])) continue;
      Doc d{i + 1, {}, std::nullopt, {}};
      try {
        const auto j = Json::parse(lines[i]);
        d.id = j.value("sample_id", j.value("question_id", std::string{}));
        std::vector<std::string> fields = a.field.empty()
            ? std::vector<std::string>{"target_text", "raw_model_output", "text", "cot"}
            : std::vector<std::string>{a.field};
        for (const auto& f : fields) {
          if (j.contains(f) && j[f].is_string()) {
            d.text = j[f].get<std::string>();
            break;
          }
        }
        if (!d.text) d.problem = "record has no document field";
      } catch (const Json::exception& e) {
        d.problem = std::string("not JSON: ") + e.what();
      }
      docs.push_back(std::move(d));
    }
  } else {
    std::ifstream in(a.file, std::ios::binary);
    if (!in) throw IoError("cannot read " + a.file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    docs.push_back({1, a.file, text, {}});
  }

  std::size_t pass = 0;
  std::size_t failed = 0;
  for (const auto& d : docs) {
    std::string verdict;
    if (d.text) {
      auto r = cot::try_parse(*d.text, cfg.grammar);
      if (auto* err = std::get_if<cot::ParseError>(&r)) {
        verdict = "FAIL " + err->to_string();
      } else if (g.strict) {
        const auto issues = cot::validate(std::get<cot::CoTDocument>(r));
        if (!issues.empty()) verdict = "FAIL " + issues.front();
      }
    } else {
      verdict = "FAIL " + d.problem;
    }
    if (verdict.empty()) {
      verdict = "PASS";
      ++pass;
    } else {
      ++failed;
    }
    std::cout << "line " << d.line << (d.id.empty() ? "" : " " + d.id) << ": " << verdict << '\n';
  }
  std::cout << docs.size() << " documents: " << pass << " PASS, " << failed << " FAIL\n";
  return failed ? kInvalid : kOk;
}

// --- score -------------------------------------------------------------------

struct ScoreArgs {
  std::string file;
  std::string output_field = "raw_model_output";
  std::string format = "both";
  std::string run_id;
};

int cmd_score(const AppConfig& cfg, const Globals& g, const ScoreArgs& a) {
  eval::ScoreConfig sc;
  sc.thresholds = cfg.reward.mra_thresholds;
  sc.strict = g.strict;
  sc.output_field = a.output_field;
  sc.run_id = a.run_id.empty() ? fs::path(a.file).stem().string() : a.run_id;
  sc.w_format = cfg.reward.w_format;
  sc.w_accuracy = cfg.reward.w_accuracy;
  eval::ScoreReport report;
  try {
    report = eval::score_run(a.file, sc);
  } catch (const PreconditionError& e) {
    std::cerr << "invalid record: " << e.what() << '\n';
    return kInvalid;
  }
  const std::string dir = g.out.empty() ? (fs::path(cfg.out_dir) / "report").string() : g.out;
  fs::create_directories(dir);
  if (a.format == "text" || a.format == "both") {
    eval::emit_report(report, eval::ReportFormat::TextTable, (fs::path(dir) / "report.txt").string());
  }
  if (a.format == "csv" || a.format == "both") {
    eval::emit_report(report, eval::ReportFormat::Csv, (fs::path(dir) / "report.csv").string());
  }
  open_out((fs::path(dir) / "report.json").string()) << eval::to_json(report).dump(2) << '\n';
  std::cout << eval::format_report(report, eval::ReportFormat::TextTable);
  return report.errors.empty() ? kOk : kInvalid;
}

// --- grpo-check ----------------------------------------------------------------

struct GrpoArgs {
  std::string file;
};

int cmd_grpo_check(const AppConfig& cfg, const Globals& g, const GrpoArgs& a) {
  const auto lines = read_lines(a.file);
  std::vector<reward::RolloutGroup> groups;
  std::vector<std::size_t> group_line;
  std::size_t invalid = 0;
  std::vector<Json> results;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    try {
      auto j = Json::parse(lines[i]);
      if (!j.contains("epsilon")) j["epsilon"] = cfg.reward.epsilon;
      if (!j.contains("beta")) j["beta"] = cfg.reward.beta;
      groups.push_back(reward::rollout_group_from_json(j));
      group_line.push_back(i + 1);
    } catch (const Json::exception& e) {
      ++invalid;
      std::cout << "line " << i + 1 << ": ERROR unreadable group: " << e.what() << '\n';
      results.push_back({{"line", i + 1}, {"valid", false}, {"error", e.what()}});
    }
  }
  const auto audits = reward::audit_groups(groups, cfg.reward.kl_reduction);
  for (std::size_t k = 0; k < audits.size(); ++k) {
    const auto& au = audits[k];
    std::cout << "line " << group_line[k] << " " << au.question_id << ": ";
    if (!au.valid) {
      ++invalid;
      std::cout << "ERROR " << au.error << '\n';
    } else {
      std::cout << "objective " << exact(au.objective);
      if (au.zero_variance) std::cout << " (info: zero-variance group, all advantages 0)";
      std::cout << '\n';
    }
    auto j = reward::to_json(au);
    j["line"] = group_line[k];
    results.push_back(std::move(j));
  }
  if (!g.out.empty()) {
    auto f = open_out(g.out);
    for (const auto& r : results) f << r.dump() << '\n';
  }
  std::cout << results.size() << " groups: " << results.size() - invalid << " valid, " << invalid
            << " with violations\n";
  return invalid ? kInvalid : kOk;
}

// --- gen-data ------------------------------------------------------------------

struct GenArgs {
  std::string jobs_file;
  std::string backend;
  std::string fixtures;
  std::string persist;
  bool allow_live = false;
};

int cmd_gen_data(AppConfig cfg, const Globals& g, const GenArgs& a) {
  const std::string kind = a.backend.empty() ? cfg.backend.kind : a.backend;
  std::unique_ptr<gen::ChatBackend> backend;
  if (kind == "mock") {
    if (a.fixtures.empty()) throw ConfigError("the mock backend needs --fixtures");
    auto mock = std::make_unique<gen::MockBackend>();
    mock->load_fixtures(a.fixtures);
    backend = std::move(mock);
  } else if (kind == "http") {
    if (!a.allow_live) throw ConfigError("live backend calls are disabled; pass --allow-live to enable");
    if (cfg.backend.url.empty()) throw ConfigError("no backend URL (set GEN_BACKEND_URL or --backend-url)");
    backend = std::make_unique<gen::HttpBackend>(cfg.backend.url, cfg.backend.api_key, cfg.backend.timeout_s);
  } else {
    throw ConfigError("unknown backend '" + kind + "'");
  }
  if (kind == "mock") {
    // Replays are instant; backing off between them only slows tests down.
    cfg.pipeline.backoff_base_ms = 0.0;
  }

  const auto templates = cfg.template_dir.empty() ? gen::Templates::defaults()
                                                  : gen::Templates::load_dir(cfg.template_dir);
  auto jobs = gen::load_jobs(a.jobs_file);
  const std::string out = g.out.empty() ? (fs::path(cfg.out_dir) / "gen").string() : g.out;
  const std::string persist = a.persist.empty() ? (fs::path(out) / "state").string() : a.persist;
  const auto manifest = gen::run_pipeline(jobs, *backend, templates, cfg.pipeline, persist);
  const auto sum = gen::write_outputs(out, jobs, manifest, templates, cfg.grammar);

  std::size_t quality_failures = 0;
  for (const auto& job : jobs) {
    for (const auto& v : job.verdicts) {
      if (!v.pass) {
        ++quality_failures;
        std::cout << job.sample_id << ": " << v.criterion << " FAIL - " << v.rationale << '\n';
      }
    }
    if (job.status.kind == gen::JobStatus::Kind::Failed) {
      std::cout << job.sample_id << ": " << job.status.to_string() << '\n';
    }
  }
  std::cout << jobs.size() << " jobs: " << manifest.done << " done, " << manifest.failed << " failed; "
            << sum.sft_records << " SFT records (" << sum.sft_refused << " refused), " << sum.rl_records
            << " RL records, " << manifest.token_usage << " tokens -> " << out << '\n';
  return manifest.failed || sum.sft_refused ? kInvalid : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egomind - egocentric spatial reasoning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Base seed (overrides simulator.seed)");
  app.add_option("--out", g.out, "Output file (simulate, grpo-check) or directory (score, gen-data)");
  app.add_option("--parallelism", g.parallelism, "Worker threads (overrides pipeline.parallelism)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--strict", g.strict, "Treat warnings as failures / abort on the first bad record");
  app.add_option("--backend-url", g.backend_url, "Chat-completion base URL (overrides GEN_BACKEND_URL)");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate scenes, trajectories and questions");
  sim_cmd->add_option("--n-scenes", sim_args.n_scenes, "Number of scenes")->capture_default_str();
  sim_cmd->add_option("--jobs-out", sim_args.jobs_out, "Also write generation jobs (JSONL)");
  sim_cmd->add_option("--fixtures-out", sim_args.fixtures_out, "Also write oracle mock fixtures (JSONL)");
  sim_cmd->add_flag("--verify", sim_args.verify, "Recompute every oracle answer and observation");

  ValidateArgs val_args;
  auto* val_cmd = app.add_subcommand("validate-cot", "Check CoT documents against the grammar");
  val_cmd->add_option("file", val_args.file, "A .jsonl file of records or a single document")
      ->required()
      ->check(CLI::ExistingFile);
  val_cmd->add_option("--field", val_args.field, "Record field holding the document");

  ScoreArgs score_args;
  auto* score_cmd = app.add_subcommand("score", "Score a predictions file per task family");
  score_cmd->add_option("predictions", score_args.file, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--output-field", score_args.output_field, "Field holding the model output")
      ->capture_default_str();
  score_cmd->add_option("--format", score_args.format, "text, csv or both")
      ->check(CLI::IsMember({"text", "csv", "both"}))
      ->capture_default_str();
  score_cmd->add_option("--run-id", score_args.run_id, "Run id recorded in the report");

  GrpoArgs grpo_args;
  auto* grpo_cmd = app.add_subcommand("grpo-check", "Recompute and audit GRPO quantities per group");
  grpo_cmd->add_option("groups", grpo_args.file, "Rollout groups JSONL")->required()->check(CLI::ExistingFile);

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-data", "Run the CoT generation pipeline");
  gen_cmd->add_option("jobs", gen_args.jobs_file, "Jobs JSONL")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--backend", gen_args.backend, "mock or http (default from config)")
      ->check(CLI::IsMember({"mock", "http"}));
  gen_cmd->add_option("--fixtures", gen_args.fixtures, "Mock replies JSONL")->check(CLI::ExistingFile);
  gen_cmd->add_option("--persist", gen_args.persist, "Journal directory (default <out>/state)");
  gen_cmd->add_flag("--allow-live", gen_args.allow_live, "Permit calls to a live HTTP backend");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kOperational;
  }

  try {
    AppConfig cfg = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
    apply_environment(cfg);
    if (!g.backend_url.empty()) cfg.backend.url = g.backend_url;
    if (g.parallelism > 0) {
      cfg.pipeline.parallelism = g.parallelism;
      omp_set_num_threads(g.parallelism);
    }
    validate(cfg);

    if (*sim_cmd) return cmd_simulate(cfg, g, sim_args);
    if (*val_cmd) return cmd_validate_cot(cfg, g, val_args);
    if (*score_cmd) return cmd_score(cfg, g, score_args);
    if (*grpo_cmd) return cmd_grpo_check(cfg, g, grpo_args);
    if (*gen_cmd) return cmd_gen_data(cfg, g, gen_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOperational;
  }
  return kOperational;
}
