#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "egomind/config.hpp"
#include "egomind/errors.hpp"
#include "pipeline_support.hpp"
#include "support.hpp"

using namespace egomind;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

struct Run {
  int code;
  std::string out;
};

// Runs the CLI with stdout captured to a file and stderr discarded.
Run cli(const std::string& args, const std::string& dir) {
  const std::string log = dir + "/stdout.txt";
  const std::string cmd = std::string("\"") + EGOMIND_CLI + "\" " + args + " > \"" + log + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

struct EnvGuard {
  EnvGuard() { clear(); }
  ~EnvGuard() { clear(); }
  static void clear() {
    unsetenv("GEN_BACKEND_URL");
    unsetenv("GEN_BACKEND_KEY");
  }
};

}  // namespace

TEST_CASE("config: defaults") {
  const auto parsed = parse_config(default_config_toml());
  const AppConfig d;
  CHECK(parsed.sim.n_frames == d.sim.n_frames);
  CHECK(parsed.sim.fov == doctest::Approx(d.sim.fov).epsilon(1e-12));
  CHECK(parsed.sim.turn_quantum == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
  CHECK(parsed.reward.w_format == 0.2);
  CHECK(parsed.reward.w_accuracy == 0.8);
  CHECK(parsed.reward.epsilon == d.reward.epsilon);
  CHECK(parsed.reward.beta == d.reward.beta);
  CHECK(parsed.reward.mra_thresholds == d.reward.mra_thresholds);
  CHECK(parsed.pipeline.model_hints == d.pipeline.model_hints);
  CHECK(parsed.pipeline.retry_limit == d.pipeline.retry_limit);
  CHECK(parsed.backend.kind == "mock");
  CHECK(parsed.backend.api_key.empty());
  CHECK(parse_config("").reward.group_size == d.reward.group_size);
  CHECK(slurp(EGOMIND_SOURCE_DIR "/configs/default.toml") == default_config_toml());
}

TEST_CASE("config: overrides and errors") {
  auto c = parse_config(
      "[simulator]\nfov_deg = 60\nframes = 4\n[reward]\nkl_reduction = \"sum\"\n"
      "[models]\nmerge_cot = \"big\"\n[cot]\nsummary = \"Recap:\"\n");
  CHECK(c.sim.fov == doctest::Approx(std::numbers::pi / 3).epsilon(1e-12));
  CHECK(c.sim.n_frames == 4);
  CHECK(c.reward.kl_reduction == reward::KlReduction::Sum);
  CHECK(c.pipeline.model_hints.at(gen::Stage::MergeCot) == "big");
  CHECK(c.grammar.markers.summary == "Recap:");
  CHECK(c.pipeline.grammar.markers.summary == "Recap:");

  for (const char* bad : {"[simulator]\nfovv = 1\n", "[nowhere]\nx = 1\n", "[models]\ndream = \"m\"\n",
                          "[reward]\nepsilon = 1.5\n", "[reward]\nkl_reduction = \"max\"\n",
                          "[simulator]\nframes = \"ten\"\n", "[simulator]\nmin_objects = 9\nmax_objects = 3\n",
                          "[backend]\nkind = \"grpc\"\n", "[backend]\napi_key = \"inline\"\n", "simulator = 3\n",
                          "[simulator\n"}) {
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
  }
  try {
    parse_config("\n[simulator\n", "x.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("x.toml:2:", 0) == 0);
  }
  CHECK_THROWS_AS(load_config("/definitely/not/here.toml"), ConfigError);
}

TEST_CASE("config: secrets come from the environment") {
  EnvGuard guard;
  AppConfig c;
  apply_environment(c);
  CHECK(c.backend.url.empty());
  CHECK(c.backend.api_key.empty());
  setenv("GEN_BACKEND_URL", "http://127.0.0.1:9/v1", 1);
  setenv("GEN_BACKEND_KEY", "k-123", 1);
  apply_environment(c);
  CHECK(c.backend.url == "http://127.0.0.1:9/v1");
  CHECK(c.backend.api_key == "k-123");
  CHECK(default_config_toml().find("api_key") == std::string::npos);
}

TEST_CASE("cli: end to end with the mock backend") {
  EnvGuard guard;
  const auto dir = egomind::testing::scratch_dir("cli");
  const auto data = dir + "/data.jsonl";

  auto r = cli("simulate --n-scenes 2 --seed 3 --verify --out " + data + " --jobs-out " + dir +
                   "/jobs.jsonl --fixtures-out " + dir + "/fx.jsonl",
               dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("oracle self-consistency: PASS") != std::string::npos);

  r = cli("gen-data " + dir + "/jobs.jsonl --fixtures " + dir + "/fx.jsonl --out " + dir + "/gen", dir);
  CHECK(r.code == 0);
  CHECK(fs::file_size(dir + "/gen/sft.jsonl") > 0);

  r = cli("validate-cot --strict " + dir + "/gen/sft.jsonl", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find(": FAIL") == std::string::npos);
  CHECK(r.out.find(" 0 FAIL") != std::string::npos);

  // the live backend stays off without --allow-live, even with credentials present
  setenv("GEN_BACKEND_URL", "http://127.0.0.1:9/v1", 1);
  r = cli("gen-data " + dir + "/jobs.jsonl --backend http --out " + dir + "/live", dir);
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(dir + "/live/sft.jsonl"));
  EnvGuard::clear();
  r = cli("gen-data " + dir + "/jobs.jsonl --backend http --allow-live --out " + dir + "/live", dir);
  CHECK(r.code == 2);

  r = cli("gen-data " + dir + "/jobs.jsonl --out " + dir + "/nofx", dir);
  CHECK(r.code == 2);

  {
    std::ofstream preds(dir + "/preds.jsonl");
    for (const auto& line : egomind::testing::aggregation_fixture({5, 4, 6, 4, 4, 4, 3, 5}, 10))
      preds << line << '\n';
  }
  r = cli("score " + dir + "/preds.jsonl --out " + dir + "/report", dir);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir + "/report/report.csv"));
  CHECK(fs::exists(dir + "/report/report.txt"));

  spit(dir + "/bad.jsonl", "{\"question_id\": \"q\"}\nnot json\n");
  CHECK(cli("score " + dir + "/bad.jsonl --out " + dir + "/r2", dir).code == 1);
  CHECK(cli("score --strict " + dir + "/bad.jsonl --out " + dir + "/r3", dir).code == 1);

  spit(dir + "/broken.txt", "Summary: nothing\n");
  CHECK(cli("validate-cot " + dir + "/broken.txt", dir).code == 1);

  {
    nlohmann::json g{{"question_id", "g"}, {"rollouts", nlohmann::json::array()}};
    for (double rw : {1.0, 0.0, 1.0, 0.0})
      g["rollouts"].push_back({{"reward", rw}, {"policy_logprobs", {-1.0}}, {"old_logprobs", {-1.0}},
                               {"ref_logprobs", {-1.0}}});
    spit(dir + "/groups.jsonl", g.dump() + "\n");
  }
  r = cli("grpo-check " + dir + "/groups.jsonl", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("objective 0\n") != std::string::npos);
  spit(dir + "/groups_bad.jsonl", R"({"question_id":"g","rewards":[1]})" "\n");
  CHECK(cli("grpo-check " + dir + "/groups_bad.jsonl", dir).code == 1);

  spit(dir + "/bad.toml", "[simulator]\nfov = 1\n");
  CHECK(cli("--config " + dir + "/bad.toml simulate --out " + dir + "/x.jsonl", dir).code == 2);
  CHECK(cli("frobnicate", dir).code == 2);
  CHECK(cli("--help", dir).code == 0);
  fs::remove_all(dir);
}
