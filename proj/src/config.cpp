#include "egomind/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>

#include <toml.hpp>

#include "egomind/errors.hpp"

namespace egomind {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Reader {
  std::string source;

  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    throw ConfigError(source + ": " + key + ": " + what);
  }
  double real(const toml::node& n, const std::string& key) const {
    if (auto v = n.value<double>()) return *v;  // integers convert too
    bad(key, "expected a number");
  }
  std::int64_t integer(const toml::node& n, const std::string& key) const {
    if (auto v = n.value_exact<std::int64_t>()) return *v;
    bad(key, "expected an integer");
  }
  std::string string(const toml::node& n, const std::string& key) const {
    if (auto v = n.value_exact<std::string>()) return *v;
    bad(key, "expected a string");
  }
  bool boolean(const toml::node& n, const std::string& key) const {
    if (auto v = n.value_exact<bool>()) return *v;
    bad(key, "expected true or false");
  }
  std::vector<double> reals(const toml::node& n, const std::string& key) const {
    const auto* arr = n.as_array();
    if (!arr) bad(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) out.push_back(real(e, key));
    return out;
  }
};

using Setter = std::function<void(const toml::node&, const std::string&)>;

}  // namespace

AppConfig parse_config(std::string_view text, std::string_view source) {
  AppConfig c;
  Reader r{std::string(source)};
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw ConfigError(std::string(source) + ":" + std::to_string(b.line) + ":" + std::to_string(b.column) +
                      ": " + std::string(e.description()));
  }

  const std::map<std::string, std::map<std::string, Setter>> sections = {
      {"simulator",
       {{"step", [&](auto& n, auto& k) { c.sim.step = r.real(n, k); }},
        {"turn_quantum_deg", [&](auto& n, auto& k) { c.sim.turn_quantum = r.real(n, k) * kDeg; }},
        {"fov_deg", [&](auto& n, auto& k) { c.sim.fov = r.real(n, k) * kDeg; }},
        {"range", [&](auto& n, auto& k) { c.sim.range = r.real(n, k); }},
        {"near_threshold", [&](auto& n, auto& k) { c.sim.near_threshold = r.real(n, k); }},
        {"grid_cell", [&](auto& n, auto& k) { c.sim.grid_cell = r.real(n, k); }},
        {"wall_margin", [&](auto& n, auto& k) { c.sim.wall_margin = r.real(n, k); }},
        {"frames", [&](auto& n, auto& k) { c.sim.n_frames = static_cast<int>(r.integer(n, k)); }},
        {"questions_per_family",
         [&](auto& n, auto& k) { c.sim.questions_per_family = static_cast<int>(r.integer(n, k)); }},
        {"min_objects", [&](auto& n, auto& k) { c.run.min_objects = static_cast<int>(r.integer(n, k)); }},
        {"max_objects", [&](auto& n, auto& k) { c.run.max_objects = static_cast<int>(r.integer(n, k)); }},
        {"seed", [&](auto& n, auto& k) { c.run.seed = static_cast<std::uint64_t>(r.integer(n, k)); }},
        {"min_room_width", [&](auto& n, auto& k) { c.scene.min_room_width = r.real(n, k); }},
        {"max_room_width", [&](auto& n, auto& k) { c.scene.max_room_width = r.real(n, k); }},
        {"min_room_depth", [&](auto& n, auto& k) { c.scene.min_room_depth = r.real(n, k); }},
        {"max_room_depth", [&](auto& n, auto& k) { c.scene.max_room_depth = r.real(n, k); }},
        {"wall_height", [&](auto& n, auto& k) { c.scene.wall_height = r.real(n, k); }},
        {"max_placement_attempts",
         [&](auto& n, auto& k) { c.scene.max_placement_attempts = static_cast<int>(r.integer(n, k)); }}}},
      {"psa",
       {{"rounds", [&](auto& n, auto& k) { c.psa.rounds = static_cast<int>(r.integer(n, k)); }},
        {"max_len", [&](auto& n, auto& k) { c.psa.max_len = static_cast<int>(r.integer(n, k)); }}}},
      {"reward",
       {{"w_format", [&](auto& n, auto& k) { c.reward.w_format = r.real(n, k); }},
        {"w_accuracy", [&](auto& n, auto& k) { c.reward.w_accuracy = r.real(n, k); }},
        {"epsilon", [&](auto& n, auto& k) { c.reward.epsilon = r.real(n, k); }},
        {"beta", [&](auto& n, auto& k) { c.reward.beta = r.real(n, k); }},
        {"group_size", [&](auto& n, auto& k) { c.reward.group_size = static_cast<int>(r.integer(n, k)); }},
        {"mra_thresholds", [&](auto& n, auto& k) { c.reward.mra_thresholds = r.reals(n, k); }},
        {"kl_reduction",
         [&](auto& n, auto& k) {
           const auto s = r.string(n, k);
           if (s == "mean") c.reward.kl_reduction = reward::KlReduction::Mean;
           else if (s == "sum") c.reward.kl_reduction = reward::KlReduction::Sum;
           else r.bad(k, "expected \"mean\" or \"sum\"");
         }}}},
      {"cot",
       {{"summary", [&](auto& n, auto& k) { c.grammar.markers.summary = r.string(n, k); }},
        {"rpc", [&](auto& n, auto& k) { c.grammar.markers.rpc = r.string(n, k); }},
        {"psa", [&](auto& n, auto& k) { c.grammar.markers.psa = r.string(n, k); }},
        {"reasoning", [&](auto& n, auto& k) { c.grammar.markers.reasoning = r.string(n, k); }},
        {"frame_block", [&](auto& n, auto& k) { c.grammar.markers.frame_block = r.string(n, k); }},
        {"transition_block", [&](auto& n, auto& k) { c.grammar.markers.transition_block = r.string(n, k); }},
        {"targets_label", [&](auto& n, auto& k) { c.grammar.markers.targets_label = r.string(n, k); }},
        {"candidates_label", [&](auto& n, auto& k) { c.grammar.markers.candidates_label = r.string(n, k); }},
        {"relations_label", [&](auto& n, auto& k) { c.grammar.markers.relations_label = r.string(n, k); }},
        {"lenient", [&](auto& n, auto& k) { c.grammar.lenient = r.boolean(n, k); }}}},
      {"backend",
       {{"kind", [&](auto& n, auto& k) { c.backend.kind = r.string(n, k); }},
        {"url", [&](auto& n, auto& k) { c.backend.url = r.string(n, k); }},
        {"timeout_s", [&](auto& n, auto& k) { c.backend.timeout_s = r.real(n, k); }},
        {"temperature", [&](auto& n, auto& k) { c.pipeline.temperature = r.real(n, k); }},
        {"max_output_tokens",
         [&](auto& n, auto& k) { c.pipeline.max_output_tokens = static_cast<int>(r.integer(n, k)); }}}},
      {"pipeline",
       {{"parallelism", [&](auto& n, auto& k) { c.pipeline.parallelism = static_cast<int>(r.integer(n, k)); }},
        {"retry_limit", [&](auto& n, auto& k) { c.pipeline.retry_limit = static_cast<int>(r.integer(n, k)); }},
        {"backoff_base_ms", [&](auto& n, auto& k) { c.pipeline.backoff_base_ms = r.real(n, k); }},
        {"backoff_max_ms", [&](auto& n, auto& k) { c.pipeline.backoff_max_ms = r.real(n, k); }},
        {"token_budget", [&](auto& n, auto& k) { c.pipeline.token_budget = r.integer(n, k); }},
        {"template_dir", [&](auto& n, auto& k) { c.template_dir = r.string(n, k); }}}},
      {"paths", {{"out", [&](auto& n, auto& k) { c.out_dir = r.string(n, k); }}}},
  };

  for (const auto& [name, node] : root) {
    const std::string section(name.str());
    if (section == "models") {
      const auto* t = node.as_table();
      if (!t) r.bad(section, "expected a table");
      for (const auto& [stage, hint] : *t) {
        const std::string key = section + "." + std::string(stage.str());
        gen::Stage s;
        try {
          s = gen::stage_from_string(stage.str());
        } catch (const Error&) {
          r.bad(key, "unknown stage");
        }
        c.pipeline.model_hints[s] = r.string(hint, key);
      }
      continue;
    }
    auto sec = sections.find(section);
    if (sec == sections.end()) r.bad(section, "unknown section");
    const auto* t = node.as_table();
    if (!t) r.bad(section, "expected a table");
    for (const auto& [key, value] : *t) {
      const std::string full = section + "." + std::string(key.str());
      auto setter = sec->second.find(std::string(key.str()));
      if (setter == sec->second.end()) r.bad(full, "unknown key");
      setter->second(value, full);
    }
  }
  c.pipeline.grammar = c.grammar;
  c.pipeline.mra_thresholds = c.reward.mra_thresholds;
  validate(c);
  return c;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path);
}

void apply_environment(AppConfig& c) {
  if (const char* url = std::getenv("GEN_BACKEND_URL"); url && *url) c.backend.url = url;
  if (const char* key = std::getenv("GEN_BACKEND_KEY"); key && *key) c.backend.api_key = key;
}

void validate(const AppConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(c.sim.step > 0, "simulator.step must be positive");
  need(c.sim.turn_quantum > 0 && c.sim.turn_quantum < std::numbers::pi,
       "simulator.turn_quantum_deg must lie in (0, 180)");
  need(c.sim.fov > 0 && c.sim.fov < 2 * std::numbers::pi, "simulator.fov_deg must lie in (0, 360)");
  need(c.sim.range > 0, "simulator.range must be positive");
  need(c.sim.near_threshold > 0, "simulator.near_threshold must be positive");
  need(c.sim.grid_cell > 0, "simulator.grid_cell must be positive");
  need(c.sim.wall_margin >= 0, "simulator.wall_margin must be non-negative");
  need(c.sim.n_frames >= 1, "simulator.frames must be at least 1");
  need(c.sim.questions_per_family >= 1, "simulator.questions_per_family must be at least 1");
  need(c.run.min_objects >= 1 && c.run.max_objects >= c.run.min_objects,
       "simulator.min_objects/max_objects must satisfy 1 <= min <= max");
  need(c.scene.min_room_width > 0 && c.scene.max_room_width >= c.scene.min_room_width &&
           c.scene.min_room_depth > 0 && c.scene.max_room_depth >= c.scene.min_room_depth,
       "simulator room bounds must be positive and ordered");
  need(c.scene.max_placement_attempts >= 1, "simulator.max_placement_attempts must be at least 1");
  need(c.psa.rounds >= 0, "psa.rounds must be non-negative");
  need(c.psa.max_len >= 1, "psa.max_len must be at least 1");
  need(c.reward.w_format >= 0 && c.reward.w_accuracy >= 0, "reward weights must be non-negative");
  need(c.reward.epsilon > 0 && c.reward.epsilon < 1, "reward.epsilon must lie in (0, 1)");
  need(c.reward.beta >= 0, "reward.beta must be non-negative");
  need(c.reward.group_size >= 2, "reward.group_size must be at least 2");
  need(!c.reward.mra_thresholds.empty(), "reward.mra_thresholds must not be empty");
  for (double t : c.reward.mra_thresholds) need(t > 0 && t < 1, "reward.mra_thresholds must lie in (0, 1)");
  need(c.backend.kind == "mock" || c.backend.kind == "http", "backend.kind must be \"mock\" or \"http\"");
  need(c.backend.timeout_s > 0, "backend.timeout_s must be positive");
  need(c.pipeline.temperature >= 0, "backend.temperature must be non-negative");
  need(c.pipeline.max_output_tokens >= 1, "backend.max_output_tokens must be at least 1");
  need(c.pipeline.parallelism >= 1, "pipeline.parallelism must be at least 1");
  need(c.pipeline.retry_limit >= 1, "pipeline.retry_limit must be at least 1");
  need(c.pipeline.backoff_base_ms >= 0 && c.pipeline.backoff_max_ms >= 0, "pipeline backoff must be non-negative");
  need(c.pipeline.token_budget >= 0, "pipeline.token_budget must be non-negative");
  const auto& m = c.grammar.markers;
  for (const auto* s : {&m.summary, &m.rpc, &m.psa, &m.reasoning, &m.frame_block, &m.transition_block,
                        &m.targets_label, &m.candidates_label, &m.relations_label}) {
    need(!s->empty() && s->find('\n') == std::string::npos, "cot markers must be non-empty single lines");
  }
}

std::string default_config_toml() {
  return R"(# All keys are optional; these are the defaults.

[simulator]
step = 0.5                 # metres per translation step
turn_quantum_deg = 90.0
fov_deg = 90.0
range = 4.0                # metres
near_threshold = 1.0       # metres
grid_cell = 0.5            # route-planning occupancy grid
wall_margin = 0.25
frames = 16
questions_per_family = 2
min_objects = 8
max_objects = 16
seed = 0
min_room_width = 6.0
max_room_width = 9.0
min_room_depth = 5.0
max_room_depth = 8.0
wall_height = 3.0
max_placement_attempts = 2000

[psa]
rounds = 2
max_len = 4

[reward]
w_format = 0.2
w_accuracy = 0.8
epsilon = 0.2
beta = 0.0001
group_size = 8
mra_thresholds = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95]
kl_reduction = "mean"

[cot]
summary = "## Summary"
rpc = "## Role-Play Caption"
psa = "## Progressive Spatial Analysis"
reasoning = "## Reasoning"
frame_block = "[Frame]"
transition_block = "[Transition]"
targets_label = "Targets:"
candidates_label = "Candidates:"
relations_label = "Relations:"
lenient = false

[backend]
kind = "mock"              # "http" also needs --allow-live
url = ""                   # GEN_BACKEND_URL overrides; the key comes from GEN_BACKEND_KEY only
timeout_s = 120.0
temperature = 0.0
max_output_tokens = 2048

[models]
caption_frames = "gpt-4o"
infer_transitions = "gpt-4o"
synthesize_rpc = "qwen2.5-72b-instruct"
extract_context = "gpt-4o"
merge_cot = "gpt-4o"
quality_check = "gpt-4o"

[pipeline]
parallelism = 1
retry_limit = 3            # attempts per stage, including the first
backoff_base_ms = 200.0
backoff_max_ms = 5000.0
token_budget = 0           # 0 = unlimited
template_dir = ""          # empty = built-in templates

[paths]
out = "out"
)";
}

}  // namespace egomind
