#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "egomind/cot_format.hpp"
#include "egomind/pipeline.hpp"
#include "egomind/psa.hpp"
#include "egomind/reward.hpp"
#include "egomind/simulator.hpp"

// The shared configuration file. Every key is optional; unknown keys and
// out-of-range values raise ConfigError.
namespace egomind {

struct RewardConfig {
  double w_format = 0.2;
  double w_accuracy = 0.8;
  double epsilon = 0.2;
  double beta = 1e-4;
  int group_size = 8;
  std::vector<double> mra_thresholds = reward::default_mra_thresholds();
  reward::KlReduction kl_reduction = reward::KlReduction::Mean;
};

struct SimulatorRunConfig {
  int min_objects = 8;
  int max_objects = 16;
  std::uint64_t seed = 0;
};

struct BackendConfig {
  std::string kind = "mock";  // mock | http
  std::string url;            // GEN_BACKEND_URL overrides, --backend-url overrides both
  std::string api_key;        // only ever from GEN_BACKEND_KEY
  double timeout_s = 120.0;
};

struct AppConfig {
  sim::SimConfig sim;
  sim::SceneConfig scene;
  SimulatorRunConfig run;
  psa::Config psa;
  RewardConfig reward;
  cot::Grammar grammar;
  BackendConfig backend;
  gen::PipelineConfig pipeline;
  std::string template_dir;  // empty = built-in templates
  std::string out_dir = "out";
};

AppConfig parse_config(std::string_view toml_text, std::string_view source = "<config>");
AppConfig load_config(const std::string& path);

// Applies GEN_BACKEND_URL and GEN_BACKEND_KEY when set.
void apply_environment(AppConfig& config);

// Throws ConfigError when a value breaks a module precondition.
void validate(const AppConfig& config);

// The defaults, as a commented config file.
std::string default_config_toml();

}  // namespace egomind
