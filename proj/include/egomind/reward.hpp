#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace egomind::reward {

// {0.50, 0.55, ..., 0.95}
std::vector<double> default_mra_thresholds();

// Mean over thresholds t of [|pred - truth| / |truth| < 1 - t]. A zero truth
// scores 1 only for an exact zero prediction.
double mra(double prediction, double truth, std::span<const double> thresholds);

// 1 iff exactly one distinct option letter A-D (any case) is present as a
// standalone token of the answer text and it equals truth_letter.
int mcq_accuracy(std::string_view answer_text, char truth_letter);

double combined_reward(double format_score, double accuracy_score, double w_format,
                       double w_accuracy);

// (R_i - mean) / std with population std; a constant group yields zeros.
std::vector<double> group_advantages(std::span<const double> rewards);

// exp(policy - old); throws NumericError if the result is not a positive finite number.
double importance_ratio(double policy_logprob_sum, double old_logprob_sum);

double clipped_surrogate(double ratio, double advantage, double epsilon);

enum class KlReduction { Mean, Sum };

// Per-token exp(d) - d - 1 with d = ref - policy, reduced over tokens.
double kl_penalty(std::span<const double> policy_logprobs, std::span<const double> ref_logprobs,
                  KlReduction reduction = KlReduction::Mean);

struct Rollout {
  std::string response_text;
  double reward = 0.0;
  std::vector<double> policy_logprobs;
  std::vector<double> old_logprobs;
  std::vector<double> ref_logprobs;

  std::size_t token_count() const { return policy_logprobs.size(); }
};

struct RolloutGroup {
  std::string question_id;
  std::vector<Rollout> rollouts;
  double epsilon = 0.2;
  double beta = 1e-4;
};

// Throws PreconditionError on the first violated group invariant.
void validate(const RolloutGroup& group);

double grpo_objective(const RolloutGroup& group, KlReduction reduction = KlReduction::Mean);

RolloutGroup rollout_group_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RolloutGroup& group);

}  // namespace egomind::reward
