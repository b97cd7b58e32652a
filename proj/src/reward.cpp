#include "egomind/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "egomind/errors.hpp"

namespace egomind::reward {

std::vector<double> default_mra_thresholds() {
  return {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
}

double mra(double prediction, double truth, std::span<const double> thresholds) {
  if (thresholds.empty()) throw PreconditionError("MRA needs at least one threshold");
  if (!std::isfinite(truth)) throw PreconditionError("MRA truth must be finite");
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw PreconditionError("MRA thresholds must lie in (0, 1)");
  }
  if (!std::isfinite(prediction)) return 0.0;
  if (truth == 0.0) return prediction == 0.0 ? 1.0 : 0.0;

  const double rel = std::abs(prediction - truth) / std::abs(truth);
  std::size_t hits = 0;
  for (double t : thresholds) hits += rel < 1.0 - t ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(thresholds.size());
}

int mcq_accuracy(std::string_view answer_text, char truth_letter) {
  truth_letter = static_cast<char>(std::toupper(static_cast<unsigned char>(truth_letter)));
  std::set<char> letters;
  std::size_t i = 0;
  while (i < answer_text.size()) {
    while (i < answer_text.size() && !std::isalnum(static_cast<unsigned char>(answer_text[i]))) ++i;
    std::size_t start = i;
    while (i < answer_text.size() && std::isalnum(static_cast<unsigned char>(answer_text[i]))) ++i;
    if (i - start == 1) {
      char c = static_cast<char>(std::toupper(static_cast<unsigned char>(answer_text[start])));
      if (c >= 'A' && c <= 'D') letters.insert(c);
    }
  }
  return letters.size() == 1 && *letters.begin() == truth_letter ? 1 : 0;
}

double combined_reward(double format_score, double accuracy_score, double w_format,
                       double w_accuracy) {
  if (w_format < 0 || w_accuracy < 0) throw PreconditionError("reward weights must be non-negative");
  return w_format * format_score + w_accuracy * accuracy_score;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw PreconditionError("a group needs at least two rewards");
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return std::vector<double>(rewards.size(), 0.0);

  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) return std::vector<double>(rewards.size(), 0.0);

  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / sd);
  return out;
}

double importance_ratio(double policy_logprob_sum, double old_logprob_sum) {
  if (!std::isfinite(policy_logprob_sum) || !std::isfinite(old_logprob_sum)) {
    throw NumericError("log-probability sums must be finite");
  }
  const double r = std::exp(policy_logprob_sum - old_logprob_sum);
  if (!std::isfinite(r) || !(r > 0.0)) {
    throw NumericError("importance ratio is not a positive finite number (log diff " +
                       std::to_string(policy_logprob_sum - old_logprob_sum) + ")");
  }
  return r;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw PreconditionError("epsilon must lie in (0, 1)");
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_penalty(std::span<const double> policy_logprobs, std::span<const double> ref_logprobs,
                  KlReduction reduction) {
  if (policy_logprobs.size() != ref_logprobs.size()) {
    throw PreconditionError("KL needs equal-length log-probability sequences");
  }
  if (policy_logprobs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < policy_logprobs.size(); ++i) {
    const double d = ref_logprobs[i] - policy_logprobs[i];
    // expm1 keeps the small-|d| terms accurate and non-negative.
    total += std::expm1(d) - d;
  }
  return reduction == KlReduction::Mean ? total / static_cast<double>(policy_logprobs.size())
                                        : total;
}

void validate(const RolloutGroup& group) {
  if (group.rollouts.size() < 2) {
    throw PreconditionError("group " + group.question_id + " has fewer than two rollouts");
  }
  if (!(group.epsilon > 0.0 && group.epsilon < 1.0)) {
    throw PreconditionError("group " + group.question_id + ": epsilon must lie in (0, 1)");
  }
  if (!(group.beta >= 0.0)) {
    throw PreconditionError("group " + group.question_id + ": beta must be non-negative");
  }
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const auto& r = group.rollouts[i];
    const auto where = "group " + group.question_id + " rollout " + std::to_string(i);
    if (r.policy_logprobs.empty()) throw PreconditionError(where + " has no tokens");
    if (r.old_logprobs.size() != r.policy_logprobs.size() ||
        r.ref_logprobs.size() != r.policy_logprobs.size()) {
      throw PreconditionError(where + ": log-probability sequences differ in length");
    }
    if (!std::isfinite(r.reward)) throw PreconditionError(where + ": reward is not finite");
    for (const auto* seq : {&r.policy_logprobs, &r.old_logprobs, &r.ref_logprobs}) {
      for (double lp : *seq) {
        if (!(lp <= 0.0)) throw PreconditionError(where + ": log-probability " + std::to_string(lp) + " > 0");
      }
    }
  }
}

double grpo_objective(const RolloutGroup& group, KlReduction reduction) {
  validate(group);
  std::vector<double> rewards;
  rewards.reserve(group.rollouts.size());
  for (const auto& r : group.rollouts) rewards.push_back(r.reward);
  const auto adv = group_advantages(rewards);

  double total = 0.0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const auto& r = group.rollouts[i];
    double policy_sum = 0.0;
    double old_sum = 0.0;
    for (double lp : r.policy_logprobs) policy_sum += lp;
    for (double lp : r.old_logprobs) old_sum += lp;
    const double ratio = importance_ratio(policy_sum, old_sum);
    total += clipped_surrogate(ratio, adv[i], group.epsilon) -
             group.beta * kl_penalty(r.policy_logprobs, r.ref_logprobs, reduction);
  }
  return total / static_cast<double>(group.rollouts.size());
}

RolloutGroup rollout_group_from_json(const nlohmann::json& j) {
  RolloutGroup g;
  g.question_id = j.at("question_id").get<std::string>();
  g.epsilon = j.at("epsilon").get<double>();
  g.beta = j.at("beta").get<double>();
  for (const auto& r : j.at("rollouts")) {
    Rollout ro;
    ro.reward = r.at("reward").get<double>();
    ro.policy_logprobs = r.at("policy_logprobs").get<std::vector<double>>();
    ro.old_logprobs = r.at("old_logprobs").get<std::vector<double>>();
    ro.ref_logprobs = r.at("ref_logprobs").get<std::vector<double>>();
    ro.response_text = r.value("response_text", std::string{});
    g.rollouts.push_back(std::move(ro));
  }
  return g;
}

nlohmann::json to_json(const RolloutGroup& g) {
  nlohmann::json rollouts = nlohmann::json::array();
  for (const auto& r : g.rollouts) {
    rollouts.push_back({{"reward", r.reward},
                        {"policy_logprobs", r.policy_logprobs},
                        {"old_logprobs", r.old_logprobs},
                        {"ref_logprobs", r.ref_logprobs},
                        {"response_text", r.response_text}});
  }
  return {{"question_id", g.question_id},
          {"epsilon", g.epsilon},
          {"beta", g.beta},
          {"rollouts", rollouts}};
}

}  // namespace egomind::reward
