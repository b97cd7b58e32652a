#include "egomind/reward_batch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "egomind/errors.hpp"

namespace egomind::reward {

GroupAudit audit_group(const RolloutGroup& group, KlReduction reduction) {
  GroupAudit audit;
  audit.question_id = group.question_id;
  try {
    validate(group);
    std::vector<double> rewards;
    for (const auto& r : group.rollouts) rewards.push_back(r.reward);
    audit.advantages = group_advantages(rewards);
    audit.zero_variance = std::all_of(rewards.begin(), rewards.end(),
                                      [&](double r) { return r == rewards.front(); });
    double total = 0.0;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      const auto& r = group.rollouts[i];
      double policy_sum = 0.0;
      double old_sum = 0.0;
      for (double lp : r.policy_logprobs) policy_sum += lp;
      for (double lp : r.old_logprobs) old_sum += lp;
      const double ratio = importance_ratio(policy_sum, old_sum);
      const double surrogate = clipped_surrogate(ratio, audit.advantages[i], group.epsilon);
      const double kl = kl_penalty(r.policy_logprobs, r.ref_logprobs, reduction);
      audit.ratios.push_back(ratio);
      audit.surrogates.push_back(surrogate);
      audit.kls.push_back(kl);
      total += surrogate - group.beta * kl;
    }
    audit.objective = total / static_cast<double>(group.rollouts.size());
  } catch (const Error& e) {
    audit.valid = false;
    audit.error = e.what();
  }
  return audit;
}

std::vector<GroupAudit> audit_groups_serial(std::span<const RolloutGroup> groups,
                                            KlReduction reduction) {
  std::vector<GroupAudit> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(audit_group(g, reduction));
  return out;
}

std::vector<GroupAudit> audit_groups(std::span<const RolloutGroup> groups, KlReduction reduction) {
  std::vector<GroupAudit> out(groups.size());
  const auto n = static_cast<std::int64_t>(groups.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = audit_group(groups[static_cast<std::size_t>(i)], reduction);
  }
  return out;
}

std::vector<double> mra_batch_serial(std::span<const double> predictions,
                                     std::span<const double> truths,
                                     std::span<const double> thresholds) {
  if (predictions.size() != truths.size()) {
    throw PreconditionError("prediction and truth batches differ in size");
  }
  std::vector<double> out(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    out[i] = mra(predictions[i], truths[i], thresholds);
  }
  return out;
}

std::vector<double> mra_batch(std::span<const double> predictions, std::span<const double> truths,
                              std::span<const double> thresholds) {
  if (predictions.size() != truths.size()) {
    throw PreconditionError("prediction and truth batches differ in size");
  }
  // Exceptions must not escape the parallel region, so check preconditions here.
  if (!predictions.empty()) (void)mra(predictions[0], truths[0], thresholds);
  for (double t : truths) {
    if (!std::isfinite(t)) throw PreconditionError("MRA truth must be finite");
  }
  std::vector<double> out(predictions.size());
  const auto n = static_cast<std::int64_t>(predictions.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = mra(predictions[k], truths[k], thresholds);
  }
  return out;
}

nlohmann::json to_json(const GroupAudit& a) {
  nlohmann::json j{{"question_id", a.question_id}, {"valid", a.valid}};
  if (!a.valid) {
    j["error"] = a.error;
    return j;
  }
  j["zero_variance"] = a.zero_variance;
  j["advantages"] = a.advantages;
  j["ratios"] = a.ratios;
  j["surrogates"] = a.surrogates;
  j["kls"] = a.kls;
  j["objective"] = a.objective;
  return j;
}

}  // namespace egomind::reward
