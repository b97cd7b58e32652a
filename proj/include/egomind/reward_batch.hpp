#pragma once

#include <span>
#include <string>
#include <vector>

#include "egomind/reward.hpp"

// Batched kernels over many rollout groups / predictions. The *_serial
// variants are the reference implementations the OpenMP versions are tested
// against; both produce identical results element for element.
namespace egomind::reward {

struct GroupAudit {
  std::string question_id;
  bool valid = true;
  std::string error;  // first violated invariant when !valid
  bool zero_variance = false;
  std::vector<double> advantages;
  std::vector<double> ratios;
  std::vector<double> surrogates;
  std::vector<double> kls;
  double objective = 0.0;
};

// Recomputes every GRPO quantity for one group; never throws.
GroupAudit audit_group(const RolloutGroup& group, KlReduction reduction = KlReduction::Mean);

std::vector<GroupAudit> audit_groups(std::span<const RolloutGroup> groups,
                                     KlReduction reduction = KlReduction::Mean);
std::vector<GroupAudit> audit_groups_serial(std::span<const RolloutGroup> groups,
                                            KlReduction reduction = KlReduction::Mean);

std::vector<double> mra_batch(std::span<const double> predictions, std::span<const double> truths,
                              std::span<const double> thresholds);
std::vector<double> mra_batch_serial(std::span<const double> predictions,
                                     std::span<const double> truths,
                                     std::span<const double> thresholds);

nlohmann::json to_json(const GroupAudit& audit);

}  // namespace egomind::reward
