#pragma once

#include <vector>

#include "crm/model.hpp"
#include "crm/tensor.hpp"

namespace crm {

/// Multi-task loss weights: map term w_A, group term w_G.
struct LossWeights {
  double map_weight = 1.0;
  double group_weight = 0.0;
};

/// Plain sum of squared differences over all cells of one stage map.
Tensor activity_map_loss_stage(Tape& tape, const Tensor& predicted,
                               const Tensor& truth);

/// Sum of the per-stage losses; the same ground truth applies to every stage.
Tensor activity_map_loss_total(Tape& tape, const std::vector<Tensor>& stage_maps,
                               const Tensor& truth);

/// Cross entropy of the predicted probabilities against a one-hot group
/// label, scaled by 1/n_group: -(1/N_G) * log p_hat[group]. The probability
/// is clamped at 1e-12 before the log.
Tensor group_loss(Tape& tape, const Tensor& probs, int group_index);

/// w_A * L_A + w_G * L_G. Terms whose weight is zero (or whose inputs are
/// absent, e.g. no stage maps in feature-only mode) are skipped entirely.
Tensor total_loss(Tape& tape, const CrmOutput& output, const Tensor& truth_map,
                  int group_index, const LossWeights& weights);

}  // namespace crm
