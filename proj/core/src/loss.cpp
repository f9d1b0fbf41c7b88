#include "crm/loss.hpp"

#include <stdexcept>

#include "crm/ops.hpp"

namespace crm {

Tensor activity_map_loss_stage(Tape& tape, const Tensor& predicted,
                               const Tensor& truth) {
  if (!predicted.defined() || !truth.defined() ||
      predicted.shape() != truth.shape()) {
    throw std::invalid_argument("activity map loss: shape mismatch");
  }
  return ops::sum_squares(tape, ops::sub(tape, predicted, truth));
}

Tensor activity_map_loss_total(Tape& tape, const std::vector<Tensor>& stage_maps,
                               const Tensor& truth) {
  if (stage_maps.empty()) {
    throw std::invalid_argument("activity map loss: no stage maps");
  }
  Tensor total = activity_map_loss_stage(tape, stage_maps.front(), truth);
  for (std::size_t t = 1; t < stage_maps.size(); ++t) {
    total = ops::add(tape, total,
                     activity_map_loss_stage(tape, stage_maps[t], truth));
  }
  return total;
}

Tensor group_loss(Tape& tape, const Tensor& probs, int group_index) {
  if (!probs.defined() || probs.rank() != 1) {
    throw std::invalid_argument("group loss: probs must be a vector");
  }
  const double inv_classes = 1.0 / static_cast<double>(probs.dim(0));
  return ops::log_pick(tape, probs, group_index, inv_classes);
}

Tensor total_loss(Tape& tape, const CrmOutput& output, const Tensor& truth_map,
                  int group_index, const LossWeights& weights) {
  if (weights.map_weight == 0.0 && weights.group_weight == 0.0) {
    throw std::invalid_argument("total loss: both weights are zero");
  }
  Tensor total;
  if (weights.map_weight != 0.0 && !output.stage_maps.empty()) {
    total = ops::scale(
        tape, activity_map_loss_total(tape, output.stage_maps, truth_map),
        weights.map_weight);
  }
  if (weights.group_weight != 0.0 && output.probs.defined()) {
    Tensor g = ops::scale(tape, group_loss(tape, output.probs, group_index),
                          weights.group_weight);
    total = total.defined() ? ops::add(tape, total, g) : g;
  }
  if (!total.defined()) {
    throw std::invalid_argument(
        "total loss: no active term (missing maps and probabilities)");
  }
  return total;
}

}  // namespace crm
