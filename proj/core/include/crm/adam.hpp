#pragma once

#include <cstdint>
#include <vector>

#include "crm/params.hpp"

namespace crm {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers follow the flattened parameter
/// order of the ParamSet handed to step(), so the same state must always be
/// used with the same parameter layout.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::int64_t parameter_count, AdamConfig config);

  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  double learning_rate() const { return config_.learning_rate; }
  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  std::int64_t parameter_count() const { return static_cast<std::int64_t>(m_.size()); }

  /// One update: reads tensor gradients, writes tensor values, increments the
  /// step counter. Deterministic given inputs.
  void step(ParamSet& params);

  // Checkpoint plumbing: raw moment buffers plus the step counter.
  const std::vector<double>& first_moments() const { return m_; }
  const std::vector<double>& second_moments() const { return v_; }
  void restore(std::vector<double> m, std::vector<double> v, std::int64_t step);

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t step_ = 0;
};

}  // namespace crm
