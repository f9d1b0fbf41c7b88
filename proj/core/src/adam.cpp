#include "crm/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace crm {

AdamState::AdamState(std::int64_t parameter_count, AdamConfig config)
    : config_(config),
      m_(static_cast<std::size_t>(parameter_count), 0.0),
      v_(static_cast<std::size_t>(parameter_count), 0.0) {}

void AdamState::step(ParamSet& params) {
  if (params.total_size() != parameter_count()) {
    throw std::invalid_argument("adam: parameter count " +
                                std::to_string(params.total_size()) +
                                " does not match state size " +
                                std::to_string(parameter_count()));
  }
  step_ += 1;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;

  std::size_t offset = 0;
  for (auto& item : params.items()) {
    double* p = item.tensor.data();
    const double* g = item.tensor.grad();
    if (g == nullptr) {
      throw std::invalid_argument("adam: parameter '" + item.name +
                                  "' has no gradient buffer");
    }
    const std::int64_t n = item.tensor.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      double& m = m_[offset + static_cast<std::size_t>(i)];
      double& v = v_[offset + static_cast<std::size_t>(i)];
      m = b1 * m + (1.0 - b1) * g[i];
      v = b2 * v + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m / corr1;
      const double v_hat = v / corr2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
    offset += static_cast<std::size_t>(n);
  }
}

void AdamState::restore(std::vector<double> m, std::vector<double> v,
                        std::int64_t step) {
  if (m.size() != v.size()) {
    throw std::invalid_argument("adam: moment buffers differ in size");
  }
  m_ = std::move(m);
  v_ = std::move(v);
  step_ = step;
}

}  // namespace crm
