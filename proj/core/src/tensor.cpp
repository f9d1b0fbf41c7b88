#include "crm/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace crm {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) {
      throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    }
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  s_ = std::make_shared<Storage>();
  s_->shape = std::move(shape);
  s_->values.assign(n, 0.0);
  s_->requires_grad = requires_grad;
  if (requires_grad) {
    s_->grad.assign(n, 0.0);
  }
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  const auto n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  s_ = std::make_shared<Storage>();
  s_->shape = std::move(shape);
  s_->values = std::move(values);
  s_->requires_grad = requires_grad;
  if (requires_grad) {
    s_->grad.assign(static_cast<std::size_t>(n), 0.0);
  }
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    t.data()[i] = value;
  }
  return t;
}

void Tensor::set_requires_grad(bool on) {
  if (on == s_->requires_grad) {
    return;
  }
  s_->requires_grad = on;
  if (on) {
    s_->grad.assign(s_->values.size(), 0.0);
  } else {
    s_->grad.clear();
  }
}

void Tensor::zero_grad() {
  if (s_->requires_grad) {
    std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
  }
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() called on tensor with " +
                                std::to_string(numel()) + " elements");
  }
  return s_->values[0];
}

Tensor Tensor::clone() const {
  return Tensor(s_->shape, s_->values, false);
}

bool Tensor::all_finite() const {
  for (double v : s_->values) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

void Tape::record(Tensor output, std::function<void()> backward_step) {
  if (!recording_) {
    return;
  }
  nodes_.push_back(Node{std::move(output), std::move(backward_step)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss");
  }
  // Non-leaf outputs accumulate during the sweep; clear them so repeated
  // backward() calls contribute exactly one gradient each to the leaves.
  for (auto& node : nodes_) {
    node.output.zero_grad();
  }
  if (!loss.requires_grad()) {
    return;  // nothing on the tape depends on it
  }
  Tensor seed = loss;  // handles share storage
  seed.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward_step();
  }
}

}  // namespace crm
