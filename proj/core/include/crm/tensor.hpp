#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace crm {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of 64-bit floats with an optional gradient buffer.
/// A Tensor is a cheap handle; copies share the underlying storage, which is
/// what lets recorded backward steps write gradients into the same parameter
/// another step reads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  int rank() const { return static_cast<int>(s_->shape.size()); }
  int dim(int i) const { return s_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(s_->values.size()); }

  double* data() { return s_->values.data(); }
  const double* data() const { return s_->values.data(); }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool on);

  /// Null unless requires_grad.
  double* grad() { return s_->requires_grad ? s_->grad.data() : nullptr; }
  const double* grad() const { return s_->requires_grad ? s_->grad.data() : nullptr; }
  void zero_grad();

  /// Value of a single-element tensor.
  double item() const;

  /// Deep copy of the values (fresh storage, no gradient history).
  Tensor clone() const;

  bool all_finite() const;
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized numel() iff requires_grad
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/// Reverse-mode tape. Operations append one node per output tensor; backward
/// replays the nodes in exact reverse insertion order. Gradients of recorded
/// (non-leaf) outputs are cleared before each sweep, so every backward() call
/// adds exactly one dLoss/dLeaf contribution to leaf tensors.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  void record(Tensor output, std::function<void()> backward_step);

  /// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. The loss must be a
  /// scalar; anything else is rejected.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_step;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
};

}  // namespace crm
