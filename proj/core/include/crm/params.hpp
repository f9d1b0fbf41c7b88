#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "crm/tensor.hpp"

namespace crm {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Ordered set of named learnable tensors. Order is creation order and is the
/// canonical flattening used by the optimizer and the checkpoint files.
class ParamSet {
 public:
  Tensor& add(std::string name, Tensor tensor);
  Tensor* find(std::string_view name);
  const Tensor* find(std::string_view name) const;

  std::vector<NamedParam>& items() { return items_; }
  const std::vector<NamedParam>& items() const { return items_; }

  std::size_t count() const { return items_.size(); }
  std::int64_t total_size() const;
  void zero_grad();

 private:
  std::vector<NamedParam> items_;
};

}  // namespace crm
