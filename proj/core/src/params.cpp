#include "crm/params.hpp"

#include <stdexcept>
#include <utility>

namespace crm {

Tensor& ParamSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  tensor.set_requires_grad(true);
  items_.push_back(NamedParam{std::move(name), std::move(tensor)});
  return items_.back().tensor;
}

Tensor* ParamSet::find(std::string_view name) {
  for (auto& item : items_) {
    if (item.name == name) {
      return &item.tensor;
    }
  }
  return nullptr;
}

const Tensor* ParamSet::find(std::string_view name) const {
  for (const auto& item : items_) {
    if (item.name == name) {
      return &item.tensor;
    }
  }
  return nullptr;
}

std::int64_t ParamSet::total_size() const {
  std::int64_t n = 0;
  for (const auto& item : items_) {
    n += item.tensor.numel();
  }
  return n;
}

void ParamSet::zero_grad() {
  for (auto& item : items_) {
    item.tensor.zero_grad();
  }
}

}  // namespace crm
