#pragma once

#include <string>
#include <vector>

#include "crm/params.hpp"

namespace crm {

/// Named double arrays plus one free-form metadata string (JSON by
/// convention), as stored in a checkpoint file.
struct Checkpoint {
  std::string meta_json;
  std::vector<NamedParam> entries;

  const Tensor* find(std::string_view name) const;
};

/// Binary container, versioned, little-endian, bit-exact round trip.
void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const std::vector<NamedParam>& entries);

Checkpoint load_checkpoint(const std::string& path);

inline constexpr unsigned kCheckpointVersion = 1;

}  // namespace crm
