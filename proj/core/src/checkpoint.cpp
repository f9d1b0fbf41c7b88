#include "crm/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace crm {
namespace {

constexpr char kMagic[4] = {'C', 'R', 'M', 'C'};

// Fixed-width little-endian I/O; the format targets little-endian hosts.
template <class T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw std::runtime_error("checkpoint: truncated while reading " + what);
  }
  return value;
}

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& entry : entries) {
    if (entry.name == name) {
      return &entry.tensor;
    }
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const std::vector<NamedParam>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  }
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, meta_json.size());
  out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& entry : entries) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entry.name.size()));
    out.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    const auto& shape = entry.tensor.shape();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) {
      write_pod<std::int32_t>(out, d);
    }
    out.write(reinterpret_cast<const char*>(entry.tensor.data()),
              static_cast<std::streamsize>(entry.tensor.numel() * sizeof(double)));
  }
  if (!out) {
    throw std::runtime_error("checkpoint: write to '" + path + "' failed");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  }
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: '" + path + "' has no CRMC header");
  }
  const auto version = read_pod<std::uint32_t>(in, "format version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(version));
  }

  Checkpoint ckpt;
  const auto meta_len = read_pod<std::uint64_t>(in, "metadata length");
  ckpt.meta_json.resize(meta_len);
  in.read(ckpt.meta_json.data(), static_cast<std::streamsize>(meta_len));
  if (!in) {
    throw std::runtime_error("checkpoint: truncated metadata");
  }

  const auto count = read_pod<std::uint32_t>(in, "entry count");
  ckpt.entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto name_len = read_pod<std::uint32_t>(in, "entry name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) {
      throw std::runtime_error("checkpoint: truncated entry name at entry " +
                               std::to_string(e));
    }
    const auto ndim = read_pod<std::uint32_t>(in, "rank of '" + name + "'");
    Shape shape(ndim);
    for (auto& d : shape) {
      d = read_pod<std::int32_t>(in, "dims of '" + name + "'");
    }
    const auto n = shape_numel(shape);
    std::vector<double> values(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) {
      throw std::runtime_error("checkpoint: truncated values of '" + name + "'");
    }
    ckpt.entries.push_back(NamedParam{std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  return ckpt;
}

}  // namespace crm
