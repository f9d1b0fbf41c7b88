#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crm/activity_map.hpp"
#include "crm/tensor.hpp"

namespace crm {

enum class LabelRule { kMajority, kKeyActorSide };

std::string to_string(LabelRule rule);
LabelRule label_rule_from_string(const std::string& name);

/// Knobs of the synthetic scene generator. Coordinates are image pixels;
/// boxes are integer-aligned.
struct SyntheticConfig {
  int image_height = 96;
  int image_width = 160;
  int grid_height = 24;
  int grid_width = 40;
  int n_individual = 4;
  int n_group = 4;
  int min_persons = 3;
  int max_persons = 8;
  int frames = 1;  // K
  int scene_count = 400;
  std::uint64_t seed = 7;
  int modalities = 1;  // 1 = appearance only, 2 = adds a motion/edge stream
  LabelRule rule = LabelRule::kKeyActorSide;

  int min_person_width = 10;
  int max_person_width = 22;
  int min_person_height = 12;
  int max_person_height = 26;
  /// Minimum pixel gap between boxes (ignored when allow_overlap).
  double min_separation = 4.0;
  bool allow_overlap = false;
  /// Per-frame box jitter in pixels when frames > 1.
  int motion_jitter = 2;

  void validate() const;
};

struct SceneRecord {
  Scene scene;                // boxes in image pixels
  std::vector<Tensor> clips;  // per modality, K x H x W x 3; empty if not loaded
  int split = 0;              // 0 = train, 1 = test
};

struct Dataset {
  SyntheticConfig config;
  std::vector<SceneRecord> records;

  std::vector<int> split_indices(int split) const;
  std::vector<int> all_indices() const;
  GridSize grid() const { return GridSize{config.grid_height, config.grid_width}; }
};

/// Recomputes a scene's group label from its annotations under the configured
/// rule; generation and tests both go through this.
int derive_group_label(const Scene& scene, const SyntheticConfig& config);

Dataset generate_synthetic(const SyntheticConfig& config);

/// Deterministic shuffled partition; round(n * fraction) records become
/// train, the rest test.
void split_dataset(Dataset& dataset, double train_fraction, std::uint64_t seed);

/// Writes annotations.json plus frames.bin into the directory.
void save_dataset(const Dataset& dataset, const std::string& dir);

/// Reads a dataset back; frames are optional (annotations-only loads skip the
/// sidecar).
Dataset load_dataset(const std::string& dir, bool load_frames = true);

}  // namespace crm
