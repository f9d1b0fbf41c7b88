#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crm/params.hpp"
#include "crm/random.hpp"
#include "crm/tensor.hpp"

namespace crm {

/// Which part of the network the aggregation head sees, mirroring the
/// ablation lineup: the full pipeline, feature map only, final activity map
/// only, group-fields-only maps, or no aggregation head at all (labels are
/// read off the map by box pooling).
enum class AblationMode {
  kFull,
  kFeatureOnly,
  kMapOnly,
  kGroupOnly,
  kPoolDecode,
};

std::string to_string(AblationMode mode);
AblationMode ablation_mode_from_string(const std::string& name);

struct ModelConfig {
  int grid_height = 24;
  int grid_width = 40;
  int n_individual = 4;
  int n_group = 4;
  int stages = 4;  // T; stage-k baselines set this to k
  int in_channels = 3;
  std::vector<int> backbone_widths = {16, 32, 32, 32};
  std::vector<int> phi_widths = {64, 64, 64, 128};
  std::vector<int> psi_widths = {64, 64, 64, 128};
  std::vector<int> zeta_widths = {64, 64, 64};
  AblationMode mode = AblationMode::kFull;

  /// D, the feature-map channel count.
  int feature_channels() const { return backbone_widths.back(); }
  /// Individual fields present in the predicted map (0 in group-only mode).
  int map_individual_fields() const {
    return mode == AblationMode::kGroupOnly ? 0 : n_individual;
  }
  /// N, the activity-map channel count.
  int map_channels() const { return map_individual_fields() + n_group; }
  bool has_map_path() const { return mode != AblationMode::kFeatureOnly; }
  bool has_aggregation() const { return mode != AblationMode::kPoolDecode; }
  /// Channels entering the aggregation head.
  int zeta_in_channels() const;

  void validate() const;
};

/// All learnable weights, created in a fixed order from a seed.
/// Parameter names: backbone.block<i>.{w,b}, phi.conv<i>.{w,b},
/// psi<t>.conv<i>.{w,b} for t in 2..T, zeta.conv<i>.{w,b}.
class CrmModel {
 public:
  CrmModel(ModelConfig config, std::uint64_t seed);

  ModelConfig config;
  ParamSet params;

  /// Layer groups in forward order (backbone, phi, psi2.., zeta).
  std::vector<std::string> group_names() const;

  const Tensor& weight(const std::string& layer) const;
  const Tensor& bias(const std::string& layer) const;
};

struct CrmOutput {
  std::vector<Tensor> stage_maps;  // A_hat_1 .. A_hat_T (empty in feature-only)
  Tensor probs;                    // undefined when the head was not run
};

/// Per-frame backbone conv stack, bilinear resize to the map grid, temporal
/// mean over frames. The clip is K x H x W x C, or H x W x C for K = 1.
Tensor backbone_forward(Tape& tape, const Tensor& clip, const CrmModel& model);

/// Initial-stage map prediction from the feature map.
Tensor phi_forward(Tape& tape, const Tensor& features, const CrmModel& model);

/// Refinement stage t (2-based): re-predicts the map from features
/// concatenated with the previous stage's map.
Tensor psi_forward(Tape& tape, const Tensor& features, const Tensor& prev_map,
                   const CrmModel& model, int stage);

/// Aggregation head: group-activity probabilities from the feature map and/or
/// final activity map, depending on the ablation mode.
Tensor zeta_forward(Tape& tape, const Tensor& features, const Tensor& final_map,
                    const CrmModel& model);

/// Full pipeline. Set want_probs = false to skip the aggregation head (used
/// in training phase 1 where the group loss has weight zero).
CrmOutput crm_forward(Tape& tape, const Tensor& clip, const CrmModel& model,
                      bool want_probs = true);

}  // namespace crm
