#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "crm/adam.hpp"
#include "crm/dataset.hpp"
#include "crm/loss.hpp"
#include "crm/metrics.hpp"
#include "crm/model.hpp"

namespace crm {

struct EpochSegment {
  int epochs = 0;
  double learning_rate = 0.0;
};

struct PhaseConfig {
  std::vector<EpochSegment> segments;
  double map_weight = 1.0;
  double group_weight = 0.0;

  int total_epochs() const;
};

/// Two-step schedule: phase 1 trains the activity maps alone (w_G = 0),
/// phase 2 the weighted joint loss with w_A < w_G. Adam restarts at the
/// phase boundary; learning-rate drops inside a phase keep its moments.
struct TrainConfig {
  PhaseConfig phase1{{{15, 1e-3}, {5, 1e-4}}, 1.0, 0.0};
  PhaseConfig phase2{{{10, 1e-3}, {5, 1e-4}}, 1e-4, 1.0};
  int batch_size = 8;
  std::uint64_t seed = 1;
  int modality = 0;
  AdamConfig adam;

  void validate() const;
};

/// One scene prepared for the network: input clip of the chosen modality,
/// rasterized ground-truth map, label, and grid-space boxes for the pooling
/// decoder.
struct TrainSample {
  Tensor clip;
  Tensor truth_map;  // undefined when the model has no map path
  int group = 0;
  std::vector<BBox> grid_boxes;
};

std::vector<TrainSample> prepare_samples(const Dataset& dataset,
                                         const std::vector<int>& indices,
                                         const ModelConfig& model_config,
                                         int modality);

struct EpochRecord {
  int epoch = 0;  // 1-based over the whole run
  int phase = 0;  // 1 or 2
  double learning_rate = 0.0;
  std::vector<double> heldout_stage_losses;  // mean per-sample L_{A_t}
  double heldout_group_loss = 0.0;           // NaN when the head is absent
  double train_mca = 0.0;
  double heldout_mca = 0.0;

  std::string to_json_line() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// Forward-only pass over samples: predictions, probabilities and (when asked)
/// mean per-stage map losses and mean group loss.
struct EvalPass {
  std::vector<int> predicted;
  std::vector<std::vector<double>> probs;  // empty rows in pool-decode mode
  std::vector<double> stage_losses;
  double group_loss = 0.0;
  double mca = 0.0;
};

EvalPass evaluate_samples(const CrmModel& model,
                          const std::vector<TrainSample>& samples,
                          bool want_losses);

struct ResumeState {
  int epochs_done = 0;
  AdamState adam;
  bool has_adam = false;
};

struct TrainResult {
  std::vector<EpochRecord> records;
  AdamState adam;
  int epochs_done = 0;
};

/// Runs the two-step schedule, one JSONL record per epoch to `log` (memory
/// copies are kept in the result either way). Modes without a map path skip
/// phase 1; modes without an aggregation head skip phase 2. A non-finite
/// batch loss raises TrainingDiverged.
TrainResult train_two_step(CrmModel& model, const std::vector<TrainSample>& train,
                           const std::vector<TrainSample>& heldout,
                           const TrainConfig& config, std::ostream* log = nullptr,
                           const ResumeState* resume = nullptr);

// Checkpoint packaging: model weights plus optimizer state and the epoch
// counter, so interrupted runs continue with the original numbering.
void save_training_checkpoint(const std::string& path, const CrmModel& model,
                              const TrainConfig& train_config,
                              const AdamState* adam, int epochs_done);

struct LoadedCheckpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  ParamSet params;  // named weights, checkpoint order
  ResumeState resume;
};

LoadedCheckpoint load_training_checkpoint(const std::string& path);

/// Rebuilds a model from a loaded checkpoint (weights replace the seed init).
CrmModel model_from_checkpoint(const LoadedCheckpoint& ckpt);

}  // namespace crm
