#include "crm/train.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <ostream>

#include "crm/checkpoint.hpp"
#include "crm/ops.hpp"
#include "crm/random.hpp"
#include "crm/serialize.hpp"

namespace crm {

int PhaseConfig::total_epochs() const {
  int n = 0;
  for (const auto& s : segments) {
    n += s.epochs;
  }
  return n;
}

void TrainConfig::validate() const {
  auto check_phase = [](const PhaseConfig& phase, const char* name) {
    if (phase.segments.empty()) {
      throw std::invalid_argument(std::string("train.") + name +
                                  ".segments: must not be empty");
    }
    for (const auto& s : phase.segments) {
      if (s.epochs < 0 || s.learning_rate <= 0.0) {
        throw std::invalid_argument(std::string("train.") + name +
                                    ".segments: epochs >= 0 and lr > 0 required");
      }
    }
    if (phase.map_weight < 0.0 || phase.group_weight < 0.0) {
      throw std::invalid_argument(std::string("train.") + name +
                                  ": loss weights must be nonnegative");
    }
  };
  check_phase(phase1, "phase1");
  check_phase(phase2, "phase2");
  if (phase1.group_weight != 0.0) {
    throw std::invalid_argument("train.phase1.w_group: must be 0 (map-only step)");
  }
  if (phase1.map_weight <= 0.0) {
    throw std::invalid_argument("train.phase1.w_map: must be > 0");
  }
  if (phase2.group_weight <= 0.0) {
    throw std::invalid_argument("train.phase2.w_group: must be > 0");
  }
  if (phase2.map_weight >= phase2.group_weight) {
    throw std::invalid_argument(
        "train.phase2: w_map must be smaller than w_group");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("train.batch_size: must be >= 1");
  }
  if (modality < 0) {
    throw std::invalid_argument("train.modality: must be >= 0");
  }
}

std::vector<TrainSample> prepare_samples(const Dataset& dataset,
                                         const std::vector<int>& indices,
                                         const ModelConfig& model_config,
                                         int modality) {
  if (model_config.grid_height != dataset.config.grid_height ||
      model_config.grid_width != dataset.config.grid_width ||
      model_config.n_group != dataset.config.n_group ||
      (model_config.mode != AblationMode::kGroupOnly &&
       model_config.n_individual != dataset.config.n_individual)) {
    throw std::invalid_argument(
        "prepare_samples: model grid/classes do not match the dataset config");
  }
  std::vector<TrainSample> samples;
  samples.reserve(indices.size());
  const GridSize grid = dataset.grid();
  for (int idx : indices) {
    const auto& record = dataset.records.at(static_cast<std::size_t>(idx));
    if (modality >= static_cast<int>(record.clips.size())) {
      throw std::invalid_argument("prepare_samples: modality " +
                                  std::to_string(modality) +
                                  " not present in the dataset");
    }
    TrainSample sample;
    sample.clip = record.clips[static_cast<std::size_t>(modality)];
    sample.group = record.scene.group;
    const Scene grid_scene =
        scale_scene_to_grid(record.scene, dataset.config.image_height,
                            dataset.config.image_width, grid);
    for (const auto& person : grid_scene.persons) {
      sample.grid_boxes.push_back(person.box);
    }
    if (model_config.has_map_path()) {
      sample.truth_map =
          build_activity_map(grid_scene, grid,
                             model_config.map_individual_fields(),
                             model_config.n_group)
              .to_tensor();
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::string EpochRecord::to_json_line() const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["phase"] = phase;
  j["lr"] = learning_rate;
  j["heldout_stage_losses"] = heldout_stage_losses;
  if (std::isfinite(heldout_group_loss)) {
    j["heldout_group_loss"] = heldout_group_loss;
  } else {
    j["heldout_group_loss"] = nullptr;
  }
  j["train_mca"] = train_mca;
  j["heldout_mca"] = heldout_mca;
  return j.dump();
}

EvalPass evaluate_samples(const CrmModel& model,
                          const std::vector<TrainSample>& samples,
                          bool want_losses) {
  EvalPass pass;
  const auto& cfg = model.config;
  pass.stage_losses.assign(
      want_losses && cfg.has_map_path() ? static_cast<std::size_t>(cfg.stages) : 0,
      0.0);
  double group_loss_sum = 0.0;
  std::int64_t correct = 0;

  for (const auto& sample : samples) {
    Tape tape(false);
    const CrmOutput out = crm_forward(tape, sample.clip, model, true);

    int predicted = 0;
    if (cfg.has_aggregation()) {
      const double* p = out.probs.data();
      for (int g = 1; g < cfg.n_group; ++g) {
        if (p[g] > p[predicted]) {
          predicted = g;
        }
      }
      pass.probs.emplace_back(p, p + cfg.n_group);
      if (want_losses) {
        group_loss_sum += group_loss(tape, out.probs, sample.group).item();
      }
    } else {
      const ActivityMap final_map =
          map_from_tensor(out.stage_maps.back(), cfg.map_individual_fields(),
                          cfg.n_group);
      predicted = decode_group_by_pooling(final_map, sample.grid_boxes).group;
      pass.probs.emplace_back();
    }
    pass.predicted.push_back(predicted);
    if (predicted == sample.group) {
      correct += 1;
    }

    if (want_losses && cfg.has_map_path()) {
      for (int t = 0; t < cfg.stages; ++t) {
        pass.stage_losses[static_cast<std::size_t>(t)] +=
            activity_map_loss_stage(tape, out.stage_maps[static_cast<std::size_t>(t)],
                                    sample.truth_map)
                .item();
      }
    }
  }

  const double n = samples.empty() ? 1.0 : static_cast<double>(samples.size());
  for (auto& loss : pass.stage_losses) {
    loss /= n;
  }
  pass.group_loss = cfg.has_aggregation() && want_losses
                        ? group_loss_sum / n
                        : std::numeric_limits<double>::quiet_NaN();
  pass.mca = samples.empty() ? 0.0 : static_cast<double>(correct) / n;
  return pass;
}

namespace {

struct PlannedEpoch {
  int phase = 1;
  double learning_rate = 0.0;
  LossWeights weights;
  bool fresh_adam = false;
};

std::vector<PlannedEpoch> build_epoch_plan(const TrainConfig& config,
                                           const ModelConfig& model) {
  std::vector<PlannedEpoch> plan;
  auto add_phase = [&plan](const PhaseConfig& phase, int number) {
    bool first = true;
    for (const auto& segment : phase.segments) {
      for (int e = 0; e < segment.epochs; ++e) {
        PlannedEpoch pe;
        pe.phase = number;
        pe.learning_rate = segment.learning_rate;
        pe.weights = LossWeights{phase.map_weight, phase.group_weight};
        pe.fresh_adam = first;
        first = false;
        plan.push_back(pe);
      }
    }
  };
  // Phase 1 trains the map stack; without one there is nothing to do.
  if (model.has_map_path()) {
    add_phase(config.phase1, 1);
  }
  // Phase 2 needs the aggregation head for its group term.
  if (model.has_aggregation()) {
    add_phase(config.phase2, 2);
  }
  return plan;
}

}  // namespace

TrainResult train_two_step(CrmModel& model, const std::vector<TrainSample>& train,
                           const std::vector<TrainSample>& heldout,
                           const TrainConfig& config, std::ostream* log,
                           const ResumeState* resume) {
  config.validate();
  if (train.empty()) {
    throw std::invalid_argument("train_two_step: empty training set");
  }

  const auto plan = build_epoch_plan(config, model.config);
  TrainResult result;
  result.adam = AdamState(model.params.total_size(), config.adam);

  int start_epoch = 0;
  if (resume != nullptr) {
    start_epoch = resume->epochs_done;
    if (start_epoch > static_cast<int>(plan.size())) {
      throw std::invalid_argument("resume: checkpoint is past the schedule end");
    }
    if (resume->has_adam) {
      result.adam = resume->adam;
    }
  }

  const Rng root(config.seed);
  std::vector<int> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<int>(i);
  }

  for (int e = start_epoch; e < static_cast<int>(plan.size()); ++e) {
    const PlannedEpoch& epoch = plan[static_cast<std::size_t>(e)];
    if (epoch.fresh_adam) {
      // Phase boundary: moments restart even on resume. Mid-phase resumes
      // keep the restored state assigned above.
      result.adam = AdamState(model.params.total_size(), config.adam);
    }
    result.adam.set_learning_rate(epoch.learning_rate);

    Rng shuffle_rng = root.fork(0x45000000ULL + static_cast<std::uint64_t>(e));
    shuffle_rng.shuffle(order);

    const bool want_probs = epoch.weights.group_weight > 0.0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(batch_end - batch_start);

      model.params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = batch_start; i < batch_end; ++i) {
        const TrainSample& sample = train[static_cast<std::size_t>(order[i])];
        Tape tape;
        const CrmOutput out = crm_forward(tape, sample.clip, model, want_probs);
        Tensor loss = ops::scale(
            tape,
            total_loss(tape, out, sample.truth_map, sample.group, epoch.weights),
            inv_batch);
        batch_loss += loss.item();
        tape.backward(loss);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged("training diverged: non-finite loss " +
                               std::to_string(batch_loss) + " at epoch " +
                               std::to_string(e + 1) + ", batch " +
                               std::to_string(batch_start / config.batch_size + 1));
      }
      result.adam.step(model.params);
    }

    EpochRecord record;
    record.epoch = e + 1;
    record.phase = epoch.phase;
    record.learning_rate = epoch.learning_rate;
    const EvalPass train_eval = evaluate_samples(model, train, false);
    record.train_mca = train_eval.mca;
    if (!heldout.empty()) {
      const EvalPass held = evaluate_samples(model, heldout, true);
      record.heldout_stage_losses = held.stage_losses;
      record.heldout_group_loss = held.group_loss;
      record.heldout_mca = held.mca;
    } else {
      record.heldout_group_loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (log != nullptr) {
      (*log) << record.to_json_line() << "\n";
      log->flush();
    }
    result.records.push_back(std::move(record));
    result.epochs_done = e + 1;
  }
  if (result.epochs_done == 0) {
    result.epochs_done = start_epoch;
  }
  return result;
}

void save_training_checkpoint(const std::string& path, const CrmModel& model,
                              const TrainConfig& train_config,
                              const AdamState* adam, int epochs_done) {
  nlohmann::json meta;
  meta["format"] = 1;
  meta["model"] = model.config;
  meta["train"] = train_config;
  meta["epochs_done"] = epochs_done;
  meta["adam_step"] = adam != nullptr ? adam->step_count() : 0;

  std::vector<NamedParam> entries;
  for (const auto& item : model.params.items()) {
    entries.push_back(NamedParam{item.name, item.tensor});
  }
  if (adam != nullptr) {
    const auto n = static_cast<int>(adam->first_moments().size());
    entries.push_back(NamedParam{
        "optimizer.m", Tensor(Shape{n}, adam->first_moments())});
    entries.push_back(NamedParam{
        "optimizer.v", Tensor(Shape{n}, adam->second_moments())});
  }
  save_checkpoint(path, meta.dump(), entries);
}

LoadedCheckpoint load_training_checkpoint(const std::string& path) {
  const Checkpoint raw = load_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(raw.meta_json);
  } catch (const nlohmann::json::parse_error& err) {
    throw std::runtime_error("checkpoint: metadata is not valid JSON (" +
                             std::string(err.what()) + ")");
  }
  LoadedCheckpoint out;
  out.model_config = meta.at("model").get<ModelConfig>();
  out.train_config = meta.at("train").get<TrainConfig>();
  out.resume.epochs_done = meta.at("epochs_done").get<int>();

  std::vector<double> m, v;
  for (const auto& entry : raw.entries) {
    if (entry.name == "optimizer.m") {
      m.assign(entry.tensor.data(), entry.tensor.data() + entry.tensor.numel());
    } else if (entry.name == "optimizer.v") {
      v.assign(entry.tensor.data(), entry.tensor.data() + entry.tensor.numel());
    } else {
      out.params.add(entry.name, entry.tensor.clone());
    }
  }
  if (!m.empty() && m.size() == v.size()) {
    out.resume.adam = AdamState(static_cast<std::int64_t>(m.size()),
                                out.train_config.adam);
    out.resume.adam.restore(std::move(m), std::move(v),
                            meta.at("adam_step").get<std::int64_t>());
    out.resume.has_adam = true;
  }
  return out;
}

CrmModel model_from_checkpoint(const LoadedCheckpoint& ckpt) {
  CrmModel model(ckpt.model_config, 0);
  for (auto& item : model.params.items()) {
    const Tensor* stored = ckpt.params.find(item.name);
    if (stored == nullptr) {
      throw std::runtime_error("checkpoint: missing parameter '" + item.name + "'");
    }
    if (stored->shape() != item.tensor.shape()) {
      throw std::runtime_error("checkpoint: parameter '" + item.name +
                               "' has shape " + shape_str(stored->shape()) +
                               ", model expects " + shape_str(item.tensor.shape()));
    }
    std::copy(stored->data(), stored->data() + stored->numel(), item.tensor.data());
  }
  return model;
}

}  // namespace crm
