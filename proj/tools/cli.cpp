#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "crm/grad_check.hpp"
#include "crm/image_io.hpp"
#include "crm/ops.hpp"
#include "crm/serialize.hpp"
#include "crm/train.hpp"

namespace crm::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
  SyntheticConfig data;
  ModelConfig model;
  TrainConfig train;
  double split_fraction = 0.8;
  std::uint64_t split_seed = 1;
};

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config '" + path + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw std::runtime_error(path + ": " + err.what());
  }
  RunConfig config;
  if (const auto it = doc.find("version"); it != doc.end() && it->get<int>() != 1) {
    throw std::runtime_error(path + ": unsupported config version");
  }
  if (const auto it = doc.find("data"); it != doc.end()) {
    config.data = it->get<SyntheticConfig>();
  }
  if (const auto it = doc.find("model"); it != doc.end()) {
    config.model = it->get<ModelConfig>();
  }
  if (const auto it = doc.find("train"); it != doc.end()) {
    config.train = it->get<TrainConfig>();
  }
  if (const auto it = doc.find("split"); it != doc.end()) {
    const auto& s = *it;
    if (const auto f = s.find("fraction"); f != s.end()) {
      config.split_fraction = f->get<double>();
    }
    if (const auto f = s.find("seed"); f != s.end()) {
      config.split_seed = f->get<std::uint64_t>();
    }
  }
  for (const auto& [key, value] : doc.items()) {
    if (key != "version" && key != "data" && key != "model" && key != "train" &&
        key != "split") {
      throw std::runtime_error(path + ": unknown top-level field '" + key + "'");
    }
  }
  return config;
}

// The model section carries architecture knobs; grid and class counts always
// come from the dataset.
ModelConfig resolve_model_config(ModelConfig model, const SyntheticConfig& data) {
  model.grid_height = data.grid_height;
  model.grid_width = data.grid_width;
  model.n_individual = data.n_individual;
  model.n_group = data.n_group;
  model.in_channels = 3;
  model.validate();
  return model;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  RunConfig config = load_run_config(config_path);
  if (seed) {
    config.data.seed = *seed;
  }
  Dataset dataset = generate_synthetic(config.data);
  split_dataset(dataset, config.split_fraction, config.split_seed);
  save_dataset(dataset, out_dir);

  std::vector<int> histogram(static_cast<std::size_t>(config.data.n_group), 0);
  int train_count = 0;
  for (const auto& record : dataset.records) {
    histogram[static_cast<std::size_t>(record.scene.group)] += 1;
    train_count += record.split == 0 ? 1 : 0;
  }
  std::cout << "wrote " << dataset.records.size() << " scenes to " << out_dir
            << " (" << train_count << " train / "
            << dataset.records.size() - train_count << " test)\n";
  std::cout << "group class histogram:";
  for (std::size_t g = 0; g < histogram.size(); ++g) {
    std::cout << " " << (g + 1) << ":" << histogram[g];
  }
  std::cout << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_dir,
              const std::string& checkpoint_path, std::string log_path,
              const std::string& resume_path) {
  Dataset dataset = load_dataset(dataset_dir);

  ModelConfig model_config;
  TrainConfig train_config;
  std::optional<CrmModel> model;
  ResumeState resume;
  const ResumeState* resume_ptr = nullptr;

  if (!resume_path.empty()) {
    LoadedCheckpoint ckpt = load_training_checkpoint(resume_path);
    model_config = ckpt.model_config;
    train_config = ckpt.train_config;
    model.emplace(model_from_checkpoint(ckpt));
    resume = std::move(ckpt.resume);
    resume_ptr = &resume;
    std::cout << "resuming after epoch " << resume.epochs_done << "\n";
  } else {
    if (config_path.empty()) {
      throw std::runtime_error("--config is required unless --resume is given");
    }
    RunConfig config = load_run_config(config_path);
    model_config = resolve_model_config(config.model, dataset.config);
    train_config = config.train;
    model.emplace(model_config, train_config.seed);
  }
  train_config.validate();

  const auto train_samples = prepare_samples(dataset, dataset.split_indices(0),
                                             model_config, train_config.modality);
  const auto heldout_samples = prepare_samples(
      dataset, dataset.split_indices(1), model_config, train_config.modality);
  std::cout << "training on " << train_samples.size() << " scenes, "
            << heldout_samples.size() << " held out\n";

  if (log_path.empty()) {
    log_path = checkpoint_path + ".log.jsonl";
  }
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) {
    throw std::runtime_error("cannot open log '" + log_path + "' for writing");
  }

  const TrainResult result = train_two_step(*model, train_samples,
                                            heldout_samples, train_config, &log,
                                            resume_ptr);
  save_training_checkpoint(checkpoint_path, *model, train_config, &result.adam,
                           result.epochs_done);

  std::cout << "finished " << result.epochs_done << " epochs\n";
  if (!result.records.empty()) {
    const auto& last = result.records.back();
    std::cout << "final train MCA " << last.train_mca << ", held-out MCA "
              << last.heldout_mca << "\n";
  }
  std::cout << "checkpoint: " << checkpoint_path << "\nlog: " << log_path << "\n";
  return 0;
}

std::vector<int> split_to_indices(const Dataset& dataset, const std::string& split) {
  if (split == "train") return dataset.split_indices(0);
  if (split == "test") return dataset.split_indices(1);
  if (split == "all") return dataset.all_indices();
  throw std::runtime_error("--split must be train, test or all");
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_dir,
             const std::string& split, const std::string& merge_spec,
             const std::string& fuse_path, int modality_override,
             const std::string& out_path) {
  Dataset dataset = load_dataset(dataset_dir);
  LoadedCheckpoint ckpt = load_training_checkpoint(checkpoint_path);
  CrmModel model = model_from_checkpoint(ckpt);

  const auto indices = split_to_indices(dataset, split);
  if (indices.empty()) {
    throw std::runtime_error("split '" + split + "' has no scenes");
  }

  const int modality = modality_override >= 0 ? modality_override
                                              : ckpt.train_config.modality;
  const auto samples = prepare_samples(dataset, indices, model.config, modality);

  std::vector<int> truth;
  truth.reserve(samples.size());
  for (const auto& s : samples) {
    truth.push_back(s.group);
  }

  EvalPass pass = evaluate_samples(model, samples, false);
  std::vector<int> predicted = pass.predicted;

  if (!fuse_path.empty()) {
    LoadedCheckpoint other_ckpt = load_training_checkpoint(fuse_path);
    CrmModel other = model_from_checkpoint(other_ckpt);
    if (!model.config.has_aggregation() || !other.config.has_aggregation()) {
      throw std::runtime_error("--fuse needs probability outputs on both models");
    }
    if (other.config.n_group != model.config.n_group) {
      throw std::runtime_error("--fuse: group class counts differ");
    }
    const int other_modality = modality_override >= 0
                                   ? modality_override
                                   : other_ckpt.train_config.modality;
    const auto other_samples =
        prepare_samples(dataset, indices, other.config, other_modality);
    const EvalPass other_pass = evaluate_samples(other, other_samples, false);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto fused = fuse_predictions(pass.probs[i], other_pass.probs[i]);
      int best = 0;
      for (std::size_t g = 1; g < fused.size(); ++g) {
        if (fused[g] > fused[static_cast<std::size_t>(best)]) {
          best = static_cast<int>(g);
        }
      }
      predicted[i] = best;
    }
  }

  ClassMerge merge = ClassMerge::identity(model.config.n_group);
  if (!merge_spec.empty()) {
    merge = ClassMerge::parse(merge_spec, model.config.n_group);
  }
  const EvalReport report =
      score_predictions(truth, predicted, model.config.n_group, &merge);
  print_report(std::cout, report);

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open '" + out_path + "' for writing");
    }
    out << report.to_json_string() << "\n";
    std::cout << "report: " << out_path << "\n";
  }
  return 0;
}

void write_map_images(const ActivityMap& map, const std::string& prefix,
                      int upscale, std::optional<int> field) {
  if (field) {
    const int f = *field - 1;  // 1-based on the CLI
    write_pgm(prefix + "_field" + std::to_string(*field) + ".pgm",
              field_to_gray(map, f), map.height(), map.width(), upscale);
    return;
  }
  if (map.n_individual() > 0) {
    write_ppm(prefix + "_individual.ppm",
              composite_fields(map, 0, map.n_individual(), 0), map.height(),
              map.width(), upscale);
  }
  write_ppm(prefix + "_group.ppm",
            composite_fields(map, map.n_individual(), map.n_group(),
                             map.n_individual()),
            map.height(), map.width(), upscale);
}

int cmd_render(const std::string& dataset_dir, int scene_id,
               const std::string& out_dir, const std::string& checkpoint_path,
               bool ground_truth, int upscale, std::optional<int> field,
               int modality_override) {
  const bool need_frames = !ground_truth;
  Dataset dataset = load_dataset(dataset_dir, need_frames);
  const SceneRecord* record = nullptr;
  int index = -1;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (dataset.records[i].scene.id == scene_id) {
      record = &dataset.records[i];
      index = static_cast<int>(i);
      break;
    }
  }
  if (record == nullptr) {
    throw std::runtime_error("scene id " + std::to_string(scene_id) +
                             " not found in the dataset");
  }
  fs::create_directories(out_dir);
  const std::string base = (fs::path(out_dir) /
                            ("scene" + std::to_string(scene_id))).string();

  if (ground_truth) {
    const Scene grid_scene = scale_scene_to_grid(
        record->scene, dataset.config.image_height, dataset.config.image_width,
        dataset.grid());
    const ActivityMap map =
        build_activity_map(grid_scene, dataset.grid(),
                           dataset.config.n_individual, dataset.config.n_group);
    write_map_images(map, base + "_gt", upscale, field);
    std::cout << "wrote ground-truth map images for scene " << scene_id
              << " to " << out_dir << "\n";
    return 0;
  }

  LoadedCheckpoint ckpt = load_training_checkpoint(checkpoint_path);
  CrmModel model = model_from_checkpoint(ckpt);
  if (!model.config.has_map_path()) {
    throw std::runtime_error("checkpoint has no activity-map stages to render");
  }
  const int modality = modality_override >= 0 ? modality_override
                                              : ckpt.train_config.modality;
  const auto samples =
      prepare_samples(dataset, {index}, model.config, modality);
  Tape tape(false);
  const CrmOutput out = crm_forward(tape, samples.front().clip, model, false);
  for (std::size_t t = 0; t < out.stage_maps.size(); ++t) {
    const ActivityMap map =
        map_from_tensor(out.stage_maps[t], model.config.map_individual_fields(),
                        model.config.n_group);
    write_map_images(map, base + "_stage" + std::to_string(t + 1), upscale, field);
  }
  std::cout << "wrote " << out.stage_maps.size()
            << " stage map renders for scene " << scene_id << " to " << out_dir
            << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_path, bool corrupt, int samples,
                  std::uint64_t seed) {
  ModelConfig model_config;
  model_config.grid_height = 12;
  model_config.grid_width = 16;
  model_config.n_individual = 3;
  model_config.n_group = 3;
  model_config.stages = 2;
  model_config.backbone_widths = {8, 8, 8, 8};
  model_config.phi_widths = {8, 8, 8, 8};
  model_config.psi_widths = {8, 8, 8, 8};
  model_config.zeta_widths = {8, 8, 8};
  if (!config_path.empty()) {
    RunConfig config = load_run_config(config_path);
    model_config = resolve_model_config(config.model, config.data);
  }

  CrmModel model(model_config, seed);
  Rng rng(seed + 1);
  Tensor clip(Shape{2 * model_config.grid_height, 2 * model_config.grid_width,
                    model_config.in_channels});
  for (std::int64_t i = 0; i < clip.numel(); ++i) {
    clip.data()[i] = rng.uniform();
  }
  Tensor truth(Shape{model_config.grid_height, model_config.grid_width,
                     model_config.map_channels()});
  for (std::int64_t i = 0; i < truth.numel(); ++i) {
    truth.data()[i] = rng.uniform();
  }
  const int group = 1;
  const LossWeights weights{0.01, 1.0};

  auto forward = [&](Tape& tape) {
    const CrmOutput out = crm_forward(tape, clip, model, true);
    return total_loss(tape, out, truth, group, weights);
  };

  GradCheckOptions options;
  options.samples_per_param = samples;
  if (corrupt) {
    options.corrupt_prefix = "phi.";
    options.corrupt_factor = 2.0;
  }
  const GradCheckReport report = grad_check(forward, model.params, options, rng);

  // Fold per-parameter entries into layer groups for the summary.
  for (const auto& group_name : model.group_names()) {
    double worst = 0.0;
    int checked = 0;
    for (const auto& entry : report.params) {
      if (entry.name.rfind(group_name + ".", 0) == 0 ||
          (group_name == "backbone" && entry.name.rfind("backbone", 0) == 0)) {
        worst = std::max(worst, entry.max_rel_err);
        checked += entry.checked;
      }
    }
    std::cout << "group " << group_name << ": max_rel_err " << worst << " ("
              << checked << " coords)\n";
  }
  std::cout << "overall max_rel_err " << report.max_rel_err << " over "
            << report.checked << " coordinates\n";

  const bool pass = report.passed(1e-4);
  if (corrupt) {
    std::cout << (pass ? "corruption NOT detected" : "injected corruption detected")
              << "\n";
    return pass ? 1 : 0;
  }
  std::cout << (pass ? "gradient check passed" : "gradient check FAILED") << "\n";
  return pass ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"group activity recognition via multi-stage activity-map refinement"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "GEMM backend threads (default 1)");

  // generate
  auto* gen = app.add_subcommand("generate", "render a synthetic dataset");
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("-c,--config", gen_config, "run config (JSON)")->required();
  gen->add_option("-o,--out", gen_out, "output dataset directory")->required();
  gen->add_option("--seed", gen_seed, "override data.seed");

  // train
  auto* train = app.add_subcommand("train", "two-step training run");
  std::string train_config, train_dataset, train_ckpt, train_log, train_resume;
  train->add_option("-c,--config", train_config, "run config (JSON)");
  train->add_option("-d,--dataset", train_dataset, "dataset directory")->required();
  train->add_option("-o,--checkpoint", train_ckpt, "output checkpoint")->required();
  train->add_option("--log", train_log, "epoch log path (JSONL)");
  train->add_option("--resume", train_resume, "checkpoint to continue from");

  // eval
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  std::string eval_ckpt, eval_dataset, eval_split = "test", eval_merge,
              eval_fuse, eval_out;
  int eval_modality = -1;
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval->add_option("-d,--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--split", eval_split, "train|test|all (default test)");
  eval->add_option("--merge", eval_merge, "class merge, e.g. \"4,5->4\" (1-based)");
  eval->add_option("--fuse", eval_fuse, "second checkpoint, predictions averaged");
  eval->add_option("--modality", eval_modality, "input stream override");
  eval->add_option("--out", eval_out, "write the report as JSON");

  // render
  auto* render = app.add_subcommand("render", "export activity maps as images");
  std::string render_dataset, render_out, render_ckpt;
  int render_scene = 0, render_scale = 8, render_modality = -1;
  bool render_gt = false;
  std::optional<int> render_field;
  render->add_option("-d,--dataset", render_dataset, "dataset directory")->required();
  render->add_option("--scene", render_scene, "scene id (1-based)")->required();
  render->add_option("-o,--out", render_out, "output directory")->required();
  render->add_option("--checkpoint", render_ckpt, "render predicted stage maps");
  render->add_flag("--ground-truth", render_gt, "render the ground-truth map");
  render->add_option("--scale", render_scale, "pixel upscale factor (default 8)");
  render->add_option("--field", render_field, "export one field (1-based) as PGM");
  render->add_option("--modality", render_modality, "input stream override");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  std::string gc_config;
  bool gc_corrupt = false;
  int gc_samples = 6;
  std::uint64_t gc_seed = 17;
  gradcheck->add_option("-c,--config", gc_config, "run config (JSON); default tiny model");
  gradcheck->add_flag("--corrupt", gc_corrupt, "inject a wrong gradient; expect detection");
  gradcheck->add_option("--samples", gc_samples, "coordinates per parameter tensor");
  gradcheck->add_option("--seed", gc_seed, "rng seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ops::set_compute_threads(threads);
    if (gen->parsed()) {
      return cmd_generate(gen_config, gen_out, gen_seed);
    }
    if (train->parsed()) {
      return cmd_train(train_config, train_dataset, train_ckpt, train_log,
                       train_resume);
    }
    if (eval->parsed()) {
      return cmd_eval(eval_ckpt, eval_dataset, eval_split, eval_merge, eval_fuse,
                      eval_modality, eval_out);
    }
    if (render->parsed()) {
      if (render_gt == !render_ckpt.empty()) {
        throw std::runtime_error(
            "render needs exactly one of --checkpoint or --ground-truth");
      }
      return cmd_render(render_dataset, render_scene, render_out, render_ckpt,
                        render_gt, render_scale, render_field, render_modality);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gc_config, gc_corrupt, gc_samples, gc_seed);
    }
  } catch (const TrainingDiverged& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace crm::cli
