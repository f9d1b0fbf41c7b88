#include "crm/model.hpp"

#include <cmath>
#include <stdexcept>

#include "crm/ops.hpp"

namespace crm {

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kFull: return "full";
    case AblationMode::kFeatureOnly: return "feature-only";
    case AblationMode::kMapOnly: return "map-only";
    case AblationMode::kGroupOnly: return "group-only";
    case AblationMode::kPoolDecode: return "pool-decode";
  }
  throw std::logic_error("unknown ablation mode");
}

AblationMode ablation_mode_from_string(const std::string& name) {
  if (name == "full") return AblationMode::kFull;
  if (name == "feature-only") return AblationMode::kFeatureOnly;
  if (name == "map-only") return AblationMode::kMapOnly;
  if (name == "group-only") return AblationMode::kGroupOnly;
  if (name == "pool-decode") return AblationMode::kPoolDecode;
  throw std::invalid_argument(
      "ablation mode '" + name +
      "' is not one of full|feature-only|map-only|group-only|pool-decode");
}

int ModelConfig::zeta_in_channels() const {
  switch (mode) {
    case AblationMode::kFeatureOnly: return feature_channels();
    case AblationMode::kMapOnly: return map_channels();
    case AblationMode::kPoolDecode: return 0;
    default: return feature_channels() + map_channels();
  }
}

void ModelConfig::validate() const {
  if (grid_height < 8 || grid_width < 8) {
    throw std::invalid_argument("model.grid: must be at least 8x8");
  }
  if (n_group < 2) {
    throw std::invalid_argument("model.n_group: must be >= 2");
  }
  if (n_individual < 0) {
    throw std::invalid_argument("model.n_individual: must be >= 0");
  }
  if (stages < 1) {
    throw std::invalid_argument("model.stages: must be >= 1");
  }
  if (in_channels < 1) {
    throw std::invalid_argument("model.in_channels: must be >= 1");
  }
  auto check_widths = [](const std::vector<int>& widths, std::size_t n,
                         const char* what) {
    if (widths.size() != n) {
      throw std::invalid_argument(std::string("model.") + what + ": expected " +
                                  std::to_string(n) + " widths");
    }
    for (int w : widths) {
      if (w < 1) {
        throw std::invalid_argument(std::string("model.") + what +
                                    ": widths must be >= 1");
      }
    }
  };
  check_widths(backbone_widths, 4, "backbone_widths");
  check_widths(phi_widths, 4, "phi_widths");
  check_widths(psi_widths, 4, "psi_widths");
  check_widths(zeta_widths, 3, "zeta_widths");
}

namespace {

Tensor he_init(Shape shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    t.data()[i] = rng.normal(0.0, stddev);
  }
  return t;
}

void add_conv(ParamSet& params, const std::string& layer, int k, int cin,
              int cout, Rng& rng) {
  params.add(layer + ".w", he_init(Shape{k, k, cin, cout}, k * k * cin, rng));
  params.add(layer + ".b", Tensor(Shape{cout}));
}

}  // namespace

CrmModel::CrmModel(ModelConfig cfg, std::uint64_t seed) : config(std::move(cfg)) {
  config.validate();
  Rng rng(seed);

  int c = config.in_channels;
  for (std::size_t i = 0; i < config.backbone_widths.size(); ++i) {
    add_conv(params, "backbone.block" + std::to_string(i), 3, c,
             config.backbone_widths[i], rng);
    c = config.backbone_widths[i];
  }

  const int d = config.feature_channels();
  const int n = config.map_channels();

  if (config.has_map_path()) {
    const auto& pw = config.phi_widths;
    add_conv(params, "phi.conv0", 3, d, pw[0], rng);
    add_conv(params, "phi.conv1", 3, pw[0], pw[1], rng);
    add_conv(params, "phi.conv2", 3, pw[1], pw[2], rng);
    add_conv(params, "phi.conv3", 1, pw[2], pw[3], rng);
    add_conv(params, "phi.conv4", 1, pw[3], n, rng);

    for (int t = 2; t <= config.stages; ++t) {
      const std::string prefix = "psi" + std::to_string(t);
      const auto& sw = config.psi_widths;
      add_conv(params, prefix + ".conv0", 7, d + n, sw[0], rng);
      add_conv(params, prefix + ".conv1", 7, sw[0], sw[1], rng);
      add_conv(params, prefix + ".conv2", 7, sw[1], sw[2], rng);
      add_conv(params, prefix + ".conv3", 1, sw[2], sw[3], rng);
      add_conv(params, prefix + ".conv4", 1, sw[3], n, rng);
    }
  }

  if (config.has_aggregation()) {
    const auto& zw = config.zeta_widths;
    add_conv(params, "zeta.conv0", 7, config.zeta_in_channels(), zw[0], rng);
    add_conv(params, "zeta.conv1", 7, zw[0], zw[1], rng);
    add_conv(params, "zeta.conv2", 7, zw[1], zw[2], rng);
    add_conv(params, "zeta.conv3", 1, zw[2], config.n_group, rng);
  }
}

std::vector<std::string> CrmModel::group_names() const {
  std::vector<std::string> names = {"backbone"};
  if (config.has_map_path()) {
    names.push_back("phi");
    for (int t = 2; t <= config.stages; ++t) {
      names.push_back("psi" + std::to_string(t));
    }
  }
  if (config.has_aggregation()) {
    names.push_back("zeta");
  }
  return names;
}

const Tensor& CrmModel::weight(const std::string& layer) const {
  const Tensor* t = params.find(layer + ".w");
  if (t == nullptr) {
    throw std::invalid_argument("no such layer: " + layer);
  }
  return *t;
}

const Tensor& CrmModel::bias(const std::string& layer) const {
  const Tensor* t = params.find(layer + ".b");
  if (t == nullptr) {
    throw std::invalid_argument("no such layer: " + layer);
  }
  return *t;
}

namespace {

Tensor conv_relu(Tape& tape, const Tensor& x, const CrmModel& m,
                 const std::string& layer) {
  return ops::relu(tape, ops::conv2d(tape, x, m.weight(layer), m.bias(layer)));
}

Tensor conv_linear(Tape& tape, const Tensor& x, const CrmModel& m,
                   const std::string& layer) {
  return ops::conv2d(tape, x, m.weight(layer), m.bias(layer));
}

Tensor backbone_frame(Tape& tape, const Tensor& frame, const CrmModel& m) {
  Tensor x = frame;
  const std::size_t blocks = m.config.backbone_widths.size();
  for (std::size_t i = 0; i < blocks; ++i) {
    x = conv_relu(tape, x, m, "backbone.block" + std::to_string(i));
    if (i + 1 < blocks) {
      x = ops::maxpool2(tape, x);
    }
  }
  return ops::resize_bilinear(tape, x, m.config.grid_height, m.config.grid_width);
}

}  // namespace

Tensor backbone_forward(Tape& tape, const Tensor& clip, const CrmModel& model) {
  if (!clip.defined() || (clip.rank() != 3 && clip.rank() != 4)) {
    throw std::invalid_argument("backbone: clip must be K x H x W x C or H x W x C");
  }
  if (clip.rank() == 3) {
    if (clip.dim(2) != model.config.in_channels) {
      throw std::invalid_argument("backbone: clip channel count mismatch");
    }
    return backbone_frame(tape, clip, model);
  }

  const int k = clip.dim(0), h = clip.dim(1), w = clip.dim(2), c = clip.dim(3);
  if (c != model.config.in_channels) {
    throw std::invalid_argument("backbone: clip channel count mismatch");
  }
  if (k < 1) {
    throw std::invalid_argument("backbone: clip needs at least one frame");
  }
  std::vector<Tensor> frame_features;
  frame_features.reserve(static_cast<std::size_t>(k));
  const std::size_t frame_len = static_cast<std::size_t>(h) * w * c;
  for (int f = 0; f < k; ++f) {
    Tensor frame(Shape{h, w, c},
                 std::vector<double>(clip.data() + f * frame_len,
                                     clip.data() + (f + 1) * frame_len));
    frame_features.push_back(backbone_frame(tape, frame, model));
  }
  if (k == 1) {
    return frame_features.front();
  }
  return ops::average(tape, frame_features);
}

Tensor phi_forward(Tape& tape, const Tensor& features, const CrmModel& model) {
  if (!features.defined() || features.rank() != 3 ||
      features.dim(2) != model.config.feature_channels()) {
    throw std::invalid_argument("phi: feature channel count mismatch");
  }
  Tensor x = conv_relu(tape, features, model, "phi.conv0");
  x = conv_relu(tape, x, model, "phi.conv1");
  x = conv_relu(tape, x, model, "phi.conv2");
  x = conv_relu(tape, x, model, "phi.conv3");
  return conv_linear(tape, x, model, "phi.conv4");  // linear map output
}

Tensor psi_forward(Tape& tape, const Tensor& features, const Tensor& prev_map,
                   const CrmModel& model, int stage) {
  if (stage < 2 || stage > model.config.stages) {
    throw std::invalid_argument("psi: stage " + std::to_string(stage) +
                                " outside 2.." + std::to_string(model.config.stages));
  }
  const std::string prefix = "psi" + std::to_string(stage);
  Tensor x = ops::concat_channels(tape, features, prev_map);
  x = conv_relu(tape, x, model, prefix + ".conv0");
  x = conv_relu(tape, x, model, prefix + ".conv1");
  x = conv_relu(tape, x, model, prefix + ".conv2");
  x = conv_relu(tape, x, model, prefix + ".conv3");
  return conv_linear(tape, x, model, prefix + ".conv4");
}

Tensor zeta_forward(Tape& tape, const Tensor& features, const Tensor& final_map,
                    const CrmModel& model) {
  if (!model.config.has_aggregation()) {
    throw std::invalid_argument("zeta: model has no aggregation head");
  }
  Tensor x;
  switch (model.config.mode) {
    case AblationMode::kFeatureOnly:
      x = features;
      break;
    case AblationMode::kMapOnly:
      x = final_map;
      break;
    default:
      x = ops::concat_channels(tape, features, final_map);
      break;
  }
  x = conv_relu(tape, x, model, "zeta.conv0");
  x = ops::maxpool2(tape, x);
  x = conv_relu(tape, x, model, "zeta.conv1");
  x = ops::maxpool2(tape, x);
  x = conv_relu(tape, x, model, "zeta.conv2");
  x = ops::maxpool2(tape, x);
  x = conv_linear(tape, x, model, "zeta.conv3");
  x = ops::global_avg_pool(tape, x);
  return ops::softmax(tape, x);
}

CrmOutput crm_forward(Tape& tape, const Tensor& clip, const CrmModel& model,
                      bool want_probs) {
  CrmOutput out;
  const Tensor features = backbone_forward(tape, clip, model);

  if (model.config.has_map_path()) {
    out.stage_maps.reserve(static_cast<std::size_t>(model.config.stages));
    out.stage_maps.push_back(phi_forward(tape, features, model));
    for (int t = 2; t <= model.config.stages; ++t) {
      out.stage_maps.push_back(
          psi_forward(tape, features, out.stage_maps.back(), model, t));
    }
  }

  if (want_probs && model.config.has_aggregation()) {
    const Tensor final_map =
        out.stage_maps.empty() ? Tensor() : out.stage_maps.back();
    out.probs = zeta_forward(tape, features, final_map, model);
  }
  return out;
}

}  // namespace crm
