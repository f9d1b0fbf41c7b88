#include "crm/serialize.hpp"

#include <array>
#include <set>
#include <string>

namespace crm {
namespace {

using nlohmann::json;

// Strict object reader: every key must be known, so config typos fail loudly
// with the field name.
class Fields {
 public:
  Fields(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    if (!j_.is_object()) {
      throw std::invalid_argument(scope_ + ": expected a JSON object");
    }
  }

  template <class T>
  void optional(const char* key, T& out) {
    known_.insert(key);
    if (const auto it = j_.find(key); it != j_.end()) {
      read(key, *it, out);
    }
  }

  template <class T>
  void required(const char* key, T& out) {
    known_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) {
      throw std::invalid_argument(scope_ + "." + key + ": missing field");
    }
    read(key, *it, out);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (known_.find(key) == known_.end()) {
        throw std::invalid_argument(scope_ + "." + key + ": unknown field");
      }
    }
  }

 private:
  template <class T>
  void read(const char* key, const json& value, T& out) const {
    try {
      out = value.get<T>();
    } catch (const json::exception& err) {
      throw std::invalid_argument(scope_ + "." + key + ": " + err.what());
    }
  }

  const json& j_;
  std::string scope_;
  std::set<std::string> known_;
};

}  // namespace

void to_json(json& j, const SyntheticConfig& c) {
  j = json{{"image", {c.image_height, c.image_width}},
           {"grid", {c.grid_height, c.grid_width}},
           {"n_individual", c.n_individual},
           {"n_group", c.n_group},
           {"persons", {c.min_persons, c.max_persons}},
           {"frames", c.frames},
           {"scene_count", c.scene_count},
           {"seed", c.seed},
           {"modalities", c.modalities},
           {"rule", to_string(c.rule)},
           {"person_width", {c.min_person_width, c.max_person_width}},
           {"person_height", {c.min_person_height, c.max_person_height}},
           {"min_separation", c.min_separation},
           {"allow_overlap", c.allow_overlap},
           {"motion_jitter", c.motion_jitter}};
}

void from_json(const json& j, SyntheticConfig& c) {
  Fields f(j, "data");
  std::array<int, 2> image{c.image_height, c.image_width};
  std::array<int, 2> grid{c.grid_height, c.grid_width};
  std::array<int, 2> persons{c.min_persons, c.max_persons};
  std::array<int, 2> person_w{c.min_person_width, c.max_person_width};
  std::array<int, 2> person_h{c.min_person_height, c.max_person_height};
  std::string rule = to_string(c.rule);
  f.optional("image", image);
  f.optional("grid", grid);
  f.optional("n_individual", c.n_individual);
  f.optional("n_group", c.n_group);
  f.optional("persons", persons);
  f.optional("frames", c.frames);
  f.optional("scene_count", c.scene_count);
  f.optional("seed", c.seed);
  f.optional("modalities", c.modalities);
  f.optional("rule", rule);
  f.optional("person_width", person_w);
  f.optional("person_height", person_h);
  f.optional("min_separation", c.min_separation);
  f.optional("allow_overlap", c.allow_overlap);
  f.optional("motion_jitter", c.motion_jitter);
  f.finish();
  c.image_height = image[0];
  c.image_width = image[1];
  c.grid_height = grid[0];
  c.grid_width = grid[1];
  c.min_persons = persons[0];
  c.max_persons = persons[1];
  c.min_person_width = person_w[0];
  c.max_person_width = person_w[1];
  c.min_person_height = person_h[0];
  c.max_person_height = person_h[1];
  c.rule = label_rule_from_string(rule);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"grid", {c.grid_height, c.grid_width}},
           {"n_individual", c.n_individual},
           {"n_group", c.n_group},
           {"stages", c.stages},
           {"in_channels", c.in_channels},
           {"backbone_widths", c.backbone_widths},
           {"phi_widths", c.phi_widths},
           {"psi_widths", c.psi_widths},
           {"zeta_widths", c.zeta_widths},
           {"mode", to_string(c.mode)}};
}

void from_json(const json& j, ModelConfig& c) {
  Fields f(j, "model");
  std::array<int, 2> grid{c.grid_height, c.grid_width};
  std::string mode = to_string(c.mode);
  f.optional("grid", grid);
  f.optional("n_individual", c.n_individual);
  f.optional("n_group", c.n_group);
  f.optional("stages", c.stages);
  f.optional("in_channels", c.in_channels);
  f.optional("backbone_widths", c.backbone_widths);
  f.optional("phi_widths", c.phi_widths);
  f.optional("psi_widths", c.psi_widths);
  f.optional("zeta_widths", c.zeta_widths);
  f.optional("mode", mode);
  f.finish();
  c.grid_height = grid[0];
  c.grid_width = grid[1];
  c.mode = ablation_mode_from_string(mode);
}

void to_json(json& j, const AdamConfig& c) {
  j = json{{"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}};
}

void from_json(const json& j, AdamConfig& c) {
  Fields f(j, "adam");
  f.optional("beta1", c.beta1);
  f.optional("beta2", c.beta2);
  f.optional("epsilon", c.epsilon);
  f.finish();
}

void to_json(json& j, const EpochSegment& s) {
  j = json{{"epochs", s.epochs}, {"lr", s.learning_rate}};
}

void from_json(const json& j, EpochSegment& s) {
  Fields f(j, "segment");
  f.required("epochs", s.epochs);
  f.required("lr", s.learning_rate);
  f.finish();
}

void to_json(json& j, const PhaseConfig& p) {
  j = json{{"segments", p.segments},
           {"w_map", p.map_weight},
           {"w_group", p.group_weight}};
}

void from_json(const json& j, PhaseConfig& p) {
  Fields f(j, "phase");
  f.required("segments", p.segments);
  f.optional("w_map", p.map_weight);
  f.optional("w_group", p.group_weight);
  f.finish();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"phase1", c.phase1},
           {"phase2", c.phase2},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"modality", c.modality},
           {"adam", c.adam}};
}

void from_json(const json& j, TrainConfig& c) {
  Fields f(j, "train");
  f.optional("phase1", c.phase1);
  f.optional("phase2", c.phase2);
  f.optional("batch_size", c.batch_size);
  f.optional("seed", c.seed);
  f.optional("modality", c.modality);
  f.optional("adam", c.adam);
  f.finish();
}

}  // namespace crm
