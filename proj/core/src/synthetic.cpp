#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "crm/dataset.hpp"
#include "crm/image_io.hpp"
#include "crm/random.hpp"

namespace crm {

std::string to_string(LabelRule rule) {
  return rule == LabelRule::kMajority ? "majority" : "keyactor-side";
}

LabelRule label_rule_from_string(const std::string& name) {
  if (name == "majority") return LabelRule::kMajority;
  if (name == "keyactor-side") return LabelRule::kKeyActorSide;
  throw std::invalid_argument("label rule '" + name +
                              "' is not one of majority|keyactor-side");
}

void SyntheticConfig::validate() const {
  if (n_individual < 2) throw std::invalid_argument("data.n_individual: must be >= 2");
  if (n_group < 2) throw std::invalid_argument("data.n_group: must be >= 2");
  if (min_persons < 1 || max_persons < min_persons) {
    throw std::invalid_argument("data.persons: need max >= min >= 1");
  }
  if (frames < 1) throw std::invalid_argument("data.frames: must be >= 1");
  if (scene_count < 1) throw std::invalid_argument("data.scene_count: must be >= 1");
  if (modalities != 1 && modalities != 2) {
    throw std::invalid_argument("data.modalities: must be 1 or 2");
  }
  if (image_height < 16 || image_width < 16) {
    throw std::invalid_argument("data.image: must be at least 16x16");
  }
  if (grid_height < 4 || grid_width < 4) {
    throw std::invalid_argument("data.grid: must be at least 4x4");
  }
  if (min_person_width < 4 || min_person_height < 4 ||
      max_person_width < min_person_width ||
      max_person_height < min_person_height ||
      max_person_width > image_width || max_person_height > image_height) {
    throw std::invalid_argument("data.person size range is unusable");
  }
  if (rule == LabelRule::kMajority && n_group != n_individual) {
    throw std::invalid_argument(
        "data.n_group: majority rule requires n_group == n_individual");
  }
  if (rule == LabelRule::kKeyActorSide) {
    if (n_group % 2 != 0) {
      throw std::invalid_argument(
          "data.n_group: keyactor-side rule requires an even n_group");
    }
    if (n_group / 2 > n_individual) {
      throw std::invalid_argument(
          "data.n_group: keyactor-side rule requires n_group/2 <= n_individual");
    }
  }
}

namespace {

// Bucket of an action under the keyactor-side rule: the n_individual actions
// fold evenly onto n_group/2 action buckets.
int action_bucket(int action, int n_individual, int n_group) {
  return (action * (n_group / 2)) / n_individual;
}

int key_actor_side(const Scene& scene, const SyntheticConfig& config) {
  const BBox& box = scene.persons[static_cast<std::size_t>(scene.key_actor)].box;
  return box.center_x() > config.image_width / 2.0 ? 1 : 0;
}

}  // namespace

int derive_group_label(const Scene& scene, const SyntheticConfig& config) {
  if (scene.persons.empty()) {
    throw std::invalid_argument("derive_group_label: empty scene");
  }
  if (config.rule == LabelRule::kMajority) {
    std::vector<int> counts(static_cast<std::size_t>(config.n_individual), 0);
    for (const auto& person : scene.persons) {
      counts[static_cast<std::size_t>(person.action)] += 1;
    }
    int best = 0;
    for (int a = 1; a < config.n_individual; ++a) {
      if (counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(best)]) {
        best = a;
      }
    }
    return best;
  }
  if (scene.key_actor < 0 || scene.key_actor >= scene.person_count()) {
    throw std::invalid_argument("derive_group_label: scene has no key actor");
  }
  const int action = scene.persons[static_cast<std::size_t>(scene.key_actor)].action;
  const int side = key_actor_side(scene, config);
  return side * (config.n_group / 2) +
         action_bucket(action, config.n_individual, config.n_group);
}

namespace {

constexpr double kSideMargin = 4.0;  // key actor keeps clear of the midline

bool too_close(const BBox& a, const BBox& b, double gap) {
  return a.x1 < b.x2 + gap && b.x1 < a.x2 + gap && a.y1 < b.y2 + gap &&
         b.y1 < a.y2 + gap;
}

// Places M non-overlapping integer boxes by rejection; returns false when the
// canvas will not take them.
bool place_boxes(const SyntheticConfig& cfg, int count, Rng& rng,
                 std::vector<BBox>& out) {
  out.clear();
  for (int m = 0; m < count; ++m) {
    bool placed = false;
    for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
      const int w = rng.uniform_int(cfg.min_person_width, cfg.max_person_width);
      const int h = rng.uniform_int(cfg.min_person_height, cfg.max_person_height);
      const int x1 = rng.uniform_int(0, cfg.image_width - w);
      const int y1 = rng.uniform_int(0, cfg.image_height - h);
      BBox box{static_cast<double>(x1), static_cast<double>(y1),
               static_cast<double>(x1 + w), static_cast<double>(y1 + h)};
      bool ok = true;
      if (!cfg.allow_overlap) {
        for (const auto& other : out) {
          if (too_close(box, other, cfg.min_separation)) {
            ok = false;
            break;
          }
        }
      }
      if (ok) {
        out.push_back(box);
        placed = true;
      }
    }
    if (!placed) {
      return false;
    }
  }
  return true;
}

void mirror_scene(Scene& scene, const SyntheticConfig& cfg) {
  for (auto& person : scene.persons) {
    const double x1 = cfg.image_width - person.box.x2;
    const double x2 = cfg.image_width - person.box.x1;
    person.box.x1 = x1;
    person.box.x2 = x2;
  }
}

// Builds annotations for one scene; forced_group >= 0 pins the label.
Scene make_scene(const SyntheticConfig& cfg, Rng& rng, int id, int forced_group) {
  for (int attempt = 0; attempt < 25; ++attempt) {
    Scene scene;
    scene.id = id;
    const int count = rng.uniform_int(cfg.min_persons, cfg.max_persons);
    std::vector<BBox> boxes;
    if (!place_boxes(cfg, count, rng, boxes)) {
      continue;
    }
    scene.persons.resize(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
      scene.persons[static_cast<std::size_t>(m)].box = boxes[static_cast<std::size_t>(m)];
      scene.persons[static_cast<std::size_t>(m)].action =
          rng.uniform_int(0, cfg.n_individual - 1);
    }

    if (cfg.rule == LabelRule::kKeyActorSide) {
      std::vector<int> eligible;
      const double mid = cfg.image_width / 2.0;
      for (int m = 0; m < count; ++m) {
        if (std::abs(scene.persons[static_cast<std::size_t>(m)].box.center_x() - mid) >=
            kSideMargin) {
          eligible.push_back(m);
        }
      }
      if (eligible.empty()) {
        continue;
      }
      scene.key_actor =
          eligible[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(eligible.size()) - 1))];

      if (forced_group >= 0) {
        const int half = cfg.n_group / 2;
        const int want_side = forced_group / half;
        const int want_bucket = forced_group % half;
        if (key_actor_side(scene, cfg) != want_side) {
          mirror_scene(scene, cfg);
        }
        for (int a = 0; a < cfg.n_individual; ++a) {
          if (action_bucket(a, cfg.n_individual, cfg.n_group) == want_bucket) {
            scene.persons[static_cast<std::size_t>(scene.key_actor)].action = a;
            break;
          }
        }
      }
    } else if (forced_group >= 0) {
      // Majority: hand a strict majority of persons the wanted action.
      const int quota = count / 2 + 1;
      for (int m = 0; m < quota; ++m) {
        scene.persons[static_cast<std::size_t>(m)].action = forced_group;
      }
    }

    scene.group = derive_group_label(scene, cfg);
    return scene;
  }
  throw std::runtime_error(
      "synthetic: could not place " + std::to_string(cfg.max_persons) +
      " persons on a " + std::to_string(cfg.image_width) + "x" +
      std::to_string(cfg.image_height) + " canvas; loosen the size or count");
}

struct SceneAppearance {
  std::vector<double> background;                 // H*W*3
  std::vector<std::array<double, 3>> fill;        // per person
  std::vector<std::vector<std::array<int, 2>>> jitter;  // [frame][person] dx,dy
};

SceneAppearance make_appearance(const SyntheticConfig& cfg, const Scene& scene,
                                Rng& rng) {
  SceneAppearance ap;
  const std::size_t pixels =
      static_cast<std::size_t>(cfg.image_height) * cfg.image_width;
  ap.background.resize(pixels * 3);
  for (std::size_t i = 0; i < pixels * 3; ++i) {
    ap.background[i] = 0.12 + rng.uniform(-0.02, 0.02);
  }
  ap.fill.resize(scene.persons.size());
  for (std::size_t m = 0; m < scene.persons.size(); ++m) {
    const Rgb c = class_color(scene.persons[m].action);
    const double gain = rng.uniform(0.85, 1.15);
    ap.fill[m] = {std::clamp(c.r / 255.0 * gain, 0.0, 1.0),
                  std::clamp(c.g / 255.0 * gain, 0.0, 1.0),
                  std::clamp(c.b / 255.0 * gain, 0.0, 1.0)};
  }
  ap.jitter.assign(static_cast<std::size_t>(cfg.frames),
                   std::vector<std::array<int, 2>>(scene.persons.size(), {0, 0}));
  const int mid = cfg.frames / 2;
  for (int f = 0; f < cfg.frames; ++f) {
    for (std::size_t m = 0; m < scene.persons.size(); ++m) {
      if (f == mid || cfg.motion_jitter == 0) {
        continue;  // the annotated boxes are the middle frame's
      }
      ap.jitter[static_cast<std::size_t>(f)][m] = {
          rng.uniform_int(-cfg.motion_jitter, cfg.motion_jitter),
          rng.uniform_int(-cfg.motion_jitter, cfg.motion_jitter)};
    }
  }
  return ap;
}

Tensor render_clip(const SyntheticConfig& cfg, const Scene& scene,
                   const SceneAppearance& ap) {
  const int k = cfg.frames, h = cfg.image_height, w = cfg.image_width;
  Tensor clip(Shape{k, h, w, 3});
  const std::size_t frame_len = static_cast<std::size_t>(h) * w * 3;
  for (int f = 0; f < k; ++f) {
    double* frame = clip.data() + f * frame_len;
    std::copy(ap.background.begin(), ap.background.end(), frame);
    for (std::size_t m = 0; m < scene.persons.size(); ++m) {
      const BBox& base = scene.persons[m].box;
      const auto [dx, dy] = ap.jitter[static_cast<std::size_t>(f)][m];
      const int bw = static_cast<int>(base.width());
      const int bh = static_cast<int>(base.height());
      const int x1 = std::clamp(static_cast<int>(base.x1) + dx, 0, w - bw);
      const int y1 = std::clamp(static_cast<int>(base.y1) + dy, 0, h - bh);
      const int x2 = x1 + bw, y2 = y1 + bh;
      for (int y = y1; y < y2; ++y) {
        for (int x = x1; x < x2; ++x) {
          double* px = frame + (static_cast<std::size_t>(y) * w + x) * 3;
          px[0] = ap.fill[m][0];
          px[1] = ap.fill[m][1];
          px[2] = ap.fill[m][2];
        }
      }
      if (static_cast<int>(m) == scene.key_actor) {
        // 2 px white ring marks the key actor
        for (int y = y1; y < y2; ++y) {
          for (int x = x1; x < x2; ++x) {
            if (y - y1 < 2 || y2 - 1 - y < 2 || x - x1 < 2 || x2 - 1 - x < 2) {
              double* px = frame + (static_cast<std::size_t>(y) * w + x) * 3;
              px[0] = px[1] = px[2] = 1.0;
            }
          }
        }
      }
    }
  }
  return clip;
}

// Second stream: frame differences when there is motion, otherwise a central
// difference edge magnitude of the single frame.
Tensor motion_stream(const SyntheticConfig& cfg, const Tensor& clip) {
  const int k = cfg.frames, h = cfg.image_height, w = cfg.image_width;
  Tensor out(Shape{k, h, w, 3});
  const std::size_t frame_len = static_cast<std::size_t>(h) * w * 3;
  if (k > 1) {
    for (int f = 1; f < k; ++f) {
      const double* cur = clip.data() + f * frame_len;
      const double* prev = clip.data() + (f - 1) * frame_len;
      double* dst = out.data() + f * frame_len;
      for (std::size_t i = 0; i < frame_len; ++i) {
        dst[i] = std::abs(cur[i] - prev[i]);
      }
    }
    return out;
  }
  const double* src = clip.data();
  double* dst = out.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const auto at = [&](int yy, int xx) {
          return src[(static_cast<std::size_t>(yy) * w + xx) * 3 + c];
        };
        const double gx =
            (x > 0 && x < w - 1) ? (at(y, x + 1) - at(y, x - 1)) / 2.0 : 0.0;
        const double gy =
            (y > 0 && y < h - 1) ? (at(y + 1, x) - at(y - 1, x)) / 2.0 : 0.0;
        dst[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            std::abs(gx) + std::abs(gy);
      }
    }
  }
  return out;
}

SceneRecord make_record(const SyntheticConfig& cfg, int index, Rng scene_rng,
                        int forced_group) {
  SceneRecord record;
  record.scene = make_scene(cfg, scene_rng, index + 1, forced_group);
  SceneAppearance ap = make_appearance(cfg, record.scene, scene_rng);
  record.clips.push_back(render_clip(cfg, record.scene, ap));
  if (cfg.modalities == 2) {
    record.clips.push_back(motion_stream(cfg, record.clips.front()));
  }
  return record;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Dataset dataset;
  dataset.config = config;
  dataset.records.reserve(static_cast<std::size_t>(config.scene_count));

  const Rng root(config.seed);
  for (int i = 0; i < config.scene_count; ++i) {
    dataset.records.push_back(
        make_record(config, i, root.fork(static_cast<std::uint64_t>(i)), -1));
  }

  // Every group class must appear at least once in a decently sized set;
  // missing classes take over scenes from the tail, deterministically.
  if (config.scene_count >= 100) {
    std::vector<int> histogram(static_cast<std::size_t>(config.n_group), 0);
    for (const auto& record : dataset.records) {
      histogram[static_cast<std::size_t>(record.scene.group)] += 1;
    }
    int victim = config.scene_count - 1;
    for (int g = 0; g < config.n_group; ++g) {
      if (histogram[static_cast<std::size_t>(g)] > 0) {
        continue;
      }
      dataset.records[static_cast<std::size_t>(victim)] = make_record(
          config, victim, root.fork(0x10000000ULL + static_cast<std::uint64_t>(g)), g);
      victim -= 1;
    }
  }
  return dataset;
}

std::vector<int> Dataset::split_indices(int split) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::vector<int> Dataset::all_indices() const {
  std::vector<int> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out[i] = static_cast<int>(i);
  }
  return out;
}

void split_dataset(Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: fraction must be in (0, 1)");
  }
  const int n = static_cast<int>(dataset.records.size());
  std::vector<int> order(dataset.records.size());
  for (int i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i;
  }
  Rng rng(seed);
  rng.shuffle(order);
  const auto train_count = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    dataset.records[static_cast<std::size_t>(order[rank])].split =
        rank < train_count ? 0 : 1;
  }
}

}  // namespace crm
