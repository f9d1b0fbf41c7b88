#include "crm/activity_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace crm {

void validate_scene(const Scene& scene, int n_individual, int n_group) {
  if (scene.group < 0 || scene.group >= n_group) {
    throw std::invalid_argument("scene " + std::to_string(scene.id) +
                                ": group index " + std::to_string(scene.group) +
                                " outside [0, " + std::to_string(n_group) + ")");
  }
  for (std::size_t m = 0; m < scene.persons.size(); ++m) {
    const auto& person = scene.persons[m];
    if (!person.box.valid()) {
      throw std::invalid_argument("scene " + std::to_string(scene.id) +
                                  ": person " + std::to_string(m) +
                                  " has a degenerate box");
    }
    if (person.action < 0 || person.action >= n_individual) {
      throw std::invalid_argument("scene " + std::to_string(scene.id) +
                                  ": person " + std::to_string(m) +
                                  " action index out of range");
    }
  }
  if (scene.key_actor >= scene.person_count()) {
    throw std::invalid_argument("scene " + std::to_string(scene.id) +
                                ": key actor index out of range");
  }
}

GaussianParams gaussian_params(const BBox& box, double sigma_floor) {
  if (!box.valid()) {
    throw std::invalid_argument("gaussian_params: degenerate box");
  }
  GaussianParams p;
  p.mu_x = box.center_x();
  p.mu_y = box.center_y();
  p.sigma_x = std::max(box.width() / 4.0, sigma_floor);
  p.sigma_y = std::max(box.height() / 4.0, sigma_floor);
  return p;
}

ActivityMap::ActivityMap(int height, int width, int n_individual, int n_group)
    : height_(height),
      width_(width),
      n_individual_(n_individual),
      n_group_(n_group) {
  if (height < 1 || width < 1 || n_individual < 0 || n_group < 1) {
    throw std::invalid_argument("activity map: bad shape");
  }
  values_.assign(static_cast<std::size_t>(height) * width * n_fields(), 0.0);
}

Tensor ActivityMap::to_tensor() const {
  return Tensor(Shape{height_, width_, n_fields()}, values_);
}

ActivityMap render_person_map(const BBox& box, int action, int group,
                              GridSize grid, int n_individual, int n_group,
                              double sigma_floor) {
  if (action < 0 || action >= n_individual) {
    if (!(n_individual == 0 && action == -1)) {
      throw std::invalid_argument("render_person_map: action index out of range");
    }
  }
  if (group < 0 || group >= n_group) {
    throw std::invalid_argument("render_person_map: group index out of range");
  }
  ActivityMap map(grid.height, grid.width, n_individual, n_group);
  const GaussianParams g = gaussian_params(box, sigma_floor);
  const double norm = 1.0 / (2.0 * std::numbers::pi * g.sigma_x * g.sigma_y);

  // Densities are a function of the cell-center offset from mu, so integer
  // translations of integer-aligned boxes shift the field bit-exactly.
  std::vector<double> field(static_cast<std::size_t>(grid.height) * grid.width);
  double peak = 0.0;
  for (int y = 0; y < grid.height; ++y) {
    const double dy = (y + 0.5) - g.mu_y;
    const double ey = dy / g.sigma_y;
    for (int x = 0; x < grid.width; ++x) {
      const double dx = (x + 0.5) - g.mu_x;
      const double ex = dx / g.sigma_x;
      const double v = norm * std::exp(-0.5 * (ex * ex + ey * ey));
      field[static_cast<std::size_t>(y) * grid.width + x] = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {  // an all-zero field stays zero
    for (double& v : field) {
      v /= peak;
    }
  }

  const int group_field = n_individual + group;
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const double v = field[static_cast<std::size_t>(y) * grid.width + x];
      if (action >= 0) {
        map.at(y, x, action) = v;
      }
      map.at(y, x, group_field) = v;
    }
  }
  return map;
}

ActivityMap combine_max(const std::vector<ActivityMap>& person_maps,
                        GridSize grid, int n_individual, int n_group) {
  ActivityMap out(grid.height, grid.width, n_individual, n_group);
  for (const auto& m : person_maps) {
    if (!m.same_shape(out)) {
      throw std::invalid_argument("combine_max: person map shape mismatch");
    }
    auto& acc = out.values();
    const auto& v = m.values();
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] = std::max(acc[i], v[i]);
    }
  }
  return out;
}

ActivityMap build_activity_map(const Scene& scene, GridSize grid,
                               int n_individual, int n_group,
                               double sigma_floor) {
  std::vector<ActivityMap> person_maps;
  person_maps.reserve(scene.persons.size());
  for (const auto& person : scene.persons) {
    const int action = n_individual == 0 ? -1 : person.action;
    person_maps.push_back(render_person_map(person.box, action, scene.group,
                                            grid, n_individual, n_group,
                                            sigma_floor));
  }
  return combine_max(person_maps, grid, n_individual, n_group);
}

ActivityMap map_from_tensor(const Tensor& tensor, int n_individual, int n_group) {
  if (!tensor.defined() || tensor.rank() != 3 ||
      tensor.dim(2) != n_individual + n_group) {
    throw std::invalid_argument("map_from_tensor: tensor is not H x W x N");
  }
  ActivityMap map(tensor.dim(0), tensor.dim(1), n_individual, n_group);
  map.values().assign(tensor.data(), tensor.data() + tensor.numel());
  return map;
}

BBox scale_box_to_grid(const BBox& image_box, int image_height, int image_width,
                       GridSize grid) {
  const double sx = static_cast<double>(grid.width) / image_width;
  const double sy = static_cast<double>(grid.height) / image_height;
  BBox b;
  b.x1 = std::clamp(image_box.x1 * sx, 0.0, static_cast<double>(grid.width));
  b.x2 = std::clamp(image_box.x2 * sx, 0.0, static_cast<double>(grid.width));
  b.y1 = std::clamp(image_box.y1 * sy, 0.0, static_cast<double>(grid.height));
  b.y2 = std::clamp(image_box.y2 * sy, 0.0, static_cast<double>(grid.height));
  return b;
}

Scene scale_scene_to_grid(const Scene& scene, int image_height, int image_width,
                          GridSize grid) {
  Scene out = scene;
  for (auto& person : out.persons) {
    person.box = scale_box_to_grid(person.box, image_height, image_width, grid);
  }
  return out;
}

namespace {

struct CellRange {
  int x0, x1, y0, y1;  // half-open
};

CellRange box_cells(const BBox& box, int height, int width) {
  CellRange r;
  r.x0 = std::clamp(static_cast<int>(std::floor(box.x1)), 0, width);
  r.x1 = std::clamp(static_cast<int>(std::ceil(box.x2)), 0, width);
  r.y0 = std::clamp(static_cast<int>(std::floor(box.y1)), 0, height);
  r.y1 = std::clamp(static_cast<int>(std::ceil(box.y2)), 0, height);
  return r;
}

}  // namespace

PoolDecodeResult decode_group_by_pooling(const ActivityMap& map,
                                         const std::vector<BBox>& boxes) {
  if (boxes.empty()) {
    throw std::invalid_argument("decode_group_by_pooling: no boxes");
  }
  PoolDecodeResult result;
  result.scores.assign(static_cast<std::size_t>(map.n_group()), 0.0);
  for (const auto& box : boxes) {
    const CellRange r = box_cells(box, map.height(), map.width());
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        for (int g = 0; g < map.n_group(); ++g) {
          result.scores[static_cast<std::size_t>(g)] +=
              map.at(y, x, map.n_individual() + g);
        }
      }
    }
  }
  result.group = 0;
  for (int g = 1; g < map.n_group(); ++g) {
    if (result.scores[static_cast<std::size_t>(g)] >
        result.scores[static_cast<std::size_t>(result.group)]) {
      result.group = g;  // strict: ties keep the lowest index
    }
  }
  return result;
}

int decode_individual_by_pooling(const ActivityMap& map, const BBox& box) {
  if (map.n_individual() < 1) {
    throw std::invalid_argument(
        "decode_individual_by_pooling: map has no individual fields");
  }
  const CellRange r = box_cells(box, map.height(), map.width());
  std::vector<double> scores(static_cast<std::size_t>(map.n_individual()), 0.0);
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      for (int i = 0; i < map.n_individual(); ++i) {
        scores[static_cast<std::size_t>(i)] += map.at(y, x, i);
      }
    }
  }
  int best = 0;
  for (int i = 1; i < map.n_individual(); ++i) {
    if (scores[static_cast<std::size_t>(i)] >
        scores[static_cast<std::size_t>(best)]) {
      best = i;
    }
  }
  return best;
}

}  // namespace crm
