#pragma once

#include <vector>

#include "crm/tensor.hpp"

namespace crm {

/// Axis-aligned box, continuous coordinates. Depending on context the units
/// are image pixels (annotations) or map-grid cells (rasterization).
struct BBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double center_x() const { return (x1 + x2) / 2.0; }
  double center_y() const { return (y1 + y2) / 2.0; }
  bool valid() const { return x2 > x1 && y2 > y1; }
  bool overlaps(const BBox& other) const {
    return x1 < other.x2 && other.x1 < x2 && y1 < other.y2 && other.y1 < y2;
  }
};

struct PersonAnnotation {
  BBox box;
  int action = 0;  // 0-based class index
};

/// One annotated sample: person boxes with individual actions plus one scene
/// level group label. Class indices are 0-based in memory; the file formats
/// use 1-based indices.
struct Scene {
  int id = 0;
  std::vector<PersonAnnotation> persons;
  int group = 0;
  int key_actor = -1;  // index into persons, -1 when the label rule has none

  int person_count() const { return static_cast<int>(persons.size()); }
};

void validate_scene(const Scene& scene, int n_individual, int n_group);

struct GridSize {
  int height = 0;
  int width = 0;
};

struct GaussianParams {
  double mu_x = 0.0, mu_y = 0.0;
  double sigma_x = 0.0, sigma_y = 0.0;
};

/// Sigma floor in grid cells; keeps per-field normalization well posed for
/// boxes that shrink to sub-cell size on the map grid.
inline constexpr double kSigmaFloor = 0.5;

/// Box center and quarter-extent sigmas, floored at sigma_floor.
GaussianParams gaussian_params(const BBox& box, double sigma_floor = kSigmaFloor);

/// Stack of 2D fields over the map grid: n_individual individual-action
/// fields first, then n_group group-activity fields. Values of ground-truth
/// maps lie in [0, 1] with per-field peaks of exactly 1.
class ActivityMap {
 public:
  ActivityMap() = default;
  ActivityMap(int height, int width, int n_individual, int n_group);

  int height() const { return height_; }
  int width() const { return width_; }
  int n_individual() const { return n_individual_; }
  int n_group() const { return n_group_; }
  int n_fields() const { return n_individual_ + n_group_; }

  double& at(int y, int x, int field) {
    return values_[(static_cast<std::size_t>(y) * width_ + x) * n_fields() + field];
  }
  double at(int y, int x, int field) const {
    return values_[(static_cast<std::size_t>(y) * width_ + x) * n_fields() + field];
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const ActivityMap& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           n_individual_ == other.n_individual_ && n_group_ == other.n_group_;
  }

  /// H x W x N tensor view (copy) for feeding the network.
  Tensor to_tensor() const;

 private:
  int height_ = 0, width_ = 0, n_individual_ = 0, n_group_ = 0;
  std::vector<double> values_;
};

/// Rasterizes one person: the normalized Gaussian of its box is written into
/// field `action` and field n_individual + `group`; everything else is zero.
/// The density is evaluated at cell centers (x + 0.5, y + 0.5) over the whole
/// grid, then each touched field is divided by its own maximum so the peak is
/// exactly 1.
ActivityMap render_person_map(const BBox& box, int action, int group,
                              GridSize grid, int n_individual, int n_group,
                              double sigma_floor = kSigmaFloor);

/// Pointwise maximum over person maps. An empty list yields the all-zero map
/// of the given shape.
ActivityMap combine_max(const std::vector<ActivityMap>& person_maps,
                        GridSize grid, int n_individual, int n_group);

/// Ground-truth map of a scene whose boxes are already in grid units.
ActivityMap build_activity_map(const Scene& scene, GridSize grid,
                               int n_individual, int n_group,
                               double sigma_floor = kSigmaFloor);

/// Wraps an H x W x N tensor (e.g. a predicted stage map) as an ActivityMap.
ActivityMap map_from_tensor(const Tensor& tensor, int n_individual, int n_group);

/// Scales an image-space box onto the map grid and clamps it to the bounds.
BBox scale_box_to_grid(const BBox& image_box, int image_height, int image_width,
                       GridSize grid);

/// Scene with all boxes mapped onto the grid.
Scene scale_scene_to_grid(const Scene& scene, int image_height, int image_width,
                          GridSize grid);

struct PoolDecodeResult {
  int group = 0;
  std::vector<double> scores;
};

/// Group label by box pooling: per group field, sum the values of the integer
/// cells inside every box, take the argmax (ties -> lowest index). Cells of a
/// box are floor(x1) <= x < ceil(x2), floor(y1) <= y < ceil(y2), clamped.
PoolDecodeResult decode_group_by_pooling(const ActivityMap& map,
                                         const std::vector<BBox>& boxes);

/// Individual label of one person by the same pooling rule over the
/// individual fields of its own box.
int decode_individual_by_pooling(const ActivityMap& map, const BBox& box);

}  // namespace crm
