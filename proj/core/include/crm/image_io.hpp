#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crm/activity_map.hpp"

namespace crm {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Fixed per-class palette; index wraps for class counts past its size.
const std::vector<Rgb>& class_palette();
Rgb class_color(int class_index);

/// Binary P5 / P6 writers. `upscale` repeats pixels (nearest) for viewing;
/// it never resamples values.
void write_pgm(const std::string& path, const std::vector<std::uint8_t>& gray,
               int height, int width, int upscale = 1);
void write_ppm(const std::string& path, const std::vector<Rgb>& rgb,
               int height, int width, int upscale = 1);

/// One field as 8-bit gray: round(255 * value), values clamped to [0, 1].
std::vector<std::uint8_t> field_to_gray(const ActivityMap& map, int field);

/// Color composite of a field range [first, first + count): every pixel takes
/// the palette color of its strongest field, scaled by that field's value.
std::vector<Rgb> composite_fields(const ActivityMap& map, int first_field,
                                  int count, int palette_offset = 0);

}  // namespace crm
