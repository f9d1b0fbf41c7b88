#include "crm/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace crm {

const std::vector<Rgb>& class_palette() {
  static const std::vector<Rgb> palette = {
      {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
      {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
      {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
  };
  return palette;
}

Rgb class_color(int class_index) {
  const auto& palette = class_palette();
  return palette[static_cast<std::size_t>(class_index) % palette.size()];
}

namespace {

void write_header(std::ofstream& out, const char* tag, int height, int width) {
  out << tag << "\n" << width << " " << height << "\n255\n";
}

std::uint8_t quantize(double value) {
  const double v = std::clamp(value, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * v));
}

}  // namespace

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& gray,
               int height, int width, int upscale) {
  if (upscale < 1 || gray.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("write_pgm: bad dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_pgm: cannot open '" + path + "'");
  }
  write_header(out, "P5", height * upscale, width * upscale);
  for (int y = 0; y < height * upscale; ++y) {
    for (int x = 0; x < width * upscale; ++x) {
      out.put(static_cast<char>(
          gray[static_cast<std::size_t>(y / upscale) * width + x / upscale]));
    }
  }
}

void write_ppm(const std::string& path, const std::vector<Rgb>& rgb,
               int height, int width, int upscale) {
  if (upscale < 1 || rgb.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("write_ppm: bad dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("write_ppm: cannot open '" + path + "'");
  }
  write_header(out, "P6", height * upscale, width * upscale);
  for (int y = 0; y < height * upscale; ++y) {
    for (int x = 0; x < width * upscale; ++x) {
      const Rgb& p =
          rgb[static_cast<std::size_t>(y / upscale) * width + x / upscale];
      out.put(static_cast<char>(p.r));
      out.put(static_cast<char>(p.g));
      out.put(static_cast<char>(p.b));
    }
  }
}

std::vector<std::uint8_t> field_to_gray(const ActivityMap& map, int field) {
  if (field < 0 || field >= map.n_fields()) {
    throw std::invalid_argument("field_to_gray: field index out of range");
  }
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(map.height()) * map.width());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      gray[static_cast<std::size_t>(y) * map.width() + x] = quantize(map.at(y, x, field));
    }
  }
  return gray;
}

std::vector<Rgb> composite_fields(const ActivityMap& map, int first_field,
                                  int count, int palette_offset) {
  if (first_field < 0 || count < 1 || first_field + count > map.n_fields()) {
    throw std::invalid_argument("composite_fields: field range out of bounds");
  }
  std::vector<Rgb> rgb(static_cast<std::size_t>(map.height()) * map.width());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      int best = 0;
      double best_v = map.at(y, x, first_field);
      for (int f = 1; f < count; ++f) {
        const double v = map.at(y, x, first_field + f);
        if (v > best_v) {
          best_v = v;
          best = f;
        }
      }
      const Rgb color = class_color(palette_offset + best);
      const double v = std::clamp(best_v, 0.0, 1.0);
      rgb[static_cast<std::size_t>(y) * map.width() + x] = Rgb{
          static_cast<std::uint8_t>(std::lround(color.r * v)),
          static_cast<std::uint8_t>(std::lround(color.g * v)),
          static_cast<std::uint8_t>(std::lround(color.b * v)),
      };
    }
  }
  return rgb;
}

}  // namespace crm
