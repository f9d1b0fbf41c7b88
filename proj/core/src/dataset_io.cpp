#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "crm/dataset.hpp"
#include "crm/serialize.hpp"

namespace crm {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr char kFramesMagic[4] = {'C', 'R', 'M', 'F'};
constexpr std::uint32_t kFramesVersion = 1;
constexpr int kAnnotationVersion = 1;

template <class T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw std::runtime_error(std::string("frames.bin: truncated while reading ") + what);
  }
  return value;
}

void write_frames(const Dataset& dataset, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  const auto& c = dataset.config;
  out.write(kFramesMagic, sizeof(kFramesMagic));
  write_pod<std::uint32_t>(out, kFramesVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.records.size()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.modalities));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.frames));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.image_height));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.image_width));
  write_pod<std::uint32_t>(out, 3);  // channels
  for (const auto& record : dataset.records) {
    if (static_cast<int>(record.clips.size()) != c.modalities) {
      throw std::runtime_error("dataset record is missing rendered frames");
    }
    for (const auto& clip : record.clips) {
      out.write(reinterpret_cast<const char*>(clip.data()),
                static_cast<std::streamsize>(clip.numel() * sizeof(double)));
    }
  }
  if (!out) {
    throw std::runtime_error("write to '" + path.string() + "' failed");
  }
}

void read_frames(Dataset& dataset, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFramesMagic, sizeof(kFramesMagic)) != 0) {
    throw std::runtime_error("frames.bin: bad magic");
  }
  if (read_pod<std::uint32_t>(in, "version") != kFramesVersion) {
    throw std::runtime_error("frames.bin: unsupported version");
  }
  const auto scenes = read_pod<std::uint32_t>(in, "scene count");
  const auto modalities = read_pod<std::uint32_t>(in, "modalities");
  const auto k = read_pod<std::uint32_t>(in, "frames");
  const auto h = read_pod<std::uint32_t>(in, "height");
  const auto w = read_pod<std::uint32_t>(in, "width");
  const auto c = read_pod<std::uint32_t>(in, "channels");
  const auto& cfg = dataset.config;
  if (scenes != dataset.records.size() ||
      modalities != static_cast<std::uint32_t>(cfg.modalities) ||
      k != static_cast<std::uint32_t>(cfg.frames) ||
      h != static_cast<std::uint32_t>(cfg.image_height) ||
      w != static_cast<std::uint32_t>(cfg.image_width) || c != 3) {
    throw std::runtime_error("frames.bin: header disagrees with annotations");
  }
  const std::int64_t clip_len = static_cast<std::int64_t>(k) * h * w * c;
  for (auto& record : dataset.records) {
    record.clips.clear();
    for (std::uint32_t m = 0; m < modalities; ++m) {
      std::vector<double> values(static_cast<std::size_t>(clip_len));
      in.read(reinterpret_cast<char*>(values.data()),
              static_cast<std::streamsize>(clip_len * sizeof(double)));
      if (!in) {
        throw std::runtime_error("frames.bin: truncated clip data (scene " +
                                 std::to_string(record.scene.id) + ")");
      }
      record.clips.emplace_back(
          Shape{static_cast<int>(k), static_cast<int>(h), static_cast<int>(w),
                static_cast<int>(c)},
          std::move(values));
    }
  }
}

json scene_to_json(const SceneRecord& record, int frames_ref) {
  json persons = json::array();
  for (const auto& person : record.scene.persons) {
    persons.push_back(json{
        {"box", {person.box.x1, person.box.y1, person.box.x2, person.box.y2}},
        {"action", person.action + 1}});
  }
  json j{{"id", record.scene.id},
         {"group", record.scene.group + 1},
         {"split", record.split == 0 ? "train" : "test"},
         {"persons", std::move(persons)},
         {"frames_ref", frames_ref}};
  if (record.scene.key_actor >= 0) {
    j["key_actor"] = record.scene.key_actor + 1;
  }
  return j;
}

SceneRecord scene_from_json(const json& j, const SyntheticConfig& config,
                            std::size_t position) {
  const std::string scope = "scenes[" + std::to_string(position) + "]";
  if (!j.is_object()) {
    throw std::runtime_error(scope + ": expected an object");
  }
  auto require = [&](const char* key) -> const json& {
    const auto it = j.find(key);
    if (it == j.end()) {
      throw std::runtime_error(scope + "." + key + ": missing field");
    }
    return *it;
  };

  SceneRecord record;
  record.scene.id = require("id").get<int>();
  record.scene.group = require("group").get<int>() - 1;
  const std::string split = require("split").get<std::string>();
  if (split != "train" && split != "test") {
    throw std::runtime_error(scope + ".split: must be 'train' or 'test'");
  }
  record.split = split == "train" ? 0 : 1;
  for (const auto& pj : require("persons")) {
    PersonAnnotation person;
    const auto& box = pj.at("box");
    if (!box.is_array() || box.size() != 4) {
      throw std::runtime_error(scope + ".persons.box: expected [x1,y1,x2,y2]");
    }
    person.box = BBox{box[0].get<double>(), box[1].get<double>(),
                      box[2].get<double>(), box[3].get<double>()};
    person.action = pj.at("action").get<int>() - 1;
    record.scene.persons.push_back(person);
  }
  if (const auto it = j.find("key_actor"); it != j.end()) {
    record.scene.key_actor = it->get<int>() - 1;
  }
  validate_scene(record.scene, config.n_individual, config.n_group);
  return record;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);

  json scenes = json::array();
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    scenes.push_back(scene_to_json(dataset.records[i], static_cast<int>(i)));
  }
  json doc{{"version", kAnnotationVersion},
           {"config", dataset.config},
           {"scenes", std::move(scenes)}};

  std::ofstream out(root / "annotations.json", std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + (root / "annotations.json").string() +
                             "' for writing");
  }
  out << doc.dump(1, '\t') << "\n";
  if (!out) {
    throw std::runtime_error("write to annotations.json failed");
  }
  write_frames(dataset, root / "frames.bin");
}

Dataset load_dataset(const std::string& dir, bool load_frames) {
  const fs::path root(dir);
  std::ifstream in(root / "annotations.json");
  if (!in) {
    throw std::runtime_error("cannot open '" + (root / "annotations.json").string() + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    // err already carries the byte offset and a line hint
    throw std::runtime_error("annotations.json: " + std::string(err.what()));
  }

  Dataset dataset;
  try {
    if (doc.at("version").get<int>() != kAnnotationVersion) {
      throw std::runtime_error("annotations.json: unsupported version");
    }
    dataset.config = doc.at("config").get<SyntheticConfig>();
  } catch (const json::exception& err) {
    throw std::runtime_error("annotations.json: " + std::string(err.what()));
  }

  const auto& scenes = doc.at("scenes");
  if (!scenes.is_array()) {
    throw std::runtime_error("annotations.json: 'scenes' must be an array");
  }
  dataset.records.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    dataset.records.push_back(scene_from_json(scenes[i], dataset.config, i));
  }

  if (load_frames) {
    read_frames(dataset, root / "frames.bin");
  }
  return dataset;
}

}  // namespace crm
