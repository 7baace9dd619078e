// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "srf/binary_io.hpp"
#include "srf/image_io.hpp"
#include "srf/rng.hpp"

namespace fs = std::filesystem;

namespace srf {

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json camera_json_obj(const Camera& cam) {
  return nlohmann::json::parse(camera_to_json(cam));
}

}  // namespace

Camera sample_sphere_camera(Pcg32& rng, double radius, double focal_px, int image_size) {
  // uniform direction on the sphere
  const double z = 1.0 - 2.0 * rng.next_double();
  const double phi = 2.0 * M_PI * rng.next_double();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Vec3 eye = Vec3{r * std::cos(phi), z, r * std::sin(phi)} * radius;
  return look_at(eye, Vec3{0, 0, 0}, Vec3{0, 1, 0}, focal_px, image_size, image_size);
}

Dataset build_dataset(const DatasetConfig& cfg) {
  if (cfg.n_views < 3) throw std::invalid_argument("build_dataset: n_views must be >= 3");
  Dataset dataset;
  Pcg32 master(cfg.seed);
  for (int i = 0; i < cfg.n_objects; ++i) {
    ObjectData obj;
    obj.scene = generate_scene(hash_combine(cfg.seed, 0x0b9ec7 + i), cfg.complexity);
    char id[32];
    std::snprintf(id, sizeof(id), "obj-%04d", i);
    obj.scene.id = id;
    obj.gt_voxels = voxelize_scene(obj.scene, cfg.resolution);

    Pcg32 cam_rng = master.fork(0xca3e0000ull + i);
    const double focal = cfg.focal_scale * cfg.image_size;
    for (int v = 0; v < cfg.n_views; ++v) {
      View view;
      view.camera = sample_sphere_camera(cam_rng, cfg.camera_radius, focal, cfg.image_size);
      OracleView rendered =
          oracle_render(obj.scene, view.camera, cfg.oracle_samples, cfg.color_gain);
      view.image = std::move(rendered.image);
      view.mask = std::move(rendered.mask);
      obj.views.push_back(std::move(view));
    }
    dataset.objects.push_back(std::move(obj));
  }
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& root) {
  fs::create_directories(root);
  for (const ObjectData& obj : dataset.objects) {
    const fs::path dir = fs::path(root) / obj.id();
    fs::create_directories(dir / "views");
    fs::create_directories(dir / "masks");
    io::atomic_write_file((dir / "scene.json").string(), scene_to_json(obj.scene));
    save_vxg((dir / "voxels.vxg").string(), obj.gt_voxels);

    nlohmann::json cams = nlohmann::json::array();
    for (size_t v = 0; v < obj.views.size(); ++v) {
      const View& view = obj.views[v];
      cams.push_back(camera_json_obj(view.camera));
      const std::string stem = std::to_string(v);
      save_png((dir / "views" / (stem + ".png")).string(), view.image);
      save_image_srft((dir / "views" / (stem + ".srft")).string(), view.image);
      save_png((dir / "masks" / (stem + ".png")).string(), view.mask);
    }
    nlohmann::json meta;
    meta["views"] = cams;
    io::atomic_write_file((dir / "cameras.json").string(), meta.dump(2));
  }
}

Dataset load_dataset(const std::string& root) {
  Dataset dataset;
  std::vector<std::string> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) dirs.push_back(entry.path().filename().string());
  std::sort(dirs.begin(), dirs.end());

  for (const std::string& name : dirs) {
    const fs::path dir = fs::path(root) / name;
    if (!fs::exists(dir / "scene.json")) continue;
    ObjectData obj;
    obj.scene = scene_from_json(read_text_file((dir / "scene.json").string()));
    obj.gt_voxels = load_vxg((dir / "voxels.vxg").string());
    const auto meta = nlohmann::json::parse(read_text_file((dir / "cameras.json").string()));
    const auto& cams = meta.at("views");
    for (size_t v = 0; v < cams.size(); ++v) {
      View view;
      view.camera = camera_from_json(cams[v].dump());
      const std::string stem = std::to_string(v);
      view.image = load_image_srft((dir / "views" / (stem + ".srft")).string());
      view.mask = load_png((dir / "masks" / (stem + ".png")).string());
      obj.views.push_back(std::move(view));
    }
    dataset.objects.push_back(std::move(obj));
  }
  if (dataset.objects.empty()) throw std::runtime_error("no objects found under " + root);
  return dataset;
}

Split split_of(const std::string& object_id) {
  const uint64_t h = fnv1a64(object_id.data(), object_id.size()) % 100;
  if (h < 70) return Split::Train;
  if (h < 85) return Split::Val;
  return Split::Test;
}

}  // namespace srf
