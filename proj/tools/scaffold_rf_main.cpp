// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
//
// Operator entry point: dataset generation, GLO training, single-image
// inversion, novel-view rendering, metrics, shape export, and the built-in
// selftest.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "srf/config.hpp"
#include "srf/image_io.hpp"
#include "srf/inference.hpp"
#include "srf/metrics.hpp"
#include "srf/selftest.hpp"
#include "srf/threading.hpp"

namespace fs = std::filesystem;
using namespace srf;

namespace {

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128] = {0};
  std::string out;
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unknown" : out;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const AppConfig& cfg, uint64_t seed, double wall_ms) {
  nlohmann::json j;
  j["command"] = command;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["git_describe"] = git_describe();
  j["wall_ms"] = wall_ms;
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  os << j.dump(2) << "\n";
}

const ObjectData& find_object(const Dataset& dataset, const std::string& id) {
  for (const ObjectData& obj : dataset.objects)
    if (obj.id() == id) return obj;
  throw std::runtime_error("object not found in dataset: " + id);
}

Camera orbit_camera(double angle, double elevation, double radius, double focal_scale,
                    int image_size) {
  const double y = radius * std::sin(elevation);
  const double r = radius * std::cos(elevation);
  const Vec3 eye{r * std::cos(angle), y, r * std::sin(angle)};
  return look_at(eye, {0, 0, 0}, {0, 1, 0}, focal_scale * image_size, image_size, image_size);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scaffold-rf: voxel-scaffolded radiance fields from a single image"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "out";
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config of dotted keys");
  app.add_option("--set", overrides, "config override key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed routed to all modules")
      ->each([&](const std::string&) { seed_given = true; });
  app.add_option("--threads", threads, "worker threads (0 = auto)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate the procedural dataset");
  // train
  auto* train = app.add_subcommand("train", "run generative latent optimization");
  std::string data_dir;
  train->add_option("--data", data_dir, "dataset directory (default <out>/dataset)");
  // invert
  auto* inv = app.add_subcommand("invert", "fit the model to a single image");
  std::string inv_data, inv_ckpt, inv_object, inv_variant = "v2", inv_mode = "code+network",
                        inv_camera = "given", inv_mask_path;
  int inv_view = 0;
  bool inv_symmetry = false;
  inv->add_option("--data", inv_data, "dataset directory");
  inv->add_option("--checkpoint", inv_ckpt, "trained checkpoint (default <out>/checkpoint.srft)");
  inv->add_option("--object", inv_object, "object id (default: first test object)");
  inv->add_option("--view", inv_view, "input view index");
  inv->add_option("--variant", inv_variant, "v1|v2|v3|v4 or long names");
  inv->add_option("--mode", inv_mode, "code-only|code+network");
  inv->add_flag("--symmetry", inv_symmetry, "mirrored-input augmentation");
  inv->add_option("--camera", inv_camera, "given|estimate");
  inv->add_option("--mask", inv_mask_path, "segmentation mask PNG (v3; default: background subtraction)");
  // render
  auto* render = app.add_subcommand("render", "render novel views along a circular path");
  std::string render_fit;
  int render_frames = 8;
  double render_elevation = 0.35;
  render->add_option("--fit", render_fit, "fit result prefix (default <out>/fit)");
  render->add_option("--frames", render_frames, "number of views");
  render->add_option("--elevation", render_elevation, "camera elevation in radians");
  // metrics
  auto* met = app.add_subcommand("metrics", "PSNR/SSIM over paired image directories");
  std::string met_a, met_b;
  met->add_option("dir_a", met_a, "rendered images")->required();
  met->add_option("dir_b", met_b, "reference images")->required();
  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "export fitted voxels and IoU against GT");
  std::string rec_fit, rec_data, rec_object;
  rec->add_option("--fit", rec_fit, "fit result prefix (default <out>/fit)");
  rec->add_option("--data", rec_data, "dataset directory");
  rec->add_option("--object", rec_object, "object id for the GT comparison")->required();
  // selftest
  auto* self = app.add_subcommand("selftest", "run the built-in invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto wall_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  try {
    AppConfig cfg;
    if (!config_path.empty()) load_config_file(cfg, config_path);
    if (seed_given) set_global_seed(cfg, seed);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key=value, got: " + kv);
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (threads > 0) cfg.threads = threads;
    set_thread_count(cfg.threads);

    if (*gen) {
      const Dataset dataset = build_dataset(cfg.data);
      const std::string dir = (fs::path(out_dir) / "dataset").string();
      save_dataset(dataset, dir);
      std::cout << "wrote " << dataset.objects.size() << " objects to " << dir << "\n";
      write_manifest(out_dir, "gen-data", cfg, cfg.data.seed, wall_ms());
      return 0;
    }

    if (*train) {
      const std::string dir = data_dir.empty() ? (fs::path(out_dir) / "dataset").string() : data_dir;
      Dataset dataset = load_dataset(dir);
      // objects in the training split; tiny datasets fall back to all objects
      Dataset train_set;
      for (auto& obj : dataset.objects)
        if (split_of(obj.id()) == Split::Train) train_set.objects.push_back(std::move(obj));
      if (train_set.objects.empty()) train_set = std::move(dataset);
      fs::create_directories(out_dir);
      TrainConfig tc = cfg.train;
      if (tc.log_path.empty()) tc.log_path = (fs::path(out_dir) / "train_log.jsonl").string();
      const TrainResult result =
          train_glo(train_set, cfg.shape, cfg.appearance, tc, cfg.render, cfg.loss);
      const std::string ckpt = (fs::path(out_dir) / "checkpoint.srft").string();
      result.model.save(ckpt);
      std::cout << "trained on " << train_set.objects.size() << " objects, checkpoint at "
                << ckpt << "\n";
      write_manifest(out_dir, "train", cfg, tc.seed, wall_ms());
      return 0;
    }

    if (*inv) {
      const std::string ddir =
          inv_data.empty() ? (fs::path(out_dir) / "dataset").string() : inv_data;
      const Dataset dataset = load_dataset(ddir);
      const std::string ckpt =
          inv_ckpt.empty() ? (fs::path(out_dir) / "checkpoint.srft").string() : inv_ckpt;
      const Model model = Model::load(ckpt);

      const ObjectData* obj = nullptr;
      if (inv_object.empty()) {
        for (const ObjectData& o : dataset.objects)
          if (split_of(o.id()) == Split::Test) {
            obj = &o;
            break;
          }
        if (!obj) obj = &dataset.objects.front();
      } else {
        obj = &find_object(dataset, inv_object);
      }
      if (inv_view < 0 || inv_view >= static_cast<int>(obj->views.size()))
        throw std::invalid_argument("--view out of range");
      const View& view = obj->views[inv_view];

      const Variant variant = variant_from_name(inv_variant);
      const FitMode mode =
          inv_mode == "code-only" ? FitMode::CodeOnly : FitMode::CodePlusNetwork;

      std::optional<Camera> camera;
      std::vector<GalleryEntry> gallery;
      if (inv_camera == "given") {
        camera = view.camera;
      } else if (inv_camera == "estimate") {
        for (const ObjectData& o : dataset.objects)
          for (const View& v : o.views) gallery.push_back({v.image, v.camera});
      } else {
        throw std::invalid_argument("--camera expects given|estimate");
      }

      Image mask;
      const Image* mask_ptr = nullptr;
      if (variant == Variant::ShapeFromMask) {
        mask = inv_mask_path.empty()
                   ? mask_from_background(view.image, cfg.render.background)
                   : load_png(inv_mask_path);
        mask_ptr = &mask;
      }
      const VoxelGrid* gt = variant == Variant::ShapeFromGT ? &obj->gt_voxels : nullptr;

      const FitResult fit =
          invert(view.image, camera, variant, mode, inv_symmetry, model, cfg.fit, cfg.render,
                 cfg.loss, gt, mask_ptr, gallery.empty() ? nullptr : &gallery);

      fs::create_directories(out_dir);
      const std::string prefix = (fs::path(out_dir) / "fit").string();
      save_fit_result(prefix, fit);
      save_png((fs::path(out_dir) / "fit-input-view.png").string(),
               render_novel_view(fit, fit.camera, cfg.render));
      std::cout << "fit " << obj->id() << " view " << inv_view << " (" << variant_name(variant)
                << ", final loss " << fit.final_loss << ") -> " << prefix << ".srft\n";
      write_manifest(out_dir, "invert", cfg, cfg.fit.seed, wall_ms());
      return 0;
    }

    if (*render) {
      const std::string prefix =
          render_fit.empty() ? (fs::path(out_dir) / "fit").string() : render_fit;
      const FitResult fit = load_fit_result(prefix);
      const fs::path dir = fs::path(out_dir) / "render";
      fs::create_directories(dir);
      for (int f = 0; f < render_frames; ++f) {
        const double angle = 2.0 * M_PI * f / render_frames;
        const Camera cam = orbit_camera(angle, render_elevation, cfg.data.camera_radius,
                                        cfg.data.focal_scale, cfg.data.image_size);
        char name[32];
        std::snprintf(name, sizeof(name), "frame-%03d.png", f);
        save_png((dir / name).string(), render_novel_view(fit, cam, cfg.render));
      }
      std::cout << "rendered " << render_frames << " frames to " << dir << "\n";
      write_manifest(out_dir, "render", cfg, cfg.render.rng_seed, wall_ms());
      return 0;
    }

    if (*met) {
      MetricsReport report;
      std::vector<std::string> names;
      for (const auto& entry : fs::directory_iterator(met_a))
        if (entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
      std::sort(names.begin(), names.end());
      if (names.empty()) throw std::runtime_error("no PNG files in " + met_a);
      for (const std::string& name : names) {
        const Image a = load_png((fs::path(met_a) / name).string());
        const Image b = load_png((fs::path(met_b) / name).string());
        report.names.push_back(name);
        report.psnr_values.push_back(psnr(a, b));
        report.ssim_values.push_back(ssim(a, b));
      }
      fs::create_directories(out_dir);
      std::ofstream os(fs::path(out_dir) / "metrics.json");
      os << report.to_json() << "\n";
      std::cout << report.to_table();
      write_manifest(out_dir, "metrics", cfg, 0, wall_ms());
      return 0;
    }

    if (*rec) {
      const std::string prefix = rec_fit.empty() ? (fs::path(out_dir) / "fit").string() : rec_fit;
      const FitResult fit = load_fit_result(prefix);
      const std::string ddir =
          rec_data.empty() ? (fs::path(out_dir) / "dataset").string() : rec_data;
      const Dataset dataset = load_dataset(ddir);
      const ObjectData& obj = find_object(dataset, rec_object);
      VoxelGrid fitted =
          fit.has_scaffold ? fit.scaffold : shape_decode(fit.shape, fit.theta);
      fs::create_directories(out_dir);
      const std::string vxg = (fs::path(out_dir) / "reconstruction.vxg").string();
      save_vxg(vxg, fitted);
      const double iou = voxel_iou(fitted, obj.gt_voxels, 0.5);
      nlohmann::json j{{"object", obj.id()}, {"voxel_iou", iou}, {"voxels", vxg}};
      std::ofstream os(fs::path(out_dir) / "reconstruction.json");
      os << j.dump(2) << "\n";
      std::cout << "voxel IoU vs GT (" << obj.id() << "): " << iou << "\n";
      write_manifest(out_dir, "reconstruct", cfg, 0, wall_ms());
      return 0;
    }

    if (*self) {
      const int failures = run_selftest();
      write_manifest(out_dir, "selftest", cfg, 0, wall_ms());
      return failures == 0 ? 0 : 2;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
