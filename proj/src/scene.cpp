// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "srf/geometry.hpp"
#include "srf/rng.hpp"

namespace srf {

namespace {

// Albedos stay away from white so background subtraction works on the
// rendered views.
constexpr int kPaletteSize = 12;
const Rgb kPalette[kPaletteSize] = {
    {0.85, 0.20, 0.15}, {0.15, 0.45, 0.80}, {0.20, 0.65, 0.25}, {0.85, 0.60, 0.10},
    {0.55, 0.25, 0.70}, {0.10, 0.65, 0.65}, {0.80, 0.35, 0.55}, {0.45, 0.50, 0.15},
    {0.30, 0.30, 0.75}, {0.75, 0.45, 0.25}, {0.25, 0.55, 0.45}, {0.60, 0.20, 0.30}};

const char* kind_name(Primitive::Kind k) {
  switch (k) {
    case Primitive::Kind::Box: return "box";
    case Primitive::Kind::Sphere: return "sphere";
    case Primitive::Kind::Cylinder: return "cylinder";
  }
  return "box";
}

Primitive::Kind kind_from_name(const std::string& s) {
  if (s == "box") return Primitive::Kind::Box;
  if (s == "sphere") return Primitive::Kind::Sphere;
  if (s == "cylinder") return Primitive::Kind::Cylinder;
  throw std::runtime_error("scene json: unknown primitive kind " + s);
}

}  // namespace

bool primitive_contains(const Primitive& prim, const Vec3& p) {
  const Vec3 d = p - prim.center;
  switch (prim.kind) {
    case Primitive::Kind::Box:
      return std::fabs(d.x) <= prim.size.x && std::fabs(d.y) <= prim.size.y &&
             std::fabs(d.z) <= prim.size.z;
    case Primitive::Kind::Sphere:
      return d.dot(d) <= prim.size.x * prim.size.x;
    case Primitive::Kind::Cylinder:
      return d.x * d.x + d.z * d.z <= prim.size.x * prim.size.x && std::fabs(d.y) <= prim.size.y;
  }
  return false;
}

int scene_hit(const SceneDef& scene, const Vec3& p) {
  for (size_t i = 0; i < scene.primitives.size(); ++i)
    if (primitive_contains(scene.primitives[i], p)) return static_cast<int>(i);
  return -1;
}

SceneDef generate_scene(uint64_t seed, int complexity) {
  if (complexity < 1) throw std::invalid_argument("generate_scene: complexity must be >= 1");
  Pcg32 rng(seed);
  SceneDef scene;
  scene.id = "scene-" + std::to_string(seed);
  scene.mirror_symmetric = true;

  int palette_order[kPaletteSize];
  for (int i = 0; i < kPaletteSize; ++i) palette_order[i] = i;
  for (int i = kPaletteSize - 1; i > 0; --i)
    std::swap(palette_order[i], palette_order[rng.next_below(i + 1)]);

  const int base_count = complexity == 1 ? 1 : 1 + static_cast<int>(rng.next_below(complexity));
  int color = 0;
  for (int i = 0; i < base_count; ++i) {
    Primitive prim;
    const uint32_t kind_draw = rng.next_below(3);
    prim.kind = kind_draw == 0 ? Primitive::Kind::Box
                               : (kind_draw == 1 ? Primitive::Kind::Sphere
                                                 : Primitive::Kind::Cylinder);
    prim.albedo = kPalette[palette_order[color++ % kPaletteSize]];

    // Feature sizes >= 0.08 so midpoint sampling at >= 256 samples resolves
    // every primitive; lower bounds keep silhouettes a good fraction of the
    // frame at the desk-scale image size.
    auto dim = [&](double lo, double hi) { return lo + rng.next_double() * (hi - lo); };
    switch (prim.kind) {
      case Primitive::Kind::Box:
        prim.size = {dim(0.1, 0.24), dim(0.1, 0.24), dim(0.1, 0.24)};
        break;
      case Primitive::Kind::Sphere:
        prim.size = {dim(0.12, 0.24), 0.0, 0.0};
        break;
      case Primitive::Kind::Cylinder:
        prim.size = {dim(0.08, 0.18), dim(0.14, 0.3), 0.0};
        break;
    }
    const Vec3 half{prim.kind == Primitive::Kind::Sphere ? prim.size.x : prim.size.x,
                    prim.kind == Primitive::Kind::Sphere ? prim.size.x : prim.size.y,
                    prim.kind == Primitive::Kind::Box ? prim.size.z : prim.size.x};

    // a mirrored pair needs room on both sides of the symmetry plane
    const bool pair_fits = half.x + 0.01 <= 0.44 - half.x;
    const bool on_plane =
        complexity == 1 || i == 0 || !pair_fits || rng.next_double() < 0.35;
    auto place = [&](double extent) { return (2.0 * rng.next_double() - 1.0) * extent; };
    if (complexity == 1) {
      prim.center = {0.0, 0.0, 0.0};
    } else {
      prim.center.y = place(0.44 - half.y);
      prim.center.z = place(0.44 - half.z);
      prim.center.x = on_plane ? 0.0 : place(0.44 - half.x);
    }
    if (on_plane || std::fabs(prim.center.x) < 1e-6) {
      prim.center.x = 0.0;
      scene.primitives.push_back(prim);
    } else {
      // keep the pair clear of the symmetry plane for crisper mirror checks
      prim.center.x = std::clamp(std::fabs(prim.center.x), half.x + 0.01, 0.44 - half.x);
      Primitive twin = prim;
      twin.center.x = -prim.center.x;
      scene.primitives.push_back(prim);
      scene.primitives.push_back(twin);
    }
  }
  return scene;
}

OracleView oracle_render(const SceneDef& scene, const Camera& camera, int samples_per_ray,
                         double color_gain) {
  if (samples_per_ray < 64)
    throw std::invalid_argument("oracle_render: samples_per_ray must be >= 64");
  OracleView out;
  out.image = Image(camera.width, camera.height, 3);
  out.mask = Image(camera.width, camera.height, 1);
  const Rgb background{1.0, 1.0, 1.0};
  const Aabb box = unit_box();

  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      Ray ray = camera_ray(camera, x + 0.5, y + 0.5);
      Rgb color = background;
      double acc = 0.0;
      if (const auto hit = aabb_intersect(ray, box)) {
        const double w = (hit->second - hit->first) / samples_per_ray;
        double transmittance = 1.0;
        Rgb accum{0.0, 0.0, 0.0};
        for (int k = 0; k < samples_per_ray; ++k) {
          const Vec3 p = ray.at(hit->first + (k + 0.5) * w);
          const int prim = scene_hit(scene, p);
          if (prim < 0) continue;  // alpha 0 keeps transmittance
          Rgb albedo = scene.primitives[prim].albedo * color_gain;
          albedo = {std::clamp(albedo.x, 0.0, 1.0), std::clamp(albedo.y, 0.0, 1.0),
                    std::clamp(albedo.z, 0.0, 1.0)};
          accum += albedo * transmittance;  // alpha = 1: saturates immediately
          acc += transmittance;
          transmittance = 0.0;
          break;
        }
        color = accum + background * transmittance;
      }
      out.image.set_pixel(y, x, color);
      out.mask.at(y, x, 0) = acc >= 0.5 ? 1.0 : 0.0;
    }
  return out;
}

VoxelGrid voxelize_scene(const SceneDef& scene, int resolution) {
  if (resolution < 2) throw std::invalid_argument("voxelize_scene: resolution must be >= 2");
  VoxelGrid grid(resolution, resolution, resolution, unit_box());
  for (int z = 0; z < resolution; ++z)
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x)
        grid.at(x, y, z) = scene_hit(scene, grid.center_of(x, y, z)) >= 0 ? 1.0 : 0.0;
  return grid;
}

std::string scene_to_json(const SceneDef& scene) {
  nlohmann::json j;
  j["id"] = scene.id;
  j["mirror_symmetric"] = scene.mirror_symmetric;
  auto& prims = j["primitives"] = nlohmann::json::array();
  for (const Primitive& p : scene.primitives) {
    nlohmann::json pj;
    pj["kind"] = kind_name(p.kind);
    pj["center"] = {p.center.x, p.center.y, p.center.z};
    pj["size"] = {p.size.x, p.size.y, p.size.z};
    pj["albedo"] = {p.albedo.x, p.albedo.y, p.albedo.z};
    prims.push_back(pj);
  }
  return j.dump(2);
}

SceneDef scene_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SceneDef scene;
  scene.id = j.at("id").get<std::string>();
  scene.mirror_symmetric = j.at("mirror_symmetric").get<bool>();
  for (const auto& pj : j.at("primitives")) {
    Primitive p;
    p.kind = kind_from_name(pj.at("kind").get<std::string>());
    const auto c = pj.at("center");
    p.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
    const auto s = pj.at("size");
    p.size = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    const auto a = pj.at("albedo");
    p.albedo = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    scene.primitives.push_back(p);
  }
  return scene;
}

}  // namespace srf
