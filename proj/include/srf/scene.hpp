// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "srf/camera.hpp"
#include "srf/image.hpp"
#include "srf/vec.hpp"
#include "srf/voxel.hpp"

namespace srf {

// Analytic primitives, all contained in the unit box. Cylinders are aligned
// with the y axis. Scenes are mirror-symmetric about x = 0 by construction.
struct Primitive {
  enum class Kind { Box, Sphere, Cylinder };
  Kind kind = Kind::Box;
  Vec3 center;
  // Box: half extents (x,y,z). Sphere: x = radius. Cylinder: x = radius,
  // y = half height.
  Vec3 size;
  Rgb albedo{0.5, 0.5, 0.5};
};

struct SceneDef {
  std::string id;
  std::vector<Primitive> primitives;
  bool mirror_symmetric = true;
};

bool primitive_contains(const Primitive& prim, const Vec3& p);
// Index of the first primitive containing p, or -1.
int scene_hit(const SceneDef& scene, const Vec3& p);

// Seeded composition of 1..complexity base primitives with distinct albedos;
// off-axis primitives are emitted together with their x-mirror twin.
SceneDef generate_scene(uint64_t seed, int complexity);

// Flat-albedo reference renderer: binary occupancy composited along midpoint
// samples against a white background. mask = accumulated alpha >= 0.5.
struct OracleView {
  Image image;
  Image mask;  // 1-channel binary
};
OracleView oracle_render(const SceneDef& scene, const Camera& camera, int samples_per_ray,
                         double color_gain = 1.0);

// Occupancy 1 where the voxel center lies inside any primitive.
VoxelGrid voxelize_scene(const SceneDef& scene, int resolution);

std::string scene_to_json(const SceneDef& scene);
SceneDef scene_from_json(const std::string& text);

}  // namespace srf
