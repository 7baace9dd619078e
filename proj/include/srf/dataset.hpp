// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "srf/camera.hpp"
#include "srf/image.hpp"
#include "srf/rng.hpp"
#include "srf/scene.hpp"
#include "srf/voxel.hpp"

namespace srf {

struct View {
  Camera camera;
  Image image;  // float color view
  Image mask;   // 1-channel binary silhouette
};

struct ObjectData {
  SceneDef scene;
  VoxelGrid gt_voxels;
  std::vector<View> views;
  std::string id() const { return scene.id; }
};

struct Dataset {
  std::vector<ObjectData> objects;
};

struct DatasetConfig {
  int n_objects = 4;
  int n_views = 13;
  int resolution = 32;      // GT voxel grid edge
  int image_size = 48;
  int complexity = 3;
  double camera_radius = 2.0;
  double focal_scale = 1.1;  // focal length = focal_scale * image_size
  int oracle_samples = 256;
  double color_gain = 1.0;   // test-time appearance shift knob
  uint64_t seed = 0;
};

// Cameras uniformly on a sphere looking at the origin; per view an oracle
// image plus mask; per object a GT voxel grid. Deterministic under seed.
Dataset build_dataset(const DatasetConfig& cfg);

Camera sample_sphere_camera(Pcg32& rng, double radius, double focal_px, int image_size);

// Directory layout: root/{object-id}/scene.json, voxels.vxg,
// views/{k}.png + {k}.srft, masks/{k}.png, cameras.json.
void save_dataset(const Dataset& dataset, const std::string& root);
Dataset load_dataset(const std::string& root);

enum class Split { Train, Val, Test };
// 70/15/15 by object-id hash.
Split split_of(const std::string& object_id);

}  // namespace srf
