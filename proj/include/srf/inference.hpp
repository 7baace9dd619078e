// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srf/hog.hpp"
#include "srf/losses.hpp"
#include "srf/nets.hpp"
#include "srf/renderer.hpp"

namespace srf {

enum class Variant { ConditionalNeRF, ShapeFromNR, ShapeFromMask, ShapeFromGT };
enum class FitMode { CodeOnly, CodePlusNetwork };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct FitConfig {
  int iterations = 1000;         // total budget across stages
  double stage1_fraction = 0.4;  // stage split for the two-stage variants
  double lr = 1e-3;              // network fine-tuning rate
  double lr_latent = 1e-2;
  double lr_camera = 1e-2;
  int rays_per_step = 128;
  uint64_t seed = 0;
};

// Working state of one fit: cloned networks plus fresh latent codes.
struct FitState {
  ShapeNetwork shape;
  AppearanceNetwork appearance;
  Var theta;
  Var phi;
  Camera camera;
  std::vector<double> loss_history;
};
FitState make_fit_state(const Model& checkpoint, const Camera& camera, uint64_t seed);

// Photometric target; with symmetry augmentation the mirrored image/camera
// pair is appended.
struct FitTarget {
  Image image;
  Camera camera;
};
Camera mirrored_camera(const Camera& camera);
std::vector<FitTarget> make_targets(const Image& image, const Camera& camera, bool symmetry);

// Stage 1: theta (+ shape network) and phi against the inversion objective
// with the appearance network frozen.
void stage1_fit(FitState& state, const std::vector<FitTarget>& targets, FitMode mode,
                int iterations, const FitConfig& cfg, const RenderConfig& render_cfg,
                const LossConfig& loss_cfg);

// Stage 2: phi (+ appearance network) against the photometric term with the
// scaffold frozen. A null scaffold realizes the no-scaffold variant.
void stage2_fit(FitState& state, const std::vector<FitTarget>& targets,
                const VoxelGrid* scaffold, FitMode mode, int iterations, const FitConfig& cfg,
                const RenderConfig& render_cfg);

// Mask-driven shape estimation: theta (+ shape network) against the
// silhouette projection plus the symmetry penalty.
void shape_from_mask_fit(FitState& state, const Image& mask, const Camera& camera, FitMode mode,
                         int iterations, const FitConfig& cfg, const RenderConfig& render_cfg,
                         const LossConfig& loss_cfg);

Image mask_from_background(const Image& image, const Rgb& background, double tol = 0.05);

struct FitResult {
  Variant variant = Variant::ShapeFromNR;
  FitMode mode = FitMode::CodeOnly;
  bool symmetry = false;
  int iterations = 0;
  Var theta;
  Var phi;
  ShapeNetwork shape;
  AppearanceNetwork appearance;
  VoxelGrid scaffold;      // empty for the no-scaffold variant
  bool has_scaffold = false;
  Camera camera;
  std::vector<double> loss_history;
  double final_loss = 0.0;
};

// Single-image inversion. Camera may be absent when a retrieval gallery is
// given; ShapeFromMask requires a mask (the CLI derives one by background
// subtraction), ShapeFromGT requires gt_voxels.
FitResult invert(const Image& image, const std::optional<Camera>& camera, Variant variant,
                 FitMode mode, bool symmetry, const Model& checkpoint, const FitConfig& cfg,
                 const RenderConfig& render_cfg, const LossConfig& loss_cfg,
                 const VoxelGrid* gt_voxels = nullptr, const Image* mask = nullptr,
                 const std::vector<GalleryEntry>* gallery = nullptr);

// Joint refinement of camera (axis-angle/translation deltas on K_init) and
// latent codes with both networks frozen.
Camera estimate_camera(const Image& image, const Model& checkpoint, const Camera& k_init,
                       const FitConfig& cfg, const RenderConfig& render_cfg,
                       const LossConfig& loss_cfg);

Image render_novel_view(const FitResult& fit, const Camera& camera, const RenderConfig& cfg);

// SRFT checkpoint plus JSON sidecar
// {variant, mode, symmetry, iterations, final_loss, camera}.
void save_fit_result(const std::string& path_prefix, const FitResult& fit);
FitResult load_fit_result(const std::string& path_prefix);

}  // namespace srf
