// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "srf/rng.hpp"
#include "srf/tape.hpp"
#include "srf/tensor.hpp"
#include "srf/vec.hpp"
#include "srf/voxel.hpp"

namespace srf {

struct ShapeNetConfig {
  int latent_dim = 64;
  int resolution = 32;  // output grid edge; must be a multiple of 8
  int hidden = 512;
};

struct AppearanceNetConfig {
  int latent_dim = 64;
  int width = 64;  // paper setting: 256
  int frequencies = 6;

  int input_dim() const { return 3 + 6 * frequencies + 3 + 1 + latent_dim; }
};

// Latent decoder theta -> occupancy grid. FC stack seeds a 8-channel
// (res/8)^3 feature volume; three upsample+conv blocks (channels 8->8->4->4)
// reach full resolution; a 1x1x1 projection and logistic produce occupancy.
struct ShapeNetwork {
  ShapeNetConfig cfg;
  Var fc1_w, fc1_b;
  Var fc2_w, fc2_b;
  Var conv_w[3], conv_b[3];
  Var proj_w, proj_b;

  void init(const ShapeNetConfig& c, Pcg32& rng);
  void init_zero(const ShapeNetConfig& c);
  std::vector<Var> params() const;
  void set_trainable(bool trainable);

  // Differentiable decode; returns the flat occupancy grid [res^3] laid out
  // as x + nx*(y + ny*z).
  Var decode_graph(Tape& tape, const Var& theta) const;
  GridMeta grid_meta() const { return {cfg.resolution, cfg.resolution, cfg.resolution, unit_box()}; }

  std::vector<ParamTensor> to_tensors() const;
  void from_tensors(const std::vector<ParamTensor>& tensors);
  ShapeNetwork clone() const;
};

// Radiance field F(p, d, alpha_p, phi) -> (rgb, sigma). Input projection over
// [posenc(p) | d | alpha | phi], two residual FC blocks, logistic color head,
// softplus density head.
struct AppearanceNetwork {
  AppearanceNetConfig cfg;
  Var in_w, in_b;
  Var blk_w[2][2], blk_b[2][2];
  Var color_w, color_b;
  Var sigma_w, sigma_b;

  void init(const AppearanceNetConfig& c, Pcg32& rng);
  void init_zero(const AppearanceNetConfig& c);
  std::vector<Var> params() const;
  void set_trainable(bool trainable);

  struct Radiance {
    Var rgb;    // [n,3]
    Var sigma;  // [n]
  };
  // pts/dirs [n,3], alpha [n] (or [n,1]), phi [latent_dim].
  Radiance eval_graph(Tape& tape, const Var& pts, const Var& dirs, const Var& alpha,
                      const Var& phi) const;

  std::vector<ParamTensor> to_tensors() const;
  void from_tensors(const std::vector<ParamTensor>& tensors);
  AppearanceNetwork clone() const;
};

// Latent code helpers.
Var make_latent(int dim, Pcg32& rng, double stddev = 0.01);

// Plain wrappers over the graph builders.
VoxelGrid shape_decode(const ShapeNetwork& net, const Var& theta);
void appearance_eval(const AppearanceNetwork& net, const Vec3& p, const Vec3& d, double alpha_p,
                     const Var& phi, Rgb* color, double* sigma);

// Trained model: both networks plus per-object latent tables.
struct Model {
  ShapeNetwork shape;
  AppearanceNetwork appearance;
  std::map<std::string, Var> theta;  // object id -> latent
  std::map<std::string, Var> phi;

  void save(const std::string& path) const;
  static Model load(const std::string& path);
  Model clone() const;
};

}  // namespace srf
