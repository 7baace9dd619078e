// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "srf/geometry.hpp"
#include "srf/vec.hpp"
#include "srf/voxel.hpp"

namespace srf {

// Reverse-mode autodiff over tensor-granularity operations. Values are dense
// row-major f64 buffers; dims carry the logical shape. A Var is a leaf
// (parameter or constant) or the output of an op; ops record their backward
// closure on the tape when any input tracks gradients.
struct VarData {
  std::vector<int> dims;
  std::vector<double> val;
  std::vector<double> grad;  // sized iff requires_grad
  bool requires_grad = false;

  size_t size() const { return val.size(); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  int rows() const { return dims.empty() ? 1 : dims[0]; }
  int cols() const { return dims.size() < 2 ? 1 : dims[1]; }
};
using Var = std::shared_ptr<VarData>;

Var make_leaf(std::vector<int> dims, std::vector<double> values, bool requires_grad);
Var make_param(std::vector<int> dims, std::vector<double> values);
Var clone_var(const Var& v);  // deep copy, preserves requires_grad

class Tape {
 public:
  // When false, ops compute values only; no closures are recorded.
  bool recording = true;

  void record(std::function<void()> fn) {
    if (recording) backward_ops_.push_back(std::move(fn));
  }
  bool track(std::initializer_list<const Var*> inputs) const {
    if (!recording) return false;
    for (const Var* v : inputs)
      if (*v && (*v)->requires_grad) return true;
    return false;
  }

  // Seeds root (a scalar) with gradient 1 and runs recorded closures in
  // reverse. Call once per recorded graph.
  void backward(const Var& root);

  void clear() { backward_ops_.clear(); }
  size_t node_count() const { return backward_ops_.size(); }

 private:
  std::vector<std::function<void()>> backward_ops_;
};

// ---- elementwise and reduction ops ----
Var constant(Tape&, std::vector<int> dims, std::vector<double> values);
Var constant_scalar(Tape&, double v);
Var add(Tape&, const Var& a, const Var& b);
Var sub(Tape&, const Var& a, const Var& b);
Var mul(Tape&, const Var& a, const Var& b);
Var div(Tape&, const Var& a, const Var& b);
Var scale(Tape&, const Var& a, double s);
Var add_scalar(Tape&, const Var& a, double s);
Var relu(Tape&, const Var& a);
Var logistic(Tape&, const Var& a);
Var softplus(Tape&, const Var& a);
Var sin_ew(Tape&, const Var& a);
Var cos_ew(Tape&, const Var& a);
Var sqrt_ew(Tape&, const Var& a);
Var sum(Tape&, const Var& a);
Var mean(Tape&, const Var& a);
Var sum_sq(Tape&, const Var& a);

// ---- structural ops ----
Var slice_scalar(Tape&, const Var& x, int index);                // -> [1]
Var pack_scalars(Tape&, const std::vector<Var>& scalars);        // -> [k]
Var concat_cols(Tape&, const std::vector<Var>& parts);           // [n,ki] -> [n,sum ki]
Var broadcast_rows(Tape&, const Var& v, int n);                  // [k] -> [n,k]
Var gather_rows(Tape&, const Var& x, std::vector<int> idx);      // [m,k] -> [N,k]
Var scale_rows(Tape&, const Var& x, std::vector<double> s);      // row i scaled by s[i]
Var scale_by(Tape&, const Var& x, const Var& s);                 // s scalar Var
Var reshape(Tape&, const Var& x, std::vector<int> dims);         // same buffer size

// ---- dense layers ----
// y[n,out] = x[n,in] * w[out,in]^T + b[out]
Var linear(Tape&, const Var& x, const Var& w, const Var& b);
// x dims {ci,D,H,W}; w dims {co,ci,3,3,3}; zero padding 1. y dims {co,D,H,W}.
Var conv3d(Tape&, const Var& x, const Var& w, const Var& b);
// 1x1x1 convolution: w dims {co,ci}.
Var conv1x1(Tape&, const Var& x, const Var& w, const Var& b);
// Nearest-neighbor doubling of {c,D,H,W}.
Var upsample_nearest2(Tape&, const Var& x);

// ---- small matrix / geometry ops ----
Var mat3_mul(Tape&, const Var& a, const Var& b);                 // [9]x[9] row-major
// y_i = A * x_i (or A^T * x_i). x [n,3], A [9].
Var rows_mat3(Tape&, const Var& x, const Var& a, bool transpose_a);
Var normalize_rows(Tape&, const Var& x);                         // [n,3]
// NeRF-style positional encoding of rows of [n,3] -> [n, 3+6L].
Var posenc(Tape&, const Var& pts, int frequencies);

// ---- scaffold ops ----
struct GridMeta {
  int nx = 0, ny = 0, nz = 0;
  Aabb bounds = unit_box();
};
// grid: flat [nx*ny*nz] Var; pts [n,3]. Gradients flow to grid values and,
// when pts tracks gradients, to the sample positions.
Var trilinear(Tape&, const Var& grid, const GridMeta& meta, const Var& pts);
// out[x,y,z] = in[nx-1-x,y,z]
Var mirror_x(Tape&, const Var& grid, const GridMeta& meta);
// Weighted binary cross entropy against a constant target, mean over cells:
// -(1/N) sum gamma*t*log(p) + (1-gamma)*(1-t)*log(1-p), p clamped to
// [1e-7, 1-1e-7] inside the logs.
Var bce_grid(Tape&, const Var& pred, const std::vector<double>& target, double gamma);

// ---- per-ray compositing ----
// Sample j belongs to ray segment [offset[r], offset[r+1]). delta holds the
// quadrature interval widths (constants in the backward pass).
struct RaySegments {
  std::vector<int> offset;  // size n_rays+1
  std::vector<double> delta;
  int n_rays = 0;
};
struct CompositeVars {
  Var color;  // [n_rays,3]
  Var acc;    // [n_rays]
};
// Quadrature compositing: C = sum_k T_k (1-exp(-sigma_k delta_k)) c_k with
// T_k = exp(-sum_{j<k} sigma_j delta_j), plus (1-acc)*background.
CompositeVars composite_rays(Tape&, const Var& sigma, const Var& rgb, const RaySegments& seg,
                             const Rgb& background);
// Occupancy-only compositing: acc = sum_k prod_{j<k}(1-a_j) a_k.
Var silhouette_rays(Tape&, const Var& alpha, const RaySegments& seg);

}  // namespace srf
