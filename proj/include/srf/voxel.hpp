// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "srf/geometry.hpp"
#include "srf/vec.hpp"

namespace srf {

// Occupancy scaffold over a world-space box. Values live at cell centers,
// layout index = x + nx*(y + ny*z).
struct VoxelGrid {
  int nx = 0, ny = 0, nz = 0;
  Aabb bounds = unit_box();
  std::vector<double> values;

  VoxelGrid() = default;
  VoxelGrid(int nx_, int ny_, int nz_, const Aabb& b = unit_box())
      : nx(nx_), ny(ny_), nz(nz_), bounds(b), values((size_t)nx_ * ny_ * nz_, 0.0) {}

  size_t index(int x, int y, int z) const { return (size_t)x + (size_t)nx * (y + (size_t)ny * z); }
  double at(int x, int y, int z) const { return values[index(x, y, z)]; }
  double& at(int x, int y, int z) { return values[index(x, y, z)]; }

  Vec3 voxel_size() const {
    const Vec3 e = bounds.extent();
    return {e.x / nx, e.y / ny, e.z / nz};
  }
  Vec3 center_of(int x, int y, int z) const {
    const Vec3 h = voxel_size();
    return {bounds.min.x + (x + 0.5) * h.x, bounds.min.y + (y + 0.5) * h.y,
            bounds.min.z + (z + 0.5) * h.z};
  }
  size_t cell_count() const { return values.size(); }
};

// Interpolates the 8 surrounding cell centers; corners that fall outside the
// center lattice contribute 0 and points outside the bounds return 0.
double trilinear_sample(const VoxelGrid& grid, const Vec3& p);

// Interpolation weights of the 8 corners around p; corner_index = -1 marks a
// corner outside the lattice. Shared by the plain sampler and the tape op.
struct TrilinearStencil {
  long corner[8];   // flat index into values, or -1
  double weight[8];
  double axis_weight[3][2];  // 1D weights per axis, low/high corner
  Vec3 inv_cell;             // 1 / voxel size, for position gradients
  bool inside = false;       // p within bounds
};
TrilinearStencil trilinear_stencil(int nx, int ny, int nz, const Aabb& bounds, const Vec3& p);
inline TrilinearStencil trilinear_stencil(const VoxelGrid& grid, const Vec3& p) {
  return trilinear_stencil(grid.nx, grid.ny, grid.nz, grid.bounds, p);
}

// Flip along the x index; bounds unchanged.
VoxelGrid mirror(const VoxelGrid& grid);

// Thresholded intersection-over-union. Both sets empty -> 1.
double voxel_iou(const VoxelGrid& a, const VoxelGrid& b, double threshold = 0.5);

// VXG binary format: "VXGR", u32 version=1, u32 nx/ny/nz, six f32 bounds
// (min.xyz, max.xyz), then nx*ny*nz f32 values, all little-endian.
void save_vxg(const std::string& path, const VoxelGrid& grid);
VoxelGrid load_vxg(const std::string& path);

}  // namespace srf
