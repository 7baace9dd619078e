// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/voxel.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "srf/binary_io.hpp"

namespace srf {

TrilinearStencil trilinear_stencil(int nx, int ny, int nz, const Aabb& bounds, const Vec3& p) {
  TrilinearStencil st{};
  if (!bounds.contains(p)) return st;
  st.inside = true;

  const Vec3 e = bounds.extent();
  const Vec3 h{e.x / nx, e.y / ny, e.z / nz};
  st.inv_cell = {1.0 / h.x, 1.0 / h.y, 1.0 / h.z};
  // Continuous lattice coordinate: cell center i sits at u = i.
  const double ux = (p.x - bounds.min.x) / h.x - 0.5;
  const double uy = (p.y - bounds.min.y) / h.y - 0.5;
  const double uz = (p.z - bounds.min.z) / h.z - 0.5;
  const int ix = static_cast<int>(std::floor(ux));
  const int iy = static_cast<int>(std::floor(uy));
  const int iz = static_cast<int>(std::floor(uz));
  const double fx = ux - ix, fy = uy - iy, fz = uz - iz;

  st.axis_weight[0][0] = 1.0 - fx;
  st.axis_weight[0][1] = fx;
  st.axis_weight[1][0] = 1.0 - fy;
  st.axis_weight[1][1] = fy;
  st.axis_weight[2][0] = 1.0 - fz;
  st.axis_weight[2][1] = fz;
  int k = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx, ++k) {
        const int cx = ix + dx, cy = iy + dy, cz = iz + dz;
        const bool in_lattice = cx >= 0 && cx < nx && cy >= 0 && cy < ny && cz >= 0 && cz < nz;
        st.corner[k] =
            in_lattice ? static_cast<long>(cx + (size_t)nx * (cy + (size_t)ny * cz)) : -1;
        st.weight[k] = st.axis_weight[0][dx] * st.axis_weight[1][dy] * st.axis_weight[2][dz];
      }
  return st;
}

double trilinear_sample(const VoxelGrid& grid, const Vec3& p) {
  const TrilinearStencil st = trilinear_stencil(grid, p);
  if (!st.inside) return 0.0;
  double v = 0.0;
  for (int k = 0; k < 8; ++k)
    if (st.corner[k] >= 0) v += st.weight[k] * grid.values[st.corner[k]];
  return v;
}

VoxelGrid mirror(const VoxelGrid& grid) {
  VoxelGrid out(grid.nx, grid.ny, grid.nz, grid.bounds);
  for (int z = 0; z < grid.nz; ++z)
    for (int y = 0; y < grid.ny; ++y)
      for (int x = 0; x < grid.nx; ++x) out.at(x, y, z) = grid.at(grid.nx - 1 - x, y, z);
  return out;
}

double voxel_iou(const VoxelGrid& a, const VoxelGrid& b, double threshold) {
  if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz)
    throw std::invalid_argument("voxel_iou: dimension mismatch");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    const bool oa = a.values[i] >= threshold;
    const bool ob = b.values[i] >= threshold;
    inter += oa && ob;
    uni += oa || ob;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

void save_vxg(const std::string& path, const VoxelGrid& grid) {
  std::ostringstream os(std::ios::binary);
  io::write_magic(os, "VXGR");
  io::write_le<uint32_t>(os, 1);
  io::write_le<uint32_t>(os, grid.nx);
  io::write_le<uint32_t>(os, grid.ny);
  io::write_le<uint32_t>(os, grid.nz);
  for (int a = 0; a < 3; ++a) io::write_le<float>(os, static_cast<float>(grid.bounds.min[a]));
  for (int a = 0; a < 3; ++a) io::write_le<float>(os, static_cast<float>(grid.bounds.max[a]));
  for (const double v : grid.values) io::write_le<float>(os, static_cast<float>(v));
  io::atomic_write_file(path, os.str());
}

VoxelGrid load_vxg(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open voxel grid: " + path);
  io::expect_magic(is, "VXGR", "vxg");
  const auto version = io::read_le<uint32_t>(is);
  if (version != 1) throw std::runtime_error("vxg: unsupported version");
  const auto nx = io::read_le<uint32_t>(is);
  const auto ny = io::read_le<uint32_t>(is);
  const auto nz = io::read_le<uint32_t>(is);
  Aabb bounds;
  for (int a = 0; a < 3; ++a) bounds.min[a] = io::read_le<float>(is);
  for (int a = 0; a < 3; ++a) bounds.max[a] = io::read_le<float>(is);
  VoxelGrid grid(nx, ny, nz, bounds);
  for (auto& v : grid.values) v = io::read_le<float>(is);
  return grid;
}

}  // namespace srf
