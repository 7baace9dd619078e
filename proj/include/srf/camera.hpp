// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "srf/geometry.hpp"
#include "srf/vec.hpp"

namespace srf {

// Pinhole camera. rotation/translation map world to camera coordinates:
// x_cam = R * x_world + t. The camera looks down +z in camera space.
struct Camera {
  Mat3 rotation = Mat3::identity();
  Vec3 translation;
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  Vec3 center() const { return -(rotation.transposed() * translation); }
  Vec3 optical_axis() const {  // world-space viewing direction
    const Mat3 rt = rotation.transposed();
    return {rt(0, 2), rt(1, 2), rt(2, 2)};
  }
};

// Ray through image point (px, py), in pixel units. Callers follow the
// pixel-center convention: integer pixel (i, j) samples at (i + 0.5, j + 0.5).
// t_near/t_far are left unset; clip against the scene box with aabb_intersect.
Ray camera_ray(const Camera& camera, double px, double py);

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal_px, int width,
               int height);

std::string camera_to_json(const Camera& camera);
Camera camera_from_json(const std::string& text);

}  // namespace srf
