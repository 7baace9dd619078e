// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace srf {

Ray camera_ray(const Camera& camera, double px, double py) {
  const Vec3 dir_cam{(px - camera.cx) / camera.fx, (py - camera.cy) / camera.fy, 1.0};
  Ray ray;
  ray.origin = camera.center();
  ray.direction = (camera.rotation.transposed() * dir_cam).normalized();
  return ray;
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal_px, int width,
               int height) {
  Vec3 forward = (target - eye).normalized();
  Vec3 up_ref = up;
  if (std::fabs(forward.dot(up_ref.normalized())) > 0.999) up_ref = Vec3{1.0, 0.0, 0.0};
  const Vec3 right = forward.cross(up_ref).normalized();
  const Vec3 down = forward.cross(right);  // +y in image points down

  Camera cam;
  for (int c = 0; c < 3; ++c) {
    cam.rotation(0, c) = right[c];
    cam.rotation(1, c) = down[c];
    cam.rotation(2, c) = forward[c];
  }
  cam.translation = -(cam.rotation * eye);
  cam.fx = cam.fy = focal_px;
  cam.cx = width * 0.5;
  cam.cy = height * 0.5;
  cam.width = width;
  cam.height = height;
  return cam;
}

std::string camera_to_json(const Camera& camera) {
  nlohmann::json j;
  j["rotation"] = camera.rotation.m;
  j["translation"] = {camera.translation.x, camera.translation.y, camera.translation.z};
  j["fx"] = camera.fx;
  j["fy"] = camera.fy;
  j["cx"] = camera.cx;
  j["cy"] = camera.cy;
  j["width"] = camera.width;
  j["height"] = camera.height;
  return j.dump();
}

Camera camera_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Camera cam;
  const auto rot = j.at("rotation");
  if (rot.size() != 9) throw std::runtime_error("camera json: rotation must have 9 entries");
  for (int i = 0; i < 9; ++i) cam.rotation.m[i] = rot[i].get<double>();
  const auto tr = j.at("translation");
  cam.translation = {tr[0].get<double>(), tr[1].get<double>(), tr[2].get<double>()};
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  return cam;
}

}  // namespace srf
