// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "srf/camera.hpp"
#include "srf/image.hpp"

namespace srf {

// Dense HOG on a 64x64 grayscale resample: central-difference gradients,
// 9 unsigned orientation bins over 8x8-pixel cells, overlapping 2x2-cell
// blocks with L2 normalization. Descriptor length (8-1)^2 * 4 * 9 = 1764.
std::vector<double> hog_features(const Image& image);

double hog_distance(const std::vector<double>& a, const std::vector<double>& b);

struct GalleryEntry {
  Image image;
  Camera camera;
};
// Camera of the gallery entry with the smallest HOG L2 distance; ties break
// to the lowest index.
Camera retrieve_camera(const Image& query, const std::vector<GalleryEntry>& gallery);

}  // namespace srf
