// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "srf/vec.hpp"

namespace srf {

// Float image, values nominally in [0,1]. Rows run top to bottom. channels is
// 1 (masks) or 3 (color).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;  // height * width * channels, row-major

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), data((size_t)w * h * c, 0.0) {}

  static Image constant(int w, int h, const Rgb& color) {
    Image img(w, h, 3);
    for (int i = 0; i < w * h; ++i) {
      img.data[i * 3 + 0] = color.x;
      img.data[i * 3 + 1] = color.y;
      img.data[i * 3 + 2] = color.z;
    }
    return img;
  }

  double at(int y, int x, int c) const {
    return data[((size_t)y * width + x) * channels + c];
  }
  double& at(int y, int x, int c) { return data[((size_t)y * width + x) * channels + c]; }

  Rgb pixel(int y, int x) const {
    if (channels == 1) {
      const double v = at(y, x, 0);
      return {v, v, v};
    }
    return {at(y, x, 0), at(y, x, 1), at(y, x, 2)};
  }
  void set_pixel(int y, int x, const Rgb& v) {
    if (channels == 1) {
      at(y, x, 0) = v.x;
      return;
    }
    at(y, x, 0) = v.x;
    at(y, x, 1) = v.y;
    at(y, x, 2) = v.z;
  }
  size_t pixel_count() const { return (size_t)width * height; }
};

Image flip_horizontal(const Image& img);
Image to_grayscale(const Image& img);  // luma weights 0.299/0.587/0.114
Image resize_bilinear(const Image& img, int new_width, int new_height);
double image_mse(const Image& a, const Image& b);

}  // namespace srf
