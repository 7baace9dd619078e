// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srf {

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image to_grayscale(const Image& img) {
  Image out(img.width, img.height, 1);
  if (img.channels == 1) {
    out.data = img.data;
    return out;
  }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(y, x, 0) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return out;
}

Image resize_bilinear(const Image& img, int new_width, int new_height) {
  Image out(new_width, new_height, img.channels);
  const double sx = static_cast<double>(img.width) / new_width;
  const double sy = static_cast<double>(img.height) / new_height;
  for (int y = 0; y < new_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        // lerp form keeps constant images exactly constant
        const double top = img.at(y0, x0, c) + wx * (img.at(y0, x1, c) - img.at(y0, x0, c));
        const double bot = img.at(y1, x0, c) + wx * (img.at(y1, x1, c) - img.at(y1, x0, c));
        out.at(y, x, c) = top + wy * (bot - top);
      }
    }
  }
  return out;
}

double image_mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw std::invalid_argument("image_mse: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return a.data.empty() ? 0.0 : s / a.data.size();
}

}  // namespace srf
