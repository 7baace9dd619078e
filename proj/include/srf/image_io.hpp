// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "srf/image.hpp"

namespace srf {

// 8-bit PNG, gamma-free: values clamped to [0,1] then scaled to 0..255.
// 1-channel images are written as grayscale PNG.
void save_png(const std::string& path, const Image& img);
Image load_png(const std::string& path);

// Lossless float image as a single SRFT tensor named "image", dims H x W x C.
void save_image_srft(const std::string& path, const Image& img);
Image load_image_srft(const std::string& path);

}  // namespace srf
