// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace srf {

struct ParamTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> values;

  size_t size() const { return values.size(); }
};

// SRFT checkpoint format: magic "SRFT", u32 version=1, u32 tensor count, then
// per tensor: u16 name length, name bytes, u8 rank, u32 dims, f64 values.
// Little-endian throughout.
void save_srft(const std::string& path, const std::vector<ParamTensor>& tensors);
std::vector<ParamTensor> load_srft(const std::string& path);

const ParamTensor* find_tensor(const std::vector<ParamTensor>& tensors, const std::string& name);

}  // namespace srf
