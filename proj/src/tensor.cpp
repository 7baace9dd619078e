// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/tensor.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "srf/binary_io.hpp"

namespace srf {

void save_srft(const std::string& path, const std::vector<ParamTensor>& tensors) {
  std::ostringstream os(std::ios::binary);
  io::write_magic(os, "SRFT");
  io::write_le<uint32_t>(os, 1);
  io::write_le<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xffff) throw std::runtime_error("srft: tensor name too long");
    size_t n = 1;
    for (const int d : t.dims) n *= static_cast<size_t>(d);
    if (n != t.values.size()) throw std::runtime_error("srft: dims/value size mismatch: " + t.name);
    io::write_le<uint16_t>(os, static_cast<uint16_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::write_le<uint8_t>(os, static_cast<uint8_t>(t.dims.size()));
    for (const int d : t.dims) io::write_le<uint32_t>(os, static_cast<uint32_t>(d));
    for (const double v : t.values) io::write_le<double>(os, v);
  }
  io::atomic_write_file(path, os.str());
}

std::vector<ParamTensor> load_srft(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  io::expect_magic(is, "SRFT", "srft");
  const auto version = io::read_le<uint32_t>(is);
  if (version != 1) throw std::runtime_error("srft: unsupported version");
  const auto count = io::read_le<uint32_t>(is);
  std::vector<ParamTensor> tensors(count);
  for (auto& t : tensors) {
    const auto name_len = io::read_le<uint16_t>(is);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    const auto rank = io::read_le<uint8_t>(is);
    t.dims.resize(rank);
    size_t n = 1;
    for (auto& d : t.dims) {
      d = static_cast<int>(io::read_le<uint32_t>(is));
      n *= static_cast<size_t>(d);
    }
    t.values.resize(n);
    for (auto& v : t.values) v = io::read_le<double>(is);
  }
  return tensors;
}

const ParamTensor* find_tensor(const std::vector<ParamTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

}  // namespace srf
