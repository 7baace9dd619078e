// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#include "srf/binary_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace srf::io {

void atomic_write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + tmp);
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!os) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace srf::io
