// Copyright 2026 The LAQM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "laqm/tensorio.hpp"

#include <cstring>
#include <fstream>

#include "laqm/errors.hpp"

using nlohmann::json;

namespace laqm {

namespace {
constexpr char kMagic[8] = {'L', 'A', 'Q', 'M', 'T', 'N', 'S', 'R'};
}

void save_tensor_file(
    const std::string& path,
    const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& tensors,
    const json& extra_header) {
  json header = extra_header;
  header["format_version"] = 1;
  json index = json::array();
  uint64_t offset = 0;
  for (const auto& [name, mat] : tensors) {
    json entry;
    entry["name"] = name;
    entry["rows"] = mat->rows();
    entry["cols"] = mat->cols();
    entry["offset"] = offset;
    index.push_back(entry);
    offset += static_cast<uint64_t>(mat->size()) * sizeof(double);
  }
  header["tensors"] = index;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw runtime_error("cannot write tensor file: " + path);
  out.write(kMagic, sizeof(kMagic));
  uint32_t header_len = static_cast<uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, mat] : tensors) {
    for (Eigen::Index r = 0; r < mat->rows(); ++r) {
      for (Eigen::Index c = 0; c < mat->cols(); ++c) {
        double v = (*mat)(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
    }
  }
  if (!out) throw runtime_error("short write on tensor file: " + path);
}

TensorFile load_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw runtime_error("cannot open tensor file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw runtime_error("not a tensor file: " + path);
  }
  uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 4);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), header_len);
  if (!in) throw runtime_error("truncated tensor file header: " + path);

  TensorFile file;
  file.header = json::parse(header_str);

  for (const auto& entry : file.header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd mat(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        mat(r, c) = v;
      }
    }
    if (!in) throw runtime_error("truncated tensor data in: " + path);
    file.tensors[name] = std::move(mat);
  }
  return file;
}

}  // namespace laqm
