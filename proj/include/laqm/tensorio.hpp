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

#ifndef LAQM_TENSORIO_HPP_
#define LAQM_TENSORIO_HPP_

#include <Eigen/Core>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace laqm {

// Versioned tensor container: magic + JSON header + raw little-endian
// float64 blobs (row-major). Used for checkpoints and backbone weight files.
struct TensorFile {
  nlohmann::json header;
  std::map<std::string, Eigen::MatrixXd> tensors;
};

void save_tensor_file(
    const std::string& path,
    const std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& tensors,
    const nlohmann::json& extra_header);

TensorFile load_tensor_file(const std::string& path);

}  // namespace laqm

#endif  // LAQM_TENSORIO_HPP_
