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

#ifndef LAQM_HASH_HPP_
#define LAQM_HASH_HPP_

#include <string>
#include <string_view>

namespace laqm {

// SHA-256 as a lowercase hex string.
std::string sha256_hex(std::string_view bytes);

// Incremental variant for multi-part keys (e.g. degraded || reference ||
// tool version).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view bytes);
  std::string hex();  // finalizes

 private:
  void* ctx_;
};

// Hash of a file's contents; throws on unreadable file.
std::string sha256_file_hex(const std::string& path);

}  // namespace laqm

#endif  // LAQM_HASH_HPP_
