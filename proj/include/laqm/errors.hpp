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

#ifndef LAQM_ERRORS_HPP_
#define LAQM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace laqm {

// Error categories map directly onto CLI exit codes.
enum class ErrorKind {
  kConfig = 1,        // validation / configuration errors
  kRuntime = 2,       // I/O, numeric and other runtime errors
  kExternalTool = 3,  // transcoder / metric-tool failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& msg) {
  return Error(ErrorKind::kConfig, msg);
}
inline Error runtime_error(const std::string& msg) {
  return Error(ErrorKind::kRuntime, msg);
}
inline Error tool_error(const std::string& msg) {
  return Error(ErrorKind::kExternalTool, msg);
}

}  // namespace laqm

#endif  // LAQM_ERRORS_HPP_
