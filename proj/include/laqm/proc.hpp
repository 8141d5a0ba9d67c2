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

#ifndef LAQM_PROC_HPP_
#define LAQM_PROC_HPP_

#include <map>
#include <string>

namespace laqm {

struct CommandResult {
  int exit_code = -1;
  std::string output;  // combined stdout + stderr
};

// Runs a shell command, capturing combined output.
CommandResult run_command(const std::string& command);

// Replaces {name} placeholders. Unknown placeholders are an error.
std::string expand_template(const std::string& templ,
                            const std::map<std::string, std::string>& values);

}  // namespace laqm

#endif  // LAQM_PROC_HPP_
