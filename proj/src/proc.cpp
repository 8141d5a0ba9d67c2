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

#include "laqm/proc.hpp"

#include <array>
#include <cstdio>

#include "laqm/errors.hpp"

namespace laqm {

CommandResult run_command(const std::string& command) {
  std::string shell_cmd = command + " 2>&1";
  FILE* pipe = popen(shell_cmd.c_str(), "r");
  if (pipe == nullptr) {
    throw tool_error("failed to spawn command: " + command);
  }
  CommandResult result;
  std::array<char, 4096> buf;
  size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    result.output.append(buf.data(), got);
  }
  int status = pclose(pipe);
  if (status == -1) {
    throw tool_error("failed to reap command: " + command);
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string expand_template(const std::string& templ,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(templ.size());
  size_t pos = 0;
  while (pos < templ.size()) {
    size_t open = templ.find('{', pos);
    if (open == std::string::npos) {
      out.append(templ, pos, std::string::npos);
      break;
    }
    out.append(templ, pos, open - pos);
    size_t close = templ.find('}', open);
    if (close == std::string::npos) {
      throw config_error("unbalanced '{' in command template: " + templ);
    }
    std::string key = templ.substr(open + 1, close - open - 1);
    auto it = values.find(key);
    if (it == values.end()) {
      throw config_error("unknown placeholder {" + key +
                         "} in command template: " + templ);
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

}  // namespace laqm
