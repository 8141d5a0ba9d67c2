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

#include "laqm/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "laqm/errors.hpp"
#include "laqm/hash.hpp"
#include "laqm/proc.hpp"

namespace fs = std::filesystem;

namespace laqm {

std::string codec_name(Codec c) {
  switch (c) {
    case Codec::kNone:
      return "none";
    case Codec::kAac:
      return "aac";
    case Codec::kOpus:
      return "opus";
    case Codec::kMp3:
      return "mp3";
  }
  throw runtime_error("codec_name: invalid codec");
}

Codec codec_from_name(const std::string& name) {
  if (name == "none") return Codec::kNone;
  if (name == "aac") return Codec::kAac;
  if (name == "opus") return Codec::kOpus;
  if (name == "mp3") return Codec::kMp3;
  throw config_error("unknown codec: " + name);
}

ExtendedReal label_distance(ExtendedReal a, ExtendedReal b) {
  if (a.is_infinite() && b.is_infinite()) return ExtendedReal{0.0};
  return ExtendedReal{std::abs(a.value - b.value)};
}

namespace {

double rms(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

double StubLabeler::mos_for_clips(const Clip& degraded,
                                  const Clip& reference) const {
  if (degraded.samples.size() != reference.samples.size()) {
    throw runtime_error("stub labeler: degraded/reference length mismatch");
  }
  std::vector<double> diff(degraded.samples.size());
  for (size_t i = 0; i < diff.size(); ++i) {
    diff[i] = degraded.samples[i] - reference.samples[i];
  }
  double units = rms(diff) / cfg_.unit_rms;
  double mos = 5.0 - 4.0 * (units / cfg_.max_units);
  return std::clamp(mos, 1.0, 5.0);
}

double StubLabeler::mos_for_files(const std::string& degraded_path,
                                  const std::string& reference_path) {
  AudioBuffer d = read_wav(degraded_path);
  AudioBuffer r = read_wav(reference_path);
  Clip dc{downmix_to_mono(d), d.sample_rate, "", 0.0};
  Clip rc{downmix_to_mono(r), r.sample_rate, "", 0.0};
  return mos_for_clips(dc, rc);
}

std::string StubLabeler::version() const {
  std::ostringstream os;
  os << "stub-v1:unit=" << cfg_.unit_rms << ":max=" << cfg_.max_units;
  return os.str();
}

CommandLabeler::CommandLabeler(CommandLabelerConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.command.empty()) {
    throw config_error("metric tool command template is empty");
  }
}

double CommandLabeler::mos_for_files(const std::string& degraded_path,
                                     const std::string& reference_path) {
  std::string deg = degraded_path;
  std::string ref = reference_path;
  fs::path tmp_deg, tmp_ref;
  if (cfg_.upsample_hz > 0) {
    AudioBuffer d = read_wav(degraded_path);
    AudioBuffer r = read_wav(reference_path);
    if (d.sample_rate != cfg_.upsample_hz || r.sample_rate != cfg_.upsample_hz) {
      fs::path dir = fs::temp_directory_path();
      tmp_deg = dir / ("laqm_deg_" + sha256_hex(degraded_path).substr(0, 16) + ".wav");
      tmp_ref = dir / ("laqm_ref_" + sha256_hex(reference_path).substr(0, 16) + ".wav");
      Clip dc{downmix_to_mono(d), d.sample_rate, "", 0.0};
      Clip rc{downmix_to_mono(r), r.sample_rate, "", 0.0};
      write_wav(tmp_deg.string(), resample(dc, cfg_.upsample_hz));
      write_wav(tmp_ref.string(), resample(rc, cfg_.upsample_hz));
      deg = tmp_deg.string();
      ref = tmp_ref.string();
    }
  }

  std::string cmd = expand_template(
      cfg_.command, {{"degraded", deg}, {"reference", ref}});
  CommandResult res = run_command(cmd);
  if (!tmp_deg.empty()) {
    std::error_code ec;
    fs::remove(tmp_deg, ec);
    fs::remove(tmp_ref, ec);
  }
  if (res.exit_code != 0) {
    throw tool_error("metric tool failed (exit " +
                     std::to_string(res.exit_code) + "): " + cmd +
                     "\noutput:\n" + res.output);
  }
  std::smatch m;
  std::regex pattern(cfg_.mos_pattern);
  if (!std::regex_search(res.output, m, pattern) || m.size() < 2) {
    throw tool_error("could not parse MOS from tool output with pattern '" +
                     cfg_.mos_pattern + "':\n" + res.output);
  }
  double mos = std::stod(m[1].str());
  if (mos < 0.0 || mos > 6.0) {
    throw tool_error("metric tool returned MOS outside [0, 6] (" +
                     std::to_string(mos) + "); tool misconfiguration");
  }
  return std::clamp(mos, 1.0, 5.0);
}

CachedLabeler::CachedLabeler(std::shared_ptr<QualityLabeler> inner,
                             std::string cache_dir)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)) {
  fs::create_directories(cache_dir_);
}

double CachedLabeler::mos_for_files(const std::string& degraded_path,
                                    const std::string& reference_path) {
  std::ifstream din(degraded_path, std::ios::binary);
  std::ifstream rin(reference_path, std::ios::binary);
  if (!din || !rin) {
    throw runtime_error("labeling: cannot read '" + degraded_path + "' / '" +
                        reference_path + "'");
  }
  Sha256 h;
  std::string dbytes((std::istreambuf_iterator<char>(din)),
                     std::istreambuf_iterator<char>());
  std::string rbytes((std::istreambuf_iterator<char>(rin)),
                     std::istreambuf_iterator<char>());
  h.update(dbytes);
  h.update(rbytes);
  h.update(inner_->version());
  std::string key = h.hex();

  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memory_.find(key);
    if (it != memory_.end()) return it->second;
  }

  fs::path entry = fs::path(cache_dir_) / (key + ".json");
  if (fs::exists(entry)) {
    std::ifstream in(entry);
    nlohmann::json j;
    in >> j;
    double mos = j.at("mos").get<double>();
    std::lock_guard<std::mutex> lock(mu_);
    memory_[key] = mos;
    return mos;
  }

  double mos = inner_->mos_for_files(degraded_path, reference_path);
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++external_calls_;
    memory_[key] = mos;
  }
  nlohmann::json j{{"mos", mos}, {"tool_version", inner_->version()}};
  std::ofstream out(entry);
  out << j.dump() << "\n";
  return mos;
}

}  // namespace laqm
