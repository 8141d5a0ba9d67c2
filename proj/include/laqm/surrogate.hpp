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

#ifndef LAQM_SURROGATE_HPP_
#define LAQM_SURROGATE_HPP_

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "laqm/audio.hpp"

namespace laqm {

enum class Codec { kNone, kAac, kOpus, kMp3 };

std::string codec_name(Codec c);
Codec codec_from_name(const std::string& name);

// Extended real line: finite positive bitrates plus +INF for clean signals.
// |a - INF| = INF for finite a, and |INF - INF| = 0 so two clean signals are
// tied in rank.
struct ExtendedReal {
  double value = 0.0;

  static ExtendedReal infinity() {
    return ExtendedReal{std::numeric_limits<double>::infinity()};
  }
  bool is_infinite() const { return std::isinf(value); }

  friend bool operator==(ExtendedReal a, ExtendedReal b) {
    return a.value == b.value;
  }
  friend bool operator<(ExtendedReal a, ExtendedReal b) {
    return a.value < b.value;
  }
};

// Absolute difference under the extended-real algebra above.
ExtendedReal label_distance(ExtendedReal a, ExtendedReal b);

// Surrogate labels for one clip: objective-metric MOS in [1, 5] plus the
// coding bitrate (or +INF for clean).
struct SurrogateLabel {
  double visqol_mos = 5.0;
  ExtendedReal bitrate = ExtendedReal::infinity();
  Codec codec = Codec::kNone;

  bool is_clean() const { return codec == Codec::kNone; }
};

// Client interface for the external objective quality metric that produces
// MOS surrogate labels. Implementations must be deterministic for identical
// input files.
class QualityLabeler {
 public:
  virtual ~QualityLabeler() = default;

  // MOS of a degraded file relative to its time-aligned clean reference,
  // clamped to [1, 5].
  virtual double mos_for_files(const std::string& degraded_path,
                               const std::string& reference_path) = 0;

  // Identifies the tool + configuration; part of cache keys.
  virtual std::string version() const = 0;
};

struct StubLabelerConfig {
  // RMS of one unit of degradation; the stub estimates intensity as
  // rms(degraded - reference) / unit_rms.
  double unit_rms = 0.02;
  double max_units = 5.0;
};

// Deterministic test double: MOS = 5 - 4 * (intensity / max_units), clamped
// to [1, 5]. Strictly monotone decreasing in degradation intensity.
class StubLabeler : public QualityLabeler {
 public:
  explicit StubLabeler(StubLabelerConfig cfg = {}) : cfg_(cfg) {}

  double mos_for_files(const std::string& degraded_path,
                       const std::string& reference_path) override;
  double mos_for_clips(const Clip& degraded, const Clip& reference) const;
  std::string version() const override;

 private:
  StubLabelerConfig cfg_;
};

struct CommandLabelerConfig {
  // Command template with {degraded} and {reference} placeholders.
  std::string command;
  // Regex with one capture group extracting the MOS from stdout.
  std::string mos_pattern = "MOS-LQO:\\s*([0-9.]+)";
  std::string tool_version = "external";
  // When > 0, inputs are resampled to this rate into temporary files before
  // invoking the tool (the usual tool expects 48 kHz in audio mode).
  int upsample_hz = 48000;
};

// Spawns the external metric tool per pair of files.
class CommandLabeler : public QualityLabeler {
 public:
  explicit CommandLabeler(CommandLabelerConfig cfg);

  double mos_for_files(const std::string& degraded_path,
                       const std::string& reference_path) override;
  std::string version() const override { return cfg_.tool_version; }

 private:
  CommandLabelerConfig cfg_;
};

// Content-addressed MOS cache: key = sha256(degraded bytes || reference
// bytes || tool version). Backed by one small file per entry under
// cache_dir, plus an in-process map. Values are deterministic, so concurrent
// last-write-wins races are benign.
class CachedLabeler : public QualityLabeler {
 public:
  CachedLabeler(std::shared_ptr<QualityLabeler> inner, std::string cache_dir);

  double mos_for_files(const std::string& degraded_path,
                       const std::string& reference_path) override;
  std::string version() const override { return inner_->version(); }

  int64_t external_calls() const { return external_calls_; }

 private:
  std::shared_ptr<QualityLabeler> inner_;
  std::string cache_dir_;
  std::unordered_map<std::string, double> memory_;
  std::mutex mu_;
  int64_t external_calls_ = 0;
};

}  // namespace laqm

#endif  // LAQM_SURROGATE_HPP_
