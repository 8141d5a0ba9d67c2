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

#ifndef LAQM_TRANSCODE_HPP_
#define LAQM_TRANSCODE_HPP_

#include <atomic>
#include <map>
#include <string>

#include "laqm/audio.hpp"
#include "laqm/surrogate.hpp"

namespace laqm {

// Encode/decode through a lossy codec. Output is time-aligned to the input
// (priming/padding delay compensated) and has exactly the input's length and
// sample rate. Deterministic for identical inputs.
class Transcoder {
 public:
  virtual ~Transcoder() = default;
  virtual Clip encode_decode(const Clip& clip, Codec codec,
                             int bitrate_kbps) = 0;
};

struct CodecDelaySpec {
  int64_t base_samples = 0;  // one-time calibration offset
  int64_t max_refine = 512;  // per-clip cross-correlation refinement bound
};

struct CommandTranscoderConfig {
  // Shell template with {input}, {output}, {codec}, {bitrate} placeholders.
  // Exit status 0 means success; the decoded file must be a wav.
  std::string command;
  std::map<Codec, CodecDelaySpec> delay;
  std::string work_dir;  // for temporary files
};

// Runs the configured external transcoder per clip, then compensates codec
// delay by calibration offset + cross-correlation refinement.
class CommandTranscoder : public Transcoder {
 public:
  explicit CommandTranscoder(CommandTranscoderConfig cfg);

  Clip encode_decode(const Clip& clip, Codec codec, int bitrate_kbps) override;

  // Round trip without delay compensation; used by calibration.
  Clip encode_decode_raw(const Clip& clip, Codec codec, int bitrate_kbps);

 private:
  CommandTranscoderConfig cfg_;
  std::atomic<uint64_t> counter_{0};
};

// One-time calibration: measures the round-trip delay of a codec at a given
// bitrate using a seeded noise probe and full-range cross-correlation.
int64_t calibrate_codec_delay(CommandTranscoder& transcoder, Codec codec,
                              int bitrate_kbps, int sample_rate,
                              int64_t max_delay = 16384);

}  // namespace laqm

#endif  // LAQM_TRANSCODE_HPP_
