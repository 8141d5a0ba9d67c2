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

#ifndef LAQM_TOY_HPP_
#define LAQM_TOY_HPP_

#include <string>
#include <vector>

#include "laqm/audio.hpp"
#include "laqm/transcode.hpp"

namespace laqm {

// Deterministic synthetic corpus: sine-mixture sources degraded by seeded
// noise bursts at an intensity determined by (codec, bitrate). Lets the full
// pipeline run without licensed music or codec binaries.
struct ToyCorpusConfig {
  int num_sources = 18;
  double source_seconds = 2.0;
  int sample_rate = 11025;
  int components_min = 2;
  int components_max = 5;
  uint64_t seed = 0;  // derived from the run seed by the caller
};

// Generates the i-th synthetic source recording (mono sine mixture with a
// little filtered noise, peak-limited to leave degradation headroom).
AudioBuffer toy_source(const ToyCorpusConfig& cfg, int index);
std::string toy_source_id(int index);

struct ToyCodecConfig {
  // RMS of one unit of degradation; must match the stub labeler's unit_rms
  // for exactly linear stub labels.
  double unit_rms = 0.02;
  double burst_hz = 4.0;    // noise-burst repetition rate
  double burst_duty = 0.5;  // fraction of each period covered by a burst
  uint64_t seed = 0;
};

// Maps a bitrate to 1-based intensity units: the highest ladder rate is one
// unit, the lowest is ladder.size() units. Bitrate must be in the ladder.
int toy_intensity_units(int bitrate_kbps, const std::vector<int>& ladder);

// In-process stand-in for a lossy codec: adds seeded noise bursts whose RMS
// is intensity_units * unit_rms. Keyed on (source, offset, codec, bitrate)
// so repeated calls are bit-identical.
class ToyTranscoder : public Transcoder {
 public:
  ToyTranscoder(ToyCodecConfig cfg, std::vector<int> ladder);

  Clip encode_decode(const Clip& clip, Codec codec, int bitrate_kbps) override;

 private:
  ToyCodecConfig cfg_;
  std::vector<int> ladder_;
};

}  // namespace laqm

#endif  // LAQM_TOY_HPP_
