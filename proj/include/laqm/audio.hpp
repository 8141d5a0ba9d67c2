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

#ifndef LAQM_AUDIO_HPP_
#define LAQM_AUDIO_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace laqm {

// Multi-channel linear-PCM audio as doubles in [-1, 1].
struct AudioBuffer {
  int sample_rate = 0;
  std::vector<std::vector<double>> channels;

  size_t num_frames() const {
    return channels.empty() ? 0 : channels[0].size();
  }
  int num_channels() const { return static_cast<int>(channels.size()); }
};

// One mono clip with provenance.
struct Clip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source_id;
  double offset_seconds = 0.0;

  double duration_seconds() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

enum class WavEncoding { kPcm16, kFloat32 };

// Minimal RIFF/WAVE reader. Accepts PCM16 and IEEE float32, mono or stereo.
AudioBuffer read_wav(const std::string& path);

void write_wav(const std::string& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::kFloat32);
void write_wav(const std::string& path, const Clip& clip,
               WavEncoding encoding = WavEncoding::kFloat32);

// Channel-mean downmix.
std::vector<double> downmix_to_mono(const AudioBuffer& audio);

// Splits a source recording into consecutive non-overlapping mono clips of
// exactly clip_seconds; a trailing remainder shorter than one clip is
// discarded. Multi-channel input is downmixed first. Returns an empty list
// when the source is shorter than one clip.
std::vector<Clip> segment(const AudioBuffer& source, double clip_seconds,
                          const std::string& source_id);

struct ResampleStats {
  int64_t clipped_samples = 0;
};

// Band-limited resampling (windowed-sinc, 32 taps per side). Output sample
// count is round(input_count * target_rate / input_rate). Values outside
// [-1, 1] are hard-clipped and counted in stats.
Clip resample(const Clip& clip, int target_rate,
              ResampleStats* stats = nullptr);

struct AlignmentResult {
  std::vector<double> aligned;  // same length as the reference
  int64_t delay_samples = 0;    // detected delay of `degraded` vs `reference`
  bool at_search_bound = false;
};

// Locates the lag of `degraded` relative to `reference` by cross-correlation
// over [base_delay - max_refine, base_delay + max_refine], then shifts and
// trims/zero-pads the tail so the result has exactly the reference's length.
AlignmentResult align_to_reference(const std::vector<double>& reference,
                                   const std::vector<double>& degraded,
                                   int64_t base_delay, int64_t max_refine);

}  // namespace laqm

#endif  // LAQM_AUDIO_HPP_
