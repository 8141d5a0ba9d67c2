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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "laqm/audio.hpp"
#include "laqm/rng.hpp"
#include "oracles.hpp"

using namespace laqm;
namespace fs = std::filesystem;

namespace {

AudioBuffer sine_buffer(double hz, double seconds, int rate, int channels,
                        double amp = 0.5) {
  AudioBuffer buf;
  buf.sample_rate = rate;
  const size_t n = static_cast<size_t>(std::llround(seconds * rate));
  for (int c = 0; c < channels; ++c) {
    std::vector<double> ch(n);
    for (size_t i = 0; i < n; ++i) {
      ch[i] = amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / rate);
    }
    buf.channels.push_back(std::move(ch));
  }
  return buf;
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("laqm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("segment: 10 s source at 4 s clips gives 2 clips, remainder dropped") {
  AudioBuffer src = sine_buffer(440.0, 10.0, 8000, 1);
  std::vector<Clip> clips = segment(src, 4.0, "s");
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].samples.size() == 32000);
  CHECK(clips[1].samples.size() == 32000);
  CHECK(clips[0].offset_seconds == doctest::Approx(0.0));
  CHECK(clips[1].offset_seconds == doctest::Approx(4.0));
  // Conservation: total kept = floor(10/4) * 4 seconds.
  CHECK(clips[0].duration_seconds() + clips[1].duration_seconds() ==
        doctest::Approx(8.0));
}

TEST_CASE("segment: exact fit gives one clip; short source gives none") {
  CHECK(segment(sine_buffer(440.0, 4.0, 8000, 1), 4.0, "s").size() == 1);
  CHECK(segment(sine_buffer(440.0, 3.0, 8000, 1), 4.0, "s").empty());
}

TEST_CASE("segment: 4 s at 44.1 kHz gives 176400-sample clips") {
  AudioBuffer src = sine_buffer(1000.0, 8.0, 44100, 1);
  std::vector<Clip> clips = segment(src, 4.0, "s");
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].samples.size() == 176400);
}

TEST_CASE("segment downmixes stereo by channel mean") {
  AudioBuffer src;
  src.sample_rate = 100;
  src.channels = {{1.0, 0.5, -1.0}, {0.0, 0.5, 1.0}};
  std::vector<Clip> clips = segment(src, 0.03, "s");
  REQUIRE(clips.size() == 1);
  CHECK(clips[0].samples[0] == doctest::Approx(0.5));
  CHECK(clips[0].samples[1] == doctest::Approx(0.5));
  CHECK(clips[0].samples[2] == doctest::Approx(0.0));
}

TEST_CASE("resample: sample counts and identity") {
  Clip clip;
  clip.sample_rate = 44100;
  clip.samples.assign(176400, 0.1);
  Clip out = resample(clip, 24000);
  CHECK(out.samples.size() == 96000);  // 4 s * 24 kHz
  CHECK(out.sample_rate == 24000);

  Clip same = resample(clip, 44100);
  CHECK(same.samples == clip.samples);
}

TEST_CASE("resample keeps a 1 kHz sine at 1 kHz (DFT-peak oracle)") {
  AudioBuffer buf = sine_buffer(1000.0, 2.0, 44100, 1);
  Clip clip{buf.channels[0], 44100, "s", 0.0};
  Clip out = resample(clip, 24000);
  const double peak = laqm_oracle::dft_peak_hz(out.samples, 24000, 8192);
  const double bin_hz = 24000.0 / 8192.0;
  CHECK(std::abs(peak - 1000.0) <= bin_hz + 1e-9);

  // Upsampling too.
  Clip up = resample(clip, 48000);
  const double peak_up = laqm_oracle::dft_peak_hz(up.samples, 48000, 8192);
  CHECK(std::abs(peak_up - 1000.0) <= 48000.0 / 8192.0 + 1e-9);
}

TEST_CASE("resample clips out-of-range values and counts them") {
  Clip clip;
  clip.sample_rate = 8000;
  clip.samples.assign(4000, 0.0);
  // A step edge can ring past 1.0 after band-limiting.
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    clip.samples[i] = i % 2 == 0 ? 1.0 : -1.0;
  }
  ResampleStats stats;
  Clip out = resample(clip, 12000, &stats);
  for (double v : out.samples) {
    CHECK(v <= 1.0);
    CHECK(v >= -1.0);
  }
}

TEST_CASE("wav io round trip: float32 and pcm16, mono and stereo") {
  fs::path dir = temp_dir("wav");
  AudioBuffer stereo = sine_buffer(500.0, 0.25, 16000, 2);
  stereo.channels[1] = sine_buffer(750.0, 0.25, 16000, 1).channels[0];

  const std::string f32 = (dir / "f32.wav").string();
  write_wav(f32, stereo, WavEncoding::kFloat32);
  AudioBuffer back = read_wav(f32);
  REQUIRE(back.num_channels() == 2);
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.num_frames() == stereo.num_frames());
  for (size_t i = 0; i < back.num_frames(); ++i) {
    CHECK(back.channels[0][i] ==
          doctest::Approx(stereo.channels[0][i]).epsilon(1e-6));
  }

  const std::string p16 = (dir / "p16.wav").string();
  write_wav(p16, stereo, WavEncoding::kPcm16);
  AudioBuffer back16 = read_wav(p16);
  for (size_t i = 0; i < back16.num_frames(); ++i) {
    CHECK(std::abs(back16.channels[1][i] - stereo.channels[1][i]) < 1e-4);
  }

  CHECK_THROWS(read_wav((dir / "missing.wav").string()));
  fs::remove_all(dir);
}

TEST_CASE("alignment recovers a known delay (impulse oracle)") {
  Rng rng(42);
  std::vector<double> reference(8000);
  for (double& v : reference) v = 0.05 * rng.normal();
  reference[512] = 0.9;  // impulse landmark

  const int64_t true_delay = 137;
  std::vector<double> degraded(reference.size() + 512, 0.0);
  for (size_t i = 0; i < reference.size(); ++i) {
    degraded[i + static_cast<size_t>(true_delay)] = reference[i];
  }
  // Content shifted later by d satisfies degraded[n + d] = reference[n],
  // so the detected lag is +d.
  AlignmentResult res = align_to_reference(reference, degraded, 0, 256);
  CHECK(res.delay_samples == true_delay);
  CHECK_FALSE(res.at_search_bound);
  REQUIRE(res.aligned.size() == reference.size());

  // The impulse is back at its original position.
  size_t argmax = 0;
  for (size_t i = 1; i < res.aligned.size(); ++i) {
    if (res.aligned[i] > res.aligned[argmax]) argmax = i;
  }
  CHECK(argmax == 512);
  CHECK(res.aligned[512] == doctest::Approx(0.9));
}

TEST_CASE("alignment flags a delay outside the refinement bound") {
  Rng rng(43);
  std::vector<double> reference(4000);
  for (double& v : reference) v = 0.2 * rng.normal();
  std::vector<double> degraded(reference.size() + 600, 0.0);
  for (size_t i = 0; i < reference.size(); ++i) degraded[i + 600] = reference[i];

  AlignmentResult res = align_to_reference(reference, degraded, 0, 100);
  CHECK(res.at_search_bound);
}
