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

#include "laqm/toy.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "laqm/errors.hpp"
#include "laqm/rng.hpp"

namespace laqm {

std::string toy_source_id(int index) {
  std::ostringstream os;
  os << "toy-" << index;
  return os.str();
}

AudioBuffer toy_source(const ToyCorpusConfig& cfg, int index) {
  if (cfg.source_seconds <= 0 || cfg.sample_rate <= 0) {
    throw config_error("toy_source: invalid duration or rate");
  }
  Rng rng = Rng::substream(cfg.seed, "toy-source-" + std::to_string(index));
  const size_t n =
      static_cast<size_t>(std::llround(cfg.source_seconds * cfg.sample_rate));
  std::vector<double> x(n, 0.0);

  int components = static_cast<int>(
      rng.uniform_int(cfg.components_min, cfg.components_max));
  double total_amp = 0.0;
  std::vector<double> freqs, amps, phases;
  for (int c = 0; c < components; ++c) {
    // Log-uniform frequency well below Nyquist at any pipeline rate.
    double f = 80.0 * std::pow(2.0, rng.uniform() * 5.0);  // 80 Hz .. 2.56 kHz
    double a = 0.2 + 0.8 * rng.uniform();
    freqs.push_back(f);
    amps.push_back(a);
    phases.push_back(2.0 * M_PI * rng.uniform());
    total_amp += a;
  }
  // Slow amplitude modulation makes sources non-stationary.
  double mod_hz = 0.3 + rng.uniform();
  double mod_phase = 2.0 * M_PI * rng.uniform();

  for (size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / cfg.sample_rate;
    double v = 0.0;
    for (int c = 0; c < components; ++c) {
      v += amps[static_cast<size_t>(c)] *
           std::sin(2.0 * M_PI * freqs[static_cast<size_t>(c)] * t +
                    phases[static_cast<size_t>(c)]);
    }
    double mod = 0.75 + 0.25 * std::sin(2.0 * M_PI * mod_hz * t + mod_phase);
    x[i] = 0.45 * mod * v / total_amp;
  }

  // A touch of lowpassed noise so clips are not purely tonal.
  double lp = 0.0;
  for (size_t i = 0; i < n; ++i) {
    lp = 0.995 * lp + 0.005 * rng.normal();
    x[i] += 0.02 * lp;
  }

  AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  out.channels = {std::move(x)};
  return out;
}

int toy_intensity_units(int bitrate_kbps, const std::vector<int>& ladder) {
  std::set<int, std::greater<int>> sorted(ladder.begin(), ladder.end());
  int units = 0;
  int rank = 1;
  for (int kbps : sorted) {
    if (kbps == bitrate_kbps) {
      units = rank;
      break;
    }
    ++rank;
  }
  if (units == 0) {
    throw config_error("toy codec: bitrate " + std::to_string(bitrate_kbps) +
                       " not in ladder");
  }
  return units;
}

ToyTranscoder::ToyTranscoder(ToyCodecConfig cfg, std::vector<int> ladder)
    : cfg_(cfg), ladder_(std::move(ladder)) {
  if (ladder_.empty()) throw config_error("toy codec: empty ladder");
}

Clip ToyTranscoder::encode_decode(const Clip& clip, Codec codec,
                                  int bitrate_kbps) {
  if (codec == Codec::kNone) {
    throw config_error("encode_decode: codec must be a lossy codec");
  }
  const int units = toy_intensity_units(bitrate_kbps, ladder_);

  std::ostringstream key;
  key << clip.source_id << "@" << clip.offset_seconds << "/"
      << codec_name(codec) << "@" << bitrate_kbps;
  Rng rng = Rng::substream(cfg_.seed, key.str());

  const size_t n = clip.samples.size();
  std::vector<double> noise(n);
  const double period = clip.sample_rate / cfg_.burst_hz;
  for (size_t i = 0; i < n; ++i) {
    double g = rng.normal();  // consume one draw per sample regardless
    double phase = std::fmod(static_cast<double>(i), period) / period;
    double env = 0.0;
    if (phase < cfg_.burst_duty) {
      // Hann-shaped burst.
      env = 0.5 * (1.0 - std::cos(2.0 * M_PI * phase / cfg_.burst_duty));
    }
    noise[i] = env * g;
  }
  double acc = 0.0;
  for (double v : noise) acc += v * v;
  double noise_rms = std::sqrt(acc / static_cast<double>(n));
  if (noise_rms <= 0.0) throw runtime_error("toy codec: degenerate noise");

  const double target_rms = units * cfg_.unit_rms;
  const double gain = target_rms / noise_rms;

  Clip out = clip;
  for (size_t i = 0; i < n; ++i) {
    out.samples[i] = std::clamp(clip.samples[i] + gain * noise[i], -1.0, 1.0);
  }
  return out;
}

}  // namespace laqm
