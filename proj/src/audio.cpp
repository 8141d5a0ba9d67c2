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

#include "laqm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "laqm/errors.hpp"

namespace laqm {

namespace {

uint32_t read_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

uint16_t read_u16(const char* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

void put_u32(std::string& s, uint32_t v) {
  s.append(reinterpret_cast<const char*>(&v), 4);
}

void put_u16(std::string& s, uint16_t v) {
  s.append(reinterpret_cast<const char*>(&v), 2);
}

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw runtime_error("cannot open audio file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw runtime_error("not a RIFF/WAVE file: " + path);
  }

  uint16_t format = 0, num_channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const char* data = nullptr;
  size_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string id = bytes.substr(pos, 4);
    uint32_t size = read_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + size > bytes.size()) size = static_cast<uint32_t>(bytes.size() - pos);
    if (id == "fmt ") {
      if (size < 16) throw runtime_error("malformed fmt chunk: " + path);
      format = read_u16(bytes.data() + pos);
      num_channels = read_u16(bytes.data() + pos + 2);
      sample_rate = read_u32(bytes.data() + pos + 4);
      bits = read_u16(bytes.data() + pos + 14);
    } else if (id == "data") {
      data = bytes.data() + pos;
      data_size = size;
    }
    pos += size + (size & 1);  // chunks are word-aligned
  }

  if (data == nullptr || sample_rate == 0 || num_channels == 0) {
    throw runtime_error("missing fmt/data chunk: " + path);
  }
  if (!((format == kFormatPcm && bits == 16) ||
        (format == kFormatFloat && bits == 32))) {
    throw runtime_error("unsupported wav encoding (want PCM16 or float32): " +
                        path);
  }

  size_t bytes_per_sample = bits / 8;
  size_t frames = data_size / (bytes_per_sample * num_channels);
  AudioBuffer out;
  out.sample_rate = static_cast<int>(sample_rate);
  out.channels.assign(num_channels, std::vector<double>(frames));
  for (size_t f = 0; f < frames; ++f) {
    for (uint16_t c = 0; c < num_channels; ++c) {
      const char* p = data + (f * num_channels + c) * bytes_per_sample;
      if (format == kFormatPcm) {
        int16_t v;
        std::memcpy(&v, p, 2);
        out.channels[c][f] = static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        out.channels[c][f] = static_cast<double>(v);
      }
    }
  }
  return out;
}

void write_wav(const std::string& path, const AudioBuffer& audio,
               WavEncoding encoding) {
  if (audio.num_channels() == 0) throw runtime_error("write_wav: no channels");
  for (const auto& ch : audio.channels) {
    if (ch.size() != audio.num_frames()) {
      throw runtime_error("write_wav: ragged channels");
    }
  }
  const uint16_t num_channels = static_cast<uint16_t>(audio.num_channels());
  const uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const uint16_t format =
      encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const uint32_t frames = static_cast<uint32_t>(audio.num_frames());
  const uint32_t data_size = frames * num_channels * (bits / 8);

  std::string s;
  s.reserve(44 + data_size);
  s += "RIFF";
  put_u32(s, 36 + data_size);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, format);
  put_u16(s, num_channels);
  put_u32(s, static_cast<uint32_t>(audio.sample_rate));
  put_u32(s, static_cast<uint32_t>(audio.sample_rate) * num_channels * (bits / 8));
  put_u16(s, static_cast<uint16_t>(num_channels * (bits / 8)));
  put_u16(s, bits);
  s += "data";
  put_u32(s, data_size);

  for (uint32_t f = 0; f < frames; ++f) {
    for (uint16_t c = 0; c < num_channels; ++c) {
      double v = std::clamp(audio.channels[c][f], -1.0, 1.0);
      if (encoding == WavEncoding::kPcm16) {
        int16_t q = static_cast<int16_t>(
            std::clamp(std::lround(v * 32767.0), -32768L, 32767L));
        s.append(reinterpret_cast<const char*>(&q), 2);
      } else {
        float q = static_cast<float>(v);
        s.append(reinterpret_cast<const char*>(&q), 4);
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw runtime_error("cannot open audio file for write: " + path);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw runtime_error("short write: " + path);
}

void write_wav(const std::string& path, const Clip& clip,
               WavEncoding encoding) {
  AudioBuffer buf;
  buf.sample_rate = clip.sample_rate;
  buf.channels = {clip.samples};
  write_wav(path, buf, encoding);
}

std::vector<double> downmix_to_mono(const AudioBuffer& audio) {
  if (audio.num_channels() == 0) return {};
  if (audio.num_channels() == 1) return audio.channels[0];
  size_t frames = audio.num_frames();
  std::vector<double> mono(frames, 0.0);
  for (const auto& ch : audio.channels) {
    for (size_t f = 0; f < frames; ++f) mono[f] += ch[f];
  }
  double inv = 1.0 / audio.num_channels();
  for (double& v : mono) v *= inv;
  return mono;
}

std::vector<Clip> segment(const AudioBuffer& source, double clip_seconds,
                          const std::string& source_id) {
  if (clip_seconds <= 0.0) throw config_error("segment: clip_seconds must be > 0");
  if (source.sample_rate <= 0) throw runtime_error("segment: invalid sample rate");
  std::vector<double> mono = downmix_to_mono(source);
  const int64_t clip_len =
      std::llround(clip_seconds * static_cast<double>(source.sample_rate));
  if (clip_len <= 0) throw config_error("segment: clip shorter than one sample");
  const int64_t n_clips = static_cast<int64_t>(mono.size()) / clip_len;

  std::vector<Clip> clips;
  clips.reserve(static_cast<size_t>(std::max<int64_t>(n_clips, 0)));
  for (int64_t i = 0; i < n_clips; ++i) {
    Clip c;
    c.sample_rate = source.sample_rate;
    c.source_id = source_id;
    c.offset_seconds =
        static_cast<double>(i * clip_len) / source.sample_rate;
    c.samples.assign(mono.begin() + i * clip_len,
                     mono.begin() + (i + 1) * clip_len);
    clips.push_back(std::move(c));
  }
  return clips;
}

namespace {

// Blackman window on r in [-1, 1].
double blackman(double r) {
  if (r < -1.0 || r > 1.0) return 0.0;
  return 0.42 + 0.5 * std::cos(M_PI * r) + 0.08 * std::cos(2.0 * M_PI * r);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

Clip resample(const Clip& clip, int target_rate, ResampleStats* stats) {
  if (target_rate <= 0) throw config_error("resample: target rate must be > 0");
  if (clip.sample_rate == target_rate) return clip;

  const int in_rate = clip.sample_rate;
  const int64_t n_in = static_cast<int64_t>(clip.samples.size());
  const int64_t n_out = std::llround(static_cast<double>(n_in) * target_rate /
                                     static_cast<double>(in_rate));

  // Anti-aliasing: when downsampling, the kernel is stretched and its cutoff
  // lowered by the rate ratio.
  const double ratio = static_cast<double>(target_rate) / in_rate;
  const double scale = std::min(1.0, ratio) * 0.975;
  const int kHalfTaps = 32;
  const double half_width = kHalfTaps / scale;

  Clip out;
  out.sample_rate = target_rate;
  out.source_id = clip.source_id;
  out.offset_seconds = clip.offset_seconds;
  out.samples.resize(static_cast<size_t>(std::max<int64_t>(n_out, 0)));

  for (int64_t m = 0; m < n_out; ++m) {
    // Exact input-domain position via integer arithmetic: t = m * in / out.
    const __int128 num = static_cast<__int128>(m) * in_rate;
    const int64_t t_int = static_cast<int64_t>(num / target_rate);
    const double t_frac =
        static_cast<double>(num % target_rate) / target_rate;
    const double t = static_cast<double>(t_int) + t_frac;

    const int64_t lo = static_cast<int64_t>(std::ceil(t - half_width));
    const int64_t hi = static_cast<int64_t>(std::floor(t + half_width));
    double acc = 0.0;
    double norm = 0.0;
    for (int64_t i = lo; i <= hi; ++i) {
      const double x = (static_cast<double>(i) - t) * scale;
      const double w = scale * sinc(x) * blackman(x / kHalfTaps);
      norm += w;
      if (i >= 0 && i < n_in) acc += w * clip.samples[static_cast<size_t>(i)];
    }
    double v = norm != 0.0 ? acc / norm : 0.0;
    if (v > 1.0) {
      v = 1.0;
      if (stats != nullptr) ++stats->clipped_samples;
    } else if (v < -1.0) {
      v = -1.0;
      if (stats != nullptr) ++stats->clipped_samples;
    }
    out.samples[static_cast<size_t>(m)] = v;
  }
  return out;
}

AlignmentResult align_to_reference(const std::vector<double>& reference,
                                   const std::vector<double>& degraded,
                                   int64_t base_delay, int64_t max_refine) {
  if (reference.empty()) throw runtime_error("align: empty reference");
  const int64_t n_ref = static_cast<int64_t>(reference.size());
  const int64_t n_deg = static_cast<int64_t>(degraded.size());

  // Correlate over a window of the reference to bound cost; 2 s at 48 kHz is
  // ample for lag detection.
  const int64_t win = std::min<int64_t>(n_ref, 96000);

  const int64_t lag_lo = base_delay - max_refine;
  const int64_t lag_hi = base_delay + max_refine;
  int64_t best_lag = base_delay;
  double best_corr = -std::numeric_limits<double>::infinity();
  for (int64_t lag = lag_lo; lag <= lag_hi; ++lag) {
    double corr = 0.0;
    for (int64_t n = 0; n < win; ++n) {
      const int64_t d = n + lag;
      if (d < 0 || d >= n_deg) continue;
      corr += reference[static_cast<size_t>(n)] *
              degraded[static_cast<size_t>(d)];
    }
    if (corr > best_corr) {
      best_corr = corr;
      best_lag = lag;
    }
  }

  AlignmentResult result;
  result.delay_samples = best_lag;
  result.at_search_bound =
      max_refine > 0 && (best_lag == lag_lo || best_lag == lag_hi);
  result.aligned.assign(static_cast<size_t>(n_ref), 0.0);
  for (int64_t n = 0; n < n_ref; ++n) {
    const int64_t d = n + best_lag;
    if (d >= 0 && d < n_deg) {
      result.aligned[static_cast<size_t>(n)] = degraded[static_cast<size_t>(d)];
    }
  }
  return result;
}

}  // namespace laqm
