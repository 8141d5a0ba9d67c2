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

#include "laqm/transcode.hpp"

#include <filesystem>
#include <sstream>

#include "laqm/errors.hpp"
#include "laqm/proc.hpp"
#include "laqm/rng.hpp"

namespace fs = std::filesystem;

namespace laqm {

CommandTranscoder::CommandTranscoder(CommandTranscoderConfig cfg)
    : cfg_(std::move(cfg)) {
  if (cfg_.command.empty()) {
    throw config_error("transcoder command template is empty");
  }
  if (cfg_.work_dir.empty()) {
    cfg_.work_dir = (fs::temp_directory_path() / "laqm_transcode").string();
  }
  fs::create_directories(cfg_.work_dir);
}

Clip CommandTranscoder::encode_decode_raw(const Clip& clip, Codec codec,
                                          int bitrate_kbps) {
  if (codec == Codec::kNone) {
    throw config_error("encode_decode: codec must be a lossy codec");
  }
  if (bitrate_kbps <= 0) {
    throw config_error("encode_decode: bitrate must be positive");
  }

  std::ostringstream stem;
  stem << "t" << counter_++ << "_" << codec_name(codec) << bitrate_kbps;
  fs::path in_path = fs::path(cfg_.work_dir) / (stem.str() + "_in.wav");
  fs::path out_path = fs::path(cfg_.work_dir) / (stem.str() + "_out.wav");
  write_wav(in_path.string(), clip, WavEncoding::kPcm16);

  std::string cmd = expand_template(
      cfg_.command, {{"input", in_path.string()},
                     {"output", out_path.string()},
                     {"codec", codec_name(codec)},
                     {"bitrate", std::to_string(bitrate_kbps)}});
  CommandResult res = run_command(cmd);
  if (res.exit_code != 0) {
    throw tool_error("transcoder failed (exit " +
                     std::to_string(res.exit_code) + ") for clip '" +
                     clip.source_id + "': " + cmd + "\noutput:\n" +
                     res.output);
  }
  if (!fs::exists(out_path)) {
    throw tool_error("transcoder produced no output file: " +
                     out_path.string() + "\noutput:\n" + res.output);
  }

  AudioBuffer decoded = read_wav(out_path.string());
  std::error_code ec;
  fs::remove(in_path, ec);
  fs::remove(out_path, ec);

  if (decoded.sample_rate != clip.sample_rate) {
    throw tool_error("transcoder changed the sample rate (" +
                     std::to_string(decoded.sample_rate) + " vs " +
                     std::to_string(clip.sample_rate) +
                     "); adjust the command template to decode at the "
                     "source rate");
  }

  Clip out;
  out.sample_rate = clip.sample_rate;
  out.source_id = clip.source_id;
  out.offset_seconds = clip.offset_seconds;
  out.samples = downmix_to_mono(decoded);
  return out;
}

Clip CommandTranscoder::encode_decode(const Clip& clip, Codec codec,
                                      int bitrate_kbps) {
  Clip decoded = encode_decode_raw(clip, codec, bitrate_kbps);

  CodecDelaySpec spec;
  auto it = cfg_.delay.find(codec);
  if (it != cfg_.delay.end()) spec = it->second;

  AlignmentResult aligned = align_to_reference(clip.samples, decoded.samples,
                                               spec.base_samples,
                                               spec.max_refine);
  if (aligned.at_search_bound) {
    std::ostringstream os;
    os << "alignment failure for clip '" << clip.source_id << "' @ "
       << clip.offset_seconds << "s (" << codec_name(codec) << " @ "
       << bitrate_kbps << " kbps): detected delay " << aligned.delay_samples
       << " hit the refinement bound [" << spec.base_samples - spec.max_refine
       << ", " << spec.base_samples + spec.max_refine
       << "]; recalibrate the codec's base delay";
    throw runtime_error(os.str());
  }
  decoded.samples = std::move(aligned.aligned);
  return decoded;
}

int64_t calibrate_codec_delay(CommandTranscoder& transcoder, Codec codec,
                              int bitrate_kbps, int sample_rate,
                              int64_t max_delay) {
  // Seeded noise probe: broadband content correlates sharply.
  Clip probe;
  probe.sample_rate = sample_rate;
  probe.source_id = "calibration-probe";
  probe.samples.resize(static_cast<size_t>(sample_rate * 2));
  Rng rng = Rng::substream(0xCA11B, "delay-probe");
  for (double& v : probe.samples) v = 0.25 * rng.normal();
  for (double& v : probe.samples) v = std::clamp(v, -0.95, 0.95);

  Clip decoded = transcoder.encode_decode_raw(probe, codec, bitrate_kbps);
  AlignmentResult best =
      align_to_reference(probe.samples, decoded.samples, max_delay / 2,
                         max_delay / 2);
  return best.delay_samples;
}

}  // namespace laqm
