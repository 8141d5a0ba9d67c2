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

#include <filesystem>
#include <fstream>

#include "laqm/rng.hpp"
#include "laqm/surrogate.hpp"

using namespace laqm;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("laqm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Clip noise_clip(uint64_t seed, size_t n, int rate, double rms) {
  Rng rng(seed);
  Clip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  double acc = 0.0;
  for (double& v : c.samples) {
    v = rng.normal();
    acc += v * v;
  }
  const double gain = rms / std::sqrt(acc / static_cast<double>(n));
  for (double& v : c.samples) v *= gain;
  return c;
}

}  // namespace

TEST_CASE("extended-real label distance: the spec's table") {
  CHECK(label_distance(ExtendedReal{16}, ExtendedReal{128}).value == 112.0);
  CHECK(label_distance(ExtendedReal{64}, ExtendedReal{kInf}).value == kInf);
  CHECK(label_distance(ExtendedReal{kInf}, ExtendedReal{kInf}).value == 0.0);
}

TEST_CASE("extended-real properties: symmetry, identity, total order") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform() < 0.3 ? kInf : 200.0 * rng.uniform();
    const double b = rng.uniform() < 0.3 ? kInf : 200.0 * rng.uniform();
    ExtendedReal ea{a}, eb{b};
    CHECK(label_distance(ea, eb).value == label_distance(eb, ea).value);
    CHECK(label_distance(ea, ea).value == 0.0);
    // +INF dominates every finite value.
    CHECK_FALSE(ExtendedReal::infinity() < ea);
  }
}

TEST_CASE("stub labeler is the linear intensity formula, exactly") {
  StubLabelerConfig cfg;
  cfg.unit_rms = 0.02;
  cfg.max_units = 5.0;
  StubLabeler stub(cfg);

  Clip reference = noise_clip(1, 8000, 8000, 0.2);
  Clip unit_noise = noise_clip(2, 8000, 8000, 1.0);

  for (int units = 0; units <= 5; ++units) {
    Clip degraded = reference;
    for (size_t i = 0; i < degraded.samples.size(); ++i) {
      degraded.samples[i] += units * cfg.unit_rms * unit_noise.samples[i];
    }
    const double mos = stub.mos_for_clips(degraded, reference);
    const double expected = 5.0 - 4.0 * (units / cfg.max_units);
    CHECK(mos == doctest::Approx(expected).epsilon(1e-9));
  }

  // Strictly monotone decreasing in intensity.
  double prev = 6.0;
  for (int units = 0; units <= 5; ++units) {
    Clip degraded = reference;
    for (size_t i = 0; i < degraded.samples.size(); ++i) {
      degraded.samples[i] += units * cfg.unit_rms * unit_noise.samples[i];
    }
    const double mos = stub.mos_for_clips(degraded, reference);
    CHECK(mos < prev);
    prev = mos;
  }

  // Clamped to [1, 5] even past max intensity.
  Clip heavy = reference;
  for (size_t i = 0; i < heavy.samples.size(); ++i) {
    heavy.samples[i] += 12 * cfg.unit_rms * unit_noise.samples[i];
  }
  CHECK(stub.mos_for_clips(heavy, reference) == 1.0);
  CHECK(stub.mos_for_clips(reference, reference) == 5.0);
}

TEST_CASE("command labeler parses MOS and enforces sanity bounds") {
  CommandLabelerConfig cfg;
  cfg.command = "echo 'MOS-LQO: 3.25' # {degraded} {reference}";
  cfg.upsample_hz = 0;
  CommandLabeler ok(cfg);
  CHECK(ok.mos_for_files("a", "b") == doctest::Approx(3.25));

  cfg.command = "echo 'MOS-LQO: 6.5' # {degraded} {reference}";
  CommandLabeler out_of_range(cfg);
  CHECK_THROWS_AS(out_of_range.mos_for_files("a", "b"), Error);

  cfg.command = "echo nope # {degraded} {reference}";
  CommandLabeler unparsable(cfg);
  CHECK_THROWS_AS(unparsable.mos_for_files("a", "b"), Error);

  cfg.command = "false # {degraded} {reference}";
  CommandLabeler failing(cfg);
  CHECK_THROWS_AS(failing.mos_for_files("a", "b"), Error);

  // Results clamp into [1, 5].
  cfg.command = "echo 'MOS-LQO: 0.4' # {degraded} {reference}";
  CommandLabeler low(cfg);
  CHECK(low.mos_for_files("a", "b") == 1.0);
}

TEST_CASE("cache: byte-identical inputs invoke the tool once") {
  fs::path dir = temp_dir("cache");
  const std::string deg = (dir / "deg.wav").string();
  const std::string ref = (dir / "ref.wav").string();
  write_wav(deg, noise_clip(3, 2000, 8000, 0.1));
  write_wav(ref, noise_clip(4, 2000, 8000, 0.1));
  const std::string counter = (dir / "count.txt").string();

  CommandLabelerConfig cfg;
  cfg.command = "echo run >> " + counter +
                "; echo 'MOS-LQO: 4.0' # {degraded} {reference}";
  cfg.upsample_hz = 0;
  auto labeler = std::make_shared<CommandLabeler>(cfg);
  CachedLabeler cached(labeler, (dir / "cache").string());

  CHECK(cached.mos_for_files(deg, ref) == doctest::Approx(4.0));
  CHECK(cached.mos_for_files(deg, ref) == doctest::Approx(4.0));
  CHECK(cached.external_calls() == 1);

  std::ifstream in(counter);
  int lines = 0;
  std::string line;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1);

  // A second cache instance over the same directory hits the disk entry.
  CachedLabeler second(labeler, (dir / "cache").string());
  CHECK(second.mos_for_files(deg, ref) == doctest::Approx(4.0));
  CHECK(second.external_calls() == 0);
  fs::remove_all(dir);
}

TEST_CASE("codec names round-trip and reject junk") {
  for (Codec c : {Codec::kNone, Codec::kAac, Codec::kOpus, Codec::kMp3}) {
    CHECK(codec_from_name(codec_name(c)) == c);
  }
  CHECK_THROWS_AS(codec_from_name("vorbis"), Error);
}
