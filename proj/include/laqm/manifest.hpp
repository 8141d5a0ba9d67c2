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

#ifndef LAQM_MANIFEST_HPP_
#define LAQM_MANIFEST_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laqm/surrogate.hpp"

namespace laqm {

enum class Split { kTrain, kVal, kTest };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One audio clip (clean or degraded) with provenance. Paths are stored
// relative to the manifest file's directory.
struct ClipRecord {
  std::string clip_path;
  std::string source_id;
  double offset_seconds = 0.0;
  Codec codec = Codec::kNone;
  ExtendedReal bitrate_kbps = ExtendedReal::infinity();  // +INF iff clean
  Split split = Split::kTrain;
  std::optional<double> visqol_mos;
  // Matched clean clip (empty for clean records); used for labeling and
  // full-reference scoring.
  std::string reference_path;

  bool is_clean() const { return codec == Codec::kNone; }
  SurrogateLabel label() const;
};

struct ManifestMetadata {
  int target_sample_rate = 0;
  double clip_seconds = 0.0;
  std::vector<int> ladder_kbps;
  std::vector<Codec> codecs;
  std::map<std::string, double> split_fractions;
  uint64_t split_seed = 0;
};

struct Manifest {
  ManifestMetadata metadata;
  std::vector<ClipRecord> records;
  // Directory the manifest was loaded from / will be saved to; used to
  // resolve relative clip paths. Not serialized.
  std::string base_dir;

  std::string resolve_path(const std::string& rel) const;
  std::vector<size_t> indices(Split split, bool clean) const;
  std::vector<size_t> indices(Split split) const;
};

// Line-delimited JSON: one header object, then one object per record.
void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

// Deterministic assignment of source ids to splits: seeded shuffle, then
// largest-remainder allocation of counts from the fractions. Fractions must
// be positive and sum to 1 within 1e-9.
std::map<std::string, Split> assign_splits(
    const std::vector<std::string>& source_ids,
    const std::map<std::string, double>& fractions, uint64_t seed);

// Validation: split disjointness by source, ladder coverage for every coded
// source, unique (path) records, referenced files exist.
void validate_manifest(const Manifest& manifest);

}  // namespace laqm

#endif  // LAQM_MANIFEST_HPP_
