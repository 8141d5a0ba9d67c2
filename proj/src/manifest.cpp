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

#include "laqm/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "laqm/errors.hpp"
#include "laqm/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace laqm {

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  throw runtime_error("split_name: invalid split");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw config_error("unknown split: " + name);
}

SurrogateLabel ClipRecord::label() const {
  SurrogateLabel l;
  l.codec = codec;
  l.bitrate = bitrate_kbps;
  l.visqol_mos = visqol_mos.value_or(is_clean() ? 5.0 : 0.0);
  if (!is_clean() && !visqol_mos.has_value()) {
    throw runtime_error("record '" + clip_path +
                        "' has no MOS label; run labeling first");
  }
  return l;
}

std::string Manifest::resolve_path(const std::string& rel) const {
  fs::path p(rel);
  if (p.is_absolute() || base_dir.empty()) return rel;
  return (fs::path(base_dir) / p).string();
}

std::vector<size_t> Manifest::indices(Split split, bool clean) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split && records[i].is_clean() == clean) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<size_t> Manifest::indices(Split split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

namespace {

json bitrate_to_json(ExtendedReal b) {
  if (b.is_infinite()) return json("inf");
  return json(static_cast<int>(std::llround(b.value)));
}

ExtendedReal bitrate_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return ExtendedReal::infinity();
    throw runtime_error("manifest: bad bitrate value '" +
                        j.get<std::string>() + "'");
  }
  double v = j.get<double>();
  if (v <= 0) throw runtime_error("manifest: bitrate must be positive");
  return ExtendedReal{v};
}

json record_to_json(const ClipRecord& r) {
  json j;
  j["clip_path"] = r.clip_path;
  j["source_id"] = r.source_id;
  j["offset_seconds"] = r.offset_seconds;
  j["codec"] = codec_name(r.codec);
  j["bitrate_kbps"] = bitrate_to_json(r.bitrate_kbps);
  j["split"] = split_name(r.split);
  if (r.visqol_mos.has_value()) j["visqol_mos"] = *r.visqol_mos;
  if (!r.reference_path.empty()) j["reference_path"] = r.reference_path;
  return j;
}

ClipRecord record_from_json(const json& j) {
  ClipRecord r;
  r.clip_path = j.at("clip_path").get<std::string>();
  r.source_id = j.at("source_id").get<std::string>();
  r.offset_seconds = j.value("offset_seconds", 0.0);
  r.codec = codec_from_name(j.at("codec").get<std::string>());
  r.bitrate_kbps = bitrate_from_json(j.at("bitrate_kbps"));
  r.split = split_from_name(j.at("split").get<std::string>());
  if (j.contains("visqol_mos")) {
    double mos = j.at("visqol_mos").get<double>();
    if (mos < 1.0 || mos > 5.0) {
      throw runtime_error("manifest: visqol_mos outside [1,5] for " +
                          r.clip_path);
    }
    r.visqol_mos = mos;
  }
  r.reference_path = j.value("reference_path", "");
  if (r.is_clean() != r.bitrate_kbps.is_infinite()) {
    throw runtime_error(
        "manifest: codec=none must pair with bitrate=inf (and only then): " +
        r.clip_path);
  }
  return r;
}

}  // namespace

void save_manifest(const Manifest& manifest, const std::string& path) {
  json header;
  header["kind"] = "laqm-manifest";
  header["format_version"] = 1;
  header["target_sample_rate"] = manifest.metadata.target_sample_rate;
  header["clip_seconds"] = manifest.metadata.clip_seconds;
  header["ladder_kbps"] = manifest.metadata.ladder_kbps;
  json codecs = json::array();
  for (Codec c : manifest.metadata.codecs) codecs.push_back(codec_name(c));
  header["codecs"] = codecs;
  header["split_fractions"] = manifest.metadata.split_fractions;
  header["split_seed"] = manifest.metadata.split_seed;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw runtime_error("cannot write manifest: " + path);
  out << header.dump() << "\n";
  for (const auto& r : manifest.records) {
    out << record_to_json(r).dump() << "\n";
  }
  if (!out) throw runtime_error("short write on manifest: " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw runtime_error("cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line)) throw runtime_error("empty manifest: " + path);

  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();
  json header = json::parse(line);
  if (header.value("kind", "") != "laqm-manifest") {
    throw runtime_error("not a manifest file: " + path);
  }
  m.metadata.target_sample_rate = header.value("target_sample_rate", 0);
  m.metadata.clip_seconds = header.value("clip_seconds", 0.0);
  m.metadata.ladder_kbps =
      header.value("ladder_kbps", std::vector<int>{});
  if (header.contains("codecs")) {
    for (const auto& c : header["codecs"]) {
      m.metadata.codecs.push_back(codec_from_name(c.get<std::string>()));
    }
  }
  if (header.contains("split_fractions")) {
    m.metadata.split_fractions =
        header["split_fractions"].get<std::map<std::string, double>>();
  }
  m.metadata.split_seed = header.value("split_seed", uint64_t{0});

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw runtime_error("manifest " + path + " line " +
                          std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

std::map<std::string, Split> assign_splits(
    const std::vector<std::string>& source_ids,
    const std::map<std::string, double>& fractions, uint64_t seed) {
  if (fractions.empty()) throw config_error("no split fractions given");
  double sum = 0.0;
  for (const auto& [name, f] : fractions) {
    if (f <= 0.0) throw config_error("split fraction for '" + name +
                                     "' must be positive");
    split_from_name(name);  // validates the name
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw config_error("split fractions must sum to 1 (got " +
                       std::to_string(sum) + ")");
  }
  {
    std::set<std::string> uniq(source_ids.begin(), source_ids.end());
    if (uniq.size() != source_ids.size()) {
      throw config_error("duplicate source_id in split assignment");
    }
  }

  std::vector<std::string> ids = source_ids;
  std::sort(ids.begin(), ids.end());
  Rng rng = Rng::substream(seed, "split");
  rng.shuffle(ids);

  // Largest-remainder allocation over the (ordered) fraction names.
  const size_t n = ids.size();
  std::vector<std::pair<std::string, double>> fr(fractions.begin(),
                                                 fractions.end());
  std::vector<size_t> counts(fr.size());
  std::vector<double> remainders(fr.size());
  size_t assigned = 0;
  for (size_t i = 0; i < fr.size(); ++i) {
    double exact = fr[i].second * static_cast<double>(n);
    counts[i] = static_cast<size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  while (assigned < n) {
    size_t best = 0;
    for (size_t i = 1; i < fr.size(); ++i) {
      if (remainders[i] > remainders[best]) best = i;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  std::map<std::string, Split> out;
  size_t pos = 0;
  for (size_t i = 0; i < fr.size(); ++i) {
    Split s = split_from_name(fr[i].first);
    for (size_t k = 0; k < counts[i]; ++k) {
      out[ids[pos++]] = s;
    }
  }
  return out;
}

void validate_manifest(const Manifest& manifest) {
  // Split disjointness by source id.
  std::map<std::string, Split> seen;
  for (const auto& r : manifest.records) {
    auto it = seen.find(r.source_id);
    if (it == seen.end()) {
      seen[r.source_id] = r.split;
    } else if (it->second != r.split) {
      throw runtime_error("source '" + r.source_id +
                          "' appears in more than one split");
    }
  }

  // Unique clip paths.
  {
    std::set<std::string> paths;
    for (const auto& r : manifest.records) {
      if (!paths.insert(r.clip_path).second) {
        throw runtime_error("duplicate clip path in manifest: " + r.clip_path);
      }
    }
  }

  // Ladder coverage: every (codec, bitrate) for every coded (source, offset).
  std::set<std::string> coded_keys;
  std::map<std::string, std::set<std::string>> have;
  for (const auto& r : manifest.records) {
    if (r.is_clean()) continue;
    std::ostringstream key;
    key << r.source_id << "@" << r.offset_seconds;
    coded_keys.insert(key.str());
    std::ostringstream cb;
    cb << codec_name(r.codec) << "@" << std::llround(r.bitrate_kbps.value);
    have[key.str()].insert(cb.str());
  }
  std::vector<std::string> missing;
  for (const auto& key : coded_keys) {
    for (Codec c : manifest.metadata.codecs) {
      for (int kbps : manifest.metadata.ladder_kbps) {
        std::ostringstream cb;
        cb << codec_name(c) << "@" << kbps;
        if (have[key].count(cb.str()) == 0) {
          missing.push_back(key + " missing " + cb.str());
        }
      }
    }
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "manifest ladder gaps (" << missing.size() << "):";
    for (size_t i = 0; i < missing.size() && i < 10; ++i) {
      os << "\n  " << missing[i];
    }
    if (missing.size() > 10) os << "\n  ...";
    throw runtime_error(os.str());
  }

  // Files exist.
  std::vector<std::string> absent;
  for (const auto& r : manifest.records) {
    if (!fs::exists(manifest.resolve_path(r.clip_path))) {
      absent.push_back(r.clip_path);
    }
  }
  if (!absent.empty()) {
    std::ostringstream os;
    os << "manifest references missing files (" << absent.size() << "):";
    for (size_t i = 0; i < absent.size() && i < 10; ++i) os << "\n  " << absent[i];
    throw runtime_error(os.str());
  }
}

}  // namespace laqm
