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

#ifndef LAQM_CONFIG_HPP_
#define LAQM_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laqm/backbone.hpp"
#include "laqm/surrogate.hpp"
#include "laqm/toy.hpp"
#include "laqm/trainer.hpp"
#include "laqm/transcode.hpp"

namespace laqm {

struct CorpusConfig {
  std::string kind = "toy";  // "toy" | "files"
  std::string source_dir;    // kind=files: directory of wav sources
  ToyCorpusConfig toy;
  double clip_seconds = 1.0;
  int target_sample_rate = 8000;
  std::vector<Codec> codecs = {Codec::kAac, Codec::kOpus, Codec::kMp3};
  std::vector<int> ladder_kbps = {16, 32, 48, 64, 80};
  std::map<std::string, double> split_fractions = {
      {"train", 0.7}, {"val", 0.15}, {"test", 0.15}};
  std::string transcoder_kind = "toy";  // "toy" | "command"
  std::string transcoder_command;       // may come from LAQM_TRANSCODE_CMD
  std::map<Codec, CodecDelaySpec> delay;
  ToyCodecConfig toy_codec;
};

struct LabelConfig {
  std::string tool = "stub";  // "stub" | "command"
  StubLabelerConfig stub;
  CommandLabelerConfig command;  // command may come from LAQM_METRIC_CMD
  std::string cache_dir;         // default <run_dir>/cache/labels
};

struct EncoderConfig {
  std::string backbone = "toy";  // "toy" | "pretrained"
  BackboneConfig toy = toy_backbone_config();
  std::string pretrained_path;
  int embedding_dim = 32;
  LoraConfig lora;
};

struct ScoreConfig {
  std::string mode = "full_reference";  // "full_reference" | "non_matching"
  std::string aggregation = "mean_distance";
  std::string references_file;  // NMR: one wav path per line
  std::string mapping_file;     // optional fitted mapping
  std::string checkpoint;       // default <run_dir>/checkpoints/best.ckpt
};

struct EvalTestSpec {
  std::string name;
  std::string path;
  std::string scale = "mos";  // "mos" | "mushra"
};

struct EvaluateConfig {
  std::vector<EvalTestSpec> tests;
  std::string pooling = "per_item";  // "per_item" | "per_condition"
};

struct MappingFitSpec {
  std::string kind = "cubic";  // "cubic" | "mlp"
  int mlp_epochs = 4000;
  double mlp_lr = 0.02;
  uint64_t mlp_seed = 1;
};

struct RunConfig {
  uint64_t seed = 7;
  std::string run_dir = "runs/default";
  int jobs = 1;
  CorpusConfig corpus;
  LabelConfig label;
  EncoderConfig encoder;
  TrainConfig train;
  ScoreConfig score;
  EvaluateConfig evaluate;
  MappingFitSpec mapping;

  nlohmann::json raw;                  // canonical merged config
  std::vector<std::string> overrides;  // echoed "key=value" pairs
  std::map<std::string, std::string> env_overrides;  // LAQM_* echoed

  std::string manifest_path() const;
  std::string hash() const;  // sha256 of the canonical config
};

// Strict parse: unknown keys anywhere are configuration errors.
RunConfig parse_run_config(const nlohmann::json& root);

// Loads a JSON config file and applies dotted-path overrides
// ("train.max_epochs=30"); override values parse as JSON scalars with a
// string fallback. Environment variables LAQM_TRANSCODE_CMD and
// LAQM_METRIC_CMD override the corresponding command templates.
RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

// Provenance record for one command: config hash, input hashes, tool
// versions, seed, overrides. Written under <run_dir>/provenance/.
void write_provenance(const RunConfig& cfg, const std::string& command,
                      const std::map<std::string, std::string>& input_files,
                      const nlohmann::json& extra);

// Advisory exclusive lock on the manifest tree (flock on <run_dir>/.lock);
// released on destruction or process death.
class RunLock {
 public:
  explicit RunLock(const std::string& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

extern const char* kLaqmVersion;

}  // namespace laqm

#endif  // LAQM_CONFIG_HPP_
