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

#include "laqm/config.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "laqm/errors.hpp"
#include "laqm/hash.hpp"
#include "laqm/scorer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace laqm {

const char* kLaqmVersion = "0.1.0";

namespace {

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    throw config_error("config section '" + where + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) {
      throw config_error("unknown config key '" + where +
                         (where.empty() ? "" : ".") + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

CorpusConfig parse_corpus(const json& j) {
  CorpusConfig cfg;
  check_keys(j, "corpus",
             {"kind", "source_dir", "toy", "clip_seconds",
              "target_sample_rate", "codecs", "ladder_kbps",
              "split_fractions", "transcoder"});
  cfg.kind = get_or<std::string>(j, "kind", cfg.kind);
  if (cfg.kind != "toy" && cfg.kind != "files") {
    throw config_error("corpus.kind must be 'toy' or 'files'");
  }
  cfg.source_dir = get_or<std::string>(j, "source_dir", cfg.source_dir);
  if (j.contains("toy")) {
    const json& t = j.at("toy");
    check_keys(t, "corpus.toy",
               {"num_sources", "source_seconds", "sample_rate",
                "components_min", "components_max"});
    cfg.toy.num_sources = get_or<int>(t, "num_sources", cfg.toy.num_sources);
    cfg.toy.source_seconds =
        get_or<double>(t, "source_seconds", cfg.toy.source_seconds);
    cfg.toy.sample_rate = get_or<int>(t, "sample_rate", cfg.toy.sample_rate);
    cfg.toy.components_min =
        get_or<int>(t, "components_min", cfg.toy.components_min);
    cfg.toy.components_max =
        get_or<int>(t, "components_max", cfg.toy.components_max);
  }
  cfg.clip_seconds = get_or<double>(j, "clip_seconds", cfg.clip_seconds);
  cfg.target_sample_rate =
      get_or<int>(j, "target_sample_rate", cfg.target_sample_rate);
  if (j.contains("codecs")) {
    cfg.codecs.clear();
    for (const auto& name : j.at("codecs")) {
      Codec c = codec_from_name(name.get<std::string>());
      if (c == Codec::kNone) throw config_error("corpus.codecs: 'none' not allowed");
      cfg.codecs.push_back(c);
    }
  }
  cfg.ladder_kbps = get_or<std::vector<int>>(j, "ladder_kbps", cfg.ladder_kbps);
  for (int kbps : cfg.ladder_kbps) {
    if (kbps <= 0) throw config_error("corpus.ladder_kbps must be positive");
  }
  if (j.contains("split_fractions")) {
    cfg.split_fractions =
        j.at("split_fractions").get<std::map<std::string, double>>();
  }
  if (j.contains("transcoder")) {
    const json& t = j.at("transcoder");
    check_keys(t, "corpus.transcoder", {"kind", "command", "delay", "toy"});
    cfg.transcoder_kind = get_or<std::string>(t, "kind", cfg.transcoder_kind);
    if (cfg.transcoder_kind != "toy" && cfg.transcoder_kind != "command") {
      throw config_error("corpus.transcoder.kind must be 'toy' or 'command'");
    }
    cfg.transcoder_command = get_or<std::string>(t, "command", "");
    if (t.contains("delay")) {
      for (const auto& [name, spec] : t.at("delay").items()) {
        check_keys(spec, "corpus.transcoder.delay." + name,
                   {"base_samples", "max_refine"});
        CodecDelaySpec d;
        d.base_samples = get_or<int64_t>(spec, "base_samples", 0);
        d.max_refine = get_or<int64_t>(spec, "max_refine", 512);
        cfg.delay[codec_from_name(name)] = d;
      }
    }
    if (t.contains("toy")) {
      const json& tc = t.at("toy");
      check_keys(tc, "corpus.transcoder.toy",
                 {"unit_rms", "burst_hz", "burst_duty"});
      cfg.toy_codec.unit_rms =
          get_or<double>(tc, "unit_rms", cfg.toy_codec.unit_rms);
      cfg.toy_codec.burst_hz =
          get_or<double>(tc, "burst_hz", cfg.toy_codec.burst_hz);
      cfg.toy_codec.burst_duty =
          get_or<double>(tc, "burst_duty", cfg.toy_codec.burst_duty);
    }
  }
  return cfg;
}

LabelConfig parse_label(const json& j) {
  LabelConfig cfg;
  check_keys(j, "label", {"tool", "stub", "command", "cache_dir"});
  cfg.tool = get_or<std::string>(j, "tool", cfg.tool);
  if (cfg.tool != "stub" && cfg.tool != "command") {
    throw config_error("label.tool must be 'stub' or 'command'");
  }
  if (j.contains("stub")) {
    const json& s = j.at("stub");
    check_keys(s, "label.stub", {"unit_rms", "max_units"});
    cfg.stub.unit_rms = get_or<double>(s, "unit_rms", cfg.stub.unit_rms);
    cfg.stub.max_units = get_or<double>(s, "max_units", cfg.stub.max_units);
  }
  if (j.contains("command")) {
    const json& c = j.at("command");
    check_keys(c, "label.command",
               {"command", "mos_pattern", "tool_version", "upsample_hz"});
    cfg.command.command = get_or<std::string>(c, "command", "");
    cfg.command.mos_pattern =
        get_or<std::string>(c, "mos_pattern", cfg.command.mos_pattern);
    cfg.command.tool_version =
        get_or<std::string>(c, "tool_version", cfg.command.tool_version);
    cfg.command.upsample_hz =
        get_or<int>(c, "upsample_hz", cfg.command.upsample_hz);
  }
  cfg.cache_dir = get_or<std::string>(j, "cache_dir", "");
  return cfg;
}

EncoderConfig parse_encoder(const json& j) {
  EncoderConfig cfg;
  check_keys(j, "encoder",
             {"backbone", "toy", "pretrained_path", "embedding_dim", "lora"});
  cfg.backbone = get_or<std::string>(j, "backbone", cfg.backbone);
  if (cfg.backbone != "toy" && cfg.backbone != "pretrained") {
    throw config_error("encoder.backbone must be 'toy' or 'pretrained'");
  }
  if (j.contains("toy")) {
    const json& t = j.at("toy");
    check_keys(t, "encoder.toy",
               {"sample_rate", "conv_kernel", "conv_stride", "width",
                "num_blocks", "num_heads", "ffn_dim", "init_seed"});
    cfg.toy.sample_rate = get_or<int>(t, "sample_rate", cfg.toy.sample_rate);
    cfg.toy.conv_kernel = get_or<int>(t, "conv_kernel", cfg.toy.conv_kernel);
    cfg.toy.conv_stride = get_or<int>(t, "conv_stride", cfg.toy.conv_stride);
    cfg.toy.width = get_or<int>(t, "width", cfg.toy.width);
    cfg.toy.num_blocks = get_or<int>(t, "num_blocks", cfg.toy.num_blocks);
    cfg.toy.num_heads = get_or<int>(t, "num_heads", cfg.toy.num_heads);
    cfg.toy.ffn_dim = get_or<int>(t, "ffn_dim", cfg.toy.ffn_dim);
    cfg.toy.init_seed = get_or<uint64_t>(t, "init_seed", cfg.toy.init_seed);
  }
  cfg.pretrained_path = get_or<std::string>(j, "pretrained_path", "");
  cfg.embedding_dim = get_or<int>(j, "embedding_dim", cfg.embedding_dim);
  if (j.contains("lora")) {
    const json& l = j.at("lora");
    check_keys(l, "encoder.lora",
               {"rank", "alpha", "dropout", "weight_decay", "targets"});
    cfg.lora.rank = get_or<int>(l, "rank", cfg.lora.rank);
    cfg.lora.alpha = get_or<double>(l, "alpha", cfg.lora.alpha);
    cfg.lora.dropout = get_or<double>(l, "dropout", cfg.lora.dropout);
    cfg.lora.weight_decay =
        get_or<double>(l, "weight_decay", cfg.lora.weight_decay);
    cfg.lora.targets =
        get_or<std::vector<std::string>>(l, "targets", cfg.lora.targets);
  }
  return cfg;
}

TrainConfig parse_train(const json& j) {
  TrainConfig cfg;
  check_keys(j, "train",
             {"batch_size", "initial_lr", "decay_factor", "patience_epochs",
              "clean_fraction", "max_epochs", "adaptation_mode", "loss",
              "improvement_eps", "log_wallclock"});
  cfg.batch_size = get_or<int>(j, "batch_size", cfg.batch_size);
  if (j.contains("initial_lr")) cfg.initial_lr = j.at("initial_lr").get<double>();
  cfg.decay_factor = get_or<double>(j, "decay_factor", cfg.decay_factor);
  cfg.patience_epochs = get_or<int>(j, "patience_epochs", cfg.patience_epochs);
  cfg.clean_fraction = get_or<double>(j, "clean_fraction", cfg.clean_fraction);
  cfg.max_epochs = get_or<int>(j, "max_epochs", cfg.max_epochs);
  if (j.contains("adaptation_mode")) {
    cfg.mode = adaptation_mode_from_name(j.at("adaptation_mode"));
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    check_keys(l, "train.loss", {"tau", "sign", "bitrate_term", "codec_pool"});
    cfg.loss.tau = get_or<double>(l, "tau", cfg.loss.tau);
    cfg.loss.sign = get_or<int>(l, "sign", cfg.loss.sign);
    cfg.loss.bitrate_term =
        get_or<bool>(l, "bitrate_term", cfg.loss.bitrate_term);
    const std::string pool =
        get_or<std::string>(l, "codec_pool", "clean_and_same_codec");
    if (pool == "clean_and_same_codec") {
      cfg.loss.codec_pool = CodecPoolRule::kCleanAndSameCodec;
    } else if (pool == "full_batch") {
      cfg.loss.codec_pool = CodecPoolRule::kFullBatch;
    } else {
      throw config_error(
          "train.loss.codec_pool must be 'clean_and_same_codec' or "
          "'full_batch'");
    }
  }
  cfg.improvement_eps = get_or<double>(j, "improvement_eps", cfg.improvement_eps);
  cfg.log_wallclock = get_or<bool>(j, "log_wallclock", cfg.log_wallclock);
  return cfg;
}

ScoreConfig parse_score(const json& j) {
  ScoreConfig cfg;
  check_keys(j, "score",
             {"mode", "aggregation", "references_file", "mapping_file",
              "checkpoint"});
  cfg.mode = get_or<std::string>(j, "mode", cfg.mode);
  scoring_mode_from_name(cfg.mode);  // validates
  cfg.aggregation = get_or<std::string>(j, "aggregation", cfg.aggregation);
  nmr_aggregation_from_name(cfg.aggregation);
  cfg.references_file = get_or<std::string>(j, "references_file", "");
  cfg.mapping_file = get_or<std::string>(j, "mapping_file", "");
  cfg.checkpoint = get_or<std::string>(j, "checkpoint", "");
  return cfg;
}

EvaluateConfig parse_evaluate(const json& j) {
  EvaluateConfig cfg;
  check_keys(j, "evaluate", {"tests", "pooling"});
  if (j.contains("tests")) {
    for (const auto& t : j.at("tests")) {
      check_keys(t, "evaluate.tests[]", {"name", "path", "scale"});
      EvalTestSpec spec;
      spec.name = t.at("name").get<std::string>();
      spec.path = t.at("path").get<std::string>();
      spec.scale = get_or<std::string>(t, "scale", spec.scale);
      cfg.tests.push_back(std::move(spec));
    }
  }
  cfg.pooling = get_or<std::string>(j, "pooling", cfg.pooling);
  if (cfg.pooling != "per_item" && cfg.pooling != "per_condition") {
    throw config_error("evaluate.pooling must be 'per_item' or "
                       "'per_condition'");
  }
  return cfg;
}

MappingFitSpec parse_mapping(const json& j) {
  MappingFitSpec cfg;
  check_keys(j, "mapping", {"kind", "mlp_epochs", "mlp_lr", "mlp_seed"});
  cfg.kind = get_or<std::string>(j, "kind", cfg.kind);
  if (cfg.kind != "cubic" && cfg.kind != "mlp") {
    throw config_error("mapping.kind must be 'cubic' or 'mlp'");
  }
  cfg.mlp_epochs = get_or<int>(j, "mlp_epochs", cfg.mlp_epochs);
  cfg.mlp_lr = get_or<double>(j, "mlp_lr", cfg.mlp_lr);
  cfg.mlp_seed = get_or<uint64_t>(j, "mlp_seed", cfg.mlp_seed);
  return cfg;
}

}  // namespace

std::string RunConfig::manifest_path() const {
  return (fs::path(run_dir) / "manifest.jsonl").string();
}

std::string RunConfig::hash() const { return sha256_hex(raw.dump()); }

RunConfig parse_run_config(const json& root) {
  check_keys(root, "",
             {"seed", "run_dir", "jobs", "corpus", "label", "encoder", "train",
              "score", "evaluate", "mapping"});
  RunConfig cfg;
  cfg.seed = get_or<uint64_t>(root, "seed", cfg.seed);
  cfg.run_dir = get_or<std::string>(root, "run_dir", cfg.run_dir);
  cfg.jobs = get_or<int>(root, "jobs", cfg.jobs);
  if (cfg.jobs < 1) throw config_error("jobs must be >= 1");
  if (root.contains("corpus")) cfg.corpus = parse_corpus(root.at("corpus"));
  if (root.contains("label")) cfg.label = parse_label(root.at("label"));
  if (root.contains("encoder")) cfg.encoder = parse_encoder(root.at("encoder"));
  if (root.contains("train")) cfg.train = parse_train(root.at("train"));
  if (root.contains("score")) cfg.score = parse_score(root.at("score"));
  if (root.contains("evaluate")) {
    cfg.evaluate = parse_evaluate(root.at("evaluate"));
  }
  if (root.contains("mapping")) cfg.mapping = parse_mapping(root.at("mapping"));
  cfg.train.seed = cfg.seed;
  cfg.corpus.toy.seed = cfg.seed;
  cfg.corpus.toy_codec.seed = cfg.seed;
  cfg.raw = root;
  return cfg;
}

namespace {

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);  // plain string
  }
}

void apply_override(json& root, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw config_error("override must look like key.path=value: " +
                       assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const json value = parse_override_value(assignment.substr(eq + 1));

  json* node = &root;
  size_t pos = 0;
  while (true) {
    const size_t dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    if (key.empty()) throw config_error("bad override path: " + path);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &((*node)[key]);
    if (!node->is_object() && !node->is_null()) {
      throw config_error("override path crosses a non-object: " + path);
    }
    pos = dot + 1;
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw config_error("config parse error in " + path + ": " + e.what());
  }
  for (const auto& assignment : overrides) {
    apply_override(root, assignment);
  }
  RunConfig cfg = parse_run_config(root);
  cfg.overrides = overrides;

  if (const char* cmd = std::getenv("LAQM_TRANSCODE_CMD")) {
    cfg.corpus.transcoder_command = cmd;
    cfg.env_overrides["LAQM_TRANSCODE_CMD"] = cmd;
  }
  if (const char* cmd = std::getenv("LAQM_METRIC_CMD")) {
    cfg.label.command.command = cmd;
    cfg.env_overrides["LAQM_METRIC_CMD"] = cmd;
  }
  return cfg;
}

void write_provenance(const RunConfig& cfg, const std::string& command,
                      const std::map<std::string, std::string>& input_files,
                      const json& extra) {
  fs::path dir = fs::path(cfg.run_dir) / "provenance";
  fs::create_directories(dir);
  json j;
  j["command"] = command;
  j["laqm_version"] = kLaqmVersion;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["overrides"] = cfg.overrides;
  j["env_overrides"] = cfg.env_overrides;
  json inputs;
  for (const auto& [name, path] : input_files) {
    inputs[name] = fs::exists(path) ? sha256_file_hex(path) : "missing";
  }
  j["input_hashes"] = inputs;
  j["extra"] = extra;
  std::ofstream out(dir / (command + ".json"), std::ios::trunc);
  out << j.dump(2) << "\n";
}

RunLock::RunLock(const std::string& run_dir) {
  fs::create_directories(run_dir);
  const std::string lock_path = (fs::path(run_dir) / ".lock").string();
  fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) throw runtime_error("cannot open lock file: " + lock_path);
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw runtime_error("another writer holds the manifest tree lock: " +
                        lock_path);
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace laqm
