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

#include "laqm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "laqm/errors.hpp"
#include "laqm/hash.hpp"
#include "laqm/toy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace laqm {

namespace {

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const size_t workers = std::min<size_t>(static_cast<size_t>(jobs), n);
  threads.reserve(workers);
  for (size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::string resolve_near(const std::string& base_file, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return p;
  return (fs::path(base_file).parent_path() / path).string();
}

AudioBuffer resample_buffer(const AudioBuffer& buf, int rate,
                            ResampleStats* stats = nullptr) {
  if (buf.sample_rate == rate) return buf;
  AudioBuffer out;
  out.sample_rate = rate;
  for (const auto& ch : buf.channels) {
    Clip c{ch, buf.sample_rate, "", 0.0};
    out.channels.push_back(resample(c, rate, stats).samples);
  }
  return out;
}

std::unique_ptr<Transcoder> make_transcoder(const RunConfig& cfg) {
  if (cfg.corpus.transcoder_kind == "toy") {
    return std::make_unique<ToyTranscoder>(cfg.corpus.toy_codec,
                                           cfg.corpus.ladder_kbps);
  }
  CommandTranscoderConfig tcfg;
  tcfg.command = cfg.corpus.transcoder_command;
  tcfg.delay = cfg.corpus.delay;
  tcfg.work_dir = (fs::path(cfg.run_dir) / "tmp").string();
  return std::make_unique<CommandTranscoder>(tcfg);
}

}  // namespace

std::vector<std::string> read_path_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw runtime_error("cannot open path list: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(resolve_near(path, line));
  }
  return out;
}

Clip load_mono_clip_at_rate(const std::string& path, int rate) {
  AudioBuffer buf = read_wav(path);
  Clip clip;
  clip.samples = downmix_to_mono(buf);
  clip.sample_rate = buf.sample_rate;
  clip.source_id = fs::path(path).stem().string();
  return resample(clip, rate);
}

void cmd_prepare(const RunConfig& cfg) {
  RunLock lock(cfg.run_dir);
  const fs::path run_dir(cfg.run_dir);
  fs::create_directories(run_dir / "clips");

  // Collect source recordings.
  std::vector<std::pair<std::string, std::string>> sources;  // id, path
  if (cfg.corpus.kind == "toy") {
    fs::create_directories(run_dir / "sources");
    for (int i = 0; i < cfg.corpus.toy.num_sources; ++i) {
      const std::string id = toy_source_id(i);
      const fs::path path = run_dir / "sources" / (id + ".wav");
      write_wav(path.string(), toy_source(cfg.corpus.toy, i));
      sources.emplace_back(id, path.string());
    }
  } else {
    if (cfg.corpus.source_dir.empty()) {
      throw config_error("corpus.kind=files needs corpus.source_dir");
    }
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(cfg.corpus.source_dir)) {
      if (entry.path().extension() == ".wav") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) {
      throw config_error("no .wav sources under " + cfg.corpus.source_dir);
    }
    std::set<std::string> ids;
    for (const auto& p : paths) {
      const std::string id = p.stem().string();
      if (!ids.insert(id).second) {
        throw config_error("duplicate source_id '" + id + "' in " +
                           cfg.corpus.source_dir);
      }
      sources.emplace_back(id, p.string());
    }
  }

  std::vector<std::string> ids;
  for (const auto& [id, path] : sources) ids.push_back(id);
  const std::map<std::string, Split> splits =
      assign_splits(ids, cfg.corpus.split_fractions, cfg.seed);

  std::unique_ptr<Transcoder> transcoder = make_transcoder(cfg);

  // Per-source work, parallel across sources, records joined in source
  // order so the manifest is byte-stable regardless of --jobs.
  std::vector<std::vector<ClipRecord>> per_source(sources.size());
  parallel_for(sources.size(), cfg.jobs, [&](size_t si) {
    const auto& [source_id, source_path] = sources[si];
    const Split split = splits.at(source_id);
    AudioBuffer source = read_wav(source_path);
    std::vector<Clip> clips =
        segment(source, cfg.corpus.clip_seconds, source_id);
    const fs::path clip_dir = run_dir / "clips" / source_id;
    fs::create_directories(clip_dir);

    std::vector<ClipRecord>& records = per_source[si];
    for (size_t k = 0; k < clips.size(); ++k) {
      const Clip& clip = clips[k];
      Clip clean = resample(clip, cfg.corpus.target_sample_rate);
      std::ostringstream clean_name;
      clean_name << "k" << k << "_clean.wav";
      const std::string clean_rel =
          (fs::path("clips") / source_id / clean_name.str()).string();
      write_wav((run_dir / clean_rel).string(), clean);

      ClipRecord clean_rec;
      clean_rec.clip_path = clean_rel;
      clean_rec.source_id = source_id;
      clean_rec.offset_seconds = clip.offset_seconds;
      clean_rec.codec = Codec::kNone;
      clean_rec.bitrate_kbps = ExtendedReal::infinity();
      clean_rec.split = split;
      records.push_back(clean_rec);

      for (Codec codec : cfg.corpus.codecs) {
        for (int kbps : cfg.corpus.ladder_kbps) {
          Clip degraded = transcoder->encode_decode(clip, codec, kbps);
          Clip degraded_out = resample(degraded, cfg.corpus.target_sample_rate);
          std::ostringstream name;
          name << "k" << k << "_" << codec_name(codec) << kbps << ".wav";
          const std::string rel =
              (fs::path("clips") / source_id / name.str()).string();
          write_wav((run_dir / rel).string(), degraded_out);

          ClipRecord rec;
          rec.clip_path = rel;
          rec.source_id = source_id;
          rec.offset_seconds = clip.offset_seconds;
          rec.codec = codec;
          rec.bitrate_kbps = ExtendedReal{static_cast<double>(kbps)};
          rec.split = split;
          rec.reference_path = clean_rel;
          records.push_back(rec);
        }
      }
    }
  });

  Manifest manifest;
  manifest.base_dir = cfg.run_dir;
  manifest.metadata.target_sample_rate = cfg.corpus.target_sample_rate;
  manifest.metadata.clip_seconds = cfg.corpus.clip_seconds;
  manifest.metadata.ladder_kbps = cfg.corpus.ladder_kbps;
  manifest.metadata.codecs = cfg.corpus.codecs;
  manifest.metadata.split_fractions = cfg.corpus.split_fractions;
  manifest.metadata.split_seed = cfg.seed;
  for (auto& records : per_source) {
    manifest.records.insert(manifest.records.end(), records.begin(),
                            records.end());
  }
  validate_manifest(manifest);
  save_manifest(manifest, cfg.manifest_path());

  write_provenance(cfg, "prepare", {{"manifest", cfg.manifest_path()}},
                   json{{"sources", sources.size()},
                        {"records", manifest.records.size()}});
}

void cmd_label(const RunConfig& cfg) {
  Manifest manifest = load_manifest(cfg.manifest_path());

  std::shared_ptr<QualityLabeler> inner;
  if (cfg.label.tool == "stub") {
    inner = std::make_shared<StubLabeler>(cfg.label.stub);
  } else {
    inner = std::make_shared<CommandLabeler>(cfg.label.command);
  }
  const std::string cache_dir =
      cfg.label.cache_dir.empty()
          ? (fs::path(cfg.run_dir) / "cache" / "labels").string()
          : cfg.label.cache_dir;
  CachedLabeler labeler(inner, cache_dir);

  std::vector<std::string> failures(manifest.records.size());
  parallel_for(manifest.records.size(), cfg.jobs, [&](size_t i) {
    ClipRecord& rec = manifest.records[i];
    try {
      if (rec.is_clean()) {
        rec.visqol_mos = 5.0;  // scale top; no tool invocation for clean
      } else if (!rec.visqol_mos.has_value()) {
        if (rec.reference_path.empty()) {
          throw runtime_error("record has no reference_path");
        }
        rec.visqol_mos =
            labeler.mos_for_files(manifest.resolve_path(rec.clip_path),
                                  manifest.resolve_path(rec.reference_path));
      }
    } catch (const std::exception& e) {
      failures[i] = rec.clip_path + ": " + e.what();
    }
  });

  std::vector<std::string> errors;
  for (const auto& f : failures) {
    if (!f.empty()) errors.push_back(f);
  }
  if (!errors.empty()) {
    // Keep whatever succeeded so a rerun only retries the failures.
    save_manifest(manifest, cfg.manifest_path());
    std::ostringstream os;
    os << "labeling failed for " << errors.size() << " records:";
    for (size_t i = 0; i < errors.size() && i < 10; ++i) os << "\n  " << errors[i];
    if (errors.size() > 10) os << "\n  ...";
    throw tool_error(os.str());
  }

  save_manifest(manifest, cfg.manifest_path());
  write_provenance(cfg, "label", {{"manifest", cfg.manifest_path()}},
                   json{{"external_calls", labeler.external_calls()},
                        {"tool_version", labeler.version()}});
}

namespace {

std::shared_ptr<Backbone> build_backbone(const RunConfig& cfg) {
  if (cfg.encoder.backbone == "toy") {
    BackboneConfig bcfg = cfg.encoder.toy;
    bcfg.id = "toy-v1";
    return make_seeded_backbone(bcfg);
  }
  if (cfg.encoder.pretrained_path.empty()) {
    throw config_error(
        "encoder.backbone=pretrained needs encoder.pretrained_path (weights "
        "are never downloaded)");
  }
  return load_pretrained_backbone(pretrained_95m_config(),
                                  cfg.encoder.pretrained_path);
}

EncoderModel::BackboneProvider backbone_provider(const RunConfig& cfg) {
  return [&cfg](const std::string& id,
                const json& echo) -> std::shared_ptr<Backbone> {
    BackboneConfig bcfg = backbone_config_from_json(echo.at("backbone"));
    if (id == "toy-v1") return make_seeded_backbone(bcfg);
    if (cfg.encoder.pretrained_path.empty()) {
      throw config_error("checkpoint uses backbone '" + id +
                         "'; set encoder.pretrained_path to its weights");
    }
    return load_pretrained_backbone(bcfg, cfg.encoder.pretrained_path);
  };
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg) {
  Manifest manifest = load_manifest(cfg.manifest_path());

  EncoderModel model(build_backbone(cfg), cfg.encoder.embedding_dim, cfg.seed);
  if (cfg.train.mode == AdaptationMode::kLora) {
    model.apply_lora(cfg.encoder.lora, cfg.seed);
  }

  TrainConfig tcfg = cfg.train;
  const fs::path run_dir(cfg.run_dir);
  fs::create_directories(run_dir / "checkpoints");
  if (tcfg.metrics_path.empty()) {
    tcfg.metrics_path = (run_dir / "metrics.jsonl").string();
  }
  if (tcfg.checkpoint_best.empty()) {
    tcfg.checkpoint_best = (run_dir / "checkpoints" / "best.ckpt").string();
  }
  if (tcfg.checkpoint_last.empty()) {
    tcfg.checkpoint_last = (run_dir / "checkpoints" / "last.ckpt").string();
  }

  TrainResult result = train(model, manifest, tcfg);
  write_provenance(
      cfg, "train",
      {{"manifest", cfg.manifest_path()},
       {"checkpoint_best", tcfg.checkpoint_best},
       {"metrics", tcfg.metrics_path}},
      json{{"epochs_run", result.epochs_run},
           {"steps", result.steps},
           {"initial_val_loss", result.initial_val_loss},
           {"best_val_loss", result.best_val_loss},
           {"final_val_loss", result.final_val_loss},
           {"trainable_fraction", model.trainable_report().fraction}});
  return result;
}

EncoderModel load_scoring_model(const RunConfig& cfg) {
  const std::string path =
      cfg.score.checkpoint.empty()
          ? (fs::path(cfg.run_dir) / "checkpoints" / "best.ckpt").string()
          : cfg.score.checkpoint;
  return EncoderModel::load_checkpoint(path, backbone_provider(cfg));
}

std::vector<PredictionRecord> cmd_score_testfile(const RunConfig& cfg,
                                                 const EvalTestSpec& test,
                                                 const std::string& out_path) {
  EncoderModel model = load_scoring_model(cfg);
  std::optional<DistanceMapping> mapping;
  if (!cfg.score.mapping_file.empty()) {
    mapping = load_mapping(cfg.score.mapping_file);
  }
  const ScoringMode mode = scoring_mode_from_name(cfg.score.mode);
  const NmrAggregation aggregation =
      nmr_aggregation_from_name(cfg.score.aggregation);
  const int rate = model.expected_sample_rate();

  ListeningTestFile file =
      load_listening_test(test.path, test.name, test.scale);

  std::vector<Embedding> nmr_refs;
  if (mode == ScoringMode::kNonMatching) {
    if (cfg.score.references_file.empty()) {
      throw config_error("non_matching scoring needs score.references_file");
    }
    for (const std::string& p : read_path_list(cfg.score.references_file)) {
      nmr_refs.push_back(model.embed(load_mono_clip_at_rate(p, rate)));
    }
  }

  std::vector<PredictionRecord> predictions(file.rows.size());
  parallel_for(file.rows.size(), cfg.jobs, [&](size_t i) {
    const ListeningTestRow& row = file.rows[i];
    if (row.test_path.empty()) {
      throw runtime_error("listening test row (" + row.item_id + ", " +
                          row.condition + ") has no test_path");
    }
    QualityScore score;
    AudioBuffer test_buf =
        resample_buffer(read_wav(resolve_near(test.path, row.test_path)), rate);
    if (mode == ScoringMode::kFullReference) {
      if (row.reference_path.empty()) {
        throw runtime_error("listening test row (" + row.item_id + ", " +
                            row.condition +
                            ") has no reference_path (needed for "
                            "full-reference scoring)");
      }
      AudioBuffer ref_buf = resample_buffer(
          read_wav(resolve_near(test.path, row.reference_path)), rate);
      score = score_full_reference(test_buf, ref_buf, model,
                                   mapping.has_value() ? &*mapping : nullptr);
    } else {
      // Per-channel NMR distance, averaged across channels.
      double distance = 0.0;
      for (const auto& ch : test_buf.channels) {
        Clip c{ch, rate, row.item_id, 0.0};
        distance +=
            score_non_matching(c, nmr_refs, model, aggregation, nullptr)
                .distance;
      }
      distance /= std::max(1, test_buf.num_channels());
      score.mode = ScoringMode::kNonMatching;
      score.aggregation = aggregation;
      score.distance = distance;
      if (mapping.has_value()) score.mapped_score = mapping->apply(distance);
    }
    PredictionRecord rec;
    rec.item_id = row.item_id;
    rec.condition = row.condition;
    rec.distance = score.distance;
    rec.mapped_score = score.mapped_score;
    rec.mode = scoring_mode_name(score.mode);
    rec.aggregation = mode == ScoringMode::kNonMatching
                          ? nmr_aggregation_name(aggregation)
                          : "";
    predictions[i] = std::move(rec);
  });

  save_predictions(predictions, out_path);
  write_provenance(cfg, "score",
                   {{"test_file", test.path}, {"predictions", out_path}},
                   json{{"rows", predictions.size()},
                        {"mode", cfg.score.mode},
                        {"mapping", cfg.score.mapping_file.empty()
                                        ? "none"
                                        : cfg.score.mapping_file}});
  return predictions;
}

QualityScore cmd_score_pair(const RunConfig& cfg, const std::string& test_wav,
                            const std::string& reference_wav) {
  EncoderModel model = load_scoring_model(cfg);
  std::optional<DistanceMapping> mapping;
  if (!cfg.score.mapping_file.empty()) {
    mapping = load_mapping(cfg.score.mapping_file);
  }
  const int rate = model.expected_sample_rate();
  AudioBuffer test_buf = resample_buffer(read_wav(test_wav), rate);
  AudioBuffer ref_buf = resample_buffer(read_wav(reference_wav), rate);
  return score_full_reference(test_buf, ref_buf, model,
                              mapping.has_value() ? &*mapping : nullptr);
}

DistanceMapping cmd_fit_mapping(const RunConfig& cfg,
                                const std::string& predictions_path,
                                const EvalTestSpec& calibration,
                                const std::string& out_path) {
  std::vector<PredictionRecord> preds = load_predictions(predictions_path);
  ListeningTestFile test =
      load_listening_test(calibration.path, calibration.name, calibration.scale);

  std::map<std::pair<std::string, std::string>, double> by_key;
  for (const auto& p : preds) by_key[{p.item_id, p.condition}] = p.distance;
  std::vector<double> distances, subjective;
  std::vector<std::string> missing;
  for (const auto& row : test.rows) {
    auto it = by_key.find({row.item_id, row.condition});
    if (it == by_key.end()) {
      missing.push_back("(" + row.item_id + ", " + row.condition + ")");
      continue;
    }
    distances.push_back(it->second);
    subjective.push_back(row.subjective_score);
  }
  if (!missing.empty()) {
    throw runtime_error("fit_mapping: " + std::to_string(missing.size()) +
                        " calibration rows lack predictions, e.g. " +
                        missing.front());
  }

  DistanceMapping mapping;
  if (cfg.mapping.kind == "cubic") {
    mapping = fit_cubic(distances, subjective, test.scale_lo(),
                        test.scale_hi());
  } else {
    MlpFitConfig mcfg;
    mcfg.epochs = cfg.mapping.mlp_epochs;
    mcfg.lr = cfg.mapping.mlp_lr;
    mcfg.seed = cfg.mapping.mlp_seed;
    mapping = fit_mlp(distances, subjective, test.scale_lo(), test.scale_hi(),
                      mcfg);
  }
  Sha256 h;
  h.update(sha256_file_hex(predictions_path));
  h.update(sha256_file_hex(calibration.path));
  mapping.calibration_hash = h.hex();
  save_mapping(mapping, out_path);
  write_provenance(cfg, "fit_mapping",
                   {{"predictions", predictions_path},
                    {"calibration", calibration.path},
                    {"mapping", out_path}},
                   json{{"kind", cfg.mapping.kind},
                        {"residual_mse", mapping.residual_mse},
                        {"points", distances.size()}});
  return mapping;
}

CorrelationReport cmd_evaluate(const RunConfig& cfg,
                               const std::string& predictions_path,
                               const std::string& report_json_path,
                               const std::string& report_text_path,
                               const std::string& scatter_path) {
  if (cfg.evaluate.tests.empty()) {
    throw config_error("evaluate.tests is empty");
  }
  std::vector<PredictionRecord> preds = load_predictions(predictions_path);
  std::vector<ListeningTestFile> tests;
  for (const auto& spec : cfg.evaluate.tests) {
    tests.push_back(load_listening_test(spec.path, spec.name, spec.scale));
  }
  const EvalPooling pooling = cfg.evaluate.pooling == "per_condition"
                                  ? EvalPooling::kPerCondition
                                  : EvalPooling::kPerItem;

  CorrelationReport report = evaluate(preds, tests, pooling);
  report.provenance = json{
      {"config_hash", cfg.hash()},
      {"predictions_hash", sha256_file_hex(predictions_path)},
      {"mapping", cfg.score.mapping_file.empty() ? "none"
                                                 : cfg.score.mapping_file},
      {"scoring_mode", cfg.score.mode},
      {"pooling", cfg.evaluate.pooling},
      {"laqm_version", kLaqmVersion}};

  if (!report_json_path.empty()) {
    std::ofstream out(report_json_path, std::ios::trunc);
    if (!out) throw runtime_error("cannot write report: " + report_json_path);
    out << report_to_json(report).dump(2) << "\n";
  }
  if (!report_text_path.empty()) {
    std::ofstream out(report_text_path, std::ios::trunc);
    out << report_to_text(report);
  }
  if (!scatter_path.empty()) {
    std::vector<std::string> warnings;
    export_scatter(preds, tests, scatter_path, &warnings);
  }
  write_provenance(cfg, "evaluate",
                   {{"predictions", predictions_path},
                    {"report", report_json_path}},
                   json{{"tests", tests.size()}});
  return report;
}

double cmd_fad(const RunConfig& cfg, const std::string& list_a,
               const std::string& list_b) {
  EncoderModel model = load_scoring_model(cfg);
  const int rate = model.expected_sample_rate();
  auto embed_list = [&](const std::string& list_path) {
    std::vector<Embedding> out;
    for (const std::string& p : read_path_list(list_path)) {
      out.push_back(model.embed(load_mono_clip_at_rate(p, rate)));
    }
    return out;
  };
  return fad(embed_list(list_a), embed_list(list_b));
}

}  // namespace laqm
