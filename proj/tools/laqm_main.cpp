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

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "laqm/errors.hpp"
#include "laqm/pipeline.hpp"
#include "laqm/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
};

laqm::RunConfig load_config(const GlobalArgs& args) {
  std::vector<std::string> overrides = args.overrides;
  if (args.seed.has_value()) {
    overrides.push_back("seed=" + std::to_string(*args.seed));
  }
  if (args.jobs.has_value()) {
    overrides.push_back("jobs=" + std::to_string(*args.jobs));
  }
  return laqm::load_run_config(args.config_path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"laqm - learned audio quality metric toolkit"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "run configuration file")
      ->required();
  app.add_option("--set", args.overrides,
                 "config override as key.path=value (repeatable)");
  uint64_t seed_arg = 0;
  auto* seed_opt = app.add_option("--seed", seed_arg, "override the run seed");
  int jobs_arg = 1;
  auto* jobs_opt =
      app.add_option("--jobs", jobs_arg, "parallel clip processing");

  auto* prepare = app.add_subcommand(
      "prepare", "segment sources, encode the bitrate ladder, resample, split");
  auto* label =
      app.add_subcommand("label", "compute surrogate MOS labels for a manifest");
  auto* train = app.add_subcommand("train", "train the embedding model");

  auto* score = app.add_subcommand("score", "score signals with a checkpoint");
  std::string score_test_file, score_test_name = "test",
              score_scale = "mos", score_out;
  std::string score_pair_test, score_pair_ref;
  score->add_option("--test-file", score_test_file,
                    "listening-test csv whose rows are scored");
  score->add_option("--test-name", score_test_name, "name for the test file");
  score->add_option("--scale", score_scale, "declared scale: mos | mushra");
  score->add_option("--out", score_out, "predictions output path");
  score->add_option("--test", score_pair_test, "ad-hoc test wav");
  score->add_option("--reference", score_pair_ref, "ad-hoc reference wav");

  auto* fit = app.add_subcommand("fit-mapping",
                                 "fit a distance-to-score mapping");
  std::string fit_predictions, fit_calibration, fit_name = "calibration",
              fit_scale = "mos", fit_out;
  fit->add_option("--predictions", fit_predictions, "scored calibration items")
      ->required();
  fit->add_option("--calibration", fit_calibration,
                  "calibration listening-test csv")
      ->required();
  fit->add_option("--calibration-name", fit_name, "calibration test name");
  fit->add_option("--scale", fit_scale, "declared scale: mos | mushra");
  fit->add_option("--out", fit_out, "mapping output path");

  auto* evaluate = app.add_subcommand(
      "evaluate", "correlation report against listening tests");
  std::string eval_predictions, eval_report_json, eval_report_text,
      eval_scatter;
  evaluate->add_option("--predictions", eval_predictions, "predictions csv");
  evaluate->add_option("--report-json", eval_report_json, "report json path");
  evaluate->add_option("--report-text", eval_report_text, "report text path");
  evaluate->add_option("--scatter", eval_scatter, "scatter export path");

  auto* fad_cmd = app.add_subcommand(
      "fad", "distributional distance between two embedding sets");
  std::string fad_a, fad_b;
  fad_cmd->add_option("--set-a", fad_a, "wav path list")->required();
  fad_cmd->add_option("--set-b", fad_b, "wav path list")->required();

  auto* calibrate = app.add_subcommand(
      "calibrate", "measure a codec's round-trip delay for the delay config");
  std::string cal_codec = "aac";
  int cal_bitrate = 64;
  calibrate->add_option("--codec", cal_codec, "codec name");
  calibrate->add_option("--bitrate", cal_bitrate, "bitrate in kbps");

  CLI11_PARSE(app, argc, argv);

  try {
    if (seed_opt->count() > 0) args.seed = seed_arg;
    if (jobs_opt->count() > 0) args.jobs = jobs_arg;
    laqm::RunConfig cfg = load_config(args);

    if (prepare->parsed()) {
      laqm::cmd_prepare(cfg);
      std::cout << "manifest: " << cfg.manifest_path() << "\n";
    } else if (label->parsed()) {
      laqm::cmd_label(cfg);
      std::cout << "labels written to " << cfg.manifest_path() << "\n";
    } else if (train->parsed()) {
      laqm::TrainResult result = laqm::cmd_train(cfg);
      std::cout << "epochs " << result.epochs_run << ", best val loss "
                << result.best_val_loss << ", final val loss "
                << result.final_val_loss << "\n";
    } else if (score->parsed()) {
      if (!score_pair_test.empty() || !score_pair_ref.empty()) {
        if (score_pair_test.empty() || score_pair_ref.empty()) {
          throw laqm::config_error("--test and --reference go together");
        }
        laqm::QualityScore s =
            laqm::cmd_score_pair(cfg, score_pair_test, score_pair_ref);
        std::cout << "distance " << s.distance;
        if (s.mapped_score.has_value()) {
          std::cout << ", mapped " << *s.mapped_score;
        }
        std::cout << "\n";
      } else if (!score_test_file.empty()) {
        const std::string out =
            score_out.empty()
                ? (fs::path(cfg.run_dir) / "predictions.csv").string()
                : score_out;
        laqm::EvalTestSpec spec{score_test_name, score_test_file, score_scale};
        auto predictions = laqm::cmd_score_testfile(cfg, spec, out);
        std::cout << predictions.size() << " predictions -> " << out << "\n";
      } else {
        throw laqm::config_error(
            "score needs --test-file or --test/--reference");
      }
    } else if (fit->parsed()) {
      const std::string out =
          fit_out.empty() ? (fs::path(cfg.run_dir) / "mapping.json").string()
                          : fit_out;
      laqm::EvalTestSpec spec{fit_name, fit_calibration, fit_scale};
      laqm::DistanceMapping m =
          laqm::cmd_fit_mapping(cfg, fit_predictions, spec, out);
      std::cout << "mapping (" << cfg.mapping.kind << ") residual MSE "
                << m.residual_mse << " -> " << out << "\n";
    } else if (evaluate->parsed()) {
      const fs::path run_dir(cfg.run_dir);
      const std::string pred =
          eval_predictions.empty() ? (run_dir / "predictions.csv").string()
                                   : eval_predictions;
      const std::string rj = eval_report_json.empty()
                                 ? (run_dir / "report.json").string()
                                 : eval_report_json;
      const std::string rt = eval_report_text.empty()
                                 ? (run_dir / "report.txt").string()
                                 : eval_report_text;
      const std::string sc = eval_scatter.empty()
                                 ? (run_dir / "scatter.csv").string()
                                 : eval_scatter;
      laqm::CorrelationReport report =
          laqm::cmd_evaluate(cfg, pred, rj, rt, sc);
      std::cout << laqm::report_to_text(report);
    } else if (fad_cmd->parsed()) {
      std::cout << "fad " << laqm::cmd_fad(cfg, fad_a, fad_b) << "\n";
    } else if (calibrate->parsed()) {
      if (cfg.corpus.transcoder_kind != "command") {
        throw laqm::config_error(
            "calibrate works with corpus.transcoder.kind=command");
      }
      laqm::CommandTranscoderConfig tcfg;
      tcfg.command = cfg.corpus.transcoder_command;
      tcfg.delay = cfg.corpus.delay;
      tcfg.work_dir = (fs::path(cfg.run_dir) / "tmp").string();
      laqm::CommandTranscoder transcoder(tcfg);
      const int64_t delay = laqm::calibrate_codec_delay(
          transcoder, laqm::codec_from_name(cal_codec), cal_bitrate,
          cfg.corpus.toy.sample_rate);
      std::cout << "measured delay for " << cal_codec << " @ " << cal_bitrate
                << " kbps: " << delay << " samples\n"
                << "set corpus.transcoder.delay." << cal_codec
                << ".base_samples accordingly\n";
    }
  } catch (const laqm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
