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

#ifndef LAQM_PIPELINE_HPP_
#define LAQM_PIPELINE_HPP_

#include <optional>
#include <string>
#include <vector>

#include "laqm/config.hpp"
#include "laqm/evalreport.hpp"
#include "laqm/scorer.hpp"

namespace laqm {

// Segment + encode ladder + resample + split; writes the audio tree and the
// manifest under cfg.run_dir.
void cmd_prepare(const RunConfig& cfg);

// Fills visqol_mos for every coded record (clean records get 5.0 without
// invoking the tool). Per-record failures are collected; any failure throws
// after the pass with the full list.
void cmd_label(const RunConfig& cfg);

// Builds the encoder per config and runs the optimization loop.
TrainResult cmd_train(const RunConfig& cfg);

// Loads the checkpoint named in cfg.score (or the run's best checkpoint).
EncoderModel load_scoring_model(const RunConfig& cfg);

// Scores every row of a listening-test file (FR or NMR per cfg.score) and
// writes prediction records to out_path.
std::vector<PredictionRecord> cmd_score_testfile(const RunConfig& cfg,
                                                 const EvalTestSpec& test,
                                                 const std::string& out_path);

// Ad-hoc pair scoring.
QualityScore cmd_score_pair(const RunConfig& cfg,
                            const std::string& test_wav,
                            const std::string& reference_wav);

// Fits a distance->subjective mapping on a calibration listening test whose
// rows were already scored into predictions_path.
DistanceMapping cmd_fit_mapping(const RunConfig& cfg,
                                const std::string& predictions_path,
                                const EvalTestSpec& calibration,
                                const std::string& out_path);

// Correlation report + scatter export for cfg.evaluate.tests.
CorrelationReport cmd_evaluate(const RunConfig& cfg,
                               const std::string& predictions_path,
                               const std::string& report_json_path,
                               const std::string& report_text_path,
                               const std::string& scatter_path);

// FAD between the embeddings of two wav path lists (one path per line).
double cmd_fad(const RunConfig& cfg, const std::string& list_a,
               const std::string& list_b);

// Shared helpers.
std::vector<std::string> read_path_list(const std::string& path);
Clip load_mono_clip_at_rate(const std::string& path, int rate);

}  // namespace laqm

#endif  // LAQM_PIPELINE_HPP_
