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

#ifndef LAQM_SCORER_HPP_
#define LAQM_SCORER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "laqm/encoder.hpp"

namespace laqm {

enum class ScoringMode { kFullReference, kNonMatching };
enum class NmrAggregation { kMeanDistance, kCentroidDistance };

std::string scoring_mode_name(ScoringMode m);
ScoringMode scoring_mode_from_name(const std::string& name);
std::string nmr_aggregation_name(NmrAggregation a);
NmrAggregation nmr_aggregation_from_name(const std::string& name);

struct QualityScore {
  double distance = 0.0;  // Euclidean, embedding space
  std::optional<double> mapped_score;
  ScoringMode mode = ScoringMode::kFullReference;
  NmrAggregation aggregation = NmrAggregation::kMeanDistance;
};

// Maps embedding distance to the subjective-score scale. Fitted on negated
// distances (input_sign = -1) so the mapping increases with quality;
// a mapping constructed directly evaluates its input as-is.
struct DistanceMapping {
  enum class Kind { kCubic, kMlp };
  Kind kind = Kind::kCubic;
  int input_sign = 1;  // apply() evaluates at input_sign * distance
  double scale_lo = 1.0;
  double scale_hi = 5.0;
  double residual_mse = 0.0;
  std::string calibration_hash;

  // Cubic: coeffs[k] multiplies x^k.
  std::vector<double> coeffs;

  // MLP 1 -> 16 -> 16 -> 1 with ReLU, ReLU, Sigmoid (scaled to the target
  // bounds); inputs standardized by (x - x_mean) / x_std.
  Matrix w1, b1, w2, b2, w3, b3;
  double x_mean = 0.0, x_std = 1.0;

  double apply(double distance) const;  // evaluate + clamp to scale bounds
};

void save_mapping(const DistanceMapping& mapping, const std::string& path);
DistanceMapping load_mapping(const std::string& path);

// Euclidean distance to the matched clean reference. Multi-channel material
// is scored per channel and the distances averaged; test and reference must
// have the same channel count, rate, and duration (within one backbone
// frame hop).
QualityScore score_full_reference(const AudioBuffer& test,
                                  const AudioBuffer& reference,
                                  const EncoderModel& model,
                                  const DistanceMapping* mapping = nullptr);

QualityScore score_full_reference_clips(const Clip& test,
                                        const Clip& reference,
                                        const EncoderModel& model,
                                        const DistanceMapping* mapping =
                                            nullptr);

// Distance to a set of clean, non-matching references: mean of distances
// (default) or distance to the mean reference embedding.
QualityScore score_non_matching(const Clip& test,
                                const std::vector<Embedding>& references,
                                const EncoderModel& model,
                                NmrAggregation aggregation,
                                const DistanceMapping* mapping = nullptr);

// Least-squares cubic through (input_sign * distance, subjective) via normal
// equations on a column-scaled design matrix. Needs >= 5 points with
// non-constant distances.
DistanceMapping fit_cubic(const std::vector<double>& distances,
                          const std::vector<double>& subjective,
                          double scale_lo, double scale_hi);

struct MlpFitConfig {
  int epochs = 4000;
  double lr = 0.02;
  uint64_t seed = 1;
};

// Deterministic small-MLP fit (fixed seed, fixed epoch budget); needs >= 20
// points. Output bounded by the scaled sigmoid.
DistanceMapping fit_mlp(const std::vector<double>& distances,
                        const std::vector<double>& subjective, double scale_lo,
                        double scale_hi, const MlpFitConfig& cfg = {});

double apply_mapping(const DistanceMapping& mapping, double distance);

// Frechet distance between Gaussians fitted to the two embedding sets:
// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2}), square root via
// eigendecomposition of the symmetrized product, negative eigenvalues
// clipped. Sets smaller than dim+1 get +1e-6 diagonal shrinkage.
double fad(const std::vector<Embedding>& a, const std::vector<Embedding>& b);
double fad_matrices(const Matrix& a, const Matrix& b);  // rows = samples

}  // namespace laqm

#endif  // LAQM_SCORER_HPP_
