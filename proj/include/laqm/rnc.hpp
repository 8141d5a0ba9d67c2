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

#ifndef LAQM_RNC_HPP_
#define LAQM_RNC_HPP_

#include <Eigen/Core>
#include <string>
#include <vector>

#include "laqm/surrogate.hpp"

namespace laqm {

// Which items enter the candidate pool of a codec label view.
enum class CodecPoolRule {
  // Clean items plus items coded with the view's codec; bitrate ranks
  // quality only within one codec.
  kCleanAndSameCodec,
  // Entire batch (the literal set-union reading, which is vacuous); kept as
  // a config switch, off by default.
  kFullBatch,
};

struct RncConfig {
  double tau = 1.0;
  // -1 scores similarity as exp(-d/tau) (default); +1 is the literal printed
  // form, available for ablation. With +1 the loss rewards pushing all pairs
  // apart and fails the monotone-alignment sanity property.
  int sign = -1;
  bool bitrate_term = true;
  CodecPoolRule codec_pool = CodecPoolRule::kCleanAndSameCodec;
};

struct RncStats {
  int64_t degenerate_anchors = 0;  // anchors whose pool had < 2 items
};

// One label view p: name, participating batch indices, and the per-item
// labels compared under that view.
struct LabelView {
  std::string name;
  std::vector<size_t> pool;          // indices into the batch, ascending
  std::vector<ExtendedReal> labels;  // size = batch size

  bool in_pool(size_t idx) const;
};

LabelView visqol_view(const std::vector<SurrogateLabel>& labels);
LabelView codec_view(const std::vector<SurrogateLabel>& labels, Codec codec,
                     CodecPoolRule rule);

// S^p_{i,j}: pool members k != i whose label distance from the anchor is at
// least j's. j itself is always a member. For codec views both i and j must
// lie in the view's pool.
std::vector<size_t> candidate_set(size_t i, size_t j, const LabelView& view);

// N x N Euclidean distance matrix of row embeddings.
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& embeddings);

// Per-sample loss for anchor i under one view, with log-sum-exp
// stabilization. A pool of fewer than 2 items contributes 0 and bumps the
// warning counter.
double rnc_per_sample(size_t i, const LabelView& view,
                      const Eigen::MatrixXd& distances, double tau, int sign,
                      RncStats* stats = nullptr,
                      Eigen::MatrixXd* d_distances = nullptr);

// Batch loss: mean over items of the MOS-view loss plus, for each coded
// item, the loss under its own codec's bitrate view (unless disabled).
// embeddings: N x E, one row per item.
double rnc_batch(const std::vector<SurrogateLabel>& labels,
                 const Eigen::MatrixXd& embeddings, const RncConfig& cfg,
                 RncStats* stats = nullptr);

// Same, also returning d(loss)/d(embeddings) (N x E).
double rnc_batch_with_grad(const std::vector<SurrogateLabel>& labels,
                           const Eigen::MatrixXd& embeddings,
                           const RncConfig& cfg, Eigen::MatrixXd* grad,
                           RncStats* stats = nullptr);

}  // namespace laqm

#endif  // LAQM_RNC_HPP_
