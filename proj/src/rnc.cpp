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

#include "laqm/rnc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "laqm/errors.hpp"

namespace laqm {

bool LabelView::in_pool(size_t idx) const {
  return std::binary_search(pool.begin(), pool.end(), idx);
}

LabelView visqol_view(const std::vector<SurrogateLabel>& labels) {
  LabelView v;
  v.name = "ViSQOL";
  v.pool.resize(labels.size());
  v.labels.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    v.pool[i] = i;
    v.labels[i] = ExtendedReal{labels[i].visqol_mos};
  }
  return v;
}

LabelView codec_view(const std::vector<SurrogateLabel>& labels, Codec codec,
                     CodecPoolRule rule) {
  if (codec == Codec::kNone) {
    throw runtime_error("codec_view: 'none' is not a label view");
  }
  LabelView v;
  v.name = codec_name(codec);
  v.labels.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    v.labels[i] = labels[i].bitrate;
    bool member = rule == CodecPoolRule::kFullBatch ||
                  labels[i].is_clean() || labels[i].codec == codec;
    if (member) v.pool.push_back(i);
  }
  return v;
}

std::vector<size_t> candidate_set(size_t i, size_t j, const LabelView& view) {
  if (i == j) throw runtime_error("candidate_set: i == j");
  if (!view.in_pool(i) || !view.in_pool(j)) {
    throw runtime_error("candidate_set: anchor or probe outside the '" +
                        view.name + "' view pool");
  }
  const ExtendedReal dij = label_distance(view.labels[i], view.labels[j]);
  std::vector<size_t> s;
  for (size_t k : view.pool) {
    if (k == i) continue;
    ExtendedReal dik = label_distance(view.labels[i], view.labels[k]);
    if (!(dik < dij)) s.push_back(k);  // dik >= dij under the total order
  }
  return s;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& embeddings) {
  const Eigen::Index n = embeddings.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    d(a, a) = 0.0;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      double dist = (embeddings.row(a) - embeddings.row(b)).norm();
      d(a, b) = dist;
      d(b, a) = dist;
    }
  }
  return d;
}

double rnc_per_sample(size_t i, const LabelView& view,
                      const Eigen::MatrixXd& distances, double tau, int sign,
                      RncStats* stats, Eigen::MatrixXd* d_distances) {
  if (tau <= 0.0) throw config_error("rnc: tau must be positive");
  if (sign != 1 && sign != -1) throw config_error("rnc: sign must be +-1");
  if (!view.in_pool(i)) {
    throw runtime_error("rnc_per_sample: anchor outside the view pool");
  }
  if (view.pool.size() < 2) {
    if (stats != nullptr) ++stats->degenerate_anchors;
    return 0.0;
  }

  const double scale = static_cast<double>(sign) / tau;
  const double inv_terms = 1.0 / static_cast<double>(view.pool.size() - 1);

  double loss = 0.0;
  std::vector<size_t> cands;
  std::vector<double> logits;
  for (size_t j : view.pool) {
    if (j == i) continue;
    cands = candidate_set(i, j, view);
    logits.clear();
    double max_logit = -std::numeric_limits<double>::infinity();
    for (size_t k : cands) {
      double logit = scale * distances(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(k));
      logits.push_back(logit);
      max_logit = std::max(max_logit, logit);
    }
    double denom = 0.0;
    for (double logit : logits) denom += std::exp(logit - max_logit);
    const double log_denom = max_logit + std::log(denom);
    const double num_logit = scale * distances(static_cast<Eigen::Index>(i),
                                               static_cast<Eigen::Index>(j));
    // log softmax term; j is always in the candidate set so term <= 0.
    loss -= inv_terms * (num_logit - log_denom);

    if (d_distances != nullptr) {
      (*d_distances)(static_cast<Eigen::Index>(i),
                     static_cast<Eigen::Index>(j)) -= inv_terms * scale;
      for (size_t c = 0; c < cands.size(); ++c) {
        double w = std::exp(logits[c] - max_logit) / denom;
        (*d_distances)(static_cast<Eigen::Index>(i),
                       static_cast<Eigen::Index>(cands[c])) +=
            inv_terms * scale * w;
      }
    }
  }
  return loss;
}

namespace {

double rnc_batch_impl(const std::vector<SurrogateLabel>& labels,
                      const Eigen::MatrixXd& embeddings, const RncConfig& cfg,
                      Eigen::MatrixXd* grad, RncStats* stats) {
  const size_t n = labels.size();
  if (n < 2) throw runtime_error("rnc_batch: batch size must be >= 2");
  if (static_cast<size_t>(embeddings.rows()) != n) {
    throw runtime_error("rnc_batch: embeddings/labels size mismatch");
  }

  const Eigen::MatrixXd distances = pairwise_distances(embeddings);
  Eigen::MatrixXd d_dist;
  Eigen::MatrixXd* d_dist_ptr = nullptr;
  if (grad != nullptr) {
    d_dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                   static_cast<Eigen::Index>(n));
    d_dist_ptr = &d_dist;
  }

  double total = 0.0;
  const LabelView mos = visqol_view(labels);
  for (size_t i = 0; i < n; ++i) {
    total += rnc_per_sample(i, mos, distances, cfg.tau, cfg.sign, stats,
                            d_dist_ptr);
  }

  if (cfg.bitrate_term) {
    for (Codec c : {Codec::kAac, Codec::kOpus, Codec::kMp3}) {
      bool any = false;
      for (const auto& l : labels) {
        if (l.codec == c) {
          any = true;
          break;
        }
      }
      if (!any) continue;
      const LabelView view = codec_view(labels, c, cfg.codec_pool);
      for (size_t i = 0; i < n; ++i) {
        // Each coded item contributes under its own codec's view only.
        if (labels[i].codec != c) continue;
        total += rnc_per_sample(i, view, distances, cfg.tau, cfg.sign, stats,
                                d_dist_ptr);
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  if (grad != nullptr) {
    grad->setZero(embeddings.rows(), embeddings.cols());
    for (size_t a = 0; a < n; ++a) {
      for (size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        const double g = d_dist(static_cast<Eigen::Index>(a),
                                static_cast<Eigen::Index>(b));
        if (g == 0.0) continue;
        const double dist = distances(static_cast<Eigen::Index>(a),
                                      static_cast<Eigen::Index>(b));
        if (dist <= 0.0) continue;  // coincident embeddings: subgradient 0
        const Eigen::RowVectorXd diff =
            (embeddings.row(static_cast<Eigen::Index>(a)) -
             embeddings.row(static_cast<Eigen::Index>(b))) /
            dist;
        grad->row(static_cast<Eigen::Index>(a)) += inv_n * g * diff;
        grad->row(static_cast<Eigen::Index>(b)) -= inv_n * g * diff;
      }
    }
  }
  return inv_n * total;
}

}  // namespace

double rnc_batch(const std::vector<SurrogateLabel>& labels,
                 const Eigen::MatrixXd& embeddings, const RncConfig& cfg,
                 RncStats* stats) {
  return rnc_batch_impl(labels, embeddings, cfg, nullptr, stats);
}

double rnc_batch_with_grad(const std::vector<SurrogateLabel>& labels,
                           const Eigen::MatrixXd& embeddings,
                           const RncConfig& cfg, Eigen::MatrixXd* grad,
                           RncStats* stats) {
  if (grad == nullptr) throw runtime_error("rnc_batch_with_grad: null grad");
  return rnc_batch_impl(labels, embeddings, cfg, grad, stats);
}

}  // namespace laqm
