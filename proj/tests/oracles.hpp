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

// Test-only reference implementations, written as direct nested-loop
// transliterations of the definitions. They intentionally share no code
// with the library implementations they check.

#ifndef LAQM_TESTS_ORACLES_HPP_
#define LAQM_TESTS_ORACLES_HPP_

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

namespace laqm_oracle {

struct Item {
  double mos = 5.0;
  std::string codec = "none";      // none | aac | opus | mp3
  double bitrate = INFINITY;       // +inf for clean
};

inline double label_dist(double a, double b) {
  if (std::isinf(a) && std::isinf(b)) return 0.0;
  return std::abs(a - b);
}

// Per-sample loss for anchor i under label view `labels` restricted to
// `pool` (which contains i): plain exp/log, no stabilization.
inline double per_sample(size_t i, const std::vector<double>& labels,
                         const std::vector<size_t>& pool,
                         const Eigen::MatrixXd& dist, double tau, int sign) {
  if (pool.size() < 2) return 0.0;
  double total = 0.0;
  for (size_t j : pool) {
    if (j == i) continue;
    double denom = 0.0;
    for (size_t k : pool) {
      if (k == i) continue;
      if (label_dist(labels[i], labels[k]) >= label_dist(labels[i], labels[j])) {
        denom += std::exp(sign * dist(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(k)) /
                          tau);
      }
    }
    const double numer = std::exp(sign * dist(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j)) /
                                  tau);
    total += std::log(numer / denom);
  }
  return -total / static_cast<double>(pool.size() - 1);
}

inline Eigen::MatrixXd distances(const Eigen::MatrixXd& emb) {
  Eigen::MatrixXd d(emb.rows(), emb.rows());
  for (Eigen::Index a = 0; a < emb.rows(); ++a) {
    for (Eigen::Index b = 0; b < emb.rows(); ++b) {
      d(a, b) = (emb.row(a) - emb.row(b)).norm();
    }
  }
  return d;
}

// Batch loss: mean over items of the MOS-view term plus each coded item's
// own-codec bitrate-view term.
inline double batch(const std::vector<Item>& items,
                    const Eigen::MatrixXd& emb, double tau = 1.0,
                    int sign = -1, bool bitrate_term = true,
                    bool full_batch_pool = false) {
  const size_t n = items.size();
  const Eigen::MatrixXd dist = distances(emb);

  std::vector<double> mos(n);
  std::vector<size_t> everyone(n);
  for (size_t i = 0; i < n; ++i) {
    mos[i] = items[i].mos;
    everyone[i] = i;
  }
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    total += per_sample(i, mos, everyone, dist, tau, sign);
  }

  if (bitrate_term) {
    std::vector<double> bitrates(n);
    for (size_t i = 0; i < n; ++i) bitrates[i] = items[i].bitrate;
    for (size_t i = 0; i < n; ++i) {
      if (items[i].codec == "none") continue;
      std::vector<size_t> pool;
      for (size_t k = 0; k < n; ++k) {
        if (full_batch_pool || items[k].codec == "none" ||
            items[k].codec == items[i].codec) {
          pool.push_back(k);
        }
      }
      total += per_sample(i, bitrates, pool, dist, tau, sign);
    }
  }
  return total / static_cast<double>(n);
}

// Definitional Pearson via raw moments.
inline double pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  return cov / std::sqrt(vx * vy);
}

// O(n^2) average ranks: 1 + #(smaller) + #(equal others)/2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double smaller = 0.0, equal = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
      if (j == i) continue;
      if (x[j] < x[i]) smaller += 1.0;
      if (x[j] == x[i]) equal += 1.0;
    }
    r[i] = 1.0 + smaller + equal / 2.0;
  }
  return r;
}

inline double spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Magnitude spectrum peak of a signal via direct DFT over the first
// `window` samples; returns the peak frequency in Hz.
inline double dft_peak_hz(const std::vector<double>& x, int sample_rate,
                          size_t window = 8192) {
  const size_t n = std::min(window, x.size());
  double best_mag = -1.0;
  size_t best_bin = 0;
  for (size_t bin = 1; bin < n / 2; ++bin) {
    double re = 0.0, im = 0.0;
    for (size_t t = 0; t < n; ++t) {
      const double phase =
          -2.0 * M_PI * static_cast<double>(bin) * static_cast<double>(t) /
          static_cast<double>(n);
      // Hann window keeps leakage from swamping neighboring bins.
      const double w =
          0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(t) /
                                static_cast<double>(n)));
      re += w * x[t] * std::cos(phase);
      im += w * x[t] * std::sin(phase);
    }
    const double mag = re * re + im * im;
    if (mag > best_mag) {
      best_mag = mag;
      best_bin = bin;
    }
  }
  return static_cast<double>(best_bin) * sample_rate / static_cast<double>(n);
}

}  // namespace laqm_oracle

#endif  // LAQM_TESTS_ORACLES_HPP_
