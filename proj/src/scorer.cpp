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

#include "laqm/scorer.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "laqm/errors.hpp"
#include "laqm/rng.hpp"

using nlohmann::json;

namespace laqm {

std::string scoring_mode_name(ScoringMode m) {
  return m == ScoringMode::kFullReference ? "full_reference" : "non_matching";
}

ScoringMode scoring_mode_from_name(const std::string& name) {
  if (name == "full_reference") return ScoringMode::kFullReference;
  if (name == "non_matching") return ScoringMode::kNonMatching;
  throw config_error("unknown scoring mode: " + name);
}

std::string nmr_aggregation_name(NmrAggregation a) {
  return a == NmrAggregation::kMeanDistance ? "mean_distance"
                                            : "centroid_distance";
}

NmrAggregation nmr_aggregation_from_name(const std::string& name) {
  if (name == "mean_distance") return NmrAggregation::kMeanDistance;
  if (name == "centroid_distance") return NmrAggregation::kCentroidDistance;
  throw config_error("unknown NMR aggregation: " + name);
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double evaluate_cubic(const std::vector<double>& coeffs, double x) {
  double acc = 0.0;
  for (size_t k = coeffs.size(); k > 0; --k) acc = acc * x + coeffs[k - 1];
  return acc;
}

}  // namespace

double DistanceMapping::apply(double distance) const {
  const double x = input_sign * distance;
  double y = 0.0;
  if (kind == Kind::kCubic) {
    y = evaluate_cubic(coeffs, x);
  } else {
    const double xs = (x - x_mean) / x_std;
    Matrix h = Matrix::Constant(1, 1, xs);
    Matrix a1 = (w1 * h + b1).cwiseMax(0.0);
    Matrix a2 = (w2 * a1 + b2).cwiseMax(0.0);
    double z = (w3 * a2 + b3)(0, 0);
    y = scale_lo + (scale_hi - scale_lo) * sigmoid(z);
  }
  return std::clamp(y, scale_lo, scale_hi);
}

double apply_mapping(const DistanceMapping& mapping, double distance) {
  return mapping.apply(distance);
}

void save_mapping(const DistanceMapping& mapping, const std::string& path) {
  json j;
  j["kind"] = mapping.kind == DistanceMapping::Kind::kCubic ? "cubic" : "mlp";
  j["format_version"] = 1;
  j["input_sign"] = mapping.input_sign;
  j["scale"] = {{"lo", mapping.scale_lo}, {"hi", mapping.scale_hi}};
  j["residual_mse"] = mapping.residual_mse;
  j["calibration_hash"] = mapping.calibration_hash;
  if (mapping.kind == DistanceMapping::Kind::kCubic) {
    j["coeffs"] = mapping.coeffs;
  } else {
    auto mat = [](const Matrix& m) {
      std::vector<std::vector<double>> v(static_cast<size_t>(m.rows()));
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        v[static_cast<size_t>(r)].resize(static_cast<size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          v[static_cast<size_t>(r)][static_cast<size_t>(c)] = m(r, c);
        }
      }
      return v;
    };
    j["mlp"] = {{"w1", mat(mapping.w1)}, {"b1", mat(mapping.b1)},
                {"w2", mat(mapping.w2)}, {"b2", mat(mapping.b2)},
                {"w3", mat(mapping.w3)}, {"b3", mat(mapping.b3)},
                {"x_mean", mapping.x_mean}, {"x_std", mapping.x_std}};
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw runtime_error("cannot write mapping file: " + path);
  out << j.dump(2) << "\n";
}

DistanceMapping load_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw runtime_error("cannot open mapping file: " + path);
  json j;
  in >> j;
  DistanceMapping m;
  m.kind = j.at("kind").get<std::string>() == "cubic"
               ? DistanceMapping::Kind::kCubic
               : DistanceMapping::Kind::kMlp;
  m.input_sign = j.value("input_sign", 1);
  m.scale_lo = j.at("scale").at("lo").get<double>();
  m.scale_hi = j.at("scale").at("hi").get<double>();
  m.residual_mse = j.value("residual_mse", 0.0);
  m.calibration_hash = j.value("calibration_hash", "");
  if (m.kind == DistanceMapping::Kind::kCubic) {
    m.coeffs = j.at("coeffs").get<std::vector<double>>();
  } else {
    auto mat = [&j](const std::string& name) {
      auto rows =
          j.at("mlp").at(name).get<std::vector<std::vector<double>>>();
      Matrix m2(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
      for (size_t r = 0; r < rows.size(); ++r) {
        for (size_t c = 0; c < rows[r].size(); ++c) {
          m2(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              rows[r][c];
        }
      }
      return m2;
    };
    m.w1 = mat("w1");
    m.b1 = mat("b1");
    m.w2 = mat("w2");
    m.b2 = mat("b2");
    m.w3 = mat("w3");
    m.b3 = mat("b3");
    m.x_mean = j.at("mlp").at("x_mean").get<double>();
    m.x_std = j.at("mlp").at("x_std").get<double>();
  }
  return m;
}

QualityScore score_full_reference_clips(const Clip& test, const Clip& reference,
                                        const EncoderModel& model,
                                        const DistanceMapping* mapping) {
  if (test.sample_rate != reference.sample_rate) {
    throw runtime_error("score: test/reference sample rates differ");
  }
  const int64_t hop = model.backbone().config().conv_stride;
  const int64_t diff =
      std::llabs(static_cast<int64_t>(test.samples.size()) -
                 static_cast<int64_t>(reference.samples.size()));
  if (diff > hop) {
    throw runtime_error(
        "score: test/reference duration mismatch beyond one frame (" +
        std::to_string(diff) + " samples)");
  }
  Clip t = test;
  Clip r = reference;
  const size_t n = std::min(t.samples.size(), r.samples.size());
  t.samples.resize(n);
  r.samples.resize(n);

  Embedding et = model.embed(t);
  Embedding er = model.embed(r);
  QualityScore score;
  score.mode = ScoringMode::kFullReference;
  score.distance = (et.vector - er.vector).norm();
  if (mapping != nullptr) score.mapped_score = mapping->apply(score.distance);
  return score;
}

QualityScore score_full_reference(const AudioBuffer& test,
                                  const AudioBuffer& reference,
                                  const EncoderModel& model,
                                  const DistanceMapping* mapping) {
  if (test.num_channels() != reference.num_channels()) {
    throw runtime_error("score: test/reference channel counts differ");
  }
  if (test.num_channels() == 0) throw runtime_error("score: empty audio");

  double distance = 0.0;
  for (int c = 0; c < test.num_channels(); ++c) {
    Clip t{test.channels[static_cast<size_t>(c)], test.sample_rate, "", 0.0};
    Clip r{reference.channels[static_cast<size_t>(c)], reference.sample_rate,
           "", 0.0};
    distance +=
        score_full_reference_clips(t, r, model, nullptr).distance;
  }
  distance /= test.num_channels();

  QualityScore score;
  score.mode = ScoringMode::kFullReference;
  score.distance = distance;
  if (mapping != nullptr) score.mapped_score = mapping->apply(distance);
  return score;
}

QualityScore score_non_matching(const Clip& test,
                                const std::vector<Embedding>& references,
                                const EncoderModel& model,
                                NmrAggregation aggregation,
                                const DistanceMapping* mapping) {
  if (references.empty()) {
    throw runtime_error("score_non_matching: empty reference set");
  }
  Embedding et = model.embed(test);
  double distance = 0.0;
  if (aggregation == NmrAggregation::kMeanDistance) {
    for (const Embedding& r : references) {
      distance += (et.vector - r.vector).norm();
    }
    distance /= static_cast<double>(references.size());
  } else {
    Vector centroid = Vector::Zero(et.vector.size());
    for (const Embedding& r : references) centroid += r.vector;
    centroid /= static_cast<double>(references.size());
    distance = (et.vector - centroid).norm();
  }
  QualityScore score;
  score.mode = ScoringMode::kNonMatching;
  score.aggregation = aggregation;
  score.distance = distance;
  if (mapping != nullptr) score.mapped_score = mapping->apply(distance);
  return score;
}

DistanceMapping fit_cubic(const std::vector<double>& distances,
                          const std::vector<double>& subjective,
                          double scale_lo, double scale_hi) {
  if (distances.size() != subjective.size()) {
    throw runtime_error("fit_cubic: size mismatch");
  }
  if (distances.size() < 5) {
    throw runtime_error("fit_cubic: need at least 5 points");
  }
  const double dmin = *std::min_element(distances.begin(), distances.end());
  const double dmax = *std::max_element(distances.begin(), distances.end());
  if (dmax == dmin) {
    throw runtime_error("fit_cubic: distances are all equal");
  }

  // Fit on negated distances so the mapping increases with quality.
  const Eigen::Index n = static_cast<Eigen::Index>(distances.size());
  const double xmax = std::max(std::abs(dmin), std::abs(dmax));
  Matrix design(n, 4);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = -distances[static_cast<size_t>(i)] / xmax;
    design(i, 0) = 1.0;
    design(i, 1) = x;
    design(i, 2) = x * x;
    design(i, 3) = x * x * x;
    y(i) = subjective[static_cast<size_t>(i)];
  }

  Matrix gram = design.transpose() * design;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double cond_floor = eig.eigenvalues().maxCoeff() * 1e-12;
  if (eig.eigenvalues().minCoeff() <= cond_floor) {
    throw runtime_error(
        "fit_cubic: rank-deficient design matrix; the distance spread cannot "
        "support a cubic, reduce the degree");
  }
  Vector scaled_coeffs = gram.ldlt().solve(design.transpose() * y);

  DistanceMapping m;
  m.kind = DistanceMapping::Kind::kCubic;
  m.input_sign = -1;
  m.scale_lo = scale_lo;
  m.scale_hi = scale_hi;
  m.coeffs.resize(4);
  for (int k = 0; k < 4; ++k) {
    m.coeffs[static_cast<size_t>(k)] =
        scaled_coeffs(k) / std::pow(xmax, k);
  }
  Vector residual = design * scaled_coeffs - y;
  m.residual_mse = residual.squaredNorm() / static_cast<double>(n);
  return m;
}

DistanceMapping fit_mlp(const std::vector<double>& distances,
                        const std::vector<double>& subjective, double scale_lo,
                        double scale_hi, const MlpFitConfig& cfg) {
  if (distances.size() != subjective.size()) {
    throw runtime_error("fit_mlp: size mismatch");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(distances.size());
  if (n < 20) throw runtime_error("fit_mlp: need at least 20 points");

  // Standardized, negated inputs.
  Vector x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = -distances[static_cast<size_t>(i)];
    y(i) = subjective[static_cast<size_t>(i)];
  }
  const double x_mean = x.mean();
  const double x_std =
      std::max(1e-12, std::sqrt((x.array() - x_mean).square().mean()));
  Vector xs = (x.array() - x_mean) / x_std;

  const int h = 16;
  Rng rng = Rng::substream(cfg.seed, "mlp-init");
  auto gauss = [&rng](Eigen::Index r, Eigen::Index c, double std) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = std * rng.normal();
    }
    return m;
  };
  Matrix w1 = gauss(h, 1, 1.0), b1 = Matrix::Zero(h, 1);
  Matrix w2 = gauss(h, h, std::sqrt(2.0 / h)), b2 = Matrix::Zero(h, 1);
  Matrix w3 = gauss(1, h, std::sqrt(2.0 / h)), b3 = Matrix::Zero(1, 1);

  const double span = scale_hi - scale_lo;
  // Adam, full batch.
  struct Mom {
    Matrix m, v;
  };
  auto mom = [](const Matrix& p) {
    return Mom{Matrix::Zero(p.rows(), p.cols()),
               Matrix::Zero(p.rows(), p.cols())};
  };
  Mom mw1 = mom(w1), mb1 = mom(b1), mw2 = mom(w2), mb2 = mom(b2),
      mw3 = mom(w3), mb3 = mom(b3);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double final_mse = 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Forward: column per sample.
    Matrix a0 = xs.transpose();                   // 1 x n
    Matrix z1 = (w1 * a0).colwise() + b1.col(0);  // h x n
    Matrix a1 = z1.cwiseMax(0.0);
    Matrix z2 = (w2 * a1).colwise() + b2.col(0);
    Matrix a2 = z2.cwiseMax(0.0);
    Matrix z3 = (w3 * a2).colwise() + b3.col(0);  // 1 x n
    Matrix s = z3.unaryExpr([](double v) { return sigmoid(v); });
    Matrix pred = (s.array() * span + scale_lo).matrix();

    Matrix err = pred - y.transpose();  // 1 x n
    final_mse = err.array().square().mean();
    if (!std::isfinite(final_mse)) {
      throw runtime_error("fit_mlp: training diverged (non-finite loss)");
    }

    Matrix d_pred = 2.0 * err / static_cast<double>(n);
    Matrix d_z3 =
        d_pred.array() * span * s.array() * (1.0 - s.array());
    Matrix g_w3 = d_z3 * a2.transpose();
    Matrix g_b3 = d_z3.rowwise().sum();
    Matrix d_a2 = w3.transpose() * d_z3;
    Matrix d_z2 = (z2.array() > 0.0).select(d_a2, 0.0);
    Matrix g_w2 = d_z2 * a1.transpose();
    Matrix g_b2 = d_z2.rowwise().sum();
    Matrix d_a1 = w2.transpose() * d_z2;
    Matrix d_z1 = (z1.array() > 0.0).select(d_a1, 0.0);
    Matrix g_w1 = d_z1 * a0.transpose();
    Matrix g_b1 = d_z1.rowwise().sum();

    const double bc1 = 1.0 - std::pow(beta1, epoch);
    const double bc2 = 1.0 - std::pow(beta2, epoch);
    auto update = [&](Matrix& p, Mom& mo, const Matrix& g) {
      mo.m = beta1 * mo.m + (1.0 - beta1) * g;
      mo.v = beta2 * mo.v + (1.0 - beta2) * g.cwiseProduct(g);
      p -= cfg.lr * ((mo.m / bc1).array() /
                     ((mo.v / bc2).array().sqrt() + eps))
                        .matrix();
    };
    update(w1, mw1, g_w1);
    update(b1, mb1, g_b1);
    update(w2, mw2, g_w2);
    update(b2, mb2, g_b2);
    update(w3, mw3, g_w3);
    update(b3, mb3, g_b3);
  }

  DistanceMapping m;
  m.kind = DistanceMapping::Kind::kMlp;
  m.input_sign = -1;
  m.scale_lo = scale_lo;
  m.scale_hi = scale_hi;
  m.w1 = w1;
  m.b1 = b1;
  m.w2 = w2;
  m.b2 = b2;
  m.w3 = w3;
  m.b3 = b3;
  m.x_mean = x_mean;
  m.x_std = x_std;
  m.residual_mse = final_mse;
  return m;
}

namespace {

void gaussian_stats(const Matrix& samples, Vector* mean, Matrix* cov) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  *mean = samples.colwise().mean().transpose();
  Matrix centered = samples.rowwise() - mean->transpose();
  if (n > 1) {
    *cov = centered.transpose() * centered / static_cast<double>(n - 1);
  } else {
    *cov = Matrix::Zero(d, d);
  }
  if (n < d + 1) {
    // Shrinkage for rank-deficient sample covariances.
    *cov += 1e-6 * Matrix::Identity(d, d);
  }
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  Vector vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

double fad_matrices(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw runtime_error("fad: embedding dimensions differ");
  }
  if (a.rows() == 0 || b.rows() == 0) {
    throw runtime_error("fad: empty embedding set");
  }
  Vector mu_a, mu_b;
  Matrix cov_a, cov_b;
  gaussian_stats(a, &mu_a, &cov_a);
  gaussian_stats(b, &mu_b, &cov_b);

  const Matrix sqrt_a = psd_sqrt(cov_a);
  const Matrix inner = sqrt_a * cov_b * sqrt_a;  // symmetrized product
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (inner + inner.transpose()));
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() +
                       cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(0.0, value);
}

double fad(const std::vector<Embedding>& a, const std::vector<Embedding>& b) {
  if (a.empty() || b.empty()) throw runtime_error("fad: empty embedding set");
  const Eigen::Index d = a[0].vector.size();
  Matrix ma(static_cast<Eigen::Index>(a.size()), d);
  Matrix mb(static_cast<Eigen::Index>(b.size()), d);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].vector.size() != d) throw runtime_error("fad: ragged set");
    ma.row(static_cast<Eigen::Index>(i)) = a[i].vector.transpose();
  }
  for (size_t i = 0; i < b.size(); ++i) {
    if (b[i].vector.size() != d) throw runtime_error("fad: dimension mismatch");
    mb.row(static_cast<Eigen::Index>(i)) = b[i].vector.transpose();
  }
  return fad_matrices(ma, mb);
}

}  // namespace laqm
