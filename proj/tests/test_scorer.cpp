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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "laqm/evalreport.hpp"
#include "laqm/rng.hpp"
#include "laqm/scorer.hpp"

using namespace laqm;
namespace fs = std::filesystem;

namespace {

BackboneConfig tiny_config() {
  BackboneConfig cfg = toy_backbone_config(0xC0DE);
  cfg.width = 16;
  cfg.num_heads = 2;
  cfg.ffn_dim = 24;
  cfg.conv_kernel = 64;
  cfg.conv_stride = 32;
  return cfg;
}

Clip tone(double hz, double seconds, int rate, double amp, uint64_t seed) {
  Rng rng(seed);
  Clip c;
  c.sample_rate = rate;
  const size_t n = static_cast<size_t>(std::llround(seconds * rate));
  c.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    c.samples[i] =
        amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / rate) +
        0.01 * rng.normal();
  }
  return c;
}

Embedding make_embedding(std::initializer_list<double> values) {
  Embedding e;
  e.vector = Vector(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) e.vector(i++) = v;
  e.norm = e.vector.norm();
  return e;
}

}  // namespace

TEST_CASE("full-reference distance: identity is zero, symmetric otherwise") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 1);
  Clip a = tone(440, 0.5, 8000, 0.4, 1);
  Clip b = tone(660, 0.5, 8000, 0.4, 2);

  CHECK(score_full_reference_clips(a, a, model).distance == 0.0);
  const double ab = score_full_reference_clips(a, b, model).distance;
  const double ba = score_full_reference_clips(b, a, model).distance;
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  CHECK(ab > 0.0);
}

TEST_CASE("full-reference: stereo is scored per channel and averaged") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 1);
  Clip l_test = tone(440, 0.5, 8000, 0.4, 3);
  Clip r_test = tone(550, 0.5, 8000, 0.4, 4);
  Clip l_ref = tone(445, 0.5, 8000, 0.4, 5);
  Clip r_ref = tone(555, 0.5, 8000, 0.4, 6);

  AudioBuffer test{8000, {l_test.samples, r_test.samples}};
  AudioBuffer ref{8000, {l_ref.samples, r_ref.samples}};
  const double combined = score_full_reference(test, ref, model).distance;
  const double left = score_full_reference_clips(l_test, l_ref, model).distance;
  const double right =
      score_full_reference_clips(r_test, r_ref, model).distance;
  CHECK(combined == doctest::Approx(0.5 * (left + right)).epsilon(1e-12));

  AudioBuffer mono{8000, {l_test.samples}};
  CHECK_THROWS_AS(score_full_reference(mono, ref, model), Error);
}

TEST_CASE("full-reference rejects duration mismatch beyond one frame hop") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 1);
  Clip a = tone(440, 0.5, 8000, 0.4, 7);
  Clip b = a;
  b.samples.resize(a.samples.size() - 16);  // within one 32-sample hop
  CHECK_NOTHROW(score_full_reference_clips(a, b, model));
  Clip c = a;
  c.samples.resize(a.samples.size() - 200);  // beyond
  CHECK_THROWS_AS(score_full_reference_clips(a, c, model), Error);
}

TEST_CASE("non-matching aggregations: the two-reference construction") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 1);
  Clip t = tone(440, 0.5, 8000, 0.4, 8);
  Embedding e = model.embed(t);

  // references at e +- delta.
  Vector delta = Vector::LinSpaced(e.vector.size(), 0.1, 0.3);
  Embedding plus, minus;
  plus.vector = e.vector + delta;
  minus.vector = e.vector - delta;
  std::vector<Embedding> refs = {plus, minus};

  const double mean_d =
      score_non_matching(t, refs, model, NmrAggregation::kMeanDistance)
          .distance;
  const double centroid_d =
      score_non_matching(t, refs, model, NmrAggregation::kCentroidDistance)
          .distance;
  CHECK(mean_d == doctest::Approx(delta.norm()).epsilon(1e-9));
  CHECK(centroid_d == doctest::Approx(0.0).epsilon(1e-9));

  // references = {test} -> 0 under both.
  std::vector<Embedding> self = {e};
  CHECK(score_non_matching(t, self, model, NmrAggregation::kMeanDistance)
            .distance == doctest::Approx(0.0));
  CHECK(score_non_matching(t, self, model, NmrAggregation::kCentroidDistance)
            .distance == doctest::Approx(0.0));

  CHECK_THROWS_AS(
      score_non_matching(t, {}, model, NmrAggregation::kMeanDistance), Error);
}

TEST_CASE("fit_cubic recovers an exact cubic") {
  // y = 2x^3 - x + 5 sampled on distances (x = -d after negation).
  std::vector<double> distances, subjective;
  for (int i = 0; i < 12; ++i) {
    const double d = 0.1 + 0.2 * i;
    const double x = -d;
    distances.push_back(d);
    subjective.push_back(2 * x * x * x - x + 5);
  }
  DistanceMapping m = fit_cubic(distances, subjective, -100, 100);
  REQUIRE(m.coeffs.size() == 4);
  CHECK(m.coeffs[0] == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(m.coeffs[1] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(std::abs(m.coeffs[2]) < 1e-6);
  CHECK(m.coeffs[3] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(m.residual_mse < 1e-12);

  for (size_t i = 0; i < distances.size(); ++i) {
    CHECK(m.apply(distances[i]) ==
          doctest::Approx(subjective[i]).epsilon(1e-6));
  }
}

TEST_CASE("fit_cubic: constant targets give a constant cubic") {
  std::vector<double> distances = {0.1, 0.5, 0.9, 1.3, 1.7, 2.1};
  std::vector<double> subjective(distances.size(), 3.0);
  DistanceMapping m = fit_cubic(distances, subjective, 1, 5);
  CHECK(m.coeffs[0] == doctest::Approx(3.0).epsilon(1e-9));
  for (int k = 1; k < 4; ++k) CHECK(std::abs(m.coeffs[static_cast<size_t>(k)]) < 1e-9);
}

TEST_CASE("fit_cubic preconditions and rank deficiency") {
  CHECK_THROWS_AS(fit_cubic({1, 2, 3, 4}, {1, 2, 3, 4}, 1, 5), Error);
  CHECK_THROWS_AS(fit_cubic({1, 1, 1, 1, 1}, {1, 2, 3, 4, 5}, 1, 5), Error);
}

TEST_CASE("fit_cubic: noisy monotone data, residual near the noise floor") {
  Rng rng(17);
  std::vector<double> distances, subjective;
  const double noise_std = 0.15;
  for (int i = 0; i < 400; ++i) {
    const double d = 2.0 * rng.uniform();
    distances.push_back(d);
    subjective.push_back(4.5 - 1.5 * d + noise_std * rng.normal());
  }
  DistanceMapping m = fit_cubic(distances, subjective, 1, 5);
  CHECK(m.residual_mse <= noise_std * noise_std * 1.1);
}

TEST_CASE("apply_mapping: the spec's clamp example") {
  DistanceMapping m;
  m.kind = DistanceMapping::Kind::kCubic;
  m.coeffs = {5.0, -1.0, 0.0, 2.0};
  m.scale_lo = 1.0;
  m.scale_hi = 5.0;
  CHECK(apply_mapping(m, 1.0) == 5.0);  // 2+0-1+5 = 6, clamped to 5
  CHECK(apply_mapping(m, 0.0) == 5.0);  // constant coefficient 5, at the bound
  m.scale_hi = 10.0;
  CHECK(apply_mapping(m, 1.0) == doctest::Approx(6.0));
  CHECK(apply_mapping(m, 0.0) == doctest::Approx(5.0));
}

TEST_CASE("monotone mapping preserves rank order of distance lists") {
  std::vector<double> distances = {0.2, 1.4, 0.7, 2.2, 0.05, 1.1};
  std::vector<double> subjective = {4.8, 2.0, 3.9, 1.2, 5.0, 2.8};
  DistanceMapping m = fit_cubic(distances, subjective, 1, 5);

  // Verify the fitted mapping is monotone over the observed range...
  bool monotone = true;
  double prev = m.apply(0.0);
  for (double d = 0.01; d <= 2.3; d += 0.01) {
    double cur = m.apply(d);
    if (cur > prev + 1e-12) monotone = false;
    prev = cur;
  }
  REQUIRE(monotone);  // decreasing in distance

  // ...then SRCC between mapped scores and subjective equals SRCC between
  // negated distances and subjective exactly.
  std::vector<double> mapped, negated;
  for (double d : distances) {
    mapped.push_back(m.apply(d));
    negated.push_back(-d);
  }
  CHECK(spearman(mapped, subjective) ==
        doctest::Approx(spearman(negated, subjective)).epsilon(1e-12));
}

TEST_CASE("fit_mlp: deterministic, bounded, and competitive with the cubic") {
  Rng rng(23);
  std::vector<double> train_d, train_y, test_d, test_y;
  auto target = [](double d) {
    const double x = -d;
    return 3.0 + 0.8 * x + 0.3 * x * x * x;
  };
  for (int i = 0; i < 60; ++i) {
    const double d = 2.0 * rng.uniform();
    const double y = std::clamp(target(d) + 0.05 * rng.normal(), 1.0, 5.0);
    if (i < 40) {
      train_d.push_back(d);
      train_y.push_back(y);
    } else {
      test_d.push_back(d);
      test_y.push_back(y);
    }
  }

  DistanceMapping mlp1 = fit_mlp(train_d, train_y, 1, 5);
  DistanceMapping mlp2 = fit_mlp(train_d, train_y, 1, 5);
  // Same seed -> identical parameters.
  CHECK((mlp1.w1 - mlp2.w1).norm() == 0.0);
  CHECK((mlp1.w3 - mlp2.w3).norm() == 0.0);

  // Outputs always within bounds.
  for (double d = 0.0; d < 4.0; d += 0.05) {
    const double y = mlp1.apply(d);
    CHECK(y >= 1.0);
    CHECK(y <= 5.0);
  }

  DistanceMapping cubic = fit_cubic(train_d, train_y, 1, 5);
  auto test_mse = [&](const DistanceMapping& m) {
    double acc = 0.0;
    for (size_t i = 0; i < test_d.size(); ++i) {
      const double e = m.apply(test_d[i]) - test_y[i];
      acc += e * e;
    }
    return acc / static_cast<double>(test_d.size());
  };
  CHECK(test_mse(mlp1) <= 2.0 * test_mse(cubic) + 1e-9);
}

TEST_CASE("mapping files round trip") {
  fs::path dir = fs::temp_directory_path() / "laqm_test_mapping";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::vector<double> d = {0.1, 0.4, 0.8, 1.2, 1.6, 2.0};
  std::vector<double> y = {4.9, 4.1, 3.2, 2.5, 1.9, 1.3};
  DistanceMapping cubic = fit_cubic(d, y, 1, 5);
  const std::string path = (dir / "mapping.json").string();
  save_mapping(cubic, path);
  DistanceMapping loaded = load_mapping(path);
  for (double x = 0.0; x < 2.5; x += 0.1) {
    CHECK(loaded.apply(x) == doctest::Approx(cubic.apply(x)).epsilon(1e-12));
  }

  std::vector<double> dd(30), yy(30);
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    dd[static_cast<size_t>(i)] = 2.0 * rng.uniform();
    yy[static_cast<size_t>(i)] = 1.0 + 4.0 * rng.uniform();
  }
  DistanceMapping mlp = fit_mlp(dd, yy, 1, 5, {200, 0.02, 3});
  const std::string mpath = (dir / "mlp.json").string();
  save_mapping(mlp, mpath);
  DistanceMapping mloaded = load_mapping(mpath);
  for (double x = 0.0; x < 2.5; x += 0.1) {
    CHECK(mloaded.apply(x) == doctest::Approx(mlp.apply(x)).epsilon(1e-12));
  }
  fs::remove_all(dir);
}

TEST_CASE("fad: identical sets, 1-d closed form, symmetry") {
  Rng rng(31);

  SUBCASE("identical sets give zero") {
    Matrix a(20, 4);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
    }
    CHECK(fad_matrices(a, a) <= 1e-8);
  }

  SUBCASE("1-d closed form (mu_a-mu_b)^2 + (sigma_a-sigma_b)^2") {
    Matrix a(50, 1), b(80, 1);
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, 0) = 2.0 + 0.5 * rng.normal();
    for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 0) = -1.0 + 1.5 * rng.normal();
    const double mu_a = a.col(0).mean();
    const double mu_b = b.col(0).mean();
    const double sd_a = std::sqrt(
        (a.col(0).array() - mu_a).square().sum() / (a.rows() - 1));
    const double sd_b = std::sqrt(
        (b.col(0).array() - mu_b).square().sum() / (b.rows() - 1));
    const double closed_form =
        (mu_a - mu_b) * (mu_a - mu_b) + (sd_a - sd_b) * (sd_a - sd_b);
    CHECK(fad_matrices(a, b) == doctest::Approx(closed_form).epsilon(1e-10));
  }

  SUBCASE("symmetry on random Gaussian sample pairs") {
    for (int trial = 0; trial < 25; ++trial) {
      const int dim = static_cast<int>(rng.uniform_int(1, 6));
      Matrix a(30, dim), b(40, dim);
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < dim; ++j) a(i, j) = rng.normal() * (1 + j);
      }
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        for (int j = 0; j < dim; ++j) b(i, j) = 0.5 + rng.normal();
      }
      const double ab = fad_matrices(a, b);
      const double ba = fad_matrices(b, a);
      CHECK(std::abs(ab - ba) < 1e-8);
      CHECK(ab >= 0.0);
    }
  }

  SUBCASE("small sets fall back to shrinkage instead of failing") {
    Matrix a(2, 4), b(30, 4);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) a(i, j) = rng.normal();
    }
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) b(i, j) = rng.normal();
    }
    CHECK(fad_matrices(a, b) >= 0.0);
  }

  SUBCASE("dimension mismatch is an error") {
    Matrix a(5, 3), b(5, 4);
    a.setZero();
    b.setZero();
    CHECK_THROWS_AS(fad_matrices(a, b), Error);
  }
}

TEST_CASE("fad embedding-vector overload matches the matrix form") {
  Rng rng(77);
  std::vector<Embedding> a, b;
  Matrix ma(6, 3), mb(7, 3);
  for (int i = 0; i < 6; ++i) {
    Embedding e = make_embedding({rng.normal(), rng.normal(), rng.normal()});
    ma.row(i) = e.vector.transpose();
    a.push_back(e);
  }
  for (int i = 0; i < 7; ++i) {
    Embedding e = make_embedding({rng.normal(), rng.normal(), rng.normal()});
    mb.row(i) = e.vector.transpose();
    b.push_back(e);
  }
  CHECK(fad(a, b) == doctest::Approx(fad_matrices(ma, mb)).epsilon(1e-12));
}
