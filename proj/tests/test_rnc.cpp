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

#include "laqm/rnc.hpp"
#include "laqm/rng.hpp"
#include "oracles.hpp"

using namespace laqm;

namespace {

SurrogateLabel clean_label(double mos = 5.0) {
  SurrogateLabel l;
  l.visqol_mos = mos;
  l.codec = Codec::kNone;
  l.bitrate = ExtendedReal::infinity();
  return l;
}

SurrogateLabel coded_label(Codec codec, double kbps, double mos) {
  SurrogateLabel l;
  l.visqol_mos = mos;
  l.codec = codec;
  l.bitrate = ExtendedReal{kbps};
  return l;
}

std::vector<laqm_oracle::Item> to_oracle(
    const std::vector<SurrogateLabel>& labels) {
  std::vector<laqm_oracle::Item> items(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    items[i].mos = labels[i].visqol_mos;
    items[i].codec = codec_name(labels[i].codec);
    items[i].bitrate = labels[i].bitrate.value;
  }
  return items;
}

Codec random_codec(Rng& rng) {
  switch (rng.uniform_int(0, 2)) {
    case 0:
      return Codec::kAac;
    case 1:
      return Codec::kOpus;
    default:
      return Codec::kMp3;
  }
}

std::vector<SurrogateLabel> random_labels(Rng& rng, int n) {
  std::vector<SurrogateLabel> labels;
  const std::vector<double> ladder = {16, 32, 48, 64, 80, 96, 128};
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < 0.25) {
      labels.push_back(clean_label());
    } else {
      labels.push_back(coded_label(
          random_codec(rng),
          ladder[static_cast<size_t>(rng.uniform_int(0, 6))],
          1.0 + 4.0 * rng.uniform()));
    }
  }
  return labels;
}

Eigen::MatrixXd random_embeddings(Rng& rng, int n, int dim) {
  Eigen::MatrixXd e(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) e(i, j) = rng.normal();
  }
  return e;
}

}  // namespace

TEST_CASE("candidate set on the spec's hand cases") {
  // ViSQOL view, labels [1, 2, 3], anchor 0, probe 1 -> {1, 2}.
  std::vector<SurrogateLabel> labels = {clean_label(1.0), clean_label(2.0),
                                        clean_label(3.0)};
  LabelView view = visqol_view(labels);
  CHECK(candidate_set(0, 1, view) == std::vector<size_t>{1, 2});

  // All labels equal -> every k != i, for every j.
  std::vector<SurrogateLabel> tied = {clean_label(5.0), clean_label(5.0),
                                      clean_label(5.0)};
  LabelView tied_view = visqol_view(tied);
  CHECK(candidate_set(0, 1, tied_view) == std::vector<size_t>{1, 2});
  CHECK(candidate_set(0, 2, tied_view) == std::vector<size_t>{1, 2});
  CHECK(candidate_set(1, 0, tied_view) == std::vector<size_t>{0, 2});
}

TEST_CASE("codec view pool and clean membership") {
  // batch = {clean(INF), opus@16, opus@64, aac@32}
  std::vector<SurrogateLabel> labels = {
      clean_label(), coded_label(Codec::kOpus, 16, 2.0),
      coded_label(Codec::kOpus, 64, 4.0), coded_label(Codec::kAac, 32, 3.0)};
  LabelView view = codec_view(labels, Codec::kOpus,
                              CodecPoolRule::kCleanAndSameCodec);
  CHECK(view.pool == std::vector<size_t>{0, 1, 2});  // aac@32 excluded

  // anchor opus@16 (1), probe opus@64 (2): |16-64| = 48;
  // clean is in S since |16-INF| = INF >= 48.
  std::vector<size_t> s = candidate_set(1, 2, view);
  CHECK(s == std::vector<size_t>{0, 2});

  LabelView full =
      codec_view(labels, Codec::kOpus, CodecPoolRule::kFullBatch);
  CHECK(full.pool == std::vector<size_t>{0, 1, 2, 3});
}

TEST_CASE("two-item pool gives exactly zero") {
  std::vector<SurrogateLabel> labels = {clean_label(4.0), clean_label(2.0)};
  Rng rng(11);
  Eigen::MatrixXd emb = random_embeddings(rng, 2, 5);
  RncConfig cfg;
  CHECK(rnc_batch(labels, emb, cfg) == 0.0);

  // Any labels, any embeddings, sign +1 as well.
  cfg.sign = 1;
  CHECK(rnc_batch(labels, emb, cfg) == 0.0);
}

TEST_CASE("three tied items with equal pairwise distances give log 2") {
  std::vector<SurrogateLabel> labels = {clean_label(5.0), clean_label(5.0),
                                        clean_label(5.0)};
  // Equilateral triangle in the plane, side c = 0.7.
  const double c = 0.7;
  Eigen::MatrixXd emb(3, 2);
  emb << 0.0, 0.0, c, 0.0, c / 2.0, c * std::sqrt(3.0) / 2.0;
  RncConfig cfg;
  const double loss = rnc_batch(labels, emb, cfg);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-9));

  RncStats stats;
  LabelView view = visqol_view(labels);
  Eigen::MatrixXd d = pairwise_distances(emb);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(rnc_per_sample(i, view, d, 1.0, -1, &stats) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
}

TEST_CASE("batch loss matches the brute-force oracle on random batches") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 8));
    const int dim = static_cast<int>(rng.uniform_int(1, 8));
    std::vector<SurrogateLabel> labels = random_labels(rng, n);
    Eigen::MatrixXd emb = random_embeddings(rng, n, dim);

    RncConfig cfg;
    cfg.tau = trial % 3 == 0 ? 0.5 : 1.0;
    cfg.sign = trial % 4 == 0 ? 1 : -1;
    cfg.bitrate_term = trial % 5 != 0;

    const double got = rnc_batch(labels, emb, cfg);
    const double want =
        laqm_oracle::batch(to_oracle(labels), emb, cfg.tau, cfg.sign,
                           cfg.bitrate_term, false);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(std::abs(got - want) < 1e-9);
    CHECK(got >= -1e-15);  // non-negativity
  }
}

TEST_CASE("full-batch pool reading matches the oracle too") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 8));
    std::vector<SurrogateLabel> labels = random_labels(rng, n);
    Eigen::MatrixXd emb = random_embeddings(rng, n, 4);
    RncConfig cfg;
    cfg.codec_pool = CodecPoolRule::kFullBatch;
    const double got = rnc_batch(labels, emb, cfg);
    const double want =
        laqm_oracle::batch(to_oracle(labels), emb, 1.0, -1, true, true);
    CHECK(std::abs(got - want) < 1e-9);
  }
}

TEST_CASE("clean-only batch uses the MOS view alone; tied pair is zero") {
  std::vector<SurrogateLabel> labels = {clean_label(5.0), clean_label(5.0)};
  Eigen::MatrixXd emb(2, 3);
  emb << 1.0, 2.0, 3.0, -1.0, 0.5, 2.0;
  RncConfig cfg;
  CHECK(rnc_batch(labels, emb, cfg) == 0.0);
}

TEST_CASE("bitrate term toggle removes the codec views") {
  Rng rng(5);
  std::vector<SurrogateLabel> labels = {
      clean_label(), coded_label(Codec::kAac, 16, 1.5),
      coded_label(Codec::kAac, 128, 4.5), coded_label(Codec::kOpus, 48, 3.0)};
  Eigen::MatrixXd emb = random_embeddings(rng, 4, 6);

  RncConfig with;
  RncConfig without;
  without.bitrate_term = false;

  // With the toggle off the loss is the mean MOS-view per-sample loss.
  const Eigen::MatrixXd d = pairwise_distances(emb);
  LabelView mos = visqol_view(labels);
  double expected = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    expected += rnc_per_sample(i, mos, d, 1.0, -1);
  }
  expected /= static_cast<double>(labels.size());
  CHECK(rnc_batch(labels, emb, without) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(rnc_batch(labels, emb, with) > rnc_batch(labels, emb, without) - 1e-12);
}

TEST_CASE("permutation invariance") {
  Rng rng(99);
  const int n = 7;
  std::vector<SurrogateLabel> labels = random_labels(rng, n);
  Eigen::MatrixXd emb = random_embeddings(rng, n, 5);
  RncConfig cfg;
  const double base = rnc_batch(labels, emb, cfg);

  std::vector<size_t> perm = {3, 0, 6, 2, 5, 1, 4};
  std::vector<SurrogateLabel> plabels(n);
  Eigen::MatrixXd pemb(n, 5);
  for (int i = 0; i < n; ++i) {
    plabels[static_cast<size_t>(i)] = labels[perm[static_cast<size_t>(i)]];
    pemb.row(i) = emb.row(static_cast<Eigen::Index>(perm[static_cast<size_t>(i)]));
  }
  CHECK(std::abs(rnc_batch(plabels, pemb, cfg) - base) < 1e-9);
}

TEST_CASE("affine label transforms leave the loss unchanged") {
  Rng rng(123);
  const int n = 6;
  std::vector<SurrogateLabel> labels = random_labels(rng, n);
  Eigen::MatrixXd emb = random_embeddings(rng, n, 4);
  RncConfig cfg;
  const double base = rnc_batch(labels, emb, cfg);

  std::vector<SurrogateLabel> scaled = labels;
  for (auto& l : scaled) {
    l.visqol_mos = 2.5 * l.visqol_mos + 1.0;
    if (!l.bitrate.is_infinite()) {
      l.bitrate = ExtendedReal{2.5 * l.bitrate.value + 1.0};
    }
  }
  CHECK(rnc_batch(scaled, emb, cfg) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("monotone alignment: ordered embeddings lose less at sign=-1") {
  // Labels 1 < 2 < 3 on a line; correctly ordered embeddings put the label
  // neighbor closer than the label stranger.
  std::vector<SurrogateLabel> labels = {clean_label(1.0), clean_label(2.0),
                                        clean_label(3.0)};
  Eigen::MatrixXd ordered(3, 1), swapped(3, 1);
  ordered << 0.0, 1.0, 2.0;   // d(1,2) < d(1,3)
  swapped << 0.0, 2.0, 1.0;   // d(1,2) > d(1,3)
  RncConfig cfg;
  CHECK(rnc_batch(labels, ordered, cfg) < rnc_batch(labels, swapped, cfg));

  // The paper-literal sign=+1 fails this sanity property, which is why the
  // default is -1.
  RncConfig literal;
  literal.sign = 1;
  CHECK_FALSE(rnc_batch(labels, ordered, literal) <
              rnc_batch(labels, swapped, literal));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(31337);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 7));
    const int dim = static_cast<int>(rng.uniform_int(2, 6));
    std::vector<SurrogateLabel> labels = random_labels(rng, n);
    Eigen::MatrixXd emb = random_embeddings(rng, n, dim);
    RncConfig cfg;
    cfg.tau = 0.8;

    Eigen::MatrixXd grad;
    rnc_batch_with_grad(labels, emb, cfg, &grad);

    const double h = 1e-6;
    int checked = 0;
    for (Eigen::Index i = 0; i < emb.rows(); ++i) {
      for (Eigen::Index j = 0; j < emb.cols(); ++j) {
        Eigen::MatrixXd ep = emb, em = emb;
        ep(i, j) += h;
        em(i, j) -= h;
        const double fd =
            (rnc_batch(labels, ep, cfg) - rnc_batch(labels, em, cfg)) /
            (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad(i, j)), 1e-6});
        CHECK(std::abs(fd - grad(i, j)) / denom < 1e-4);
        ++checked;
      }
    }
    CHECK(checked > 0);
  }
}

TEST_CASE("degenerate anchor pools count warnings and contribute zero") {
  // Single aac item with no clean items: its codec-view pool is {itself}.
  std::vector<SurrogateLabel> labels = {coded_label(Codec::kAac, 32, 3.0),
                                        coded_label(Codec::kOpus, 32, 3.0)};
  Eigen::MatrixXd emb(2, 2);
  emb << 0.0, 0.0, 1.0, 1.0;
  RncConfig cfg;
  RncStats stats;
  const double loss = rnc_batch(labels, emb, cfg, &stats);
  CHECK(stats.degenerate_anchors == 2);
  CHECK(loss == 0.0);  // MOS view: 2 items -> 0; codec views degenerate
}

TEST_CASE("precondition violations throw") {
  std::vector<SurrogateLabel> labels = {clean_label()};
  Eigen::MatrixXd emb(1, 2);
  emb << 0.0, 0.0;
  RncConfig cfg;
  CHECK_THROWS(rnc_batch(labels, emb, cfg));

  std::vector<SurrogateLabel> two = {clean_label(), clean_label()};
  Eigen::MatrixXd wrong(3, 2);
  wrong.setZero();
  CHECK_THROWS(rnc_batch(two, wrong, cfg));

  LabelView view = visqol_view(two);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS(rnc_per_sample(0, view, d, -1.0, -1));  // bad tau
  CHECK_THROWS(candidate_set(0, 0, view));             // i == j
}
