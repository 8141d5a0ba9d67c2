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

#include "laqm/encoder.hpp"
#include "laqm/rnc.hpp"
#include "laqm/rng.hpp"
#include "laqm/tensorio.hpp"

using namespace laqm;
namespace fs = std::filesystem;

namespace {

// Small-but-not-trivial configuration so tests stay fast.
BackboneConfig tiny_config(uint64_t seed = 0xBEEF) {
  BackboneConfig cfg = toy_backbone_config(seed);
  cfg.width = 16;
  cfg.num_heads = 2;
  cfg.ffn_dim = 24;
  cfg.conv_kernel = 64;
  cfg.conv_stride = 32;
  cfg.sample_rate = 8000;
  return cfg;
}

Clip test_clip(uint64_t seed, size_t n, int rate) {
  Rng rng(seed);
  Clip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / rate;
    c.samples[i] = 0.4 * std::sin(2.0 * M_PI * 440.0 * t) + 0.05 * rng.normal();
  }
  return c;
}

std::vector<SurrogateLabel> mixed_labels() {
  SurrogateLabel clean;
  SurrogateLabel aac;
  aac.codec = Codec::kAac;
  aac.bitrate = ExtendedReal{32};
  aac.visqol_mos = 2.5;
  SurrogateLabel opus;
  opus.codec = Codec::kOpus;
  opus.bitrate = ExtendedReal{64};
  opus.visqol_mos = 3.5;
  return {clean, aac, opus};
}

}  // namespace

TEST_CASE("toy backbone: flat length 96 and configured output dim") {
  EncoderModel model(make_seeded_backbone(toy_backbone_config()), 32, 9);
  CHECK(model.flat_dim() == 3 * 32);
  Embedding e = model.embed(test_clip(1, 8000, 8000));
  CHECK(e.dim() == 32);
  CHECK(e.norm == doctest::Approx(e.vector.norm()));
  CHECK(e.vector.allFinite());
}

TEST_CASE("embed is deterministic in inference mode") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 4);
  Clip clip = test_clip(2, 4000, 8000);
  Embedding a = model.embed(clip);
  Embedding b = model.embed(clip);
  CHECK((a.vector - b.vector).norm() == 0.0);
}

TEST_CASE("embed rejects the wrong sample rate and short input") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 4);
  Clip wrong_rate = test_clip(3, 4000, 16000);
  CHECK_THROWS_AS(model.embed(wrong_rate), Error);
  Clip too_short = test_clip(3, 16, 8000);
  CHECK_THROWS_AS(model.embed(too_short), Error);
}

TEST_CASE("pool_and_flatten: constant-in-time features pool to the constant") {
  BackboneOutput out;
  Matrix layer0 = Matrix::Constant(7, 4, 1.25);
  Matrix layer1 = Matrix::Constant(7, 4, -0.5);
  out.layers = {layer0, layer1};
  Vector flat = pool_and_flatten(out);
  REQUIRE(flat.size() == 8);
  for (int i = 0; i < 4; ++i) CHECK(flat(i) == 1.25);
  for (int i = 4; i < 8; ++i) CHECK(flat(i) == -0.5);
}

TEST_CASE("pool_and_flatten is exactly linear in feature scaling") {
  Rng rng(5);
  BackboneOutput out;
  for (int l = 0; l < 3; ++l) {
    Matrix m(5, 6);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 6; ++c) m(r, c) = rng.normal();
    }
    out.layers.push_back(m);
  }
  Vector flat = pool_and_flatten(out);
  BackboneOutput scaled = out;
  const double s = -2.5;
  for (auto& layer : scaled.layers) layer *= s;
  Vector flat_scaled = pool_and_flatten(scaled);
  CHECK((flat_scaled - s * flat).norm() == 0.0);
}

TEST_CASE("LoRA identity at init: embeddings unchanged within 1e-6") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 4);
  Clip clip = test_clip(4, 4000, 8000);
  Embedding before = model.embed(clip);

  LoraConfig cfg;
  cfg.rank = 4;
  model.apply_lora(cfg, 99);
  Embedding after = model.embed(clip);
  CHECK((before.vector - after.vector).lpNorm<Eigen::Infinity>() < 1e-6);
  // Zero-init B makes it exact, in fact.
  CHECK((before.vector - after.vector).norm() == 0.0);
}

TEST_CASE("apply_lora validates targets and rank") {
  EncoderModel model(make_seeded_backbone(tiny_config()), 8, 4);
  LoraConfig bad_target;
  bad_target.targets = {"quary"};
  CHECK_THROWS_AS(model.apply_lora(bad_target, 1), Error);

  LoraConfig bad_rank;
  bad_rank.rank = 1000;
  CHECK_THROWS_AS(model.apply_lora(bad_rank, 1), Error);

  LoraConfig key_output;
  key_output.rank = 2;
  key_output.targets = {"key", "output"};
  model.apply_lora(key_output, 1);
  CHECK(model.lora().adapters.size() == 4);  // 2 targets x 2 blocks
}

TEST_CASE("trainable report matches direct parameter enumeration") {
  BackboneConfig bcfg = tiny_config();
  EncoderModel model(make_seeded_backbone(bcfg), 8, 4);

  // Direct walk of the parameter registry.
  int64_t base_total = 0;
  model.mutable_backbone().visit_params(
      [&](const std::string&, Matrix& value, Matrix*, ParamGroup) {
        base_total += value.size();
      });
  const int64_t head_params =
      static_cast<int64_t>(8) * model.flat_dim() + 8;

  SUBCASE("fully frozen model has fraction 0 except the head") {
    model.set_adaptation_mode(AdaptationMode::kHeadOnly);
    TrainableReport r = model.trainable_report();
    CHECK(r.total == base_total + head_params);
    CHECK(r.trainable == head_params);
    CHECK(r.fraction ==
          doctest::Approx(static_cast<double>(head_params) /
                          static_cast<double>(base_total + head_params)));
  }

  SUBCASE("lora: trainable = sum over targets of rank*(d+k) + head") {
    LoraConfig cfg;
    cfg.rank = 4;
    cfg.targets = {"query", "value"};
    model.apply_lora(cfg, 7);
    model.set_adaptation_mode(AdaptationMode::kLora);
    TrainableReport r = model.trainable_report();
    const int64_t lora_params = 2 /*targets*/ * bcfg.num_blocks * 4 *
                                (bcfg.width + bcfg.width);
    CHECK(r.trainable == lora_params + head_params);
    CHECK(r.total == base_total + lora_params + head_params);

    // Cross-check against the optimizer's slot view.
    int64_t slot_total = 0;
    for (const ParamSlot& slot : model.trainable_params()) {
      slot_total += slot.size;
    }
    CHECK(slot_total == r.trainable);
  }

  SUBCASE("transformer finetune trains the blocks but not the conv") {
    model.set_adaptation_mode(AdaptationMode::kTransformerFinetune);
    TrainableReport r = model.trainable_report();
    int64_t conv_params = 0;
    model.mutable_backbone().visit_params(
        [&](const std::string&, Matrix& value, Matrix*, ParamGroup g) {
          if (g == ParamGroup::kConvFrontend) conv_params += value.size();
        });
    CHECK(r.trainable == base_total - conv_params + head_params);
  }
}

TEST_CASE("checkpoint round trip reproduces embeddings bit-exactly") {
  fs::path dir = fs::temp_directory_path() / "laqm_test_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  BackboneConfig bcfg = tiny_config(0xA11CE);
  EncoderModel model(make_seeded_backbone(bcfg), 8, 4);
  LoraConfig lcfg;
  lcfg.rank = 2;
  model.apply_lora(lcfg, 3);
  model.set_adaptation_mode(AdaptationMode::kLora);
  // Nudge some trainable weights so the checkpoint differs from init.
  model.mutable_lora().adapters.begin()->second.b.setConstant(0.01);

  Clip clip = test_clip(6, 4000, 8000);
  Embedding before = model.embed(clip);
  model.save_checkpoint(path);

  EncoderModel loaded = EncoderModel::load_checkpoint(
      path, [](const std::string& id, const nlohmann::json& echo) {
        REQUIRE(id == "toy-v1");
        return make_seeded_backbone(
            backbone_config_from_json(echo.at("backbone")));
      });
  Embedding after = loaded.embed(clip);
  CHECK((before.vector - after.vector).norm() == 0.0);

  // Wrong backbone identity fails loudly.
  CHECK_THROWS_AS(
      EncoderModel::load_checkpoint(
          path,
          [](const std::string&, const nlohmann::json&) {
            return make_seeded_backbone(toy_backbone_config(0xD1FF));
          }),
      Error);
  fs::remove_all(dir);
}

TEST_CASE("full-pipeline gradients match finite differences (lora mode)") {
  BackboneConfig bcfg = tiny_config(0x5EED5);
  EncoderModel model(make_seeded_backbone(bcfg), 6, 21);
  LoraConfig lcfg;
  lcfg.rank = 3;
  lcfg.dropout = 0.0;  // deterministic forward for the check
  model.apply_lora(lcfg, 8);
  model.set_adaptation_mode(AdaptationMode::kLora);
  // Give B a nonzero value so LoRA-A gradients are informative.
  for (auto& [name, adapter] : model.mutable_lora().adapters) {
    Rng r(fnv1a64(name));
    for (Eigen::Index i = 0; i < adapter.b.rows(); ++i) {
      for (Eigen::Index j = 0; j < adapter.b.cols(); ++j) {
        adapter.b(i, j) = 0.05 * r.normal();
      }
    }
  }

  std::vector<Clip> clips = {test_clip(10, 1024, 8000),
                             test_clip(11, 1024, 8000),
                             test_clip(12, 1024, 8000)};
  std::vector<const Clip*> ptrs = {&clips[0], &clips[1], &clips[2]};
  std::vector<SurrogateLabel> labels = mixed_labels();
  RncConfig loss_cfg;

  auto loss_at = [&]() {
    BatchForward fwd = model.forward_batch(ptrs, /*training=*/false, nullptr);
    return rnc_batch(labels, fwd.embeddings, loss_cfg);
  };

  BatchForward fwd = model.forward_batch(ptrs, /*training=*/true, nullptr);
  Eigen::MatrixXd d_emb;
  rnc_batch_with_grad(labels, fwd.embeddings, loss_cfg, &d_emb);
  model.zero_grads();
  model.backward_batch(fwd, d_emb);

  std::vector<ParamSlot> slots = model.trainable_params();
  Rng pick(77);
  const double h = 1e-5;
  int checked = 0;
  int worst_ok = 0;
  for (int trial = 0; trial < 120; ++trial) {
    ParamSlot& slot =
        slots[static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(slots.size()) - 1))];
    const Eigen::Index i = pick.uniform_int(0, slot.size - 1);
    const double saved = slot.value[i];
    slot.value[i] = saved + h;
    const double lp = loss_at();
    slot.value[i] = saved - h;
    const double lm = loss_at();
    slot.value[i] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double analytic = slot.grad[i];
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    const double rel = std::abs(fd - analytic) / denom;
    CHECK(rel < 1e-4);
    if (rel < 1e-4) ++worst_ok;
    ++checked;
  }
  CHECK(checked >= 100);
  CHECK(worst_ok == checked);
}

TEST_CASE("full-pipeline gradients match finite differences (finetune mode)") {
  BackboneConfig bcfg = tiny_config(0xF17E);
  EncoderModel model(make_seeded_backbone(bcfg), 6, 22);
  model.set_adaptation_mode(AdaptationMode::kTransformerFinetune);

  std::vector<Clip> clips = {test_clip(20, 768, 8000),
                             test_clip(21, 768, 8000),
                             test_clip(22, 768, 8000)};
  std::vector<const Clip*> ptrs = {&clips[0], &clips[1], &clips[2]};
  std::vector<SurrogateLabel> labels = mixed_labels();
  RncConfig loss_cfg;

  auto loss_at = [&]() {
    BatchForward fwd = model.forward_batch(ptrs, false, nullptr);
    return rnc_batch(labels, fwd.embeddings, loss_cfg);
  };

  BatchForward fwd = model.forward_batch(ptrs, true, nullptr);
  Eigen::MatrixXd d_emb;
  rnc_batch_with_grad(labels, fwd.embeddings, loss_cfg, &d_emb);
  model.zero_grads();
  model.backward_batch(fwd, d_emb);

  std::vector<ParamSlot> slots = model.trainable_params();
  Rng pick(88);
  const double h = 1e-5;
  for (int trial = 0; trial < 120; ++trial) {
    ParamSlot& slot =
        slots[static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(slots.size()) - 1))];
    const Eigen::Index i = pick.uniform_int(0, slot.size - 1);
    const double saved = slot.value[i];
    slot.value[i] = saved + h;
    const double lp = loss_at();
    slot.value[i] = saved - h;
    const double lm = loss_at();
    slot.value[i] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double analytic = slot.grad[i];
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    CHECK(std::abs(fd - analytic) / denom < 1e-4);
  }
}

TEST_CASE("backbone weights file adapter round-trips through tensor files") {
  // Save a seeded tiny backbone's tensors as a "pretrained" weights file,
  // reload through the adapter, and compare outputs.
  fs::path dir = fs::temp_directory_path() / "laqm_test_weights";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string path = (dir / "weights.tnsr").string();

  BackboneConfig cfg = tiny_config(0xFEED);
  cfg.id = "tiny-export";
  std::shared_ptr<Backbone> original = make_seeded_backbone(cfg);
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  std::vector<std::pair<std::string, Matrix>> storage;
  original->visit_params([&](const std::string& name, Matrix& value, Matrix*,
                             ParamGroup) { storage.emplace_back(name, value); });
  for (const auto& [name, value] : storage) tensors.emplace_back(name, &value);
  save_tensor_file(path, tensors, {{"backbone_id", "tiny-export"}});

  std::shared_ptr<Backbone> loaded = load_pretrained_backbone(cfg, path);
  Clip clip = test_clip(30, 512, 8000);
  BackboneOutput a = original->forward(clip.samples, nullptr, false, nullptr,
                                       nullptr);
  BackboneOutput b =
      loaded->forward(clip.samples, nullptr, false, nullptr, nullptr);
  REQUIRE(a.layers.size() == b.layers.size());
  for (size_t l = 0; l < a.layers.size(); ++l) {
    CHECK((a.layers[l] - b.layers[l]).norm() == 0.0);
  }
  CHECK(loaded->revision().rfind("file-sha256:", 0) == 0);

  // Id mismatch fails.
  BackboneConfig other = cfg;
  other.id = "something-else";
  CHECK_THROWS_AS(load_pretrained_backbone(other, path), Error);
  fs::remove_all(dir);
}
