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

#ifndef LAQM_BACKBONE_HPP_
#define LAQM_BACKBONE_HPP_

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laqm/rng.hpp"

namespace laqm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Layer x frame x width features; layers[0] is the convolutional frontend
// output, layers[b+1] the output of transformer block b. Each entry is a
// frames x width matrix.
struct BackboneOutput {
  std::vector<Matrix> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }
};

struct BackboneConfig {
  std::string id;
  int sample_rate = 0;
  int conv_kernel = 0;
  int conv_stride = 0;
  int width = 0;       // feature width Dw
  int num_blocks = 0;  // transformer blocks; feature layers = num_blocks + 1
  int num_heads = 0;
  int ffn_dim = 0;
  uint64_t init_seed = 0;

  int num_layers() const { return num_blocks + 1; }
};

// Small deterministic backbone for tests and CI: one strided conv frontend
// plus two self-attention blocks (3 feature layers x width 32).
BackboneConfig toy_backbone_config(uint64_t init_seed = 0x70BACC);

nlohmann::json backbone_config_to_json(const BackboneConfig& config);
BackboneConfig backbone_config_from_json(const nlohmann::json& j);

// Configuration matching the published 95M-parameter music model family:
// 12 transformer blocks of width 768 (13 x 768 features) at 24 kHz. Weights
// must be loaded from a local tensor file; nothing is downloaded.
BackboneConfig pretrained_95m_config();

// LoRA adapter for one projection: W gains (alpha/rank) * B * A with
// A: rank x in (small Gaussian init) and B: out x rank (zero init), so the
// forward pass at initialization equals the frozen backbone's exactly.
struct LoraAdapter {
  Matrix a;
  Matrix b;
};

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
  double weight_decay = 0.01;
  std::vector<std::string> targets = {"query", "value"};
};

struct LoraState {
  LoraConfig cfg;
  // Keyed by projection name, e.g. "block0.query".
  std::map<std::string, LoraAdapter> adapters;
  std::map<std::string, LoraAdapter> grads;  // same shapes, zeroed

  double scaling() const { return cfg.alpha / cfg.rank; }
  void zero_grads();
};

// Opaque per-clip forward state consumed by backward().
class BackboneCache {
 public:
  virtual ~BackboneCache() = default;
};

enum class ParamGroup { kConvFrontend, kTransformer };

// name, value, grad (null when the implementation keeps no grad for it),
// group. Used for counting, checkpointing and optimizer plumbing.
using ParamVisitor = std::function<void(const std::string&, Matrix&, Matrix*,
                                        ParamGroup)>;

// Pluggable embedding backbone: waveform in, layer x frame x width features
// out, with a registry of attention projections LoRA can target and a
// parameter registry. The convolutional frontend is frozen in every
// adaptation mode.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual const BackboneConfig& config() const = 0;

  // training enables LoRA dropout (rng required when dropout > 0); cache,
  // when given, is filled for a later backward().
  virtual BackboneOutput forward(const std::vector<double>& waveform,
                                 const LoraState* lora, bool training,
                                 Rng* rng,
                                 std::unique_ptr<BackboneCache>* cache)
      const = 0;

  // Backprop of d(loss)/d(features) through the block stack. Accumulates
  // LoRA gradients into lora->grads when lora is given, and transformer
  // parameter gradients internally when accumulate_base_grads is set.
  virtual void backward(const BackboneCache& cache,
                        const std::vector<Matrix>& d_layers,
                        LoraState* lora, bool accumulate_base_grads) = 0;

  // Projection names LoRA may target, e.g. "block3.key".
  virtual std::vector<std::string> attention_projections() const = 0;

  virtual void visit_params(const ParamVisitor& visitor) = 0;

  virtual void zero_base_grads() = 0;

  // Identifies the exact weights (seed-derived or weight-file hash).
  virtual std::string revision() const = 0;
};

// The concrete conv + transformer stack used by both shipped backbones.
std::shared_ptr<Backbone> make_seeded_backbone(const BackboneConfig& config);

// Adapter for published pretrained weights: builds the stack for `config`
// and overwrites every parameter from a tensor file at `weights_path`
// (never downloads). Fails loudly on missing tensors or shape mismatches.
std::shared_ptr<Backbone> load_pretrained_backbone(
    const BackboneConfig& config, const std::string& weights_path);

}  // namespace laqm

#endif  // LAQM_BACKBONE_HPP_
