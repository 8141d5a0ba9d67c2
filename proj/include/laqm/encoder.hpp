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

#ifndef LAQM_ENCODER_HPP_
#define LAQM_ENCODER_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "laqm/audio.hpp"
#include "laqm/backbone.hpp"

namespace laqm {

// Fixed-length quality-space vector.
struct Embedding {
  Vector vector;
  double norm = 0.0;

  int dim() const { return static_cast<int>(vector.size()); }
};

enum class AdaptationMode { kHeadOnly, kLora, kTransformerFinetune };

std::string adaptation_mode_name(AdaptationMode m);
AdaptationMode adaptation_mode_from_name(const std::string& name);

// Mean over frames per layer, then concatenation over layers; the input of
// the projection head (length L * Dw).
Vector pool_and_flatten(const BackboneOutput& features);

struct TrainableReport {
  int64_t trainable = 0;
  int64_t total = 0;
  double fraction = 0.0;
  std::map<std::string, std::pair<int64_t, int64_t>> by_module;  // trainable,total
};

// Flat view of one trainable tensor for the optimizer / gradient checks.
struct ParamSlot {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  Eigen::Index size = 0;
  bool weight_decay = false;  // decay applies to LoRA matrices only
};

// Per-clip forward state kept for the backward pass.
struct ClipForward {
  std::unique_ptr<BackboneCache> backbone;
  Vector flat;
  Vector relu_flat;
  int num_frames = 0;
};

struct BatchForward {
  Eigen::MatrixXd embeddings;  // N x E
  std::vector<ClipForward> clips;
};

// The embedding function: pluggable backbone -> time-mean + layer flatten ->
// ReLU -> linear head. Optionally LoRA-adapted. Inference is deterministic
// (dropout disabled) and reentrant; training mutates gradients through a
// single writer.
class EncoderModel {
 public:
  EncoderModel(std::shared_ptr<Backbone> backbone, int embedding_dim,
               uint64_t init_seed);

  const Backbone& backbone() const { return *backbone_; }
  Backbone& mutable_backbone() { return *backbone_; }
  int embedding_dim() const { return static_cast<int>(head_w_.rows()); }
  int flat_dim() const { return static_cast<int>(head_w_.cols()); }
  int expected_sample_rate() const { return backbone_->config().sample_rate; }

  AdaptationMode adaptation_mode() const { return mode_; }
  void set_adaptation_mode(AdaptationMode mode);

  // Inserts zero-initialized-B LoRA adapters into the targeted attention
  // projections; the forward pass at this point is bit-for-bit the frozen
  // backbone's. Unknown target names are a configuration error.
  void apply_lora(const LoraConfig& cfg, uint64_t seed);
  bool has_lora() const { return lora_.has_value(); }
  const LoraState& lora() const;
  LoraState& mutable_lora();

  // Deterministic inference embedding. The clip must be at the backbone's
  // expected sample rate.
  Embedding embed(const Clip& clip) const;

  // Training-path forward over a batch; caches are kept for backward.
  BatchForward forward_batch(const std::vector<const Clip*>& clips,
                             bool training, Rng* rng) const;

  void zero_grads();
  // Accumulates gradients for the current adaptation mode's trainable set.
  void backward_batch(const BatchForward& forward,
                      const Eigen::MatrixXd& d_embeddings);

  // Trainable tensors under the current adaptation mode.
  std::vector<ParamSlot> trainable_params();

  TrainableReport trainable_report() const;

  // SHA-256 over the frozen base backbone tensors; cheap integrity probe.
  std::string base_weight_hash() const;

  const Matrix& head_w() const { return head_w_; }
  const Matrix& head_b() const { return head_b_; }

  void save_checkpoint(const std::string& path) const;

  // Rebuilds a model from a checkpoint. The provider maps the stored
  // backbone id (plus the stored backbone config echo) to a freshly
  // constructed backbone; its revision must match the stored one.
  using BackboneProvider = std::function<std::shared_ptr<Backbone>(
      const std::string& backbone_id, const nlohmann::json& config_echo)>;
  static EncoderModel load_checkpoint(const std::string& path,
                                      const BackboneProvider& provider);

 private:
  std::shared_ptr<Backbone> backbone_;
  std::optional<LoraState> lora_;
  Matrix head_w_;  // E x (L * Dw)
  Matrix head_b_;  // E x 1
  Matrix head_w_grad_;
  Matrix head_b_grad_;
  AdaptationMode mode_ = AdaptationMode::kHeadOnly;
};

}  // namespace laqm

#endif  // LAQM_ENCODER_HPP_
