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

#include "laqm/encoder.hpp"

#include <algorithm>
#include <sstream>

#include "laqm/errors.hpp"
#include "laqm/hash.hpp"
#include "laqm/tensorio.hpp"

using nlohmann::json;

namespace laqm {

std::string adaptation_mode_name(AdaptationMode m) {
  switch (m) {
    case AdaptationMode::kHeadOnly:
      return "head_only";
    case AdaptationMode::kLora:
      return "lora";
    case AdaptationMode::kTransformerFinetune:
      return "transformer_finetune";
  }
  throw runtime_error("invalid adaptation mode");
}

AdaptationMode adaptation_mode_from_name(const std::string& name) {
  if (name == "head_only") return AdaptationMode::kHeadOnly;
  if (name == "lora") return AdaptationMode::kLora;
  if (name == "transformer_finetune") return AdaptationMode::kTransformerFinetune;
  throw config_error("unknown adaptation mode: " + name);
}

Vector pool_and_flatten(const BackboneOutput& features) {
  if (features.layers.empty()) {
    throw runtime_error("pool_and_flatten: empty feature stack");
  }
  const Eigen::Index width = features.layers[0].cols();
  Vector flat(static_cast<Eigen::Index>(features.layers.size()) * width);
  for (size_t l = 0; l < features.layers.size(); ++l) {
    const Matrix& layer = features.layers[l];
    if (layer.rows() == 0) throw runtime_error("pool_and_flatten: empty layer");
    flat.segment(static_cast<Eigen::Index>(l) * width, width) =
        layer.colwise().mean().transpose();
  }
  return flat;
}

EncoderModel::EncoderModel(std::shared_ptr<Backbone> backbone,
                           int embedding_dim, uint64_t init_seed)
    : backbone_(std::move(backbone)) {
  if (embedding_dim <= 0) throw config_error("embedding_dim must be positive");
  const BackboneConfig& cfg = backbone_->config();
  const Eigen::Index flat = static_cast<Eigen::Index>(cfg.num_layers()) * cfg.width;
  Rng rng = Rng::substream(init_seed, "head-init");
  head_w_.resize(embedding_dim, flat);
  const double std = 1.0 / std::sqrt(static_cast<double>(flat));
  for (Eigen::Index r = 0; r < head_w_.rows(); ++r) {
    for (Eigen::Index c = 0; c < head_w_.cols(); ++c) {
      head_w_(r, c) = std * rng.normal();
    }
  }
  head_b_ = Matrix::Zero(embedding_dim, 1);
  head_w_grad_ = Matrix::Zero(head_w_.rows(), head_w_.cols());
  head_b_grad_ = Matrix::Zero(head_b_.rows(), 1);
}

void EncoderModel::set_adaptation_mode(AdaptationMode mode) {
  if (mode == AdaptationMode::kLora && !has_lora()) {
    throw config_error("adaptation_mode=lora requires apply_lora() first");
  }
  mode_ = mode;
}

void EncoderModel::apply_lora(const LoraConfig& cfg, uint64_t seed) {
  if (cfg.rank <= 0) throw config_error("lora rank must be positive");
  if (cfg.alpha <= 0) throw config_error("lora alpha must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw config_error("lora dropout must be in [0, 1)");
  }
  if (cfg.weight_decay < 0.0) {
    throw config_error("lora weight_decay must be non-negative");
  }
  const std::vector<std::string> registry = backbone_->attention_projections();

  LoraState state;
  state.cfg = cfg;
  Rng rng = Rng::substream(seed, "lora-init");
  const int width = backbone_->config().width;
  if (cfg.rank > width) {
    throw config_error("lora rank " + std::to_string(cfg.rank) +
                       " exceeds projection dimension " +
                       std::to_string(width));
  }
  for (const std::string& target : cfg.targets) {
    bool matched = false;
    for (const std::string& name : registry) {
      // Registry names are "block<i>.<role>"; targets name the role.
      if (name.size() > target.size() &&
          name.compare(name.size() - target.size() - 1, 1, ".") == 0 &&
          name.compare(name.size() - target.size(), target.size(), target) == 0) {
        LoraAdapter adapter;
        adapter.a.resize(cfg.rank, width);
        for (Eigen::Index r = 0; r < adapter.a.rows(); ++r) {
          for (Eigen::Index c = 0; c < adapter.a.cols(); ++c) {
            adapter.a(r, c) = 0.02 * rng.normal();
          }
        }
        adapter.b = Matrix::Zero(width, cfg.rank);
        state.adapters[name] = std::move(adapter);
        matched = true;
      }
    }
    if (!matched) {
      throw config_error("lora target '" + target +
                         "' matches no attention projection");
    }
  }
  state.zero_grads();
  lora_ = std::move(state);
}

const LoraState& EncoderModel::lora() const {
  if (!lora_.has_value()) throw runtime_error("model has no LoRA state");
  return *lora_;
}

LoraState& EncoderModel::mutable_lora() {
  if (!lora_.has_value()) throw runtime_error("model has no LoRA state");
  return *lora_;
}

namespace {

void check_finite_layers(const BackboneOutput& out) {
  for (size_t l = 0; l < out.layers.size(); ++l) {
    if (!out.layers[l].allFinite()) {
      throw runtime_error("non-finite values in backbone layer " +
                          std::to_string(l));
    }
  }
}

}  // namespace

Embedding EncoderModel::embed(const Clip& clip) const {
  if (clip.sample_rate != expected_sample_rate()) {
    throw runtime_error("embed: clip at " + std::to_string(clip.sample_rate) +
                        " Hz, backbone expects " +
                        std::to_string(expected_sample_rate()) + " Hz");
  }
  BackboneOutput features = backbone_->forward(
      clip.samples, lora_.has_value() ? &*lora_ : nullptr,
      /*training=*/false, nullptr, nullptr);
  check_finite_layers(features);
  Vector flat = pool_and_flatten(features);
  Vector rel = flat.cwiseMax(0.0);
  Embedding e;
  e.vector = head_w_ * rel + head_b_.col(0);
  e.norm = e.vector.norm();
  return e;
}

BatchForward EncoderModel::forward_batch(const std::vector<const Clip*>& clips,
                                         bool training, Rng* rng) const {
  BatchForward out;
  out.embeddings.resize(static_cast<Eigen::Index>(clips.size()),
                        embedding_dim());
  out.clips.resize(clips.size());
  for (size_t i = 0; i < clips.size(); ++i) {
    const Clip& clip = *clips[i];
    if (clip.sample_rate != expected_sample_rate()) {
      throw runtime_error("forward_batch: clip at " +
                          std::to_string(clip.sample_rate) +
                          " Hz, backbone expects " +
                          std::to_string(expected_sample_rate()) + " Hz");
    }
    ClipForward& cf = out.clips[i];
    BackboneOutput features = backbone_->forward(
        clip.samples, lora_.has_value() ? &*lora_ : nullptr, training, rng,
        &cf.backbone);
    check_finite_layers(features);
    cf.num_frames = static_cast<int>(features.layers[0].rows());
    cf.flat = pool_and_flatten(features);
    cf.relu_flat = cf.flat.cwiseMax(0.0);
    out.embeddings.row(static_cast<Eigen::Index>(i)) =
        (head_w_ * cf.relu_flat + head_b_.col(0)).transpose();
  }
  return out;
}

void EncoderModel::zero_grads() {
  head_w_grad_.setZero();
  head_b_grad_.setZero();
  if (lora_.has_value()) lora_->zero_grads();
  backbone_->zero_base_grads();
}

void EncoderModel::backward_batch(const BatchForward& forward,
                                  const Eigen::MatrixXd& d_embeddings) {
  const BackboneConfig& cfg = backbone_->config();
  const Eigen::Index width = cfg.width;
  const int layers = cfg.num_layers();
  const bool base_grads = mode_ == AdaptationMode::kTransformerFinetune;
  LoraState* lora =
      (mode_ == AdaptationMode::kLora && lora_.has_value()) ? &*lora_ : nullptr;

  for (size_t i = 0; i < forward.clips.size(); ++i) {
    const ClipForward& cf = forward.clips[i];
    const Vector de =
        d_embeddings.row(static_cast<Eigen::Index>(i)).transpose();

    head_w_grad_.noalias() += de * cf.relu_flat.transpose();
    head_b_grad_.col(0) += de;

    Vector d_flat = head_w_.transpose() * de;
    for (Eigen::Index j = 0; j < d_flat.size(); ++j) {
      if (cf.flat(j) <= 0.0) d_flat(j) = 0.0;
    }

    std::vector<Matrix> d_layers(static_cast<size_t>(layers));
    const double inv_t = 1.0 / static_cast<double>(cf.num_frames);
    for (int l = 0; l < layers; ++l) {
      Eigen::RowVectorXd g =
          d_flat.segment(static_cast<Eigen::Index>(l) * width, width)
              .transpose() *
          inv_t;
      d_layers[static_cast<size_t>(l)] =
          Vector::Ones(cf.num_frames) * g;  // rows all equal
    }
    backbone_->backward(*cf.backbone, d_layers, lora, base_grads);
  }
}

std::vector<ParamSlot> EncoderModel::trainable_params() {
  std::vector<ParamSlot> slots;
  slots.push_back({"head.w", head_w_.data(), head_w_grad_.data(),
                   head_w_.size(), false});
  slots.push_back({"head.b", head_b_.data(), head_b_grad_.data(),
                   head_b_.size(), false});
  if (mode_ == AdaptationMode::kLora) {
    LoraState& state = mutable_lora();
    for (auto& [name, adapter] : state.adapters) {
      LoraAdapter& g = state.grads.at(name);
      slots.push_back({"lora." + name + ".a", adapter.a.data(), g.a.data(),
                       adapter.a.size(), true});
      slots.push_back({"lora." + name + ".b", adapter.b.data(), g.b.data(),
                       adapter.b.size(), true});
    }
  } else if (mode_ == AdaptationMode::kTransformerFinetune) {
    backbone_->visit_params([&slots](const std::string& name, Matrix& value,
                                     Matrix* grad, ParamGroup group) {
      if (group != ParamGroup::kTransformer || grad == nullptr) return;
      slots.push_back({name, value.data(), grad->data(), value.size(), false});
    });
  }
  return slots;
}

TrainableReport EncoderModel::trainable_report() const {
  TrainableReport report;
  auto add = [&report](const std::string& module, int64_t count,
                       bool trainable) {
    auto& entry = report.by_module[module];
    entry.second += count;
    report.total += count;
    if (trainable) {
      entry.first += count;
      report.trainable += count;
    }
  };

  const bool finetune = mode_ == AdaptationMode::kTransformerFinetune;
  const_cast<Backbone&>(*backbone_).visit_params(
      [&](const std::string& name, Matrix& value, Matrix*, ParamGroup group) {
        const std::string module = name.substr(0, name.find('.'));
        const bool trainable =
            group == ParamGroup::kTransformer && finetune;
        add(module, value.size(), trainable);
      });
  if (lora_.has_value()) {
    for (const auto& [name, adapter] : lora_->adapters) {
      add("lora", adapter.a.size() + adapter.b.size(),
          mode_ == AdaptationMode::kLora);
    }
  }
  add("head", head_w_.size() + head_b_.size(), true);
  report.fraction = report.total > 0 ? static_cast<double>(report.trainable) /
                                           static_cast<double>(report.total)
                                     : 0.0;
  return report;
}

std::string EncoderModel::base_weight_hash() const {
  Sha256 h;
  const_cast<Backbone&>(*backbone_).visit_params(
      [&h](const std::string& name, Matrix& value, Matrix*, ParamGroup) {
        h.update(name);
        h.update(std::string_view(
            reinterpret_cast<const char*>(value.data()),
            static_cast<size_t>(value.size()) * sizeof(double)));
      });
  return h.hex();
}

void EncoderModel::save_checkpoint(const std::string& path) const {
  json header;
  header["kind"] = "laqm-checkpoint";
  header["backbone_id"] = backbone_->config().id;
  header["backbone_revision"] = backbone_->revision();
  header["adaptation_mode"] = adaptation_mode_name(mode_);
  header["embedding_dim"] = embedding_dim();
  json echo;
  echo["backbone"] = backbone_config_to_json(backbone_->config());
  if (lora_.has_value()) {
    echo["lora"] = {{"rank", lora_->cfg.rank},
                    {"alpha", lora_->cfg.alpha},
                    {"dropout", lora_->cfg.dropout},
                    {"weight_decay", lora_->cfg.weight_decay},
                    {"targets", lora_->cfg.targets}};
  }
  header["config_echo"] = echo;

  std::vector<std::pair<std::string, const Matrix*>> tensors;
  tensors.emplace_back("head.w", &head_w_);
  tensors.emplace_back("head.b", &head_b_);
  if (lora_.has_value()) {
    for (const auto& [name, adapter] : lora_->adapters) {
      tensors.emplace_back("lora." + name + ".a", &adapter.a);
      tensors.emplace_back("lora." + name + ".b", &adapter.b);
    }
  }
  if (mode_ == AdaptationMode::kTransformerFinetune) {
    const_cast<Backbone&>(*backbone_).visit_params(
        [&tensors](const std::string& name, Matrix& value, Matrix*,
                   ParamGroup group) {
          if (group == ParamGroup::kTransformer) {
            tensors.emplace_back("base." + name, &value);
          }
        });
  }
  save_tensor_file(path, tensors, header);
}

EncoderModel EncoderModel::load_checkpoint(const std::string& path,
                                           const BackboneProvider& provider) {
  TensorFile file = load_tensor_file(path);
  if (file.header.value("kind", "") != "laqm-checkpoint") {
    throw runtime_error("not a checkpoint file: " + path);
  }
  const std::string backbone_id = file.header.at("backbone_id");
  const json& echo_in = file.header.at("config_echo");
  std::shared_ptr<Backbone> backbone = provider(backbone_id, echo_in);
  if (backbone == nullptr) {
    throw config_error("no backbone available for id '" + backbone_id + "'");
  }
  if (backbone->config().id != backbone_id) {
    throw config_error("checkpoint backbone id '" + backbone_id +
                       "' does not match provided backbone '" +
                       backbone->config().id + "'");
  }
  const std::string revision = file.header.value("backbone_revision", "");
  if (revision != backbone->revision()) {
    throw config_error(
        "checkpoint was trained on backbone revision '" + revision +
        "' but the provided backbone is '" + backbone->revision() + "'");
  }

  EncoderModel model(backbone, file.header.at("embedding_dim").get<int>(),
                     /*init_seed=*/0);
  const json& echo = echo_in;
  if (echo.contains("lora")) {
    LoraConfig cfg;
    cfg.rank = echo["lora"].at("rank").get<int>();
    cfg.alpha = echo["lora"].at("alpha").get<double>();
    cfg.dropout = echo["lora"].at("dropout").get<double>();
    cfg.weight_decay = echo["lora"].at("weight_decay").get<double>();
    cfg.targets = echo["lora"].at("targets").get<std::vector<std::string>>();
    model.apply_lora(cfg, /*seed=*/0);
  }

  auto need = [&file, &path](const std::string& name) -> const Matrix& {
    auto it = file.tensors.find(name);
    if (it == file.tensors.end()) {
      throw runtime_error("checkpoint misses tensor '" + name + "': " + path);
    }
    return it->second;
  };
  model.head_w_ = need("head.w");
  model.head_b_ = need("head.b");
  model.head_w_grad_ = Matrix::Zero(model.head_w_.rows(), model.head_w_.cols());
  model.head_b_grad_ = Matrix::Zero(model.head_b_.rows(), 1);
  if (model.lora_.has_value()) {
    for (auto& [name, adapter] : model.lora_->adapters) {
      adapter.a = need("lora." + name + ".a");
      adapter.b = need("lora." + name + ".b");
    }
    model.lora_->zero_grads();
  }
  const AdaptationMode mode =
      adaptation_mode_from_name(file.header.at("adaptation_mode"));
  if (mode == AdaptationMode::kTransformerFinetune) {
    model.backbone_->visit_params([&](const std::string& name, Matrix& value,
                                      Matrix*, ParamGroup group) {
      if (group == ParamGroup::kTransformer) {
        value = need("base." + name);
      }
    });
  }
  model.set_adaptation_mode(mode);
  return model;
}

}  // namespace laqm
