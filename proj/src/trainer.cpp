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

#include "laqm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "laqm/errors.hpp"

using nlohmann::json;

namespace laqm {

double default_initial_lr(AdaptationMode mode) {
  return mode == AdaptationMode::kTransformerFinetune ? 5e-5 : 1e-4;
}

double TrainConfig::resolved_initial_lr() const {
  return initial_lr.value_or(default_initial_lr(mode));
}

ClipStore::ClipStore(const Manifest& manifest, int expected_rate)
    : manifest_(manifest), expected_rate_(expected_rate) {}

const Clip& ClipStore::get(size_t record_index) {
  auto it = cache_.find(record_index);
  if (it != cache_.end()) return it->second;
  const ClipRecord& rec = manifest_.records.at(record_index);
  const std::string path = manifest_.resolve_path(rec.clip_path);
  AudioBuffer buf = read_wav(path);
  if (buf.sample_rate != expected_rate_) {
    throw runtime_error("clip '" + rec.clip_path + "' is at " +
                        std::to_string(buf.sample_rate) + " Hz, expected " +
                        std::to_string(expected_rate_) + " Hz");
  }
  Clip clip;
  clip.samples = downmix_to_mono(buf);
  clip.sample_rate = buf.sample_rate;
  clip.source_id = rec.source_id;
  clip.offset_seconds = rec.offset_seconds;
  return cache_.emplace(record_index, std::move(clip)).first->second;
}

namespace {

void fill_batch_items(TrainBatch& batch, const Manifest& manifest,
                      ClipStore& store) {
  for (size_t idx : batch.record_indices) {
    batch.clips.push_back(&store.get(idx));
    batch.labels.push_back(manifest.records[idx].label());
  }
}

}  // namespace

TrainBatch sample_batch(const Manifest& manifest, const TrainConfig& cfg,
                        Rng& rng, ClipStore& store) {
  if (cfg.batch_size < 2) throw config_error("batch_size must be >= 2");
  const auto clean = manifest.indices(Split::kTrain, /*clean=*/true);
  const auto coded = manifest.indices(Split::kTrain, /*clean=*/false);

  const size_t n_clean = static_cast<size_t>(
      std::lround(cfg.clean_fraction * cfg.batch_size));
  const size_t n_coded = static_cast<size_t>(cfg.batch_size) - n_clean;
  if (n_clean > clean.size()) {
    throw runtime_error("sampling: clean train stratum has " +
                        std::to_string(clean.size()) + " records, batch needs " +
                        std::to_string(n_clean));
  }
  if (n_coded > coded.size()) {
    throw runtime_error("sampling: coded train stratum has " +
                        std::to_string(coded.size()) + " records, batch needs " +
                        std::to_string(n_coded));
  }

  TrainBatch batch;
  for (size_t pos : rng.sample_without_replacement(clean.size(), n_clean)) {
    batch.record_indices.push_back(clean[pos]);
  }
  for (size_t pos : rng.sample_without_replacement(coded.size(), n_coded)) {
    batch.record_indices.push_back(coded[pos]);
  }
  fill_batch_items(batch, manifest, store);
  return batch;
}

void AdamW::step(std::vector<ParamSlot>& slots, double lr,
                 double weight_decay) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (ParamSlot& slot : slots) {
    auto& [m, v] = moments_[slot.name];
    if (m.empty()) {
      m.assign(static_cast<size_t>(slot.size), 0.0);
      v.assign(static_cast<size_t>(slot.size), 0.0);
    }
    const double wd = slot.weight_decay ? weight_decay : 0.0;
    for (Eigen::Index i = 0; i < slot.size; ++i) {
      const double g = slot.grad[i];
      m[static_cast<size_t>(i)] =
          beta1_ * m[static_cast<size_t>(i)] + (1.0 - beta1_) * g;
      v[static_cast<size_t>(i)] =
          beta2_ * v[static_cast<size_t>(i)] + (1.0 - beta2_) * g * g;
      const double m_hat = m[static_cast<size_t>(i)] / bc1;
      const double v_hat = v[static_cast<size_t>(i)] / bc2;
      slot.value[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps_) +
                             wd * slot.value[i]);
    }
  }
}

namespace {

// Fixed, seeded partition of the val split into batches.
std::vector<std::vector<size_t>> val_partition(const Manifest& manifest,
                                               const TrainConfig& cfg) {
  auto all = manifest.indices(Split::kVal);
  if (all.empty()) throw runtime_error("validate: val split is empty");
  auto coded = manifest.indices(Split::kVal, /*clean=*/false);
  if (coded.empty()) {
    throw runtime_error("validate: coded val stratum is empty");
  }
  Rng rng = Rng::substream(cfg.seed, "val-partition");
  rng.shuffle(all);
  std::vector<std::vector<size_t>> batches;
  for (size_t pos = 0; pos < all.size(); pos += cfg.batch_size) {
    size_t end = std::min(all.size(), pos + cfg.batch_size);
    batches.emplace_back(all.begin() + static_cast<long>(pos),
                         all.begin() + static_cast<long>(end));
  }
  // A trailing 1-item batch cannot be scored; fold it into its predecessor.
  if (batches.size() > 1 && batches.back().size() < 2) {
    auto tail = batches.back();
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  if (batches.back().size() < 2) {
    throw runtime_error("validate: val split has fewer than 2 records");
  }
  return batches;
}

double mean_batch_loss(EncoderModel& model, const Manifest& manifest,
                       const TrainConfig& cfg, ClipStore& store,
                       const std::vector<std::vector<size_t>>& batches) {
  double total = 0.0;
  for (const auto& indices : batches) {
    TrainBatch batch;
    batch.record_indices = indices;
    fill_batch_items(batch, manifest, store);
    BatchForward fwd =
        model.forward_batch(batch.clips, /*training=*/false, nullptr);
    total += rnc_batch(batch.labels, fwd.embeddings, cfg.loss);
  }
  return total / static_cast<double>(batches.size());
}

}  // namespace

double validate(EncoderModel& model, const Manifest& manifest,
                const TrainConfig& cfg, ClipStore& store) {
  return mean_batch_loss(model, manifest, cfg, store,
                         val_partition(manifest, cfg));
}

double PlateauLrSchedule::observe(double val_loss) {
  improved_last_ = (best_ - val_loss) >= eps_;
  if (improved_last_) {
    best_ = val_loss;
    epochs_since_improvement_ = 0;
  } else {
    ++epochs_since_improvement_;
  }
  if (epochs_since_improvement_ > patience_) {
    lr_ *= decay_;
  }
  return lr_;
}

TrainResult train(EncoderModel& model, const Manifest& manifest,
                  const TrainConfig& cfg) {
  if (cfg.max_epochs <= 0) {
    throw config_error("train: max_epochs must be set (> 0)");
  }
  if (cfg.batch_size < 2) throw config_error("train: batch_size must be >= 2");
  if (cfg.decay_factor <= 0.0 || cfg.decay_factor > 1.0) {
    throw config_error("train: decay_factor must be in (0, 1]");
  }
  if (cfg.clean_fraction < 0.0 || cfg.clean_fraction > 1.0) {
    throw config_error("train: clean_fraction must be in [0, 1]");
  }
  model.set_adaptation_mode(cfg.mode);

  const auto train_clean = manifest.indices(Split::kTrain, /*clean=*/true);
  const auto train_coded = manifest.indices(Split::kTrain, /*clean=*/false);
  if (train_clean.empty() || train_coded.empty()) {
    throw runtime_error(
        "train: the train split needs both clean and coded records");
  }

  ClipStore store(manifest, model.expected_sample_rate());
  std::ofstream metrics;
  if (!cfg.metrics_path.empty()) {
    metrics.open(cfg.metrics_path, std::ios::trunc);
    if (!metrics) {
      throw runtime_error("cannot write metrics log: " + cfg.metrics_path);
    }
  }
  const auto start = std::chrono::steady_clock::now();
  auto wallclock = [&]() -> double {
    if (!cfg.log_wallclock) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  };
  auto log_line = [&metrics](const json& j) {
    if (metrics.is_open()) metrics << j.dump() << "\n" << std::flush;
  };

  Rng sampling = Rng::substream(cfg.seed, "sampling");
  Rng dropout = Rng::substream(cfg.seed, "dropout");
  AdamW optimizer;
  std::vector<ParamSlot> slots = model.trainable_params();
  const double weight_decay =
      (cfg.mode == AdaptationMode::kLora && model.has_lora())
          ? model.lora().cfg.weight_decay
          : 0.0;

  const size_t n_clean_per_batch = static_cast<size_t>(
      std::lround(cfg.clean_fraction * cfg.batch_size));
  const size_t n_coded_per_batch =
      static_cast<size_t>(cfg.batch_size) - n_clean_per_batch;
  if (n_coded_per_batch == 0) {
    throw config_error("train: clean_fraction leaves no room for coded items");
  }
  if (n_clean_per_batch > train_clean.size()) {
    throw runtime_error("train: clean train stratum smaller than the per-batch "
                        "clean quota");
  }

  TrainResult result;
  result.initial_val_loss = validate(model, manifest, cfg, store);
  // Epoch 0 is the reporting baseline; the improvement tracker starts fresh
  // so the first trained epoch counts as an improvement.
  PlateauLrSchedule schedule(cfg.resolved_initial_lr(), cfg.decay_factor,
                             cfg.patience_epochs, cfg.improvement_eps);
  double lr = schedule.lr();
  if (!cfg.checkpoint_best.empty()) model.save_checkpoint(cfg.checkpoint_best);
  log_line(json{{"kind", "epoch"},
                {"epoch", 0},
                {"val_loss", result.initial_val_loss},
                {"lr", lr},
                {"improved", true},
                {"wallclock", wallclock()}});

  int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // One full pass over the coded training records.
    std::vector<size_t> order = train_coded;
    sampling.shuffle(order);
    for (size_t pos = 0; pos < order.size(); pos += n_coded_per_batch) {
      const size_t end = std::min(order.size(), pos + n_coded_per_batch);
      TrainBatch batch;
      for (size_t clean_pos : sampling.sample_without_replacement(
               train_clean.size(), n_clean_per_batch)) {
        batch.record_indices.push_back(train_clean[clean_pos]);
      }
      for (size_t p = pos; p < end; ++p) {
        batch.record_indices.push_back(order[p]);
      }
      if (batch.record_indices.size() < 2) continue;  // degenerate tail
      fill_batch_items(batch, manifest, store);

      BatchForward fwd =
          model.forward_batch(batch.clips, /*training=*/true, &dropout);
      Eigen::MatrixXd grad;
      const double loss =
          rnc_batch_with_grad(batch.labels, fwd.embeddings, cfg.loss, &grad);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "train: non-finite loss at step " << step + 1
           << "; batch manifest indices:";
        for (size_t idx : batch.record_indices) os << " " << idx;
        log_line(json{{"kind", "abort"},
                      {"step", step + 1},
                      {"epoch", epoch},
                      {"indices", batch.record_indices}});
        throw runtime_error(os.str());
      }
      model.zero_grads();
      model.backward_batch(fwd, grad);
      optimizer.step(slots, lr, weight_decay);
      ++step;
      log_line(json{{"kind", "step"},
                    {"step", step},
                    {"epoch", epoch},
                    {"loss", loss},
                    {"lr", lr},
                    {"wallclock", wallclock()}});
    }

    const double val = validate(model, manifest, cfg, store);
    lr = schedule.observe(val);
    const bool improved = schedule.improved_last();
    if (improved && !cfg.checkpoint_best.empty()) {
      model.save_checkpoint(cfg.checkpoint_best);
    }
    log_line(json{{"kind", "epoch"},
                  {"epoch", epoch},
                  {"val_loss", val},
                  {"lr", lr},
                  {"improved", improved},
                  {"wallclock", wallclock()}});
    result.final_val_loss = val;
    result.epochs_run = epoch;
  }

  result.best_val_loss =
      std::isfinite(schedule.best()) ? schedule.best() : result.initial_val_loss;
  result.final_lr = lr;
  result.steps = step;
  if (!cfg.checkpoint_last.empty()) {
    model.save_checkpoint(cfg.checkpoint_last);
  }
  return result;
}

}  // namespace laqm
