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

#ifndef LAQM_TRAINER_HPP_
#define LAQM_TRAINER_HPP_

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "laqm/encoder.hpp"
#include "laqm/manifest.hpp"
#include "laqm/rnc.hpp"

namespace laqm {

struct TrainConfig {
  int batch_size = 32;
  std::optional<double> initial_lr;  // per-mode default when unset
  double decay_factor = 0.99;
  int patience_epochs = 10;
  double clean_fraction = 0.125;
  int max_epochs = 0;  // required, no default
  uint64_t seed = 0;
  AdaptationMode mode = AdaptationMode::kLora;
  RncConfig loss;
  double improvement_eps = 1e-6;
  bool log_wallclock = false;  // off = reference mode, wallclock logged as 0

  std::string metrics_path;
  std::string checkpoint_best;
  std::string checkpoint_last;

  double resolved_initial_lr() const;
};

// 1e-4 for LoRA (and head-only), 5e-5 for transformer fine-tune.
double default_initial_lr(AdaptationMode mode);

struct TrainBatch {
  std::vector<size_t> record_indices;  // into the manifest
  std::vector<const Clip*> clips;
  std::vector<SurrogateLabel> labels;
};

// Loads and caches waveforms; every clip must be at the expected rate.
class ClipStore {
 public:
  ClipStore(const Manifest& manifest, int expected_rate);
  const Clip& get(size_t record_index);

 private:
  const Manifest& manifest_;
  int expected_rate_;
  std::unordered_map<size_t, Clip> cache_;
};

// One batch: round(clean_fraction * N) clean items plus coded items for the
// remainder, drawn uniformly without replacement within each stratum.
TrainBatch sample_batch(const Manifest& manifest, const TrainConfig& cfg,
                        Rng& rng, ClipStore& store);

// Decoupled-weight-decay adaptive-moment optimizer.
class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<ParamSlot>& slots, double lr, double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      moments_;
};

// Mean batch loss over a fixed, seeded partition of the val split;
// deterministic for a given model. Dropout disabled.
double validate(EncoderModel& model, const Manifest& manifest,
                const TrainConfig& cfg, ClipStore& store);

// Plateau-decay schedule: lr stays at the initial value until the number of
// epochs since the last improvement exceeds the patience, then decays by
// `decay` after every further epoch without improvement. Improvement means
// the val loss dropped by at least `eps`.
class PlateauLrSchedule {
 public:
  PlateauLrSchedule(double initial_lr, double decay, int patience, double eps)
      : lr_(initial_lr), decay_(decay), patience_(patience), eps_(eps) {}

  // Call once per epoch with the validation loss; returns the lr for the
  // following epoch.
  double observe(double val_loss);

  double lr() const { return lr_; }
  bool improved_last() const { return improved_last_; }
  double best() const { return best_; }
  int epochs_since_improvement() const { return epochs_since_improvement_; }

 private:
  double lr_;
  double decay_;
  int patience_;
  double eps_;
  double best_ = std::numeric_limits<double>::infinity();
  int epochs_since_improvement_ = 0;
  bool improved_last_ = false;
};

struct TrainResult {
  int epochs_run = 0;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  double final_val_loss = 0.0;
  double final_lr = 0.0;
  int64_t steps = 0;
};

// Optimization loop: per epoch one full pass over the coded training
// records (clean records resampled per batch), validation, best/last
// checkpoints, exponential lr decay after `patience_epochs` epochs without
// improvement. Appends line-delimited metrics records.
TrainResult train(EncoderModel& model, const Manifest& manifest,
                  const TrainConfig& cfg);

}  // namespace laqm

#endif  // LAQM_TRAINER_HPP_
