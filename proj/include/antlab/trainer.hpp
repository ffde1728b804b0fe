// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "antlab/checkpoint.hpp"
#include "antlab/corpus.hpp"
#include "antlab/denoiser.hpp"
#include "antlab/diffusion.hpp"

namespace antlab {

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 2e-3;
  std::size_t iterations = 2000;
  double cond_dropout = 0.1;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global gradient norm bound; 0 disables
  std::size_t val_every = 100;
  LrSchedule lr_schedule = LrSchedule::kCosine;  // cosine decays lr to 0 at `iterations`

  /// Learning rate applied by the update that completes step `step` + 1.
  double lr_at(std::size_t step) const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Decoupled weight decay with bias-corrected adaptive moments.
struct AdamW {
  std::size_t step = 0;
  std::map<std::string, std::vector<double>> m, v;

  /// Applies one update from the accumulated parameter gradients.
  void update(Model& model, const TrainConfig& cfg);
};

struct TrainBatch {
  std::vector<const Pair*> pairs;
  std::vector<int> ts;
  std::vector<Tensor> eps;  // one [N, d_m] draw per pair
};

/// Batch of step `step`: pairs drawn with replacement, t uniform in [1, T],
/// standard normal noise. A function of (cfg.seed, step) alone.
TrainBatch draw_batch(const std::vector<Pair>& train, const TrainConfig& cfg, std::size_t step, int T);

/// Mean squared x0 error of one batch; entries with drop[i] != 0 see the null
/// condition.
Var batch_loss(Tape& tape, Model& model, const TrainBatch& batch, const std::vector<unsigned char>& drop,
               const NoiseSchedule& sched);

/// Draws per-sample condition dropout from `rng`, runs forward and backward,
/// applies one AdamW update and returns the loss. Throws std::runtime_error on
/// a non-finite loss.
double training_step(Model& model, AdamW& opt, const TrainBatch& batch, Rng& rng, const NoiseSchedule& sched,
                     const TrainConfig& cfg);

/// Conditioned loss on every validation pair with fixed (t, eps) draws.
double validation_loss(Model& model, const std::vector<Pair>& val, const NoiseSchedule& sched, std::uint64_t seed);

struct TrainLogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double val_loss = 0.0;
  bool has_val = false;
};

struct TrainState {
  Model model;
  AdamW opt;
  std::vector<TrainLogRow> log;
};

/// Runs steps opt.step .. stop_at - 1. Validation loss is logged at step 0
/// (before any update) and after every cfg.val_every-th step.
void train(TrainState& state, const std::vector<Pair>& train_set, const std::vector<Pair>& val_set,
           const TrainConfig& cfg, std::size_t stop_at, const std::function<void(const TrainLogRow&)>& on_row = {});

std::string train_log_csv(const std::vector<TrainLogRow>& log);

/// Parameters, optimizer moments, step counter and log in one container; the
/// manifest carries the architecture hash and `config_echo`.
Checkpoint make_training_checkpoint(TrainState& state, const std::string& config_echo_json);
/// Restores into `state`, whose model must already have the checkpoint's
/// architecture. Throws std::runtime_error on a hash mismatch.
void resume_training(TrainState& state, const Checkpoint& ckpt);

}  // namespace antlab
