// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "antlab/guidance.hpp"
#include "antlab/trainer.hpp"

namespace antlab {

/// Every setting a subcommand can read. The JSON form uses the field names
/// below; each has a flag of the same name with dashes (--skip-frac).
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string corpus;      // empty: <out_dir>/corpus.jsonl
  std::string checkpoint;  // empty: <out_dir>/model.ck
  std::size_t corpus_size = 2000;

  int T = 50;
  bool no_sta = false;
  std::string sta_sigma = "statistic";  // or "learned"

  std::size_t iterations = 2000;
  std::size_t batch_size = 32;
  double lr = 2e-3;
  std::string lr_schedule = "cosine";  // or "constant"
  double cond_dropout = 0.1;
  double weight_decay = 1e-4;
  double grad_clip = 1.0;
  std::size_t val_every = 100;
  bool resume = false;

  double omega_max = 3.0;
  double omega_min = 1.5;
  double lambda = 1.5;
  double skip_frac = 0.5;
  bool static_cfg = false;
  bool literal_skip = false;
  int steps = 10;
  std::string sampler = "2m";  // or "first-order"

  std::vector<std::string> prompts;  // empty: the validation split
  std::size_t n_samples = 64;
  std::size_t eval_reps = 20;
  std::size_t eval_prompts = 64;

  std::size_t draws = 10000;
  std::size_t bench_reps = 7;
  std::size_t bench_warmup = 2;
  std::size_t bench_batch = 32;
  double bench_max_ratio = 0.85;
  std::vector<double> grid_omega_min{1.0, 1.5, 2.0};
  std::vector<double> grid_omega_max{2.5, 3.0, 3.5};
  std::size_t grid_reps = 3;
  std::size_t grid_prompts = 32;
  std::size_t attention_prompts = 64;

  std::string corpus_path() const;
  std::string checkpoint_path() const;
  GuidancePolicy policy() const;
  ModelOptions model_options() const;
  TrainConfig train_config() const;
  SamplerMethod sampler_method() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Throws std::invalid_argument naming any unknown key or mistyped value.
RunConfig config_from_json(const nlohmann::json& j);

/// `args` excludes the program name: <command> [--config file] [--flag value]...
/// Settings resolve as flags > config file > defaults. Returns 0 when every
/// check passes, 1 when a verification fails, 2 on a usage or runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace antlab
