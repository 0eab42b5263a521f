#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ugtsr/dataset.hpp"
#include "ugtsr/losses.hpp"
#include "ugtsr/models.hpp"

namespace ugtsr {

struct TrainSchedule {
  int pretrain_steps = 2000;
  int stage1_steps = 2000;
  int stage2_steps = 3000;
  int batch_size = 8;
  double lr = 1e-4;
  double disc_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.1;  // adversarial weight ramps over this head of the run
  double commit_weight = 0.25;   // encoder commitment term in VQ pretraining
  bool warm_start_stage2 = true; // stage-2 LQ branch starts from stage-1 weights
  int checkpoint_every = 500;
  LossWeights weights;
  std::string variant = "full";  // ablation switch, see training module

  void validate() const;
};

// Everything one run needs. The master seed feeds the model and every
// training stream; dataset generation keeps its own seed so one dataset can
// serve many runs.
struct RunConfig {
  DatasetConfig data;
  ModelConfig model;
  TrainSchedule train;
  std::string out_dir;
  std::uint64_t seed = 1;

  void validate() const;
};

// Canonical (sorted-key) JSON round trip.
std::string config_to_json_text(const RunConfig& cfg);
RunConfig config_from_json_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

// Fingerprint of the fields that define checkpoint compatibility: model
// architecture (scale, n_z, K, d_k), master seed, and dataset identity.
// Deliberately excludes step budgets and ablation toggles so checkpoints
// flow between phases and variants of the same run.
std::uint64_t config_hash(const RunConfig& cfg);

// Writes the effective config verbatim to <dir>/config.json (creating dirs).
void snapshot_config(const RunConfig& cfg, const std::string& dir);

}  // namespace ugtsr
