#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ugtsr/checkpoint.hpp"
#include "ugtsr/config.hpp"
#include "ugtsr/dataset.hpp"
#include "ugtsr/models.hpp"

namespace ugtsr {

// Ablation variants toggle the stage-2 modules:
//   baseline     plain L1/perceptual/adversarial stage 2 (no uncertainty
//                weighting), nearest-neighbor matching, no cross-attention
//   uncertainty  + residuals weighted by the frozen uncertainty map
//   top3 / top5  + candidate fusion with k = 3 / 5
//   aa           + cross-attention injection (on top of top-3 fusion)
//   full         everything, k = 3
// Stage 1 and codebook pretraining are shared by all variants.
struct VariantSpec {
  bool use_udl = true;
  bool use_topk = true;
  bool use_align = true;
  int k = 3;
};
VariantSpec variant_spec(const std::string& name);

struct TrainResult {
  std::string checkpoint_path;
  std::vector<double> losses;  // per-step totals, in step order
  // Loss components on a fixed validation batch before the first step and
  // after the last one.
  std::map<std::string, double> first_val;
  std::map<std::string, double> last_val;
};

// Runs one phase ("pretrain", "stage1", "stage2") end to end:
//  - loads the dataset named by the config and the prerequisite checkpoint
//    (phase and config-hash guarded),
//  - trains with the phase's freeze schedule (pretrain: HR encoder + codebook
//    + decoder; stage 1: LQ branch + uncertainty head; stage 2: LQ branch +
//    fusion + cross-attention, uncertainty head frozen),
//  - writes per-step loss lines to <out>/<phase>_losses.jsonl, periodic
//    checkpoints to <out>/<phase>_step_<n>.ckpt, and the final
//    <out>/<phase>.ckpt.
// With resume=true, training continues from the newest periodic checkpoint
// and reproduces the unbroken run bit-exactly (batch sampling and the
// learning-rate schedule are pure functions of (seed, phase, step, budget)).
// halt_after > 0 aborts the run after that many steps without writing the
// final phase checkpoint, simulating an interruption; the configured budget
// (and with it the learning-rate schedule) is unchanged, so a later resume
// lands on the unbroken trajectory.
// Throws on non-finite losses and on frozen-parameter drift.
TrainResult run_phase(const RunConfig& cfg, const std::string& phase, bool resume = false,
                      std::int64_t halt_after = -1);

// Builds the model for a phase (variant toggles applied for stage 2) and
// restores the given checkpoint into it.
SrModel build_model_for_phase(const RunConfig& cfg, const std::string& phase);
SrModel load_model(const RunConfig& cfg, const std::string& checkpoint_path,
                   const std::string& expected_phase);

// VQ health probes on a dataset split (value-only forwards).
double reconstruction_mse(SrModel& model, const Dataset& ds, const std::string& split);
// Fraction of codebook entries selected at least once.
double code_usage_fraction(SrModel& model, const Dataset& ds, const std::string& split);

// Runs stage 2 + evaluation for each variant on top of a shared pretrain and
// stage-1 run; returns variant -> mean Y-channel PSNR (dB) on the validation
// split and writes <out>/ablation.csv including a bicubic row.
std::map<std::string, double> run_ablation(const RunConfig& cfg,
                                           const std::vector<std::string>& variants);

}  // namespace ugtsr
