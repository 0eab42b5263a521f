#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ugtsr/models.hpp"
#include "ugtsr/optimizer.hpp"

namespace ugtsr {

// Versioned binary container of named parameter tensors plus the training
// phase, config fingerprint, and (optionally) optimizer moments. Round trips
// are bit-exact; save -> load -> save yields identical bytes.
struct Checkpoint {
  std::string phase;  // "pretrain", "stage1", or "stage2"
  std::uint64_t config_hash = 0;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<char> optimizer_state;  // opaque Adam blob, may be empty
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);

// Throws on bad magic/version. When `expected_phase` is non-empty, a phase
// mismatch throws (loading a stage-2 checkpoint into a stage-1 pipeline must
// fail loudly); same for a nonzero `expected_config_hash`.
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_phase = "",
                           std::uint64_t expected_config_hash = 0);

// Capture every model parameter (named "<group>/<index>") plus, when given,
// the optimizer's moment state.
Checkpoint snapshot_model(const SrModel& model, const std::string& phase,
                          std::uint64_t config_hash, std::int64_t step,
                          const Adam* optimizer = nullptr);

// Writes checkpoint tensors back into the model; every parameter must be
// present with a matching shape. Optimizer state is restored when both sides
// carry it.
void restore_model(SrModel& model, const Checkpoint& ck, Adam* optimizer = nullptr);

}  // namespace ugtsr
