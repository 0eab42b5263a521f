#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ugtsr/autodiff.hpp"

namespace ugtsr {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

// Adam over a fixed parameter list. Gradients accumulate on the leaves via
// backward(); step() consumes them. First/second moments serialize so a
// resumed run continues bit-exactly.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, const AdamConfig& cfg);

  void zero_grad();
  // `lr_scale` multiplies the configured rate for this step only, so callers
  // can anneal without touching optimizer state.
  void step(double lr_scale = 1.0);

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<ad::Var>& params() const { return params_; }

  // State layout: step counter then per-parameter moment tensors in order.
  void save_state(std::ostream& out) const;
  void load_state(std::istream& in);

 private:
  std::vector<ad::Var> params_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace ugtsr
