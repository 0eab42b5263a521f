#pragma once

#include <vector>

#include "ugtsr/autodiff.hpp"
#include "ugtsr/image.hpp"

namespace ugtsr {

struct LossWeights {
  double alpha = 1.0;       // latent Gram-matrix weight
  double beta = 0.25;       // latent L2 weight
  double lambda_adv = 0.1;  // adversarial weight

  void validate() const;  // throws on negative weights
};

// Uncertainty-weighted stage objectives. `x` is the target image {C,H,W},
// `f` the prediction, `s` a single-channel log-variance map {1,H,W}. The
// per-pixel residual sums |x-f| over color channels; the mean runs over
// pixels.
//
//   esu: mean_i[ exp(-s_i) * r_i + 2 s_i ]
//   udl: mean_i[ (s_i - min_j s_j) * r_i ]
ad::Var esu_loss(const ad::Var& x, const ad::Var& f, const ad::Var& s);
ad::Var udl_loss(const ad::Var& x, const ad::Var& f, const ad::Var& s);
ad::Var esu_loss(const ImagePatch& x, const ad::Var& f, const ad::Var& s);
ad::Var udl_loss(const ImagePatch& x, const ad::Var& f, const ad::Var& s);

// Mean absolute difference over all elements.
ad::Var l1_loss(const ad::Var& x, const ad::Var& f);
ad::Var l1_loss(const ImagePatch& x, const ad::Var& f);

// Mean squared difference between two feature stacks (callers supply the
// frozen extractor's outputs for both images).
ad::Var perceptual_loss(const ad::Var& phi_a, const ad::Var& phi_b);

struct AdvLosses {
  ad::Var generator;      // -mean log D(fake), non-saturating form
  ad::Var discriminator;  // -mean log D(real) - mean log(1 - D(fake))
};
// Inputs are per-patch probability maps; values outside (0,1) throw.
AdvLosses adversarial_losses(const ad::Var& d_real, const ad::Var& d_fake);

// beta * sum((z - z_gt)^2)/(h*w)
//   + alpha * sum((gram(z) - gram(z_gt))^2),  gram(t) = t^T t / (h*w).
// Token matrices are {h*w, n_z}; the target is typically a constant.
ad::Var codebook_loss(const ad::Var& z_tokens, const ad::Var& z_gt_tokens, int h, int w,
                      const LossWeights& weights);

struct StageLossComponents {
  ad::Var codebook;
  ad::Var l1;
  ad::Var perceptual;
  ad::Var adversarial;  // generator-side term, unweighted
  ad::Var uncertainty;  // esu for stage 1, udl for stage 2
};

// codebook + l1 + perceptual + lambda_adv*adversarial + uncertainty.
// Throws when any component is missing or the stage is not 1 or 2.
ad::Var stage_total(int stage, const StageLossComponents& parts, const LossWeights& weights);

// Classic aleatoric-regression objective with 1/(2*sigma^2) weighting, kept
// as a documented reference point for tests; no training phase uses it.
double background_uncertainty_reference(const std::vector<double>& x,
                                        const std::vector<double>& f,
                                        const std::vector<double>& sigma2);

}  // namespace ugtsr
