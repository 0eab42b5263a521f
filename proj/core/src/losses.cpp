#include "ugtsr/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ugtsr {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_image_pair(const ad::Var& x, const ad::Var& f) {
  require(x->value.rank() == 3 && x->value.same_shape(f->value),
          "loss: image shapes must match, got " + x->value.shape_str() + " vs " +
              f->value.shape_str());
}

void require_s_map(const ad::Var& x, const ad::Var& s) {
  require(s->value.rank() == 3 && s->value.dim(0) == 1 && s->value.dim(1) == x->value.dim(1) &&
              s->value.dim(2) == x->value.dim(2),
          "loss: uncertainty map must be {1,H,W} matching the images");
}

// Per-pixel residual column {H*W, 1}: |x - f| summed over channels.
ad::Var residual_column(const ad::Var& x, const ad::Var& f) {
  const int hw = x->value.dim(1) * x->value.dim(2);
  return ad::reshape(ad::sum_channels(ad::abs(ad::sub(x, f))), {hw, 1});
}

}  // namespace

void LossWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || lambda_adv < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

ad::Var esu_loss(const ad::Var& x, const ad::Var& f, const ad::Var& s) {
  require_image_pair(x, f);
  require_s_map(x, s);
  const int hw = x->value.dim(1) * x->value.dim(2);
  const ad::Var r = residual_column(x, f);
  const ad::Var s_col = ad::reshape(s, {hw, 1});
  const ad::Var term = ad::add(ad::mul(ad::exp(ad::neg(s_col)), r), ad::scale(s_col, 2.0));
  return ad::mean_all(term);
}

ad::Var udl_loss(const ad::Var& x, const ad::Var& f, const ad::Var& s) {
  require_image_pair(x, f);
  require_s_map(x, s);
  const int hw = x->value.dim(1) * x->value.dim(2);
  const ad::Var r = residual_column(x, f);
  const ad::Var s_col = ad::reshape(s, {hw, 1});
  const ad::Var mn_col = ad::repeat_rows(ad::reshape(ad::min_all(s), {1, 1}), hw);
  const ad::Var s_hat = ad::sub(s_col, mn_col);
  return ad::mean_all(ad::mul(s_hat, r));
}

ad::Var esu_loss(const ImagePatch& x, const ad::Var& f, const ad::Var& s) {
  return esu_loss(ad::constant(x.data), f, s);
}

ad::Var udl_loss(const ImagePatch& x, const ad::Var& f, const ad::Var& s) {
  return udl_loss(ad::constant(x.data), f, s);
}

ad::Var l1_loss(const ad::Var& x, const ad::Var& f) {
  require(x->value.same_shape(f->value), "l1_loss: shape mismatch, got " + x->value.shape_str() +
                                             " vs " + f->value.shape_str());
  return ad::mean_all(ad::abs(ad::sub(x, f)));
}

ad::Var l1_loss(const ImagePatch& x, const ad::Var& f) {
  return l1_loss(ad::constant(x.data), f);
}

ad::Var perceptual_loss(const ad::Var& phi_a, const ad::Var& phi_b) {
  require(phi_a->value.same_shape(phi_b->value), "perceptual_loss: feature shape mismatch");
  return ad::mean_all(ad::square(ad::sub(phi_a, phi_b)));
}

AdvLosses adversarial_losses(const ad::Var& d_real, const ad::Var& d_fake) {
  for (const ad::Var& p : {d_real, d_fake}) {
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      if (!(p->value[i] > 0.0 && p->value[i] < 1.0)) {
        throw std::invalid_argument("adversarial_losses: probabilities must lie in (0,1)");
      }
    }
  }
  const ad::Var one_minus_fake = ad::add_scalar(ad::neg(d_fake), 1.0);
  AdvLosses out;
  out.generator = ad::neg(ad::mean_all(ad::log(d_fake)));
  out.discriminator = ad::neg(
      ad::add(ad::mean_all(ad::log(d_real)), ad::mean_all(ad::log(one_minus_fake))));
  return out;
}

ad::Var codebook_loss(const ad::Var& z_tokens, const ad::Var& z_gt_tokens, int h, int w,
                      const LossWeights& weights) {
  weights.validate();
  require(z_tokens->value.rank() == 2 && z_tokens->value.same_shape(z_gt_tokens->value),
          "codebook_loss: token shape mismatch");
  require(h >= 1 && w >= 1 && z_tokens->value.rows() == h * w,
          "codebook_loss: token rows must equal h*w");
  const double inv_hw = 1.0 / (static_cast<double>(h) * w);

  const ad::Var l2 =
      ad::scale(ad::sum_all(ad::square(ad::sub(z_tokens, z_gt_tokens))), weights.beta * inv_hw);

  const ad::Var gram_a = ad::scale(ad::matmul(ad::transpose(z_tokens), z_tokens), inv_hw);
  const ad::Var gram_b = ad::scale(ad::matmul(ad::transpose(z_gt_tokens), z_gt_tokens), inv_hw);
  const ad::Var gram = ad::scale(ad::sum_all(ad::square(ad::sub(gram_a, gram_b))), weights.alpha);

  return ad::add(l2, gram);
}

ad::Var stage_total(int stage, const StageLossComponents& parts, const LossWeights& weights) {
  weights.validate();
  require(stage == 1 || stage == 2, "stage_total: stage must be 1 or 2");
  const char* names[] = {"codebook", "l1", "perceptual", "adversarial", "uncertainty"};
  const ad::Var* vars[] = {&parts.codebook, &parts.l1, &parts.perceptual, &parts.adversarial,
                           &parts.uncertainty};
  for (int i = 0; i < 5; ++i) {
    if (!*vars[i]) {
      throw std::invalid_argument(std::string("stage_total: missing component '") + names[i] +
                                  "'");
    }
    require((*vars[i])->value.size() == 1, "stage_total: components must be scalars");
  }
  ad::Var total = ad::add(parts.codebook, parts.l1);
  total = ad::add(total, parts.perceptual);
  total = ad::add(total, ad::scale(parts.adversarial, weights.lambda_adv));
  return ad::add(total, parts.uncertainty);
}

double background_uncertainty_reference(const std::vector<double>& x,
                                        const std::vector<double>& f,
                                        const std::vector<double>& sigma2) {
  if (x.size() != f.size() || x.size() != sigma2.size() || x.empty()) {
    throw std::invalid_argument("background reference: sizes must match and be non-empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(sigma2[i] > 0.0)) throw std::invalid_argument("background reference: sigma^2 must be > 0");
    const double d = x[i] - f[i];
    total += d * d / (2.0 * sigma2[i]) + 0.5 * std::log(sigma2[i]);
  }
  return total / static_cast<double>(x.size());
}

}  // namespace ugtsr
