#include "ugtsr/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ugtsr/resample.hpp"
#include "ugtsr/rng.hpp"

namespace ugtsr {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kDiscProbEps = 1e-6;

// Toy channel widths for the encoder/decoder trunk.
constexpr int kW1 = 24, kW2 = 32, kW3 = 40;
// Width of the decoder's full-resolution guidance stem over the skip base.
constexpr int kGuide = 12;
// Output-gate clamp: sigmoid saturation floor for the correction gate.
constexpr double kGateEps = 1e-6;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Tensor identity_matrix(int n) {
  Tensor t = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

}  // namespace

ImagePatch correction_base(const ImagePatch& lr, int scale) {
  // Plain bicubic, deliberately identical to the evaluation baseline: with the
  // correction head initialized to zero the untrained model reproduces that
  // baseline exactly, so training can only be rewarded for genuine detail it
  // adds on top rather than for re-earning detail a pre-smoothed base lost.
  return upscale_bicubic(lr, scale);
}

void ModelConfig::validate() const {
  if (scale != 2 && scale != 4) {
    throw std::invalid_argument("model scale must be 2 or 4, got " + std::to_string(scale));
  }
  if (n_z < 1 || codebook_size < 1 || d_k < 1) {
    throw std::invalid_argument("model dims must be positive");
  }
  if (topk < 1 || topk > codebook_size) {
    throw std::invalid_argument("topk must lie in [1, codebook_size]");
  }
}

ImagePatch image_from_tensor(const Tensor& chw) {
  ImagePatch img;
  img.data = chw;
  img.validate();
  return img;
}

const std::vector<std::string>& SrModel::group_names() {
  static const std::vector<std::string> names = {
      "hr_encoder", "codebook",  "decoder",       "lq_encoder", "unc_head",
      "topk_fusion", "align_attn", "discriminator", "perceptual"};
  return names;
}

ConvLayer SrModel::make_conv(int in_c, int out_c, int k, int stride, double w_std,
                             std::vector<ad::Var>& sink) {
  Rng rng(mix_seed(cfg_.seed, init_counter_++));
  Tensor w = Tensor::zeros({out_c, in_c, k, k});
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, w_std);
  ConvLayer layer;
  layer.w = ad::leaf(std::move(w));
  layer.b = ad::leaf(Tensor::zeros({out_c}));
  layer.stride = stride;
  layer.pad = k / 2;
  sink.push_back(layer.w);
  sink.push_back(layer.b);
  return layer;
}

ad::Var SrModel::conv(const ConvLayer& layer, const ad::Var& x) const {
  return ad::conv2d(x, layer.w, layer.b, layer.stride, layer.pad);
}

SrModel::SrModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int n_z = cfg_.n_z;
  const auto he = [](int in_c, int k) { return std::sqrt(2.0 / (in_c * k * k)); };

  // Construction order is part of the determinism contract: every tensor's
  // seed is (config seed, running counter).
  std::vector<ad::Var> hr_params;
  hr_enc_.push_back(make_conv(3, kW1, 3, 1, he(3, 3), hr_params));
  hr_enc_.push_back(make_conv(kW1, kW2, 3, 2, he(kW1, 3), hr_params));
  hr_enc_.push_back(make_conv(kW2, kW3, 3, 2, he(kW2, 3), hr_params));
  hr_enc_.push_back(make_conv(kW3, n_z, 3, 1, std::sqrt(1.0 / (kW3 * 9.0)), hr_params));

  std::vector<ad::Var> cb_params;
  {
    Rng rng(mix_seed(cfg_.seed, init_counter_++));
    Tensor entries = Tensor::zeros({cfg_.codebook_size, n_z});
    const double std = 1.0 / std::sqrt(static_cast<double>(n_z));
    for (std::int64_t i = 0; i < entries.size(); ++i) entries[i] = rng.normal(0.0, std);
    codebook_ = ad::leaf(std::move(entries));
    cb_params.push_back(codebook_);
  }

  std::vector<ad::Var> dec_params;
  dec_.push_back(make_conv(n_z, kW3, 3, 1, he(n_z, 3), dec_params));
  dec_.push_back(make_conv(kW3 + kGuide, kW2, 3, 1, he(kW3 + kGuide, 3), dec_params));
  dec_.push_back(make_conv(kW2 + kGuide, kW1, 3, 1, he(kW2 + kGuide, 3), dec_params));
  // Near-zero-init correction head: the untrained model emits its bicubic
  // base to within ~1e-5, so gradient pressure alone decides where a
  // correction appears. Not exactly zero — every upstream parameter must keep
  // a live gradient path through this conv from step one.
  dec_.push_back(make_conv(kW1, 3, 3, 1, 1e-6, dec_params));
  // Correction gate head (logits; sigmoid applied in decode). Silencing a
  // region only needs a negative logit, instead of an exact multi-tap linear
  // cancellation in the correction head — content the base already renders
  // correctly stays bit-clean far more cheaply this way. The bias starts
  // negative so corrections are mostly silenced at init and the gate is
  // *opened* by the (strong) gradients of poorly rendered regions, instead of
  // silenced by the (weak) gradients of already-clean ones.
  dec_.push_back(make_conv(kW1, 3, 3, 1, he(kW1, 3), dec_params));
  dec_.back().b->value.fill(-2.0);
  // Guidance stem: features of the skip base at full and half resolution,
  // concatenated into the two upsampled decoder stages. The code grid says
  // what texture to paint; the base says exactly where its edges sit, which
  // coarse codes alone cannot (one code covers a 4x4 pixel cell).
  dec_guide_.push_back(make_conv(3, kGuide, 3, 1, he(3, 3), dec_params));
  dec_guide_.push_back(make_conv(kGuide, kGuide, 3, 2, he(kGuide, 3), dec_params));

  std::vector<ad::Var> lq_params;
  // The LQ trunk must land on the same latent grid as the HR trunk:
  // LR extent / (encoder_factor / scale), so scale 2 keeps one stride-2 stage.
  const int lq_stride = cfg_.scale == 2 ? 2 : 1;
  lq_enc_.push_back(make_conv(3, kW1, 3, 1, he(3, 3), lq_params));
  lq_enc_.push_back(make_conv(kW1, kW2, 3, lq_stride, he(kW1, 3), lq_params));
  lq_enc_.push_back(make_conv(kW2, kW3, 3, 1, he(kW2, 3), lq_params));
  lq_enc_.push_back(make_conv(kW3, n_z, 3, 1, std::sqrt(1.0 / (kW3 * 9.0)), lq_params));
  {
    // 1x1 fusion over [quantized ; LQ] channels, initialized to pass the
    // quantized half through untouched so a fresh stage 1 starts exactly at
    // the pretrained autoencoder's behavior.
    init_counter_++;  // keep downstream seeds stable even though init is fixed
    Tensor w = Tensor::zeros({n_z, 2 * n_z, 1, 1});
    for (int i = 0; i < n_z; ++i) w[static_cast<std::int64_t>(i) * 2 * n_z + i] = 1.0;
    fuse_concat_.w = ad::leaf(std::move(w));
    fuse_concat_.b = ad::leaf(Tensor::zeros({n_z}));
    fuse_concat_.stride = 1;
    fuse_concat_.pad = 0;
    lq_params.push_back(fuse_concat_.w);
    lq_params.push_back(fuse_concat_.b);
  }

  std::vector<ad::Var> unc_params;
  // Three stages give the log-variance map a 7x7 receptive field: wide
  // enough to read local contrast out of the decoder features instead of
  // collapsing onto their raw activation energy.
  unc_.push_back(make_conv(kW1, kW1, 3, 1, he(kW1, 3), unc_params));
  unc_.push_back(make_conv(kW1, 8, 3, 1, he(kW1, 3), unc_params));
  unc_.push_back(make_conv(8, 1, 3, 1, std::sqrt(1.0 / (8 * 9.0)), unc_params));

  std::vector<ad::Var> fus_params;
  init_counter_++;
  fus_q_ = ad::leaf(identity_matrix(n_z));
  fus_c_ = ad::leaf(identity_matrix(n_z));
  fus_gate_ = ad::leaf(Tensor::zeros({1}));
  fus_params = {fus_q_, fus_c_, fus_gate_};

  std::vector<ad::Var> aa_params;
  {
    Rng rng(mix_seed(cfg_.seed, init_counter_++));
    const double std = 1.0 / std::sqrt(static_cast<double>(n_z));
    Tensor wq = Tensor::zeros({n_z, cfg_.d_k}), wk = Tensor::zeros({n_z, cfg_.d_k});
    for (std::int64_t i = 0; i < wq.size(); ++i) wq[i] = rng.normal(0.0, std);
    for (std::int64_t i = 0; i < wk.size(); ++i) wk[i] = rng.normal(0.0, std);
    aa_q_ = ad::leaf(std::move(wq));
    aa_k_ = ad::leaf(std::move(wk));
    aa_v_ = ad::leaf(identity_matrix(n_z));
    aa_gate_ = ad::leaf(Tensor::zeros({1}));
    aa_params = {aa_q_, aa_k_, aa_v_, aa_gate_};
  }

  std::vector<ad::Var> disc_params;
  disc_.push_back(make_conv(3, kW1, 3, 2, he(3, 3), disc_params));
  disc_.push_back(make_conv(kW1, kW3, 3, 2, he(kW1, 3), disc_params));
  disc_.push_back(make_conv(kW3, kW3, 3, 2, he(kW3, 3), disc_params));
  disc_.push_back(make_conv(kW3, 1, 3, 1, std::sqrt(1.0 / (kW3 * 9.0)), disc_params));

  std::vector<ad::Var> phi_params;
  phi_.push_back(make_conv(3, 8, 3, 1, he(3, 3), phi_params));
  phi_.push_back(make_conv(8, 8, 3, 2, he(8, 3), phi_params));
  phi_.push_back(make_conv(8, 8, 3, 2, he(8, 3), phi_params));

  groups_ = {{"hr_encoder", std::move(hr_params)},   {"codebook", std::move(cb_params)},
             {"decoder", std::move(dec_params)},     {"lq_encoder", std::move(lq_params)},
             {"unc_head", std::move(unc_params)},    {"topk_fusion", std::move(fus_params)},
             {"align_attn", std::move(aa_params)},   {"discriminator", std::move(disc_params)},
             {"perceptual", std::move(phi_params)}};
}

const SrModel::Group& SrModel::group(const std::string& name) const {
  for (const auto& g : groups_) {
    if (g.name == name) return g;
  }
  throw std::invalid_argument("unknown parameter group '" + name + "'");
}

std::vector<ad::Var> SrModel::collect(const std::vector<std::string>& names) const {
  std::vector<ad::Var> out;
  for (const auto& name : names) {
    const Group& g = group(name);
    out.insert(out.end(), g.params.begin(), g.params.end());
  }
  return out;
}

std::vector<ad::Var> SrModel::all_params() const {
  std::vector<ad::Var> out;
  for (const auto& g : groups_) out.insert(out.end(), g.params.begin(), g.params.end());
  return out;
}

void SrModel::set_trainable(const std::vector<std::string>& names) {
  for (const auto& name : names) group(name);  // validate up front
  for (const auto& g : groups_) {
    const bool on = std::find(names.begin(), names.end(), g.name) != names.end();
    for (const auto& p : g.params) p->needs_grad = on;
  }
}

std::vector<std::string> SrModel::trainable_groups() const {
  std::vector<std::string> out;
  for (const auto& g : groups_) {
    if (!g.params.empty() && g.params.front()->needs_grad) out.push_back(g.name);
  }
  return out;
}

Codebook SrModel::codebook() const {
  Codebook cb;
  cb.entries = codebook_->value;
  return cb;
}

void SrModel::set_codebook(const Codebook& cb) {
  cb.validate();
  require(cb.entries.same_shape(codebook_->value), "set_codebook: shape mismatch");
  codebook_->value = cb.entries;
}

FusionParams SrModel::fusion_params() const {
  FusionParams p;
  p.k = cfg_.topk;
  p.query_proj = fus_q_->value;
  p.cand_proj = fus_c_->value;
  p.gate_raw = fus_gate_->value;
  return p;
}

ad::Var SrModel::encode_hr(const ImagePatch& hr) {
  hr.validate();
  require(hr.channels() == 3, "encode_hr: expected RGB input");
  require(hr.height() % ModelConfig::encoder_factor == 0 &&
              hr.width() % ModelConfig::encoder_factor == 0,
          "encode_hr: extents must be divisible by " +
              std::to_string(ModelConfig::encoder_factor));
  ad::Var x = ad::constant(hr.data);
  x = ad::leaky_relu(conv(hr_enc_[0], x), kLeakySlope);
  x = ad::leaky_relu(conv(hr_enc_[1], x), kLeakySlope);
  x = ad::leaky_relu(conv(hr_enc_[2], x), kLeakySlope);
  return conv(hr_enc_[3], x);
}

ad::Var SrModel::encode_lq(const ImagePatch& lr) {
  lr.validate();
  require(lr.channels() == 3, "encode_lq: expected RGB input");
  const int grid_div = ModelConfig::encoder_factor / cfg_.scale;
  require(lr.height() % grid_div == 0 && lr.width() % grid_div == 0,
          "encode_lq: extents must be divisible by " + std::to_string(grid_div));
  ad::Var x = ad::constant(lr.data);
  x = ad::leaky_relu(conv(lq_enc_[0], x), kLeakySlope);
  x = ad::leaky_relu(conv(lq_enc_[1], x), kLeakySlope);
  x = ad::leaky_relu(conv(lq_enc_[2], x), kLeakySlope);
  return conv(lq_enc_[3], x);
}

DecodeResult SrModel::decode(const ad::Var& z, const ImagePatch& base) {
  require(z->value.rank() == 3 && z->value.dim(0) == cfg_.n_z,
          "decode: expected {n_z, h, w} input");
  base.validate();
  require(base.channels() == 3 && base.height() == z->value.dim(1) * 4 &&
              base.width() == z->value.dim(2) * 4,
          "decode: base extents must be 4x the latent grid");
  const ad::Var g_full =
      ad::leaky_relu(conv(dec_guide_[0], ad::constant(base.data)), kLeakySlope);
  const ad::Var g_half = ad::leaky_relu(conv(dec_guide_[1], g_full), kLeakySlope);
  ad::Var x = ad::leaky_relu(conv(dec_[0], z), kLeakySlope);
  x = ad::upsample_nearest(x, 2);
  x = ad::leaky_relu(conv(dec_[1], ad::concat_channels(x, g_half)), kLeakySlope);
  x = ad::upsample_nearest(x, 2);
  ad::Var features = ad::leaky_relu(conv(dec_[2], ad::concat_channels(x, g_full)), kLeakySlope);
  const ad::Var gate = ad::sigmoid_clamped(conv(dec_[4], features), kGateEps);
  return DecodeResult{ad::mul(conv(dec_[3], features), gate), features};
}

ad::Var SrModel::uncertainty(const ad::Var& decoder_features) {
  require(decoder_features->value.rank() == 3 && decoder_features->value.dim(0) == kW1,
          "uncertainty: expected decoder feature map");
  ad::Var x = ad::leaky_relu(conv(unc_[0], decoder_features), kLeakySlope);
  x = ad::leaky_relu(conv(unc_[1], x), kLeakySlope);
  return conv(unc_[2], x);
}

ad::Var SrModel::discriminate(const ad::Var& rgb) {
  require(rgb->value.rank() == 3 && rgb->value.dim(0) == 3, "discriminate: expected {3,H,W}");
  ad::Var x = ad::leaky_relu(conv(disc_[0], rgb), kLeakySlope);
  x = ad::leaky_relu(conv(disc_[1], x), kLeakySlope);
  x = ad::leaky_relu(conv(disc_[2], x), kLeakySlope);
  return ad::sigmoid_clamped(conv(disc_[3], x), kDiscProbEps);
}

ad::Var SrModel::discriminate(const ImagePatch& rgb) {
  rgb.validate();
  return discriminate(ad::constant(rgb.data));
}

ad::Var SrModel::perceptual(const ad::Var& rgb) {
  require(rgb->value.rank() == 3 && rgb->value.dim(0) == 3, "perceptual: expected {3,H,W}");
  ad::Var x = ad::tanh(conv(phi_[0], rgb));
  x = ad::tanh(conv(phi_[1], x));
  return ad::tanh(conv(phi_[2], x));
}

ad::Var SrModel::perceptual(const ImagePatch& rgb) {
  rgb.validate();
  return perceptual(ad::constant(rgb.data));
}

ad::Var SrModel::align_attention(const ad::Var& lq_tokens, const ad::Var& hq_tokens) {
  require(lq_tokens->value.rank() == 2 && hq_tokens->value.rank() == 2,
          "align_attention: expected token matrices");
  require(lq_tokens->value.cols() == cfg_.n_z && hq_tokens->value.cols() == cfg_.n_z,
          "align_attention: token width must equal n_z");
  const ad::Var q = ad::matmul(lq_tokens, aa_q_);
  const ad::Var k = ad::matmul(hq_tokens, aa_k_);
  const ad::Var logits =
      ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(cfg_.d_k)));
  const ad::Var attn = ad::softmax_rows(logits);
  return ad::matmul(attn, ad::matmul(hq_tokens, aa_v_));
}

ad::Var SrModel::fuse_topk_tokens(const ad::Var& lq_tokens, const MatchResult& match) {
  const int T = match.h * match.w;
  const int k = match.k;
  require(lq_tokens->value.rows() == T, "fuse_topk_tokens: token/match size mismatch");

  const ad::Var cand = ad::gather_rows(codebook_, match.candidate_indices);  // {T*k, n_z}
  const ad::Var pq = ad::matmul(lq_tokens, fus_q_);                          // {T, d}
  const ad::Var pc = ad::matmul(cand, fus_c_);                               // {T*k, d}
  const ad::Var dots = ad::sum_rows(ad::mul(ad::repeat_rows(pq, k), pc));    // {T*k, 1}
  const ad::Var logits =
      ad::scale(ad::reshape(dots, {T, k}), 1.0 / std::sqrt(static_cast<double>(cfg_.n_z)));
  const ad::Var weights = ad::softmax_rows(logits);  // {T, k}
  const ad::Var weighted = ad::mul_rows(cand, ad::reshape(weights, {T * k, 1}));
  const ad::Var attn_out = ad::sum_row_groups(weighted, k);  // {T, n_z}

  std::vector<int> nearest(T);
  for (int i = 0; i < T; ++i) nearest[i] = match.candidate(i, 0);
  const ad::Var c1 = ad::gather_rows(codebook_, nearest);

  // out = (1-g)*c1 + g*attn, written as c1 + g*(attn - c1) so a zero gate is
  // exact in floating point.
  const ad::Var gate = ad::clamp01(fus_gate_);
  const ad::Var gate_col = ad::repeat_rows(ad::reshape(gate, {1, 1}), T);
  return ad::add(c1, ad::mul_rows(ad::sub(attn_out, c1), gate_col));
}

SrModel::PretrainForward SrModel::vq_forward(const ImagePatch& hr, const ImagePatch& base) {
  base.validate();
  require(base.data.same_shape(hr.data), "vq_forward: base/hr shape mismatch");
  const ad::Var enc = encode_hr(hr);  // {n_z, h, w}
  const int h = enc->value.dim(1), w = enc->value.dim(2);
  const ad::Var tokens = ad::chw_to_tokens(enc);

  LatentGrid grid;
  grid.h = h;
  grid.w = w;
  grid.values = tokens->value;
  LatentGrid quantized;
  MatchResult match = quantize_nearest(grid, codebook(), &quantized);
  counters_.nearest_calls++;

  const ad::Var code_rows = ad::gather_rows(codebook_, match.indices);

  Tensor q_chw = Tensor::zeros({cfg_.n_z, h, w});
  for (int p = 0; p < h * w; ++p) {
    for (int c = 0; c < cfg_.n_z; ++c) {
      q_chw[static_cast<std::int64_t>(c) * h * w + p] = quantized.values.at(p, c);
    }
  }
  const ad::Var dec_in = ad::straight_through(std::move(q_chw), enc);
  // Additive skip: the decoder predicts only the correction from the supplied
  // base toward the target, so capacity goes to the detail the base lacks.
  const ad::Var recon = ad::add(decode(dec_in, base).rgb, ad::constant(base.data));
  return PretrainForward{recon, tokens, code_rows, std::move(match)};
}

SrForward SrModel::sr_forward(const ImagePatch& lr, int stage) {
  require(stage == 1 || stage == 2, "sr_forward: stage must be 1 or 2");

  const ad::Var enc = encode_lq(lr);  // {n_z, h, w}
  const int h = enc->value.dim(1), w = enc->value.dim(2);
  const int T = h * w;
  const ad::Var tokens = ad::chw_to_tokens(enc);

  SrForward out;
  out.lq_tokens = tokens;
  out.lq_latents.h = h;
  out.lq_latents.w = w;
  out.lq_latents.values = tokens->value;

  const Codebook cb = codebook();
  const bool topk_path = stage == 2 && cfg_.toggles.use_topk;

  ad::Var hq_tokens;  // quantized tokens {T, n_z}, with codebook-leaf lineage
  if (topk_path) {
    MatchResult match = topk_candidates(out.lq_latents, cb, cfg_.topk);
    counters_.topk_calls++;
    const ad::Var fused = fuse_topk_tokens(tokens, match);

    // Re-quantize the fused vectors to final indices.
    LatentGrid fused_grid;
    fused_grid.h = h;
    fused_grid.w = w;
    fused_grid.values = fused->value;
    LatentGrid re_quantized;
    const MatchResult re_match = quantize_nearest(fused_grid, cb, &re_quantized);
    match.indices = re_match.indices;
    hq_tokens = ad::gather_rows(codebook_, match.indices);
    out.match = std::move(match);
  } else {
    MatchResult match = quantize_nearest(out.lq_latents, cb);
    counters_.nearest_calls++;
    hq_tokens = ad::gather_rows(codebook_, match.indices);
    out.match = std::move(match);
  }

  // Straight-through on the quantized branch: values from the codebook rows,
  // gradients copied back to the LQ encoder output.
  const ad::Var z_q = ad::straight_through(hq_tokens->value, tokens);
  // Keep the codebook rows in the graph so codebook gradients exist whenever
  // that group is trainable (it is frozen in both SR stages by contract).
  const ad::Var z_q_full = ad::add(hq_tokens, ad::sub(z_q, ad::detach(hq_tokens)));

  ad::Var lq_branch_tokens = tokens;
  if (stage == 2 && cfg_.toggles.use_align) {
    const ad::Var aligned = align_attention(tokens, z_q_full);
    const ad::Var gate_col = ad::repeat_rows(ad::reshape(ad::clamp01(aa_gate_), {1, 1}), T);
    lq_branch_tokens = ad::add(tokens, ad::mul_rows(aligned, gate_col));
  }

  const ad::Var dec_in = conv(
      fuse_concat_, ad::concat_channels(ad::tokens_to_chw(z_q_full, h, w),
                                        ad::tokens_to_chw(lq_branch_tokens, h, w)));
  // Same residual form and the same guidance as in pretraining: the frozen
  // decoder adds detail on top of the shared smoothed-bicubic base.
  const ImagePatch base = correction_base(lr, cfg_.scale);
  const DecodeResult dec = decode(dec_in, base);
  out.sr = ad::add(dec.rgb, ad::constant(base.data));
  out.s = uncertainty(dec.features);
  return out;
}

LatentGrid SrModel::hr_latents(const ImagePatch& hr) {
  ad::ValueOnlyScope scope;
  const ad::Var enc = encode_hr(hr);
  LatentGrid grid;
  grid.h = enc->value.dim(1);
  grid.w = enc->value.dim(2);
  grid.values = ad::chw_to_tokens(enc)->value;
  return grid;
}

}  // namespace ugtsr
