#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugtsr/autodiff.hpp"
#include "ugtsr/codebook.hpp"
#include "ugtsr/image.hpp"

namespace ugtsr {

// Stage-2 behavior toggles; the ablation harness flips these.
struct StageToggles {
  bool use_udl = true;   // weight stage-2 residuals by the uncertainty map
  bool use_topk = true;  // candidate fusion instead of plain nearest-neighbor
  bool use_align = true; // cross-attention injection into the LQ branch
};

struct ModelConfig {
  int scale = 2;          // SR factor, 2 or 4
  int n_z = 16;           // latent channel count
  int codebook_size = 64; // K
  int d_k = 32;           // attention key width
  int topk = 3;
  std::uint64_t seed = 1;
  StageToggles toggles;

  // Encoder downsample factor; fixed by the architecture (two stride-2
  // stages) but kept visible for shape arithmetic.
  static constexpr int encoder_factor = 4;

  void validate() const;
};

// One convolution's parameters held as graph leaves.
struct ConvLayer {
  ad::Var w;  // {out_c, in_c, k, k}
  ad::Var b;  // {out_c}
  int stride = 1;
  int pad = 1;
};

struct DecodeResult {
  // Unclamped, sigmoid-gated correction over the supplied skip base;
  // vq_forward/sr_forward add the base so the decoder spends capacity on
  // texture, not smooth content. A full-resolution stem over the base feeds
  // both upsampled decoder stages, letting the correction align to edges the
  // base shows, and the multiplicative gate lets it go silent cheaply where
  // the base is already right.
  ad::Var rgb;       // {3, H, W}
  ad::Var features;  // last pre-RGB feature map, input to the uncertainty head
};

struct SrForward {
  ad::Var sr;          // {3, H, W}
  ad::Var s;           // {1, H, W} log-variance map
  ad::Var lq_tokens;   // {h*w, n_z} pre-quantization LQ latents
  LatentGrid lq_latents;  // numeric copy of lq_tokens
  MatchResult match;      // indices actually fed to the decoder
};

// Stage-separation instrumentation: which matching path ran.
struct MatchCounters {
  std::int64_t nearest_calls = 0;
  std::int64_t topk_calls = 0;
};

// The additive-skip base shared by pretraining and super-resolution: the
// bicubic upscale of the low-res input, identical to the evaluation baseline.
// Together with the near-zero-initialized correction head this makes the
// untrained model reproduce that baseline almost exactly. Both the training
// target pathway and sr_forward() must use this exact base for the correction
// to transfer.
ImagePatch correction_base(const ImagePatch& lr, int scale);

// The composed toy SR system: HR/LQ encoders, codebook, decoder, uncertainty
// head, top-k fusion, cross-attention, discriminator, and a frozen random
// feature stack for the perceptual loss. All parameters are double-precision
// graph leaves grouped by name so training phases can freeze subsets.
class SrModel {
 public:
  explicit SrModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  struct Group {
    std::string name;
    std::vector<ad::Var> params;
  };
  static const std::vector<std::string>& group_names();
  const std::vector<Group>& groups() const { return groups_; }
  const Group& group(const std::string& name) const;
  std::vector<ad::Var> collect(const std::vector<std::string>& names) const;
  std::vector<ad::Var> all_params() const;

  // Marks exactly the named groups trainable; every other parameter drops out
  // of gradient computation (and so provably cannot drift).
  void set_trainable(const std::vector<std::string>& names);
  std::vector<std::string> trainable_groups() const;

  // Numeric views of the quantization state.
  Codebook codebook() const;
  void set_codebook(const Codebook& cb);
  FusionParams fusion_params() const;

  // Graph builders. Encoders take constant images; decode/heads take Vars.
  ad::Var encode_hr(const ImagePatch& hr);
  ad::Var encode_lq(const ImagePatch& lr);
  DecodeResult decode(const ad::Var& z, const ImagePatch& base);
  ad::Var uncertainty(const ad::Var& decoder_features);
  ad::Var discriminate(const ad::Var& rgb);  // per-patch probabilities in (0,1)
  ad::Var discriminate(const ImagePatch& rgb);
  ad::Var perceptual(const ad::Var& rgb);  // frozen feature stack output
  ad::Var perceptual(const ImagePatch& rgb);

  // Cross-attention: LQ tokens query the quantized HQ tokens (keys/values).
  // Shapes {T, n_z} -> {T, n_z}; rows of the attention matrix sum to 1.
  ad::Var align_attention(const ad::Var& lq_tokens, const ad::Var& hq_tokens);

  // Differentiable mirror of fuse_candidates() over a whole token grid,
  // reading candidates and projections from this model's leaves.
  ad::Var fuse_topk_tokens(const ad::Var& lq_tokens, const MatchResult& match);

  // HR autoencoder pass for codebook pretraining. `base` is the image the
  // decoder corrects toward `hr` (recon = base + correction); training feeds
  // correction_base() of the item's degraded LR so the decoder learns the
  // same restoration task the SR path needs, instead of a near-identity.
  struct PretrainForward {
    ad::Var recon;       // {3, H, W}
    ad::Var enc_tokens;  // {h*w, n_z} continuous encoder output
    ad::Var code_rows;   // {h*w, n_z} selected codebook rows (codebook leaf grads)
    MatchResult match;
  };
  PretrainForward vq_forward(const ImagePatch& hr, const ImagePatch& base);

  // Full LR -> SR pass. Stage 1: nearest-neighbor matching, concatenation
  // fusion. Stage 2: top-k candidate fusion plus gated cross-attention; with
  // identity-gate fusion parameters and both gates at zero it reproduces the
  // stage-1 forward bit-exactly.
  SrForward sr_forward(const ImagePatch& lr, int stage);

  // Value-only HR encode + nearest quantization (ground-truth indices).
  LatentGrid hr_latents(const ImagePatch& hr);

  const MatchCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = MatchCounters{}; }

 private:
  ad::Var conv(const ConvLayer& layer, const ad::Var& x) const;
  ConvLayer make_conv(int in_c, int out_c, int k, int stride, double w_std,
                      std::vector<ad::Var>& sink);

  ModelConfig cfg_;
  std::uint64_t init_counter_ = 0;

  std::vector<ConvLayer> hr_enc_, lq_enc_, dec_, dec_guide_, unc_, disc_, phi_;
  ConvLayer fuse_concat_;  // 1x1 conv over [quantized ; LQ] channels
  ad::Var codebook_;       // {K, n_z}
  ad::Var fus_q_, fus_c_, fus_gate_;   // top-k fusion parameters
  ad::Var aa_q_, aa_k_, aa_v_, aa_gate_;  // cross-attention parameters

  std::vector<Group> groups_;
  MatchCounters counters_;
};

// Wraps a {3,H,W} or {1,H,W} tensor as an image without copying semantics
// beyond the tensor's own.
ImagePatch image_from_tensor(const Tensor& chw);

}  // namespace ugtsr
