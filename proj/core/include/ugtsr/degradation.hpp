#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ugtsr/image.hpp"

namespace ugtsr {

enum class BlurKind { none, gaussian_iso, gaussian_aniso };
enum class DegradationStage { blur, downsample, noise, compression };

struct BlurSpec {
  BlurKind kind = BlurKind::none;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double angle = 0.0;  // radians, only meaningful for the anisotropic kernel
  int kernel_size = 0;  // odd
};

// One sampled corruption: blur -> downsample -> noise -> compression, applied
// in a per-recipe shuffled order. Together with the seed this pins the LR
// output bit-exactly for a given HR input.
struct DegradationRecipe {
  BlurSpec blur;
  int scale = 1;             // 1 (no-op), 2, or 4
  double noise_sigma = 0.0;  // std-dev of additive gaussian noise, 0 disables
  bool compress = false;
  double compression_quality = 95.0;  // in [30, 95] when enabled
  std::array<DegradationStage, 4> order = {DegradationStage::blur, DegradationStage::downsample,
                                           DegradationStage::noise, DegradationStage::compression};
  std::uint64_t seed = 0;

  static DegradationRecipe identity();

  std::string to_json_string() const;
  static DegradationRecipe from_json_string(const std::string& text);

  // Throws std::invalid_argument on out-of-range fields or a non-permutation
  // stage order.
  void validate() const;
};

// Default sampling ranges keep the toy task recoverable at these image sizes:
// blur past sigma ~1.5 combined with 2x downsampling erases the finest
// texture periods outright, and noise past ~0.04 dominates every residual the
// restorer could learn. The recipe schema itself admits wider values (noise
// up to 0.1); these are only the sampler's defaults.
struct DegradationRanges {
  double blur_sigma_min = 0.2;
  double blur_sigma_max = 1.5;
  int kernel_size_min = 7;   // odd values in [min, max] are eligible
  int kernel_size_max = 21;
  double noise_sigma_max = 0.04;
  double quality_min = 30.0;
  double quality_max = 95.0;
  double p_aniso = 0.5;      // chance an applied blur is anisotropic
  double p_compress = 0.75;  // chance the compression stage is enabled
};

// Draws every recipe field (including the stage order) from the seed alone.
// `scale` defaults to a coin flip between 2 and 4; pass it explicitly when a
// dataset needs one scale throughout.
DegradationRecipe sample_recipe(std::uint64_t seed);
DegradationRecipe sample_recipe(std::uint64_t seed, int scale,
                                const DegradationRanges& ranges = DegradationRanges{});

// Pure function of (hr, recipe): repeated calls are bit-identical.
// Output extents = input extents / recipe.scale, values clamped to [0,1].
// Throws std::invalid_argument when extents are not divisible by the scale.
ImagePatch degrade(const ImagePatch& hr, const DegradationRecipe& recipe);

// Individual stages, exposed for direct testing.
ImagePatch gaussian_blur(const ImagePatch& img, const BlurSpec& spec);
ImagePatch add_gaussian_noise(const ImagePatch& img, double sigma, std::uint64_t seed);
// 8x8 block-DCT coefficient quantization; lower quality -> coarser steps.
ImagePatch dct_compress(const ImagePatch& img, double quality);

}  // namespace ugtsr
