#pragma once

#include <string>

#include "ugtsr/tensor.hpp"

namespace ugtsr {

// Planar float image, channels-first, values nominally in [0, 1].
// All pipelines keep images in double precision until a PNG export quantizes
// to 8 bits; the raw container below round-trips bit-exactly.
struct ImagePatch {
  Tensor data;  // {C, H, W}

  int channels() const { return data.dim(0); }
  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::int64_t>(c) * height() + y) * width() + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::int64_t>(c) * height() + y) * width() + x];
  }

  static ImagePatch zeros(int channels, int height, int width);

  // Throws std::invalid_argument on rank != 3 or non-finite values.
  void validate() const;
};

// Clamp every sample into [0, 1].
ImagePatch clamp01(const ImagePatch& img);

// BT.601 full-range luma from an RGB patch; single-channel output.
// A single-channel input passes through unchanged.
ImagePatch to_luma(const ImagePatch& img);

// Crop a window; throws if the window leaves the image bounds.
ImagePatch crop(const ImagePatch& img, int y0, int x0, int height, int width);

// Raw float container: magic + version + dims + row-major f64 samples.
// Exists so degraded/restored patches survive round trips without the 8-bit
// quantization PNG imposes.
void save_raw_image(const ImagePatch& img, const std::string& path);
ImagePatch load_raw_image(const std::string& path);

}  // namespace ugtsr
