#pragma once

#include "ugtsr/image.hpp"

namespace ugtsr {

// Catmull-Rom style cubic kernel (a = -0.5), support [-2, 2].
double cubic_kernel(double x);

// Separable bicubic resize with center-aligned sampling
// (src = (dst + 0.5) * scale - 0.5) and replicated borders.
// When shrinking, the kernel is stretched by the scale factor and the
// weights renormalized, which low-pass filters the input before decimation
// instead of aliasing it.
ImagePatch resize_bicubic(const ImagePatch& img, int out_height, int out_width);

// Convenience wrappers for integer scale factors; `downscale_bicubic`
// requires the extents to be divisible by the factor.
ImagePatch downscale_bicubic(const ImagePatch& img, int factor);
ImagePatch upscale_bicubic(const ImagePatch& img, int factor);

}  // namespace ugtsr
