#pragma once

#include <string>

#include "ugtsr/image.hpp"

namespace ugtsr {

// 8-bit PNG export/import. Samples are clamped to [0, 1] and quantized with
// round-half-away-from-zero; grayscale patches write single-channel PNGs.
void save_png(const ImagePatch& img, const std::string& path);

// Loads 8-bit or 16-bit, gray or RGB(A) PNGs; alpha is dropped, 16-bit input
// is scaled by 1/65535. Output values lie in [0, 1].
ImagePatch load_png(const std::string& path);

}  // namespace ugtsr
