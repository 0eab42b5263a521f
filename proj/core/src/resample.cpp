#include "ugtsr/resample.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ugtsr {

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return a * (((x - 5.0) * x + 8.0) * x - 4.0);
  return 0.0;
}

namespace {

struct AxisWeights {
  // For each output index: first contributing source index plus a dense
  // weight run (weights sum to 1).
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

AxisWeights build_axis(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  // Stretch the kernel when shrinking so it covers every source sample that
  // maps into the output pixel's footprint.
  const double stretch = std::max(scale, 1.0);
  const double support = 2.0 * stretch;

  AxisWeights aw;
  aw.first.resize(out_size);
  aw.weights.resize(out_size);
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - support)) + 1;
    const int hi = static_cast<int>(std::floor(center + support));
    aw.first[o] = lo;
    auto& w = aw.weights[o];
    w.resize(hi - lo + 1);
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double v = cubic_kernel((i - center) / stretch);
      w[i - lo] = v;
      sum += v;
    }
    for (double& v : w) v /= sum;
  }
  return aw;
}

int clamp_index(int i, int size) { return std::clamp(i, 0, size - 1); }

}  // namespace

ImagePatch resize_bicubic(const ImagePatch& img, int out_height, int out_width) {
  img.validate();
  if (out_height < 1 || out_width < 1) {
    throw std::invalid_argument("resize_bicubic: output extents must be positive");
  }
  const int c = img.channels();
  const int in_h = img.height();
  const int in_w = img.width();

  const AxisWeights wx = build_axis(in_w, out_width);
  const AxisWeights wy = build_axis(in_h, out_height);

  // Horizontal pass, then vertical.
  ImagePatch mid = ImagePatch::zeros(c, in_h, out_width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < in_h; ++y) {
      for (int x = 0; x < out_width; ++x) {
        const auto& w = wx.weights[x];
        const int first = wx.first[x];
        double acc = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
          acc += w[j] * img.at(ch, y, clamp_index(first + static_cast<int>(j), in_w));
        }
        mid.at(ch, y, x) = acc;
      }
    }
  }

  ImagePatch out = ImagePatch::zeros(c, out_height, out_width);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < out_height; ++y) {
      const auto& w = wy.weights[y];
      const int first = wy.first[y];
      for (int x = 0; x < out_width; ++x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
          acc += w[j] * mid.at(ch, clamp_index(first + static_cast<int>(j), in_h), x);
        }
        out.at(ch, y, x) = acc;
      }
    }
  }
  return out;
}

ImagePatch downscale_bicubic(const ImagePatch& img, int factor) {
  img.validate();
  if (factor < 1) throw std::invalid_argument("downscale_bicubic: factor must be >= 1");
  if (img.height() % factor != 0 || img.width() % factor != 0) {
    throw std::invalid_argument("downscale_bicubic: extents " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()) + " not divisible by " +
                                std::to_string(factor));
  }
  return resize_bicubic(img, img.height() / factor, img.width() / factor);
}

ImagePatch upscale_bicubic(const ImagePatch& img, int factor) {
  img.validate();
  if (factor < 1) throw std::invalid_argument("upscale_bicubic: factor must be >= 1");
  return resize_bicubic(img, img.height() * factor, img.width() * factor);
}

}  // namespace ugtsr
