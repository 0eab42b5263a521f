#include "ugtsr/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "ugtsr/resample.hpp"
#include "ugtsr/rng.hpp"

namespace ugtsr {

namespace {

// Distinct stream tags keep the noise stage decorrelated from the sampling
// draws that produced the recipe itself.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;  // "noise"

const char* stage_name(DegradationStage s) {
  switch (s) {
    case DegradationStage::blur: return "blur";
    case DegradationStage::downsample: return "downsample";
    case DegradationStage::noise: return "noise";
    case DegradationStage::compression: return "compression";
  }
  return "?";
}

DegradationStage stage_from_name(const std::string& name) {
  if (name == "blur") return DegradationStage::blur;
  if (name == "downsample") return DegradationStage::downsample;
  if (name == "noise") return DegradationStage::noise;
  if (name == "compression") return DegradationStage::compression;
  throw std::invalid_argument("unknown degradation stage '" + name + "'");
}

const char* blur_name(BlurKind k) {
  switch (k) {
    case BlurKind::none: return "none";
    case BlurKind::gaussian_iso: return "gaussian-iso";
    case BlurKind::gaussian_aniso: return "gaussian-aniso";
  }
  return "?";
}

BlurKind blur_from_name(const std::string& name) {
  if (name == "none") return BlurKind::none;
  if (name == "gaussian-iso") return BlurKind::gaussian_iso;
  if (name == "gaussian-aniso") return BlurKind::gaussian_aniso;
  throw std::invalid_argument("unknown blur kind '" + name + "'");
}

}  // namespace

DegradationRecipe DegradationRecipe::identity() { return DegradationRecipe{}; }

void DegradationRecipe::validate() const {
  if (scale != 1 && scale != 2 && scale != 4) {
    throw std::invalid_argument("recipe scale must be 1, 2, or 4, got " + std::to_string(scale));
  }
  if (blur.kind != BlurKind::none) {
    if (blur.kernel_size < 3 || blur.kernel_size % 2 == 0) {
      throw std::invalid_argument("blur kernel size must be odd and >= 3");
    }
    if (!(blur.sigma_x > 0.0) || !(blur.sigma_y > 0.0)) {
      throw std::invalid_argument("blur sigmas must be positive");
    }
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  if (compress && (compression_quality < 1.0 || compression_quality > 100.0)) {
    throw std::invalid_argument("compression quality out of range");
  }
  std::array<int, 4> seen = {0, 0, 0, 0};
  for (DegradationStage s : order) seen[static_cast<int>(s)]++;
  for (int c : seen) {
    if (c != 1) throw std::invalid_argument("stage order must be a permutation of all four stages");
  }
}

std::string DegradationRecipe::to_json_string() const {
  nlohmann::json j;
  j["blur"] = {{"kind", blur_name(blur.kind)},
               {"sigma_x", blur.sigma_x},
               {"sigma_y", blur.sigma_y},
               {"angle", blur.angle},
               {"kernel_size", blur.kernel_size}};
  j["scale"] = scale;
  j["noise_sigma"] = noise_sigma;
  j["compress"] = compress;
  j["compression_quality"] = compression_quality;
  nlohmann::json ord = nlohmann::json::array();
  for (DegradationStage s : order) ord.push_back(stage_name(s));
  j["order"] = ord;
  j["seed"] = seed;
  return j.dump();
}

DegradationRecipe DegradationRecipe::from_json_string(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DegradationRecipe r;
  const auto& b = j.at("blur");
  r.blur.kind = blur_from_name(b.at("kind").get<std::string>());
  r.blur.sigma_x = b.at("sigma_x").get<double>();
  r.blur.sigma_y = b.at("sigma_y").get<double>();
  r.blur.angle = b.at("angle").get<double>();
  r.blur.kernel_size = b.at("kernel_size").get<int>();
  r.scale = j.at("scale").get<int>();
  r.noise_sigma = j.at("noise_sigma").get<double>();
  r.compress = j.at("compress").get<bool>();
  r.compression_quality = j.at("compression_quality").get<double>();
  const auto& ord = j.at("order");
  if (ord.size() != 4) throw std::invalid_argument("recipe order must list four stages");
  for (std::size_t i = 0; i < 4; ++i) r.order[i] = stage_from_name(ord[i].get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.validate();
  return r;
}

DegradationRecipe sample_recipe(std::uint64_t seed) {
  Rng coin(mix_seed(seed, 0x5343414c45));  // "SCALE"
  const int scale = coin.uniform() < 0.5 ? 2 : 4;
  return sample_recipe(seed, scale);
}

DegradationRecipe sample_recipe(std::uint64_t seed, int scale, const DegradationRanges& ranges) {
  Rng rng(mix_seed(seed, 0x524543495045));  // "RECIPE"
  DegradationRecipe r;
  r.seed = seed;
  r.scale = scale;

  r.blur.kind = rng.uniform() < ranges.p_aniso ? BlurKind::gaussian_aniso : BlurKind::gaussian_iso;
  r.blur.sigma_x = rng.uniform(ranges.blur_sigma_min, ranges.blur_sigma_max);
  if (r.blur.kind == BlurKind::gaussian_aniso) {
    r.blur.sigma_y = rng.uniform(ranges.blur_sigma_min, ranges.blur_sigma_max);
    r.blur.angle = rng.uniform(0.0, std::numbers::pi);
  } else {
    r.blur.sigma_y = r.blur.sigma_x;
    r.blur.angle = 0.0;
  }
  const int n_sizes = (ranges.kernel_size_max - ranges.kernel_size_min) / 2 + 1;
  r.blur.kernel_size = ranges.kernel_size_min + 2 * rng.index(n_sizes);

  r.noise_sigma = rng.uniform(0.0, ranges.noise_sigma_max);

  r.compress = rng.uniform() < ranges.p_compress;
  r.compression_quality = rng.uniform(ranges.quality_min, ranges.quality_max);

  r.order = {DegradationStage::blur, DegradationStage::downsample, DegradationStage::noise,
             DegradationStage::compression};
  rng.shuffle(r.order.data(), 4);

  r.validate();
  return r;
}

ImagePatch gaussian_blur(const ImagePatch& img, const BlurSpec& spec) {
  img.validate();
  if (spec.kind == BlurKind::none) return img;
  const int ks = spec.kernel_size;
  const int half = ks / 2;

  // Inverse covariance of the (possibly rotated) gaussian.
  const double c = std::cos(spec.angle), s = std::sin(spec.angle);
  const double ivx = 1.0 / (spec.sigma_x * spec.sigma_x);
  const double ivy = 1.0 / (spec.sigma_y * spec.sigma_y);
  const double a = c * c * ivx + s * s * ivy;
  const double b = s * c * (ivx - ivy);
  const double d = s * s * ivx + c * c * ivy;

  std::vector<double> kernel(static_cast<std::size_t>(ks) * ks);
  double sum = 0.0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const double q = a * dx * dx + 2.0 * b * dx * dy + d * dy * dy;
      const double w = std::exp(-0.5 * q);
      kernel[static_cast<std::size_t>(dy + half) * ks + (dx + half)] = w;
      sum += w;
    }
  }
  for (double& w : kernel) w /= sum;

  const int h = img.height(), w = img.width();
  ImagePatch out = ImagePatch::zeros(img.channels(), h, w);
  for (int ch = 0; ch < img.channels(); ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -half; dy <= half; ++dy) {
          const int sy = std::clamp(y + dy, 0, h - 1);
          for (int dx = -half; dx <= half; ++dx) {
            const int sx = std::clamp(x + dx, 0, w - 1);
            acc += kernel[static_cast<std::size_t>(dy + half) * ks + (dx + half)] *
                   img.at(ch, sy, sx);
          }
        }
        out.at(ch, y, x) = acc;
      }
    }
  }
  return out;
}

ImagePatch add_gaussian_noise(const ImagePatch& img, double sigma, std::uint64_t seed) {
  img.validate();
  if (sigma == 0.0) return img;
  Rng rng(seed);
  ImagePatch out = img;
  for (std::int64_t i = 0; i < out.data.size(); ++i) out.data[i] += rng.normal(0.0, sigma);
  return out;
}

namespace {

constexpr int kBlock = 8;

// Orthonormal DCT-II basis for an 8-point signal.
struct DctBasis {
  double m[kBlock][kBlock];
  DctBasis() {
    for (int k = 0; k < kBlock; ++k) {
      const double norm = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int n = 0; n < kBlock; ++n) {
        m[k][n] = norm * std::cos(std::numbers::pi * (n + 0.5) * k / kBlock);
      }
    }
  }
};

// Quantization step rises with spatial frequency and with (100 - quality);
// quality 100 would leave coefficients untouched up to rounding.
double quant_step(int u, int v, double quality) {
  const double strength = (100.0 - quality) / 50.0;
  return strength * (0.02 + 0.08 * (u + v));
}

}  // namespace

ImagePatch dct_compress(const ImagePatch& img, double quality) {
  img.validate();
  static const DctBasis basis;

  const int h = img.height(), w = img.width();
  const int ph = (h + kBlock - 1) / kBlock * kBlock;
  const int pw = (w + kBlock - 1) / kBlock * kBlock;

  ImagePatch out = img;
  double block[kBlock][kBlock];
  double tmp[kBlock][kBlock];
  double coef[kBlock][kBlock];
  for (int ch = 0; ch < img.channels(); ++ch) {
    for (int by = 0; by < ph; by += kBlock) {
      for (int bx = 0; bx < pw; bx += kBlock) {
        // Fetch with edge replication so partial border blocks still transform.
        for (int y = 0; y < kBlock; ++y) {
          for (int x = 0; x < kBlock; ++x) {
            block[y][x] = img.at(ch, std::min(by + y, h - 1), std::min(bx + x, w - 1));
          }
        }
        // Forward 2-D DCT: rows then columns.
        for (int y = 0; y < kBlock; ++y) {
          for (int k = 0; k < kBlock; ++k) {
            double acc = 0.0;
            for (int n = 0; n < kBlock; ++n) acc += basis.m[k][n] * block[y][n];
            tmp[y][k] = acc;
          }
        }
        for (int x = 0; x < kBlock; ++x) {
          for (int k = 0; k < kBlock; ++k) {
            double acc = 0.0;
            for (int n = 0; n < kBlock; ++n) acc += basis.m[k][n] * tmp[n][x];
            coef[k][x] = acc;
          }
        }
        // Quantize, then invert.
        for (int v = 0; v < kBlock; ++v) {
          for (int u = 0; u < kBlock; ++u) {
            const double step = quant_step(u, v, quality);
            if (step > 0.0) coef[v][u] = std::round(coef[v][u] / step) * step;
          }
        }
        for (int x = 0; x < kBlock; ++x) {
          for (int n = 0; n < kBlock; ++n) {
            double acc = 0.0;
            for (int k = 0; k < kBlock; ++k) acc += basis.m[k][n] * coef[k][x];
            tmp[n][x] = acc;
          }
        }
        for (int y = 0; y < kBlock; ++y) {
          for (int n = 0; n < kBlock; ++n) {
            double acc = 0.0;
            for (int k = 0; k < kBlock; ++k) acc += basis.m[k][n] * tmp[y][k];
            block[y][n] = acc;
          }
        }
        for (int y = 0; y < kBlock && by + y < h; ++y) {
          for (int x = 0; x < kBlock && bx + x < w; ++x) {
            out.at(ch, by + y, bx + x) = block[y][x];
          }
        }
      }
    }
  }
  return out;
}

ImagePatch degrade(const ImagePatch& hr, const DegradationRecipe& recipe) {
  hr.validate();
  recipe.validate();
  if (hr.height() % recipe.scale != 0 || hr.width() % recipe.scale != 0) {
    throw std::invalid_argument("degrade: extents " + std::to_string(hr.height()) + "x" +
                                std::to_string(hr.width()) + " not divisible by scale " +
                                std::to_string(recipe.scale));
  }
  ImagePatch img = hr;
  for (DegradationStage stage : recipe.order) {
    switch (stage) {
      case DegradationStage::blur:
        img = gaussian_blur(img, recipe.blur);
        break;
      case DegradationStage::downsample:
        if (recipe.scale > 1) img = downscale_bicubic(img, recipe.scale);
        break;
      case DegradationStage::noise:
        img = add_gaussian_noise(img, recipe.noise_sigma, mix_seed(recipe.seed, kNoiseStream));
        break;
      case DegradationStage::compression:
        if (recipe.compress) img = dct_compress(img, recipe.compression_quality);
        break;
    }
  }
  return clamp01(img);
}

}  // namespace ugtsr
