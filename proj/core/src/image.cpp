#include "ugtsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ugtsr {

ImagePatch ImagePatch::zeros(int channels, int height, int width) {
  ImagePatch img;
  img.data = Tensor::zeros({channels, height, width});
  return img;
}

void ImagePatch::validate() const {
  if (data.rank() != 3) throw std::invalid_argument("image must be {C, H, W}");
  if (channels() < 1 || height() < 1 || width() < 1) {
    throw std::invalid_argument("image needs positive extents, got " + data.shape_str());
  }
  if (!data.all_finite()) throw std::invalid_argument("image contains non-finite samples");
}

ImagePatch clamp01(const ImagePatch& img) {
  ImagePatch out = img;
  for (std::int64_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::clamp(out.data[i], 0.0, 1.0);
  }
  return out;
}

ImagePatch to_luma(const ImagePatch& img) {
  img.validate();
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw std::invalid_argument("luma conversion expects 1 or 3 channels, got " +
                                std::to_string(img.channels()));
  }
  ImagePatch out = ImagePatch::zeros(1, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(0, y, x) =
          0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    }
  }
  return out;
}

ImagePatch crop(const ImagePatch& img, int y0, int x0, int height, int width) {
  img.validate();
  if (y0 < 0 || x0 < 0 || height < 1 || width < 1 || y0 + height > img.height() ||
      x0 + width > img.width()) {
    throw std::invalid_argument("crop window [" + std::to_string(y0) + "," + std::to_string(x0) +
                                "]+" + std::to_string(height) + "x" + std::to_string(width) +
                                " leaves image " + img.data.shape_str());
  }
  ImagePatch out = ImagePatch::zeros(img.channels(), height, width);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
      }
    }
  }
  return out;
}

namespace {
constexpr char kRawMagic[8] = {'U', 'G', 'T', 'S', 'R', 'I', 'M', 'G'};
constexpr std::uint32_t kRawVersion = 1;
}  // namespace

void save_raw_image(const ImagePatch& img, const std::string& path) {
  img.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_raw_image: cannot open " + path);
  out.write(kRawMagic, sizeof(kRawMagic));
  const std::uint32_t version = kRawVersion;
  const std::uint32_t c = static_cast<std::uint32_t>(img.channels());
  const std::uint32_t h = static_cast<std::uint32_t>(img.height());
  const std::uint32_t w = static_cast<std::uint32_t>(img.width());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&c), sizeof(c));
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(&w), sizeof(w));
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(sizeof(double) * img.data.size()));
  if (!out) throw std::runtime_error("save_raw_image: write failed for " + path);
}

ImagePatch load_raw_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_raw_image: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kRawMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_raw_image: bad magic in " + path);
  }
  std::uint32_t version = 0, c = 0, h = 0, w = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&c), sizeof(c));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  in.read(reinterpret_cast<char*>(&w), sizeof(w));
  if (!in || version != kRawVersion) {
    throw std::runtime_error("load_raw_image: unsupported version in " + path);
  }
  ImagePatch img =
      ImagePatch::zeros(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(sizeof(double) * img.data.size()));
  if (!in) throw std::runtime_error("load_raw_image: truncated file " + path);
  return img;
}

}  // namespace ugtsr
