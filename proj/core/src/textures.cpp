#include "ugtsr/textures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ugtsr/rng.hpp"

namespace ugtsr {

namespace {

struct Color {
  double r, g, b;
};

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

void put(ImagePatch& img, int y, int x, const Color& c) {
  img.at(0, y, x) = c.r;
  img.at(1, y, x) = c.g;
  img.at(2, y, x) = c.b;
}

}  // namespace

ImagePatch make_checkerboard(int size, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xC3EC));
  // Cells of 6+ pixels survive the degradation pipeline at 2x; finer checkers
  // alias away entirely and leave nothing for a restorer to recover.
  const int cell = 6 + 2 * rng.index(6);  // 6..16
  const int off_y = rng.index(cell);
  const int off_x = rng.index(cell);
  const Color a = random_color(rng);
  const Color b = random_color(rng);
  ImagePatch img = ImagePatch::zeros(3, size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool odd = (((y + off_y) / cell) + ((x + off_x) / cell)) % 2 != 0;
      put(img, y, x, odd ? a : b);
    }
  }
  return img;
}

ImagePatch make_grating(int size, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x62A7));
  const double angle = rng.uniform(0.0, std::numbers::pi);
  // Same recoverability floor as the checkerboard cells: periods under ~6
  // pixels do not survive blur + 2x downsampling.
  const double period = rng.uniform(6.0, 24.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Color lo = random_color(rng);
  const Color hi = random_color(rng);
  const double kx = std::cos(angle) * 2.0 * std::numbers::pi / period;
  const double ky = std::sin(angle) * 2.0 * std::numbers::pi / period;
  ImagePatch img = ImagePatch::zeros(3, size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = 0.5 + 0.5 * std::sin(kx * x + ky * y + phase);
      put(img, y, x,
          {lo.r + (hi.r - lo.r) * t, lo.g + (hi.g - lo.g) * t, lo.b + (hi.b - lo.b) * t});
    }
  }
  return img;
}

ImagePatch make_blobs(int size, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xB70B));
  const int n = 3 + rng.index(5);
  struct Blob {
    double cy, cx, radius, weight;
    Color color;
  };
  std::vector<Blob> blobs(n);
  for (Blob& b : blobs) {
    b.cy = rng.uniform(0.0, size);
    b.cx = rng.uniform(0.0, size);
    b.radius = rng.uniform(size / 8.0, size / 2.0);
    b.weight = rng.uniform(0.4, 1.0);
    b.color = random_color(rng);
  }
  const Color base = random_color(rng);
  ImagePatch img = ImagePatch::zeros(3, size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double r = base.r, g = base.g, b = base.b, total = 1.0;
      for (const Blob& bl : blobs) {
        const double d2 = (y - bl.cy) * (y - bl.cy) + (x - bl.cx) * (x - bl.cx);
        const double w = bl.weight * std::exp(-d2 / (2.0 * bl.radius * bl.radius));
        r += w * bl.color.r;
        g += w * bl.color.g;
        b += w * bl.color.b;
        total += w;
      }
      put(img, y, x, {r / total, g / total, b / total});
    }
  }
  return img;
}

namespace {

// Painter's-algorithm shape chart shared by make_edge_chart and the probe
// patterns: later shapes cover earlier ones; the region map records which
// shape owns each pixel so boundaries are known exactly.
struct ShapeChart {
  ImagePatch image;
  std::vector<int> region;  // row-major shape id per pixel, 0 = background
};

ShapeChart make_shape_chart(int size, Rng& rng) {
  ShapeChart chart;
  chart.image = ImagePatch::zeros(3, size, size);
  chart.region.assign(static_cast<std::size_t>(size) * size, 0);

  // Smooth low-frequency background: a gentle diagonal ramp between two colors.
  const Color bg_a = random_color(rng);
  const Color bg_b = random_color(rng);
  const double ramp_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double rx = std::cos(ramp_angle), ry = std::sin(ramp_angle);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = 0.5 + 0.5 * (rx * (x - size / 2.0) + ry * (y - size / 2.0)) / size;
      put(chart.image, y, x,
          {bg_a.r + (bg_b.r - bg_a.r) * t, bg_a.g + (bg_b.g - bg_a.g) * t,
           bg_a.b + (bg_b.b - bg_a.b) * t});
    }
  }

  const int n_shapes = 3 + rng.index(3);
  for (int s = 1; s <= n_shapes; ++s) {
    const bool disc = rng.uniform() < 0.5;
    const Color fill = random_color(rng);
    if (disc) {
      const double cy = rng.uniform(size * 0.2, size * 0.8);
      const double cx = rng.uniform(size * 0.2, size * 0.8);
      const double rad = rng.uniform(size * 0.12, size * 0.3);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
          if (d2 <= rad * rad) {
            put(chart.image, y, x, fill);
            chart.region[static_cast<std::size_t>(y) * size + x] = s;
          }
        }
      }
    } else {
      const int h = 4 + rng.index(size / 2);
      const int w = 4 + rng.index(size / 2);
      const int y0 = rng.index(size - h);
      const int x0 = rng.index(size - w);
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          put(chart.image, y, x, fill);
          chart.region[static_cast<std::size_t>(y) * size + x] = s;
        }
      }
    }
  }
  return chart;
}

// edge = within `edge_halo` pixels of a region change; flat = every pixel in
// the surrounding (2*flat_margin+1)^2 window shares one region.
void masks_from_regions(const std::vector<int>& region, int size, int edge_halo, int flat_margin,
                        std::vector<std::uint8_t>& edge, std::vector<std::uint8_t>& flat) {
  const auto at = [&](int y, int x) { return region[static_cast<std::size_t>(y) * size + x]; };
  std::vector<std::uint8_t> boundary(region.size(), 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int r = at(y, x);
      if ((x + 1 < size && at(y, x + 1) != r) || (y + 1 < size && at(y + 1, x) != r)) {
        boundary[static_cast<std::size_t>(y) * size + x] = 1;
      }
    }
  }
  edge.assign(region.size(), 0);
  flat.assign(region.size(), 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool near_boundary = false;
      for (int dy = -edge_halo; dy <= edge_halo && !near_boundary; ++dy) {
        for (int dx = -edge_halo; dx <= edge_halo && !near_boundary; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < size && xx >= 0 && xx < size &&
              boundary[static_cast<std::size_t>(yy) * size + xx]) {
            near_boundary = true;
          }
        }
      }
      if (near_boundary) {
        edge[static_cast<std::size_t>(y) * size + x] = 1;
        continue;
      }
      bool uniform = true;
      const int r = at(y, x);
      for (int dy = -flat_margin; dy <= flat_margin && uniform; ++dy) {
        for (int dx = -flat_margin; dx <= flat_margin && uniform; ++dx) {
          const int yy = std::clamp(y + dy, 0, size - 1);
          const int xx = std::clamp(x + dx, 0, size - 1);
          if (at(yy, xx) != r) uniform = false;
        }
      }
      if (uniform) flat[static_cast<std::size_t>(y) * size + x] = 1;
    }
  }
}

}  // namespace

ImagePatch make_edge_chart(int size, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xED6E));
  return make_shape_chart(size, rng).image;
}

ImagePatch make_texture(int kind, int size, std::uint64_t seed) {
  switch (kind) {
    case 0: return make_checkerboard(size, seed);
    case 1: return make_grating(size, seed);
    case 2: return make_blobs(size, seed);
    case 3: return make_edge_chart(size, seed);
    default: throw std::invalid_argument("texture kind must be 0..3, got " + std::to_string(kind));
  }
}

std::vector<ProbePattern> make_probe_patterns(int size, std::uint64_t seed) {
  if (size < 32) throw std::invalid_argument("probe patterns need size >= 32");
  std::vector<ProbePattern> probes;
  probes.reserve(10);
  for (int i = 0; i < 10; ++i) {
    Rng rng(mix_seed(seed, 0x9B0BE000 + static_cast<std::uint64_t>(i)));
    ShapeChart chart = make_shape_chart(size, rng);
    ProbePattern p;
    p.image = std::move(chart.image);
    masks_from_regions(chart.region, size, /*edge_halo=*/2, /*flat_margin=*/4, p.edge_mask,
                       p.flat_mask);
    probes.push_back(std::move(p));
  }
  return probes;
}

}  // namespace ugtsr
