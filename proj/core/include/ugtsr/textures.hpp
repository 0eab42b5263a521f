#pragma once

#include <cstdint>
#include <vector>

#include "ugtsr/image.hpp"

namespace ugtsr {

// Procedural HR generators. Each is a pure function of (size, seed) and
// returns an RGB patch in [0,1]. The four families cover the regimes a
// restoration model meets: periodic hard edges, band-limited oscillation,
// smooth gradients, and piecewise-constant regions with sharp boundaries.
ImagePatch make_checkerboard(int size, std::uint64_t seed);
ImagePatch make_grating(int size, std::uint64_t seed);
ImagePatch make_blobs(int size, std::uint64_t seed);
ImagePatch make_edge_chart(int size, std::uint64_t seed);

// kind cycles through the four families (0 checkerboard, 1 grating, 2 blobs,
// 3 edge chart); out-of-range kinds throw.
ImagePatch make_texture(int kind, int size, std::uint64_t seed);

// A test pattern with ground-truth region structure: pixels near a region
// boundary are flagged as edge, pixels deep inside one region as flat.
// Masks are byte-per-pixel (row-major, 1 = member) and always disjoint.
struct ProbePattern {
  ImagePatch image;
  std::vector<std::uint8_t> edge_mask;
  std::vector<std::uint8_t> flat_mask;
};

// Ten disc/rectangle charts over smooth backgrounds, deterministic in seed;
// both masks are guaranteed non-empty for size >= 32.
std::vector<ProbePattern> make_probe_patterns(int size, std::uint64_t seed);

}  // namespace ugtsr
