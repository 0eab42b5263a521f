#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugtsr/tensor.hpp"

namespace ugtsr {

// Learned set of K discrete code vectors, the high-quality prior that latent
// features are matched against.
struct Codebook {
  Tensor entries;  // {K, n_z}

  int K() const { return entries.rows(); }
  int n_z() const { return entries.cols(); }

  const double* entry(int k) const { return entries.data() + static_cast<std::int64_t>(k) * n_z(); }

  void validate() const;  // K>=1, n_z>=1, all finite
};

// h x w grid of n_z-dimensional latent vectors, stored row-major as
// {h*w, n_z} so each grid cell is one matrix row.
struct LatentGrid {
  int h = 0;
  int w = 0;
  Tensor values;  // {h*w, n_z}

  int n_z() const { return values.cols(); }
  int cells() const { return h * w; }
  const double* cell(int i) const { return values.data() + static_cast<std::int64_t>(i) * n_z(); }
  double* cell(int i) { return values.data() + static_cast<std::int64_t>(i) * n_z(); }

  static LatentGrid zeros(int h, int w, int n_z);
  void validate() const;
};

// Result of matching a latent grid against a codebook. candidate_* hold the
// k nearest codes per cell in ascending distance; indices holds the final
// chosen code per cell.
struct MatchResult {
  int h = 0;
  int w = 0;
  int k = 0;
  std::vector<int> indices;              // h*w
  std::vector<int> candidate_indices;    // h*w*k
  std::vector<double> candidate_distances;  // h*w*k, Euclidean, non-decreasing per cell

  int candidate(int cell, int j) const { return candidate_indices[static_cast<std::size_t>(cell) * k + j]; }
  double distance(int cell, int j) const { return candidate_distances[static_cast<std::size_t>(cell) * k + j]; }
};

struct HitRateReport {
  int k = 0;
  std::int64_t hits = 0;
  std::int64_t total = 0;
  double rate = 0.0;
};

// Attention-based fusion of the k candidate codes, gated against the nearest
// candidate. With gate() == 0 the output is exactly the nearest candidate.
//
//   w  = softmax_j( (q Wq) . (c_j Wc) / sqrt(n_z) )
//   out = (1 - g) * c_1 + g * sum_j w_j c_j,   g = clamp(gate_raw, 0, 1)
struct FusionParams {
  int k = 0;
  Tensor query_proj;  // {n_z, d}
  Tensor cand_proj;   // {n_z, d}
  Tensor gate_raw;    // {1}

  double gate() const;

  // identity projections, gate 0: output == nearest candidate
  static FusionParams identity_gate(int k, int n_z);
  // zero projections, gate 1: output == arithmetic mean of candidates
  static FusionParams uniform_mean(int k, int n_z);
  static FusionParams seeded(int k, int n_z, std::uint64_t seed);

  void validate(int n_z) const;
};

// Nearest-neighbor quantization: per cell, the index minimizing Euclidean
// distance, ties broken by lowest index.
MatchResult quantize_nearest(const LatentGrid& latents, const Codebook& codebook,
                             LatentGrid* quantized = nullptr);

// Per cell, the k distinct nearest code indices in ascending distance.
MatchResult topk_candidates(const LatentGrid& latents, const Codebook& codebook, int k);

// Single-cell fusion used by quantize_topk; `query` and `candidates` must
// have dimension n_z. candidates are row-major {k, n_z}, nearest first.
void fuse_candidates(const double* query, const double* candidates, const FusionParams& params,
                     int n_z, double* out);

// Top-k pipeline: topk_candidates -> fuse_candidates -> nearest-neighbor
// re-quantization of the fused vector. The final index per cell lands in
// MatchResult::indices; `fused` (optional) receives the fused vectors.
MatchResult quantize_topk(const LatentGrid& latents, const Codebook& codebook, int k,
                          const FusionParams& params, LatentGrid* quantized = nullptr,
                          LatentGrid* fused = nullptr);

// Fraction of cells whose ground-truth index appears in the cell's top-k
// candidate set.
HitRateReport hit_rate(const LatentGrid& lq_latents, const std::vector<int>& gt_indices,
                       const Codebook& codebook, int k);

// Versioned binary container, bit-exact round trip (see README for layout).
void save_codebook(const Codebook& codebook, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace ugtsr
