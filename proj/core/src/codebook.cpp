#include "ugtsr/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ugtsr/rng.hpp"

namespace ugtsr {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sq_dist(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

void Codebook::validate() const {
  require(entries.rank() == 2, "codebook entries must be {K, n_z}");
  require(K() >= 1 && n_z() >= 1, "codebook needs K >= 1 and n_z >= 1");
  require(entries.all_finite(), "codebook entries must be finite");
}

LatentGrid LatentGrid::zeros(int h, int w, int n_z) {
  LatentGrid g;
  g.h = h;
  g.w = w;
  g.values = Tensor::zeros({h * w, n_z});
  return g;
}

void LatentGrid::validate() const {
  require(h >= 1 && w >= 1, "latent grid needs positive extents");
  require(values.rank() == 2 && values.rows() == h * w, "latent grid storage mismatch");
  require(values.all_finite(), "latent grid contains non-finite values");
}

double FusionParams::gate() const { return std::clamp(gate_raw[0], 0.0, 1.0); }

FusionParams FusionParams::identity_gate(int k, int n_z) {
  FusionParams p;
  p.k = k;
  p.query_proj = Tensor::zeros({n_z, n_z});
  p.cand_proj = Tensor::zeros({n_z, n_z});
  for (int i = 0; i < n_z; ++i) {
    p.query_proj.at(i, i) = 1.0;
    p.cand_proj.at(i, i) = 1.0;
  }
  p.gate_raw = Tensor::zeros({1});
  return p;
}

FusionParams FusionParams::uniform_mean(int k, int n_z) {
  FusionParams p;
  p.k = k;
  p.query_proj = Tensor::zeros({n_z, n_z});
  p.cand_proj = Tensor::zeros({n_z, n_z});
  p.gate_raw = Tensor::full({1}, 1.0);
  return p;
}

FusionParams FusionParams::seeded(int k, int n_z, std::uint64_t seed) {
  FusionParams p;
  p.k = k;
  p.query_proj = Tensor::zeros({n_z, n_z});
  p.cand_proj = Tensor::zeros({n_z, n_z});
  Rng rng(seed);
  const double std = 1.0 / std::sqrt(static_cast<double>(n_z));
  for (std::int64_t i = 0; i < p.query_proj.size(); ++i) p.query_proj[i] = rng.normal(0.0, std);
  for (std::int64_t i = 0; i < p.cand_proj.size(); ++i) p.cand_proj[i] = rng.normal(0.0, std);
  p.gate_raw = Tensor::full({1}, rng.uniform());
  return p;
}

void FusionParams::validate(int n_z) const {
  require(k >= 1, "fusion params need k >= 1");
  require(query_proj.rank() == 2 && query_proj.rows() == n_z, "fusion query projection shape mismatch");
  require(cand_proj.rank() == 2 && cand_proj.rows() == n_z, "fusion candidate projection shape mismatch");
  require(query_proj.cols() == cand_proj.cols(), "fusion projections must share output dim");
  require(gate_raw.size() == 1, "fusion gate must be scalar");
}

MatchResult quantize_nearest(const LatentGrid& latents, const Codebook& codebook,
                             LatentGrid* quantized) {
  codebook.validate();
  latents.validate();
  require(latents.n_z() == codebook.n_z(), "quantize_nearest: latent dim " +
                                               std::to_string(latents.n_z()) +
                                               " != codebook dim " + std::to_string(codebook.n_z()));
  const int cells = latents.cells();
  const int K = codebook.K();
  const int n = codebook.n_z();

  MatchResult r;
  r.h = latents.h;
  r.w = latents.w;
  r.k = 1;
  r.indices.resize(cells);
  r.candidate_indices.resize(cells);
  r.candidate_distances.resize(cells);
  if (quantized) *quantized = LatentGrid::zeros(latents.h, latents.w, n);

  for (int i = 0; i < cells; ++i) {
    const double* q = latents.cell(i);
    int best = 0;
    double best_d = sq_dist(q, codebook.entry(0), n);
    for (int j = 1; j < K; ++j) {
      const double d = sq_dist(q, codebook.entry(j), n);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    r.indices[i] = best;
    r.candidate_indices[i] = best;
    r.candidate_distances[i] = std::sqrt(best_d);
    if (quantized) std::memcpy(quantized->cell(i), codebook.entry(best), sizeof(double) * n);
  }
  return r;
}

MatchResult topk_candidates(const LatentGrid& latents, const Codebook& codebook, int k) {
  codebook.validate();
  latents.validate();
  require(latents.n_z() == codebook.n_z(), "topk_candidates: latent/codebook dim mismatch");
  require(k >= 1, "topk_candidates: k must be >= 1");
  require(k <= codebook.K(), "topk_candidates: k = " + std::to_string(k) + " exceeds K = " +
                                 std::to_string(codebook.K()));
  const int cells = latents.cells();
  const int K = codebook.K();
  const int n = codebook.n_z();

  MatchResult r;
  r.h = latents.h;
  r.w = latents.w;
  r.k = k;
  r.indices.resize(cells);
  r.candidate_indices.resize(static_cast<std::size_t>(cells) * k);
  r.candidate_distances.resize(static_cast<std::size_t>(cells) * k);

  // Insertion into a k-slot sorted buffer; ties resolve to the lower index
  // because scanning is in index order and insertion is strict-less.
  std::vector<double> dist(k);
  std::vector<int> idx(k);
  for (int i = 0; i < cells; ++i) {
    const double* q = latents.cell(i);
    int filled = 0;
    for (int j = 0; j < K; ++j) {
      const double d = sq_dist(q, codebook.entry(j), n);
      if (filled < k) {
        int pos = filled++;
        while (pos > 0 && dist[pos - 1] > d) {
          dist[pos] = dist[pos - 1];
          idx[pos] = idx[pos - 1];
          --pos;
        }
        dist[pos] = d;
        idx[pos] = j;
      } else if (d < dist[k - 1]) {
        int pos = k - 1;
        while (pos > 0 && dist[pos - 1] > d) {
          dist[pos] = dist[pos - 1];
          idx[pos] = idx[pos - 1];
          --pos;
        }
        dist[pos] = d;
        idx[pos] = j;
      }
    }
    for (int j = 0; j < k; ++j) {
      r.candidate_indices[static_cast<std::size_t>(i) * k + j] = idx[j];
      r.candidate_distances[static_cast<std::size_t>(i) * k + j] = std::sqrt(dist[j]);
    }
    r.indices[i] = idx[0];
  }
  return r;
}

void fuse_candidates(const double* query, const double* candidates, const FusionParams& params,
                     int n_z, double* out) {
  const int k = params.k;
  const int d = params.query_proj.cols();
  const double g = params.gate();

  // projected query
  std::vector<double> pq(d, 0.0);
  for (int j = 0; j < d; ++j) {
    double s = 0.0;
    for (int i = 0; i < n_z; ++i) s += query[i] * params.query_proj.at(i, j);
    pq[j] = s;
  }

  // attention logits over the k candidates, scaled by sqrt(n_z)
  std::vector<double> logits(k, 0.0);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(n_z));
  for (int c = 0; c < k; ++c) {
    const double* cand = candidates + static_cast<std::int64_t>(c) * n_z;
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double pc = 0.0;
      for (int i = 0; i < n_z; ++i) pc += cand[i] * params.cand_proj.at(i, j);
      s += pq[j] * pc;
    }
    logits[c] = s * inv_sqrt;
  }

  double mx = logits[0];
  for (int c = 1; c < k; ++c) mx = std::max(mx, logits[c]);
  double denom = 0.0;
  for (int c = 0; c < k; ++c) {
    logits[c] = std::exp(logits[c] - mx);
    denom += logits[c];
  }

  for (int i = 0; i < n_z; ++i) {
    double attn = 0.0;
    for (int c = 0; c < k; ++c) {
      attn += (logits[c] / denom) * candidates[static_cast<std::int64_t>(c) * n_z + i];
    }
    out[i] = (1.0 - g) * candidates[i] + g * attn;
  }
}

MatchResult quantize_topk(const LatentGrid& latents, const Codebook& codebook, int k,
                          const FusionParams& params, LatentGrid* quantized, LatentGrid* fused) {
  params.validate(codebook.n_z());
  require(params.k == k, "quantize_topk: fusion params configured for k = " +
                             std::to_string(params.k) + ", requested k = " + std::to_string(k));
  MatchResult r = topk_candidates(latents, codebook, k);

  const int cells = latents.cells();
  const int n = codebook.n_z();
  if (quantized) *quantized = LatentGrid::zeros(latents.h, latents.w, n);
  if (fused) *fused = LatentGrid::zeros(latents.h, latents.w, n);

  std::vector<double> cand(static_cast<std::size_t>(k) * n);
  std::vector<double> fused_vec(n);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < k; ++j) {
      std::memcpy(cand.data() + static_cast<std::int64_t>(j) * n, codebook.entry(r.candidate(i, j)),
                  sizeof(double) * n);
    }
    fuse_candidates(latents.cell(i), cand.data(), params, n, fused_vec.data());
    if (fused) std::memcpy(fused->cell(i), fused_vec.data(), sizeof(double) * n);

    int best = 0;
    double best_d = sq_dist(fused_vec.data(), codebook.entry(0), n);
    for (int j = 1; j < codebook.K(); ++j) {
      const double d = sq_dist(fused_vec.data(), codebook.entry(j), n);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    r.indices[i] = best;
    if (quantized) std::memcpy(quantized->cell(i), codebook.entry(best), sizeof(double) * n);
  }
  return r;
}

HitRateReport hit_rate(const LatentGrid& lq_latents, const std::vector<int>& gt_indices,
                       const Codebook& codebook, int k) {
  require(static_cast<int>(gt_indices.size()) == lq_latents.cells(),
          "hit_rate: ground-truth grid has " + std::to_string(gt_indices.size()) +
              " cells, latents have " + std::to_string(lq_latents.cells()));
  MatchResult m = topk_candidates(lq_latents, codebook, k);
  HitRateReport rep;
  rep.k = k;
  rep.total = lq_latents.cells();
  for (int i = 0; i < lq_latents.cells(); ++i) {
    for (int j = 0; j < k; ++j) {
      if (m.candidate(i, j) == gt_indices[static_cast<std::size_t>(i)]) {
        ++rep.hits;
        break;
      }
    }
  }
  rep.rate = rep.total > 0 ? static_cast<double>(rep.hits) / static_cast<double>(rep.total) : 0.0;
  return rep;
}

namespace {
constexpr char kCodebookMagic[8] = {'U', 'G', 'T', 'S', 'R', 'C', 'B', 'K'};
constexpr std::uint32_t kCodebookVersion = 1;
}  // namespace

void save_codebook(const Codebook& codebook, const std::string& path) {
  codebook.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_codebook: cannot open " + path);
  out.write(kCodebookMagic, sizeof(kCodebookMagic));
  const std::uint32_t version = kCodebookVersion;
  const std::uint32_t k = static_cast<std::uint32_t>(codebook.K());
  const std::uint32_t n = static_cast<std::uint32_t>(codebook.n_z());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&k), sizeof(k));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(codebook.entries.data()),
            static_cast<std::streamsize>(sizeof(double) * codebook.entries.size()));
  if (!out) throw std::runtime_error("save_codebook: write failed for " + path);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_codebook: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCodebookMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("load_codebook: bad magic in " + path);
  }
  std::uint32_t version = 0, k = 0, n = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&k), sizeof(k));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || version != kCodebookVersion) {
    throw std::runtime_error("load_codebook: unsupported version in " + path);
  }
  Codebook cb;
  cb.entries = Tensor::zeros({static_cast<int>(k), static_cast<int>(n)});
  in.read(reinterpret_cast<char*>(cb.entries.data()),
          static_cast<std::streamsize>(sizeof(double) * cb.entries.size()));
  if (!in) throw std::runtime_error("load_codebook: truncated file " + path);
  cb.validate();
  return cb;
}

}  // namespace ugtsr
