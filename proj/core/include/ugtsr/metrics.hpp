#pragma once

#include <string>
#include <vector>

#include "ugtsr/codebook.hpp"
#include "ugtsr/dataset.hpp"
#include "ugtsr/image.hpp"
#include "ugtsr/models.hpp"

namespace ugtsr {

struct MetricRow {
  int image_id = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
};

// Luma PSNR over [0,1] images: 10*log10(1/MSE) on the BT.601 Y channel,
// capped at 100 dB so identical pairs stay finite.
double psnr_y(const ImagePatch& ref, const ImagePatch& test);

// Single-scale luma SSIM, 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, valid-window averaging. Images smaller than the window throw.
double ssim_y(const ImagePatch& ref, const ImagePatch& test);

// Deterministic bicubic upsample; the quality floor every SR result is
// compared against.
ImagePatch bicubic_baseline(const ImagePatch& lr, int scale);

// Value-only model pass; output clamped to [0,1].
ImagePatch super_resolve(SrModel& model, const ImagePatch& lr, int stage);

MetricReport evaluate_model(SrModel& model, const Dataset& ds, const std::string& split,
                            int stage);
MetricReport evaluate_bicubic(const Dataset& ds, const std::string& split);

// `image_id,psnr_db,ssim` rows plus a `mean,...` footer.
void write_metric_csv(const MetricReport& report, const std::string& path);

// Fraction of validation latent cells whose ground-truth code (from the HR
// encoder) appears among the LQ encoder's top-k candidates, pooled over the
// split.
HitRateReport dataset_hit_rate(SrModel& model, const Dataset& ds, const std::string& split,
                               int k);

}  // namespace ugtsr
