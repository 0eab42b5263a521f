#include "ugtsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ugtsr/resample.hpp"

namespace ugtsr {

namespace {

constexpr double kPsnrCapDb = 100.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void require_pair(const ImagePatch& a, const ImagePatch& b) {
  a.validate();
  b.validate();
  if (!a.data.same_shape(b.data)) {
    throw std::invalid_argument("metric inputs must share a shape, got " + a.data.shape_str() +
                                " vs " + b.data.shape_str());
  }
}

}  // namespace

double psnr_y(const ImagePatch& ref, const ImagePatch& test) {
  require_pair(ref, test);
  const ImagePatch ya = to_luma(ref);
  const ImagePatch yb = to_luma(test);
  double mse = 0.0;
  for (std::int64_t i = 0; i < ya.data.size(); ++i) {
    const double d = ya.data[i] - yb.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(ya.data.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, -10.0 * std::log10(mse));
}

double ssim_y(const ImagePatch& ref, const ImagePatch& test) {
  require_pair(ref, test);
  const ImagePatch ya = to_luma(ref);
  const ImagePatch yb = to_luma(test);
  const int h = ya.height(), w = ya.width();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw std::invalid_argument("ssim needs images of at least " + std::to_string(kSsimWindow) +
                                "x" + std::to_string(kSsimWindow));
  }

  double kernel[kSsimWindow][kSsimWindow];
  double ksum = 0.0;
  for (int y = 0; y < kSsimWindow; ++y) {
    for (int x = 0; x < kSsimWindow; ++x) {
      const double dy = y - kSsimWindow / 2, dx = x - kSsimWindow / 2;
      kernel[y][x] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSsimSigma * kSsimSigma));
      ksum += kernel[y][x];
    }
  }
  for (auto& row : kernel) {
    for (double& v : row) v /= ksum;
  }

  constexpr double c1 = 0.01 * 0.01;  // (K1*L)^2 with L = 1
  constexpr double c2 = 0.03 * 0.03;

  double total = 0.0;
  std::int64_t count = 0;
  for (int y0 = 0; y0 + kSsimWindow <= h; ++y0) {
    for (int x0 = 0; x0 + kSsimWindow <= w; ++x0) {
      double mu_a = 0.0, mu_b = 0.0;
      for (int y = 0; y < kSsimWindow; ++y) {
        for (int x = 0; x < kSsimWindow; ++x) {
          mu_a += kernel[y][x] * ya.at(0, y0 + y, x0 + x);
          mu_b += kernel[y][x] * yb.at(0, y0 + y, x0 + x);
        }
      }
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int y = 0; y < kSsimWindow; ++y) {
        for (int x = 0; x < kSsimWindow; ++x) {
          const double da = ya.at(0, y0 + y, x0 + x) - mu_a;
          const double db = yb.at(0, y0 + y, x0 + x) - mu_b;
          var_a += kernel[y][x] * da * da;
          var_b += kernel[y][x] * db * db;
          cov += kernel[y][x] * da * db;
        }
      }
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

ImagePatch bicubic_baseline(const ImagePatch& lr, int scale) {
  // Clamped like every evaluated model output: cubic overshoot outside [0,1]
  // must not penalize the baseline the comparison is anchored to.
  return clamp01(upscale_bicubic(lr, scale));
}

ImagePatch super_resolve(SrModel& model, const ImagePatch& lr, int stage) {
  ad::ValueOnlyScope scope;
  const SrForward fwd = model.sr_forward(lr, stage);
  return clamp01(image_from_tensor(fwd.sr->value));
}

MetricReport evaluate_model(SrModel& model, const Dataset& ds, const std::string& split,
                            int stage) {
  MetricReport report;
  for (const DatasetItem* item : ds.split(split)) {
    const ImagePatch hr = load_item_hr(ds, *item);
    const ImagePatch lr = load_item_lr(ds, *item);
    const ImagePatch sr = super_resolve(model, lr, stage);
    report.rows.push_back({item->id, psnr_y(hr, sr), ssim_y(hr, sr)});
  }
  if (report.rows.empty()) throw std::runtime_error("evaluate: split '" + split + "' is empty");
  for (const auto& r : report.rows) {
    report.mean_psnr_db += r.psnr_db;
    report.mean_ssim += r.ssim;
  }
  report.mean_psnr_db /= static_cast<double>(report.rows.size());
  report.mean_ssim /= static_cast<double>(report.rows.size());
  return report;
}

MetricReport evaluate_bicubic(const Dataset& ds, const std::string& split) {
  MetricReport report;
  for (const DatasetItem* item : ds.split(split)) {
    const ImagePatch hr = load_item_hr(ds, *item);
    const ImagePatch lr = load_item_lr(ds, *item);
    const ImagePatch up = bicubic_baseline(lr, ds.config.scale);
    report.rows.push_back({item->id, psnr_y(hr, up), ssim_y(hr, up)});
  }
  if (report.rows.empty()) throw std::runtime_error("evaluate: split '" + split + "' is empty");
  for (const auto& r : report.rows) {
    report.mean_psnr_db += r.psnr_db;
    report.mean_ssim += r.ssim;
  }
  report.mean_psnr_db /= static_cast<double>(report.rows.size());
  report.mean_ssim /= static_cast<double>(report.rows.size());
  return report;
}

void write_metric_csv(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics CSV to " + path);
  out << "image_id,psnr_db,ssim\n";
  char buf[96];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f\n", r.image_id, r.psnr_db, r.ssim);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f\n", report.mean_psnr_db, report.mean_ssim);
  out << buf;
  if (!out) throw std::runtime_error("metrics CSV write failed for " + path);
}

HitRateReport dataset_hit_rate(SrModel& model, const Dataset& ds, const std::string& split,
                               int k) {
  const Codebook cb = model.codebook();
  HitRateReport pooled;
  pooled.k = k;
  ad::ValueOnlyScope scope;
  for (const DatasetItem* item : ds.split(split)) {
    const ImagePatch hr = load_item_hr(ds, *item);
    const ImagePatch lr = load_item_lr(ds, *item);
    const LatentGrid gt_grid = model.hr_latents(hr);
    const MatchResult gt = quantize_nearest(gt_grid, cb);

    const ad::Var enc = model.encode_lq(lr);
    LatentGrid lq;
    lq.h = enc->value.dim(1);
    lq.w = enc->value.dim(2);
    lq.values = ad::chw_to_tokens(enc)->value;

    const HitRateReport r = hit_rate(lq, gt.indices, cb, k);
    pooled.hits += r.hits;
    pooled.total += r.total;
  }
  if (pooled.total == 0) throw std::runtime_error("hit-rate: split '" + split + "' is empty");
  pooled.rate = static_cast<double>(pooled.hits) / static_cast<double>(pooled.total);
  return pooled;
}

}  // namespace ugtsr
