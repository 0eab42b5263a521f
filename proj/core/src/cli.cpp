#include "ugtsr/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ugtsr/config.hpp"
#include "ugtsr/dataset.hpp"
#include "ugtsr/matching_bench.hpp"
#include "ugtsr/metrics.hpp"
#include "ugtsr/png_io.hpp"
#include "ugtsr/svg_plot.hpp"
#include "ugtsr/training.hpp"

namespace fs = std::filesystem;

namespace ugtsr {

namespace {

// Flag overrides shared by most subcommands; anything unset falls back to
// the config file (or built-in defaults when no file is given).
struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> data_dir;
  std::optional<int> scale;
  bool overwrite = false;
};

void add_common(CLI::App* sc, CommonOpts& o, bool with_scale = true) {
  sc->add_option("--config", o.config_path, "JSON run config file")
      ->check(CLI::ExistingFile);
  sc->add_option("--seed", o.seed, "master seed override");
  sc->add_option("--out", o.out, "output directory override");
  sc->add_option("--data", o.data_dir, "dataset directory override");
  if (with_scale) sc->add_option("--scale", o.scale, "SR factor override")->check(CLI::IsMember({2, 4}));
  sc->add_flag("--overwrite", o.overwrite, "replace existing outputs");
}

RunConfig base_config(const CommonOpts& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config_file(o.config_path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.model.seed = *o.seed;
  }
  if (o.out) cfg.out_dir = *o.out;
  if (o.data_dir) cfg.data.out_dir = *o.data_dir;
  if (o.scale) {
    cfg.data.scale = *o.scale;
    cfg.model.scale = *o.scale;
  }
  return cfg;
}

// Training and evaluation read the dataset parameters back from the dataset
// directory itself, so the checkpoint fingerprint always reflects the data
// actually on disk rather than whatever the config file claims.
RunConfig resolved_config(const CommonOpts& o) {
  RunConfig cfg = base_config(o);
  if (cfg.data.out_dir.empty()) throw std::runtime_error("no dataset directory (--data or config)");
  const Dataset ds = load_dataset(cfg.data.out_dir);
  const std::string dir = cfg.data.out_dir;
  cfg.data = ds.config;
  cfg.data.out_dir = dir;
  if (cfg.out_dir.empty()) throw std::runtime_error("no output directory (--out or config)");
  cfg.validate();
  return cfg;
}

void require_absent(const fs::path& p, bool overwrite, const std::string& what) {
  if (!overwrite && fs::exists(p)) {
    throw std::runtime_error(what + " already exists at " + p.string() +
                             " (pass --overwrite to replace)");
  }
}

int cmd_make_data(const CommonOpts& o, std::optional<int> n, std::optional<int> size) {
  RunConfig cfg = base_config(o);
  if (o.out) cfg.data.out_dir = *o.out;  // for make-data, --out names the dataset dir
  if (o.seed) cfg.data.seed = *o.seed;
  if (n) cfg.data.n = *n;
  if (size) cfg.data.size = *size;
  cfg.data.overwrite = o.overwrite;
  if (cfg.data.out_dir.empty()) throw std::runtime_error("no dataset directory (--out or config)");
  snapshot_config(cfg, cfg.data.out_dir);
  const Dataset ds = build_toy_dataset(cfg.data);
  std::cout << "wrote " << ds.items.size() << " LR/HR pairs (scale x" << cfg.data.scale << ") to "
            << cfg.data.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& phase, const std::string& variant,
              bool resume) {
  RunConfig cfg = resolved_config(o);
  if (!variant.empty()) cfg.train.variant = variant;
  const fs::path final_ckpt = fs::path(cfg.out_dir) / (phase + ".ckpt");
  if (!resume) require_absent(final_ckpt, o.overwrite, phase + " checkpoint");
  snapshot_config(cfg, cfg.out_dir);
  const TrainResult r = run_phase(cfg, phase, resume);
  std::cout << phase << " done: " << r.losses.size() << " steps recorded, final checkpoint "
            << r.checkpoint_path << "\n";
  char buf[64];
  for (const auto& [name, v] : r.last_val) {
    std::snprintf(buf, sizeof(buf), "  val %s = %.6f\n", name.c_str(), v);
    std::cout << buf;
  }
  return 0;
}

int cmd_infer(const CommonOpts& o, const std::string& input, const std::string& output,
              std::string checkpoint, const std::string& variant, int stage) {
  RunConfig cfg = resolved_config(o);
  if (!variant.empty()) cfg.train.variant = variant;
  if (checkpoint.empty()) {
    checkpoint = (fs::path(cfg.out_dir) / (stage == 1 ? "stage1.ckpt" : "stage2.ckpt")).string();
  }
  require_absent(output, o.overwrite, "output image");
  const std::string phase = stage == 1 ? "stage1" : "stage2";
  SrModel model = load_model(cfg, checkpoint, phase);
  const ImagePatch lr = load_png(input);
  const ImagePatch sr = super_resolve(model, lr, stage);
  save_png(sr, output);
  std::cout << "wrote " << output << " (" << sr.width() << "x" << sr.height() << ")\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& o, const std::string& split, std::string checkpoint,
                 const std::string& variant) {
  RunConfig cfg = resolved_config(o);
  if (!variant.empty()) cfg.train.variant = variant;
  if (checkpoint.empty()) checkpoint = (fs::path(cfg.out_dir) / "stage2.ckpt").string();
  const fs::path csv = fs::path(cfg.out_dir) / ("metrics_" + split + ".csv");
  require_absent(csv, o.overwrite, "metric report");
  SrModel model = load_model(cfg, checkpoint, "stage2");
  const Dataset ds = load_dataset(cfg.data.out_dir);
  const MetricReport rep = evaluate_model(model, ds, split, 2);
  const MetricReport bic = evaluate_bicubic(ds, split);
  write_metric_csv(rep, csv.string());
  char buf[128];
  std::snprintf(buf, sizeof(buf), "model   : %.4f dB  ssim %.4f\nbicubic : %.4f dB  ssim %.4f\n",
                rep.mean_psnr_db, rep.mean_ssim, bic.mean_psnr_db, bic.mean_ssim);
  std::cout << buf << "report: " << csv.string() << "\n";
  return 0;
}

int cmd_hit_rate(const CommonOpts& o, const std::vector<int>& ks, const std::string& split) {
  RunConfig cfg = resolved_config(o);
  const std::string checkpoint = (fs::path(cfg.out_dir) / "stage1.ckpt").string();
  const fs::path csv = fs::path(cfg.out_dir) / ("hit_rate_" + split + ".csv");
  require_absent(csv, o.overwrite, "hit-rate report");
  SrModel model = load_model(cfg, checkpoint, "stage1");
  const Dataset ds = load_dataset(cfg.data.out_dir);

  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot write " + csv.string());
  out << "k,hits,cells,rate\n";
  char buf[96];
  for (const int k : ks) {
    const HitRateReport r = dataset_hit_rate(model, ds, split, k);
    std::snprintf(buf, sizeof(buf), "%d,%lld,%lld,%.6f\n", r.k, static_cast<long long>(r.hits),
                  static_cast<long long>(r.total), r.rate);
    out << buf;
    std::cout << buf;
  }
  if (!out) throw std::runtime_error("hit-rate CSV write failed");
  std::cout << "report: " << csv.string() << "\n";
  return 0;
}

int cmd_bench(const std::string& out_dir, int repeats, std::uint64_t seed, bool overwrite) {
  BenchConfig bc;
  bc.repeats = repeats;
  bc.seed = seed;
  const fs::path csv = fs::path(out_dir) / "bench_matching.csv";
  require_absent(csv, overwrite, "benchmark report");
  fs::create_directories(out_dir);
  const BenchReport rep = run_matching_bench(bc);
  write_bench_csv(rep, csv.string());
  char buf[96];
  std::snprintf(buf, sizeof(buf), "top-k slope %.3f, global-attention slope %.3f\n",
                rep.topk_slope, rep.naive_slope);
  std::cout << buf << "report: " << csv.string() << "\n";
  return 0;
}

BenchReport read_bench_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  BenchReport rep;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty bench CSV " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    char matcher[32];
    int K = 0;
    double secs = 0.0, slope = 0.0;
    if (std::sscanf(line.c_str(), "%31[^,],%d,%lf,%lf", matcher, &K, &secs, &slope) != 4) {
      throw std::runtime_error("malformed bench CSV line: " + line);
    }
    rep.rows.push_back({matcher, K, secs});
    if (std::string(matcher) == "topk") {
      rep.topk_slope = slope;
    } else {
      rep.naive_slope = slope;
    }
  }
  return rep;
}

int cmd_plot(const std::string& from, const std::string& out, bool overwrite) {
  require_absent(out, overwrite, "figure");
  write_bench_plot(read_bench_csv(from), out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_ablate(const CommonOpts& o, const std::vector<std::string>& variants) {
  RunConfig cfg = resolved_config(o);
  require_absent(fs::path(cfg.out_dir) / "ablation.csv", o.overwrite, "ablation report");
  snapshot_config(cfg, cfg.out_dir);
  const std::map<std::string, double> psnr = run_ablation(cfg, variants);
  char buf[96];
  for (const auto& [name, v] : psnr) {
    std::snprintf(buf, sizeof(buf), "%-12s %.4f dB\n", name.c_str(), v);
    std::cout << buf;
  }
  std::cout << "report: " << (fs::path(cfg.out_dir) / "ablation.csv").string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Codebook-prior super-resolution toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  CommonOpts mk;
  std::optional<int> mk_n, mk_size;
  auto* sc_mk = app.add_subcommand("make-data", "generate the procedural LR/HR dataset");
  add_common(sc_mk, mk);
  sc_mk->add_option("--n", mk_n, "number of image pairs");
  sc_mk->add_option("--size", mk_size, "HR patch extent");
  sc_mk->callback([&] { rc = cmd_make_data(mk, mk_n, mk_size); });

  CommonOpts pre;
  bool pre_resume = false;
  auto* sc_pre = app.add_subcommand("pretrain-codebook", "train the HR autoencoder and codebook");
  add_common(sc_pre, pre);
  sc_pre->add_flag("--resume", pre_resume, "continue from the newest periodic checkpoint");
  sc_pre->callback([&] { rc = cmd_train(pre, "pretrain", "", pre_resume); });

  CommonOpts s1;
  bool s1_resume = false;
  auto* sc_s1 = app.add_subcommand("train-stage1", "train the LQ encoder and uncertainty head");
  add_common(sc_s1, s1);
  sc_s1->add_flag("--resume", s1_resume, "continue from the newest periodic checkpoint");
  sc_s1->callback([&] { rc = cmd_train(s1, "stage1", "", s1_resume); });

  CommonOpts s2;
  bool s2_resume = false;
  std::string s2_variant;
  auto* sc_s2 = app.add_subcommand("train-stage2", "texture-focused second training stage");
  add_common(sc_s2, s2);
  sc_s2->add_option("--variant", s2_variant, "ablation variant")
      ->check(CLI::IsMember({"baseline", "uncertainty", "top3", "top5", "aa", "full"}));
  sc_s2->add_flag("--resume", s2_resume, "continue from the newest periodic checkpoint");
  sc_s2->callback([&] { rc = cmd_train(s2, "stage2", s2_variant, s2_resume); });

  CommonOpts inf;
  std::string inf_in, inf_out, inf_ckpt, inf_variant;
  int inf_stage = 2;
  auto* sc_inf = app.add_subcommand("infer", "super-resolve one PNG");
  add_common(sc_inf, inf);
  sc_inf->add_option("--in", inf_in, "input LR PNG")->required()->check(CLI::ExistingFile);
  sc_inf->add_option("--output", inf_out, "output PNG path")->required();
  sc_inf->add_option("--checkpoint", inf_ckpt, "checkpoint path (default <out>/stage<N>.ckpt)");
  sc_inf->add_option("--variant", inf_variant, "ablation variant the checkpoint was trained with");
  sc_inf->add_option("--stage", inf_stage, "forward stage")->check(CLI::IsMember({1, 2}));
  sc_inf->callback([&] { rc = cmd_infer(inf, inf_in, inf_out, inf_ckpt, inf_variant, inf_stage); });

  CommonOpts ev;
  std::string ev_split = "val", ev_ckpt, ev_variant;
  auto* sc_ev = app.add_subcommand("evaluate", "PSNR/SSIM report against the bicubic baseline");
  add_common(sc_ev, ev);
  sc_ev->add_option("--split", ev_split, "dataset split")->check(CLI::IsMember({"train", "val"}));
  sc_ev->add_option("--checkpoint", ev_ckpt, "checkpoint path (default <out>/stage2.ckpt)");
  sc_ev->add_option("--variant", ev_variant, "ablation variant the checkpoint was trained with");
  sc_ev->callback([&] { rc = cmd_evaluate(ev, ev_split, ev_ckpt, ev_variant); });

  CommonOpts hr;
  std::vector<int> hr_ks = {1, 3, 5};
  std::string hr_split = "val";
  auto* sc_hr = app.add_subcommand("hit-rate", "ground-truth code recall of top-k candidates");
  add_common(sc_hr, hr);
  sc_hr->add_option("--k", hr_ks, "candidate counts, one CSV row each");
  sc_hr->add_option("--split", hr_split, "dataset split")->check(CLI::IsMember({"train", "val"}));
  sc_hr->callback([&] { rc = cmd_hit_rate(hr, hr_ks, hr_split); });

  std::string bm_out = ".";
  int bm_repeats = 7;
  std::uint64_t bm_seed = 123;
  bool bm_overwrite = false;
  auto* sc_bm = app.add_subcommand("bench-matching", "time top-k matching vs global attention");
  sc_bm->add_option("--out", bm_out, "directory for bench_matching.csv");
  sc_bm->add_option("--repeats", bm_repeats, "timed repeats per point")->check(CLI::PositiveNumber);
  sc_bm->add_option("--seed", bm_seed, "input seed");
  sc_bm->add_flag("--overwrite", bm_overwrite, "replace existing outputs");
  sc_bm->callback([&] { rc = cmd_bench(bm_out, bm_repeats, bm_seed, bm_overwrite); });

  std::string pl_from, pl_out = "bench_matching.svg";
  bool pl_overwrite = false;
  auto* sc_pl = app.add_subcommand("plot", "render a time-vs-K figure from a bench CSV");
  sc_pl->add_option("--from", pl_from, "bench CSV path")->required()->check(CLI::ExistingFile);
  sc_pl->add_option("--out", pl_out, "output SVG path");
  sc_pl->add_flag("--overwrite", pl_overwrite, "replace existing outputs");
  sc_pl->callback([&] { rc = cmd_plot(pl_from, pl_out, pl_overwrite); });

  CommonOpts ab;
  std::vector<std::string> ab_variants = {"baseline", "uncertainty", "top3", "aa", "full"};
  auto* sc_ab = app.add_subcommand("ablate", "stage-2 ablation grid + evaluation");
  add_common(sc_ab, ab);
  sc_ab->add_option("--variant", ab_variants, "variants to run")
      ->check(CLI::IsMember({"baseline", "uncertainty", "top3", "top5", "aa", "full"}));
  sc_ab->callback([&] { rc = cmd_ablate(ab, ab_variants); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace ugtsr
