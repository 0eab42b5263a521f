#include "ugtsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ugtsr/losses.hpp"
#include "ugtsr/metrics.hpp"
#include "ugtsr/rng.hpp"

namespace fs = std::filesystem;

namespace ugtsr {

namespace {

std::uint64_t phase_tag(const std::string& phase) {
  if (phase == "pretrain") return 0x505245;
  if (phase == "stage1") return 0x535431;
  if (phase == "stage2") return 0x535432;
  throw std::invalid_argument("unknown training phase '" + phase + "'");
}

// Stateless batch sampling: the indices for step t depend only on
// (seed, phase, t), so a resumed run draws the same batches as an unbroken
// one.
std::vector<int> sample_batch(std::uint64_t seed, const std::string& phase, std::int64_t step,
                              int pool, int batch) {
  Rng rng(mix_seed(mix_seed(seed, phase_tag(phase)), static_cast<std::uint64_t>(step)));
  std::vector<int> out(batch);
  for (int i = 0; i < batch; ++i) out[i] = rng.index(pool);
  return out;
}

std::uint64_t tensor_fingerprint(const Tensor& t) {
  return fnv1a(std::string_view(reinterpret_cast<const char*>(t.data()),
                                sizeof(double) * static_cast<std::size_t>(t.size())));
}

std::uint64_t groups_fingerprint(const SrModel& model, const std::vector<std::string>& names) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& name : names) {
    for (const auto& p : model.group(name).params) {
      h = h * 0x100000001b3ull + tensor_fingerprint(p->value);
    }
  }
  return h;
}

struct LossLog {
  std::ofstream out;
  explicit LossLog(const std::string& path, bool append)
      : out(path, append ? std::ios::app : std::ios::trunc) {
    if (!out) throw std::runtime_error("cannot open loss log " + path);
  }
  void write(const std::string& phase, std::int64_t step,
             const std::map<std::string, double>& components, double total) {
    nlohmann::json j;
    j["phase"] = phase;
    j["step"] = step;
    j["components"] = components;
    j["total"] = total;
    out << j.dump() << "\n";
  }
};

std::string phase_prereq(const std::string& phase) {
  if (phase == "stage1") return "pretrain";
  if (phase == "stage2") return "stage1";
  return "";
}

std::vector<std::string> frozen_groups_for(const std::string& phase) {
  if (phase == "stage1") return {"codebook", "decoder"};
  if (phase == "stage2") return {"codebook", "decoder", "unc_head"};
  return {};
}

std::vector<std::string> generator_groups_for(const RunConfig& cfg, const std::string& phase) {
  if (phase == "pretrain") return {"hr_encoder", "codebook", "decoder"};
  if (phase == "stage1") return {"lq_encoder", "unc_head"};
  std::vector<std::string> g = {"lq_encoder"};
  const VariantSpec v = variant_spec(cfg.train.variant);
  if (v.use_topk) g.push_back("topk_fusion");
  if (v.use_align) g.push_back("align_attn");
  return g;
}

// Distinct-cell codebook seeding from the first training batch's HR latents:
// spreads the initial entries across real data instead of random space, which
// is the usual guard against dead codes at this scale.
void init_codebook_from_data(SrModel& model, const PairList& train, const RunConfig& cfg) {
  std::vector<Tensor> grids;
  const std::vector<int> batch = sample_batch(cfg.seed, "pretrain", -1,
                                              static_cast<int>(train.hr.size()),
                                              cfg.train.batch_size);
  for (const int idx : batch) grids.push_back(model.hr_latents(train.hr[idx]).values);

  const int n_z = cfg.model.n_z;
  const int K = cfg.model.codebook_size;
  std::int64_t cells = 0;
  for (const auto& g : grids) cells += g.rows();

  Codebook cb;
  cb.entries = Tensor::zeros({K, n_z});
  const std::int64_t stride = std::max<std::int64_t>(1, cells / K);
  for (int k = 0; k < K; ++k) {
    std::int64_t want = (k * stride) % std::max<std::int64_t>(cells, 1);
    for (const auto& g : grids) {
      if (want < g.rows()) {
        for (int c = 0; c < n_z; ++c) cb.entries.at(k, c) = g.at(static_cast<int>(want), c);
        break;
      }
      want -= g.rows();
    }
  }
  model.set_codebook(cb);
}

struct ValBatch {
  std::vector<const ImagePatch*> hr, lr;
};

ValBatch fixed_val_batch(const PairList& val, int batch) {
  ValBatch out;
  const int n = std::min<int>(batch, static_cast<int>(val.hr.size()));
  for (int i = 0; i < n; ++i) {
    out.hr.push_back(&val.hr[i]);
    out.lr.push_back(&val.lr[i]);
  }
  return out;
}

}  // namespace

VariantSpec variant_spec(const std::string& name) {
  if (name == "baseline") return {false, false, false, 1};
  if (name == "uncertainty") return {true, false, false, 1};
  if (name == "top3") return {true, true, false, 3};
  if (name == "top5") return {true, true, false, 5};
  if (name == "aa") return {true, true, true, 3};
  if (name == "full") return {true, true, true, 3};
  throw std::invalid_argument(
      "unknown variant '" + name +
      "' (expected baseline, uncertainty, top3, top5, aa, or full)");
}

SrModel build_model_for_phase(const RunConfig& cfg, const std::string& phase) {
  phase_tag(phase);  // validates
  ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  if (phase == "stage2") {
    const VariantSpec v = variant_spec(cfg.train.variant);
    mc.toggles.use_udl = v.use_udl;
    mc.toggles.use_topk = v.use_topk;
    mc.toggles.use_align = v.use_align;
    if (v.use_topk) mc.topk = v.k;
  }
  return SrModel(mc);
}

SrModel load_model(const RunConfig& cfg, const std::string& checkpoint_path,
                   const std::string& expected_phase) {
  SrModel model = build_model_for_phase(cfg, expected_phase);
  const Checkpoint ck = load_checkpoint(checkpoint_path, expected_phase, config_hash(cfg));
  restore_model(model, ck);
  return model;
}

namespace {

// Shared per-phase machinery: generator loss graph construction differs, the
// bookkeeping around it does not.
class PhaseRunner {
 public:
  PhaseRunner(const RunConfig& cfg, std::string phase, bool resume, std::int64_t halt_after)
      : cfg_(cfg), phase_(std::move(phase)), resume_(resume), halt_after_(halt_after) {
    cfg_.validate();
    ds_ = load_dataset(cfg_.data.out_dir);
    train_ = load_pairs(ds_, "train");
    val_ = load_pairs(ds_, "val");
  }

  TrainResult run();

 private:
  std::int64_t budget() const {
    if (phase_ == "pretrain") return cfg_.train.pretrain_steps;
    if (phase_ == "stage1") return cfg_.train.stage1_steps;
    return cfg_.train.stage2_steps;
  }

  double adv_ramp(std::int64_t step) const {
    if (phase_ == "pretrain") return 0.0;
    const double warm = cfg_.train.warmup_fraction * static_cast<double>(budget());
    if (warm <= 0.0) return 1.0;
    return std::min(1.0, static_cast<double>(step + 1) / warm);
  }

  // Cosine learning-rate anneal to 10% of the base rate over the phase
  // budget. Without it, late-phase Adam steps keep every weight jittering at
  // the full learning-rate scale; that dither renders as output noise on
  // patches the model has already fit, which the per-image PSNR mean punishes
  // far more than the mean training loss reflects.
  double lr_anneal(std::int64_t step) const {
    const double x = static_cast<double>(step) /
                     static_cast<double>(std::max<std::int64_t>(budget(), 1));
    return 0.1 + 0.45 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, x)));
  }

  // Builds the generator-side loss graph for one (hr, lr) pair and returns
  // the per-component scalars. `sr_image` receives the detached SR output for
  // the discriminator pass.
  std::map<std::string, ad::Var> item_losses(SrModel& model, const ImagePatch& hr,
                                             const ImagePatch& lr, double lambda_eff,
                                             ImagePatch* sr_image);

  TrainResult train_loop(SrModel& model);

  std::map<std::string, double> validate(SrModel& model);

  void revive_dead_codes(SrModel& model, const std::vector<int>& batch, std::int64_t t);

  RunConfig cfg_;
  std::string phase_;
  bool resume_;
  std::int64_t halt_after_;
  Dataset ds_;
  PairList train_, val_;
};

std::map<std::string, ad::Var> PhaseRunner::item_losses(SrModel& model, const ImagePatch& hr,
                                                        const ImagePatch& lr, double lambda_eff,
                                                        ImagePatch* sr_image) {
  std::map<std::string, ad::Var> parts;
  if (phase_ == "pretrain") {
    // The decoder's skip base is built from the degraded item's stored LR —
    // the exact base the SR stages correct over — so pretraining teaches a
    // transferable restoration step rather than a near-identity.
    const ImagePatch base = correction_base(lr, cfg_.model.scale);
    const SrModel::PretrainForward fwd = model.vq_forward(hr, base);
    parts["recon_l1"] = l1_loss(hr, fwd.recon);
    parts["codebook_vq"] =
        ad::mean_all(ad::square(ad::sub(fwd.code_rows, ad::detach(fwd.enc_tokens))));
    parts["commit"] = ad::scale(
        ad::mean_all(ad::square(ad::sub(fwd.enc_tokens, ad::detach(fwd.code_rows)))),
        cfg_.train.commit_weight);
    if (sr_image) *sr_image = ImagePatch{};  // no adversarial pass in pretraining
    return parts;
  }

  const int stage = phase_ == "stage1" ? 1 : 2;
  const SrForward fwd = model.sr_forward(lr, stage);

  // Ground-truth latents from the frozen HR path, quantized, held constant.
  LatentGrid gt_quantized;
  {
    ad::ValueOnlyScope scope;
    const LatentGrid gt = model.hr_latents(hr);
    quantize_nearest(gt, model.codebook(), &gt_quantized);
  }
  const ad::Var z_gt = ad::constant(gt_quantized.values);
  parts["codebook"] = codebook_loss(fwd.lq_tokens, z_gt, fwd.lq_latents.h, fwd.lq_latents.w,
                                    cfg_.train.weights);
  parts["l1"] = l1_loss(hr, fwd.sr);
  parts["perceptual"] = perceptual_loss(model.perceptual(hr), model.perceptual(fwd.sr));

  // Non-saturating generator term -mean log D(fake); the ramped weight is
  // applied by the caller through stage_total's lambda.
  const ad::Var d_fake = model.discriminate(fwd.sr);
  parts["adversarial"] = ad::neg(ad::mean_all(ad::log(d_fake)));
  (void)lambda_eff;

  if (stage == 1) {
    parts["uncertainty"] = esu_loss(hr, fwd.sr, fwd.s);
  } else if (model.config().toggles.use_udl) {
    // The frozen head's map acts as a fixed per-pixel weight: detached so the
    // trainable trunk cannot shrink its own loss weights instead of fixing
    // residuals.
    parts["uncertainty"] = udl_loss(hr, fwd.sr, ad::detach(fwd.s));
  } else {
    parts["uncertainty"] = ad::constant(Tensor::zeros({1}));
  }

  if (sr_image) *sr_image = clamp01(image_from_tensor(fwd.sr->value));
  return parts;
}

// Codebook entries the current batch never selects are re-seeded onto live
// latent cells. Uses only (parameters, batch) at this step — both are exact
// functions of (seed, step) — so checkpoint resume reproduces it bit-for-bit.
// Stops near the end of the run so the book can settle.
void PhaseRunner::revive_dead_codes(SrModel& model, const std::vector<int>& batch,
                                    std::int64_t t) {
  constexpr std::int64_t kReviveEvery = 50;
  if ((t + 1) % kReviveEvery != 0) return;
  if (t + 1 > budget() * 4 / 5) return;

  const Codebook cb = model.codebook();
  std::vector<char> used(static_cast<std::size_t>(cb.K()), 0);
  std::vector<Tensor> pool;
  std::int64_t cells = 0;
  for (const int idx : batch) {
    const LatentGrid g = model.hr_latents(train_.hr[idx]);
    for (const int code : quantize_nearest(g, cb).indices) {
      used[static_cast<std::size_t>(code)] = 1;
    }
    cells += g.values.rows();
    pool.push_back(g.values);
  }

  Rng rng(mix_seed(mix_seed(cfg_.seed, 0x7265766976ull), static_cast<std::uint64_t>(t)));
  Codebook next = cb;
  bool any = false;
  for (int k = 0; k < cb.K(); ++k) {
    if (used[static_cast<std::size_t>(k)]) continue;
    std::int64_t pick = rng.index(static_cast<int>(cells));
    for (const Tensor& g : pool) {
      if (pick < g.rows()) {
        for (int c = 0; c < cb.n_z(); ++c) next.entries.at(k, c) = g.at(static_cast<int>(pick), c);
        break;
      }
      pick -= g.rows();
    }
    any = true;
  }
  if (any) model.set_codebook(next);
}

std::map<std::string, double> PhaseRunner::validate(SrModel& model) {
  ad::ValueOnlyScope scope;
  const ValBatch vb = fixed_val_batch(val_, cfg_.train.batch_size);
  std::map<std::string, double> sums;
  for (std::size_t i = 0; i < vb.hr.size(); ++i) {
    // Pretraining validates reconstruction from the HR path; the SR stages
    // validate their stage total.
    const std::map<std::string, ad::Var> parts =
        item_losses(model, *vb.hr[i], *vb.lr[i], 1.0, nullptr);
    double total = 0.0;
    for (const auto& [name, var] : parts) {
      const double v = ad::scalar(var);
      sums[name] += v / static_cast<double>(vb.hr.size());
      total += (name == "adversarial" ? cfg_.train.weights.lambda_adv * v : v);
    }
    sums["total"] += total / static_cast<double>(vb.hr.size());
  }
  return sums;
}

TrainResult PhaseRunner::train_loop(SrModel& model) {
  const std::int64_t steps = budget();
  const std::string prereq = phase_prereq(phase_);
  const std::uint64_t hash = config_hash(cfg_);
  fs::create_directories(cfg_.out_dir);

  // Restore the prerequisite phase's final checkpoint.
  if (!prereq.empty()) {
    const std::string prereq_path = (fs::path(cfg_.out_dir) / (prereq + ".ckpt")).string();
    const Checkpoint ck = load_checkpoint(prereq_path, prereq, hash);
    restore_model(model, ck);
  }

  if (phase_ == "stage2" && !cfg_.train.warm_start_stage2) {
    // Optionally retrain the LQ branch from scratch: reset it to the seeded
    // initialization instead of the stage-1 weights.
    SrModel fresh = build_model_for_phase(cfg_, phase_);
    const auto& src = fresh.group("lq_encoder").params;
    const auto& dst = model.group("lq_encoder").params;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
  }

  const std::vector<std::string> gen_groups = generator_groups_for(cfg_, phase_);
  const std::vector<std::string> frozen = frozen_groups_for(phase_);
  const bool with_disc = phase_ != "pretrain";

  std::vector<std::string> active = gen_groups;
  if (with_disc) active.push_back("discriminator");
  model.set_trainable(active);

  AdamConfig gen_cfg;
  gen_cfg.lr = cfg_.train.lr;
  gen_cfg.beta1 = cfg_.train.beta1;
  gen_cfg.beta2 = cfg_.train.beta2;
  gen_cfg.eps = cfg_.train.adam_eps;
  Adam gen_opt(model.collect(gen_groups), gen_cfg);

  AdamConfig disc_cfg = gen_cfg;
  disc_cfg.lr = cfg_.train.disc_lr;
  Adam disc_opt(model.collect({"discriminator"}), disc_cfg);

  // Resume from the newest periodic checkpoint when asked to.
  std::int64_t start_step = 0;
  if (resume_) {
    std::int64_t best = -1;
    for (std::int64_t t = cfg_.train.checkpoint_every; t <= steps; t += cfg_.train.checkpoint_every) {
      const fs::path p = fs::path(cfg_.out_dir) / (phase_ + "_step_" + std::to_string(t) + ".ckpt");
      if (fs::exists(p)) best = t;
    }
    if (best > 0) {
      const fs::path p =
          fs::path(cfg_.out_dir) / (phase_ + "_step_" + std::to_string(best) + ".ckpt");
      const Checkpoint ck = load_checkpoint(p.string(), phase_, hash);
      restore_model(model, ck);
      // The periodic container carries both optimizers back to back.
      std::istringstream blob(
          std::string(ck.optimizer_state.begin(), ck.optimizer_state.end()), std::ios::binary);
      gen_opt.load_state(blob);
      disc_opt.load_state(blob);
      start_step = best;
    }
  }

  const std::uint64_t frozen_before = groups_fingerprint(model, frozen);
  const bool fresh_pretrain = phase_ == "pretrain" && start_step == 0;
  if (fresh_pretrain) init_codebook_from_data(model, train_, cfg_);

  TrainResult result;
  result.first_val = validate(model);

  const std::string log_path = (fs::path(cfg_.out_dir) / (phase_ + "_losses.jsonl")).string();
  LossLog log(log_path, start_step > 0);

  const int pool = static_cast<int>(train_.hr.size());
  const double inv_batch = 1.0 / cfg_.train.batch_size;

  for (std::int64_t t = start_step; t < steps; ++t) {
    const std::vector<int> batch = sample_batch(cfg_.seed, phase_, t, pool, cfg_.train.batch_size);
    const double lambda_eff = cfg_.train.weights.lambda_adv * adv_ramp(t);
    LossWeights step_weights = cfg_.train.weights;
    step_weights.lambda_adv = lambda_eff;

    gen_opt.zero_grad();
    std::map<std::string, double> comp_sums;
    double total_value = 0.0;
    std::vector<ImagePatch> fakes;
    fakes.reserve(batch.size());

    for (const int idx : batch) {
      ImagePatch fake;
      const std::map<std::string, ad::Var> parts =
          item_losses(model, train_.hr[idx], train_.lr[idx], lambda_eff, &fake);
      if (with_disc) fakes.push_back(std::move(fake));

      ad::Var item_total;
      if (phase_ == "pretrain") {
        item_total = ad::add(ad::add(parts.at("recon_l1"), parts.at("codebook_vq")),
                             parts.at("commit"));
      } else {
        StageLossComponents c;
        c.codebook = parts.at("codebook");
        c.l1 = parts.at("l1");
        c.perceptual = parts.at("perceptual");
        c.adversarial = parts.at("adversarial");
        c.uncertainty = parts.at("uncertainty");
        item_total = stage_total(phase_ == "stage1" ? 1 : 2, c, step_weights);
      }
      const ad::Var scaled = ad::scale(item_total, inv_batch);
      ad::backward(scaled);

      for (const auto& [name, var] : parts) comp_sums[name] += ad::scalar(var) * inv_batch;
      total_value += ad::scalar(item_total) * inv_batch;
    }
    if (!std::isfinite(total_value)) {
      throw std::runtime_error(phase_ + " diverged at step " + std::to_string(t) +
                               " (non-finite loss)");
    }
    gen_opt.step(lr_anneal(t));
    if (phase_ == "pretrain") revive_dead_codes(model, batch, t);

    if (with_disc) {
      disc_opt.zero_grad();
      double d_total = 0.0;
      for (std::size_t i = 0; i < fakes.size(); ++i) {
        const ad::Var d_real = model.discriminate(train_.hr[batch[i]]);
        const ad::Var d_fake = model.discriminate(fakes[i]);
        const ad::Var d_loss =
            ad::scale(adversarial_losses(d_real, d_fake).discriminator, inv_batch);
        ad::backward(d_loss);
        d_total += ad::scalar(d_loss);
      }
      if (!std::isfinite(d_total)) {
        throw std::runtime_error(phase_ + " discriminator diverged at step " + std::to_string(t));
      }
      disc_opt.step(lr_anneal(t));
      comp_sums["disc"] = d_total;
    }

    result.losses.push_back(total_value);
    log.write(phase_, t, comp_sums, total_value);

    // Written at the final step as well: the phase checkpoint itself carries
    // no optimizer state, so completing a halted run needs the periodic one.
    const std::int64_t done = t + 1;
    if (done % cfg_.train.checkpoint_every == 0) {
      Checkpoint ck = snapshot_model(model, phase_, hash, done);
      std::ostringstream blob(std::ios::binary);
      gen_opt.save_state(blob);
      disc_opt.save_state(blob);
      const std::string s = blob.str();
      ck.optimizer_state.assign(s.begin(), s.end());
      save_checkpoint(
          ck, (fs::path(cfg_.out_dir) / (phase_ + "_step_" + std::to_string(done) + ".ckpt"))
                  .string());
    }

    // Simulated interruption: stop mid-phase without the final checkpoint, as
    // a crash would. The budget (and so the learning-rate schedule) is the
    // configured one, which is what lets a resume match the unbroken run.
    if (halt_after_ > 0 && done >= halt_after_ && done < steps) return result;
  }

  if (groups_fingerprint(model, frozen) != frozen_before) {
    throw std::runtime_error(phase_ + ": frozen parameters drifted during training");
  }

  result.last_val = validate(model);

  const std::string final_path = (fs::path(cfg_.out_dir) / (phase_ + ".ckpt")).string();
  save_checkpoint(snapshot_model(model, phase_, hash, steps), final_path);
  result.checkpoint_path = final_path;
  return result;
}

TrainResult PhaseRunner::run() {
  SrModel model = build_model_for_phase(cfg_, phase_);
  return train_loop(model);
}

}  // namespace

TrainResult run_phase(const RunConfig& cfg, const std::string& phase, bool resume,
                      std::int64_t halt_after) {
  PhaseRunner runner(cfg, phase, resume, halt_after);
  return runner.run();
}

double reconstruction_mse(SrModel& model, const Dataset& ds, const std::string& split) {
  ad::ValueOnlyScope scope;
  double total = 0.0;
  std::int64_t count = 0;
  for (const DatasetItem* item : ds.split(split)) {
    const ImagePatch hr = load_item_hr(ds, *item);
    const ImagePatch base = correction_base(load_item_lr(ds, *item), model.config().scale);
    const SrModel::PretrainForward fwd = model.vq_forward(hr, base);
    for (std::int64_t i = 0; i < hr.data.size(); ++i) {
      const double d = hr.data[i] - fwd.recon->value[i];
      total += d * d;
    }
    count += hr.data.size();
  }
  if (count == 0) throw std::runtime_error("reconstruction_mse: empty split '" + split + "'");
  return total / static_cast<double>(count);
}

double code_usage_fraction(SrModel& model, const Dataset& ds, const std::string& split) {
  ad::ValueOnlyScope scope;
  const Codebook cb = model.codebook();
  std::vector<char> used(static_cast<std::size_t>(cb.K()), 0);
  bool any = false;
  for (const DatasetItem* item : ds.split(split)) {
    const ImagePatch hr = load_item_hr(ds, *item);
    const LatentGrid grid = model.hr_latents(hr);
    const MatchResult m = quantize_nearest(grid, cb);
    for (const int idx : m.indices) used[static_cast<std::size_t>(idx)] = 1;
    any = true;
  }
  if (!any) throw std::runtime_error("code_usage_fraction: empty split '" + split + "'");
  std::int64_t count = 0;
  for (const char u : used) count += u;
  return static_cast<double>(count) / static_cast<double>(cb.K());
}

std::map<std::string, double> run_ablation(const RunConfig& cfg,
                                           const std::vector<std::string>& variants) {
  if (variants.empty()) throw std::invalid_argument("run_ablation: no variants given");
  for (const auto& v : variants) variant_spec(v);  // validate names up front

  // Pretraining and stage 1 are variant-independent; run them once.
  const fs::path base(cfg.out_dir);
  if (!fs::exists(base / "pretrain.ckpt")) run_phase(cfg, "pretrain");
  if (!fs::exists(base / "stage1.ckpt")) run_phase(cfg, "stage1");

  const Dataset ds = load_dataset(cfg.data.out_dir);
  std::map<std::string, double> psnr_by_variant;

  std::ofstream csv(base / "ablation.csv");
  if (!csv) throw std::runtime_error("cannot write ablation CSV");
  csv << "variant,psnr_db,ssim\n";
  char buf[96];

  const MetricReport bicubic = evaluate_bicubic(ds, "val");
  std::snprintf(buf, sizeof(buf), "bicubic,%.6f,%.6f\n", bicubic.mean_psnr_db, bicubic.mean_ssim);
  csv << buf;
  psnr_by_variant["bicubic"] = bicubic.mean_psnr_db;

  for (const auto& name : variants) {
    RunConfig vcfg = cfg;
    vcfg.train.variant = name;
    vcfg.out_dir = (base / ("variant_" + name)).string();
    fs::create_directories(vcfg.out_dir);
    // Share the common phases by linking their checkpoints into the variant
    // directory (copy keeps it simple and portable).
    for (const char* ck : {"pretrain.ckpt", "stage1.ckpt"}) {
      if (!fs::exists(fs::path(vcfg.out_dir) / ck)) {
        fs::copy_file(base / ck, fs::path(vcfg.out_dir) / ck);
      }
    }
    const TrainResult r = run_phase(vcfg, "stage2");
    SrModel model = load_model(vcfg, r.checkpoint_path, "stage2");
    const MetricReport rep = evaluate_model(model, ds, "val", 2);
    write_metric_csv(rep, (fs::path(vcfg.out_dir) / "metrics.csv").string());
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", name.c_str(), rep.mean_psnr_db,
                  rep.mean_ssim);
    csv << buf;
    psnr_by_variant[name] = rep.mean_psnr_db;
  }
  if (!csv) throw std::runtime_error("ablation CSV write failed");
  return psnr_by_variant;
}

}  // namespace ugtsr
