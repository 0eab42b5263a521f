#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "ugtsr/autodiff.hpp"
#include "ugtsr/checkpoint.hpp"
#include "ugtsr/models.hpp"
#include "ugtsr/optimizer.hpp"
#include "ugtsr/textures.hpp"

using namespace ugtsr;
using test::random_tensor;
using test::tensor_eq;

namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.scale = 2;
  cfg.n_z = 8;
  cfg.codebook_size = 16;
  cfg.d_k = 8;
  cfg.topk = 3;
  cfg.seed = 5;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ugtsr_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// One synthetic optimization step on a quadratic: minimize mean((p - c)^2).
void quad_step(Adam& opt, const ad::Var& p, const Tensor& target) {
  opt.zero_grad();
  ad::backward(ad::mean_all(ad::square(ad::sub(p, ad::constant(target)))));
  opt.step();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("adam descends a quadratic toward its minimum") {
    const Tensor target = random_tensor({4, 4}, 1);
    const ad::Var p = ad::leaf(Tensor::zeros({4, 4}));
    AdamConfig cfg;
    cfg.lr = 0.05;
    Adam opt({p}, cfg);
    auto objective = [&] {
      double s = 0.0;
      for (std::int64_t i = 0; i < target.size(); ++i) {
        const double d = p->value[i] - target[i];
        s += d * d;
      }
      return s;
    };
    const double before = objective();
    for (int i = 0; i < 200; ++i) quad_step(opt, p, target);
    CHECK(objective() < 0.01 * before);
    CHECK(opt.step_count() == 200);
  }

  TEST_CASE("zero_grad erases accumulated gradients") {
    const ad::Var p = ad::leaf(random_tensor({3}, 2));
    Adam opt({p}, AdamConfig{});
    ad::backward(ad::sum_all(ad::square(p)));
    bool any = false;
    for (std::int64_t i = 0; i < p->grad.size(); ++i) any |= p->grad[i] != 0.0;
    CHECK(any);
    opt.zero_grad();
    for (std::int64_t i = 0; i < p->grad.size(); ++i) CHECK(p->grad[i] == 0.0);
  }

  TEST_CASE("two identically seeded runs stay bit-identical") {
    const Tensor init = random_tensor({5, 5}, 3);
    const Tensor target = random_tensor({5, 5}, 4);
    const ad::Var a = ad::leaf(init);
    const ad::Var b = ad::leaf(init);
    AdamConfig cfg;
    cfg.lr = 0.01;
    Adam oa({a}, cfg);
    Adam ob({b}, cfg);
    for (int i = 0; i < 50; ++i) {
      quad_step(oa, a, target);
      quad_step(ob, b, target);
    }
    CHECK(tensor_eq(a->value, b->value));
  }

  TEST_CASE("serialized moments resume a run bit-exactly") {
    const Tensor init = random_tensor({6}, 5);
    const Tensor target = random_tensor({6}, 6);
    AdamConfig cfg;
    cfg.lr = 0.02;

    // Unbroken run: 40 steps.
    const ad::Var full = ad::leaf(init);
    Adam opt_full({full}, cfg);
    for (int i = 0; i < 40; ++i) quad_step(opt_full, full, target);

    // Broken run: 25 steps, serialize, rebuild, 15 more.
    const ad::Var part = ad::leaf(init);
    Adam opt_part({part}, cfg);
    for (int i = 0; i < 25; ++i) quad_step(opt_part, part, target);
    std::stringstream blob;
    opt_part.save_state(blob);
    const Tensor at_break = part->value;

    const ad::Var resumed = ad::leaf(at_break);
    Adam opt_resumed({resumed}, cfg);
    opt_resumed.load_state(blob);
    CHECK(opt_resumed.step_count() == 25);
    for (int i = 0; i < 15; ++i) quad_step(opt_resumed, resumed, target);

    CHECK(tensor_eq(resumed->value, full->value));

    // Without the moments the trajectories diverge: bias correction and
    // second-moment history matter.
    const ad::Var cold = ad::leaf(at_break);
    Adam opt_cold({cold}, cfg);
    for (int i = 0; i < 15; ++i) quad_step(opt_cold, cold, target);
    CHECK_FALSE(tensor_eq(cold->value, full->value));
  }

  TEST_CASE("loading a blob from a different parameter list throws") {
    const ad::Var a = ad::leaf(random_tensor({4}, 7));
    Adam opt_a({a}, AdamConfig{});
    std::stringstream blob;
    opt_a.save_state(blob);

    const ad::Var b = ad::leaf(random_tensor({5}, 8));
    Adam opt_b({b}, AdamConfig{});
    CHECK_THROWS_AS(opt_b.load_state(blob), std::runtime_error);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("snapshot and restore round trip every parameter bit-exactly") {
    TempDir tmp("ck_round");
    SrModel src(tiny_config());
    const Checkpoint ck = snapshot_model(src, "pretrain", 0xabcdefull, 123);
    CHECK(ck.phase == "pretrain");
    CHECK(ck.step == 123);
    CHECK(ck.tensors.size() == src.all_params().size());

    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(ck, path);
    const Checkpoint loaded = load_checkpoint(path, "pretrain", 0xabcdefull);

    // Restore into a differently seeded model and compare parameters.
    ModelConfig other = tiny_config();
    other.seed = 99;
    SrModel dst(other);
    restore_model(dst, loaded);
    const auto ps = src.all_params();
    const auto pd = dst.all_params();
    REQUIRE(ps.size() == pd.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      CHECK(tensor_eq(ps[i]->value, pd[i]->value));
    }
  }

  TEST_CASE("save -> load -> save produces identical bytes") {
    TempDir tmp("ck_bytes");
    SrModel m(tiny_config());
    const Checkpoint ck = snapshot_model(m, "stage1", 77, 5);
    const std::string p1 = (tmp.path / "a.ckpt").string();
    const std::string p2 = (tmp.path / "b.ckpt").string();
    save_checkpoint(ck, p1);
    save_checkpoint(load_checkpoint(p1), p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
  }

  TEST_CASE("phase and config-hash guards fail loudly") {
    TempDir tmp("ck_guard");
    SrModel m(tiny_config());
    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(snapshot_model(m, "stage1", 42, 0), path);
    CHECK_NOTHROW(load_checkpoint(path));                 // unguarded load
    CHECK_NOTHROW(load_checkpoint(path, "stage1", 42));   // matching guards
    CHECK_THROWS_AS(load_checkpoint(path, "stage2", 42), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint(path, "stage1", 43), std::runtime_error);
  }

  TEST_CASE("corrupt and truncated files are rejected") {
    TempDir tmp("ck_corrupt");
    const std::string garbage = (tmp.path / "garbage.ckpt").string();
    {
      std::ofstream out(garbage, std::ios::binary);
      out << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(garbage), std::runtime_error);
    CHECK_THROWS_AS(load_checkpoint((tmp.path / "missing.ckpt").string()), std::runtime_error);

    SrModel m(tiny_config());
    const std::string good = (tmp.path / "good.ckpt").string();
    save_checkpoint(snapshot_model(m, "pretrain", 1, 0), good);
    const std::string bytes = file_bytes(good);
    const std::string truncated = (tmp.path / "trunc.ckpt").string();
    {
      std::ofstream out(truncated, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(truncated), std::runtime_error);
  }

  TEST_CASE("optimizer moments ride along when requested") {
    TempDir tmp("ck_opt");
    SrModel m(tiny_config());
    m.set_trainable({"codebook"});
    Adam opt(m.group("codebook").params, AdamConfig{});

    // Push a couple of steps so the moments are non-trivial.
    const ImagePatch hr = make_blobs(16, 3);
    const ImagePatch base = ImagePatch::zeros(3, 16, 16);
    for (int i = 0; i < 2; ++i) {
      opt.zero_grad();
      const auto fwd = m.vq_forward(hr, base);
      ad::backward(ad::mean_all(ad::square(fwd.recon)));
      opt.step();
    }

    const std::string path = (tmp.path / "with_opt.ckpt").string();
    save_checkpoint(snapshot_model(m, "pretrain", 9, 2, &opt), path);
    const Checkpoint loaded = load_checkpoint(path, "pretrain", 9);
    CHECK_FALSE(loaded.optimizer_state.empty());

    SrModel m2(tiny_config());
    m2.set_trainable({"codebook"});
    Adam opt2(m2.group("codebook").params, AdamConfig{});
    restore_model(m2, loaded, &opt2);
    CHECK(opt2.step_count() == opt.step_count());

    // Both replicas take one more identical step and stay in lockstep.
    auto one_step = [&](SrModel& model, Adam& o) {
      o.zero_grad();
      const auto fwd = model.vq_forward(hr, base);
      ad::backward(ad::mean_all(ad::square(fwd.recon)));
      o.step();
    };
    one_step(m, opt);
    one_step(m2, opt2);
    const auto pa = m.group("codebook").params;
    const auto pb = m2.group("codebook").params;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(tensor_eq(pa[i]->value, pb[i]->value));
    }
  }

  TEST_CASE("restoring into a mismatched architecture throws") {
    TempDir tmp("ck_mismatch");
    SrModel m(tiny_config());
    const std::string path = (tmp.path / "model.ckpt").string();
    save_checkpoint(snapshot_model(m, "pretrain", 0, 0), path);
    ModelConfig bigger = tiny_config();
    bigger.codebook_size = 32;
    SrModel other(bigger);
    const Checkpoint ck = load_checkpoint(path);
    CHECK_THROWS_AS(restore_model(other, ck), std::runtime_error);
  }
}
