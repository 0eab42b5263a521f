// Microbenchmarks for the double-precision graph engine: a convolution
// forward/backward pair and one full SR training step at toy sizes.
#include <benchmark/benchmark.h>

#include "ugtsr/losses.hpp"
#include "ugtsr/models.hpp"
#include "ugtsr/rng.hpp"

namespace {

using namespace ugtsr;

ImagePatch random_image(int c, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  ImagePatch img = ImagePatch::zeros(c, h, w);
  for (std::int64_t i = 0; i < img.data.size(); ++i) img.data[i] = rng.uniform();
  return img;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  Rng rng(21);
  Tensor w = Tensor::zeros({16, 16, 3, 3});
  for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal() * 0.05;
  Tensor x = Tensor::zeros({16, size, size});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  Tensor b = Tensor::zeros({16});
  for (auto _ : state) {
    ad::Var vw = ad::leaf(w);
    ad::Var vb = ad::leaf(b);
    ad::Var vx = ad::leaf(x);
    ad::Var y = ad::conv2d(vx, vw, vb, 1, 1);
    ad::Var loss = ad::mean_all(ad::square(y));
    ad::backward(loss);
    benchmark::DoNotOptimize(vw->grad.data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_SrTrainStepStage1(benchmark::State& state) {
  ModelConfig cfg;
  cfg.seed = 3;
  SrModel model(cfg);
  model.set_trainable({"lq_encoder", "unc_head"});
  const ImagePatch hr = random_image(3, 64, 64, 5);
  const ImagePatch lr = random_image(3, 32, 32, 6);
  for (auto _ : state) {
    const SrForward fwd = model.sr_forward(lr, 1);
    ad::Var loss = ad::add(l1_loss(hr, fwd.sr), esu_loss(hr, fwd.sr, fwd.s));
    ad::backward(loss);
    benchmark::DoNotOptimize(loss->value.data());
  }
}
BENCHMARK(BM_SrTrainStepStage1)->Unit(benchmark::kMillisecond);

}  // namespace
