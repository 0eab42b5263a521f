#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "test_support.hpp"
#include "ugtsr/codebook.hpp"
#include "ugtsr/matching_bench.hpp"
#include "ugtsr/rng.hpp"
#include "ugtsr/svg_plot.hpp"

using namespace ugtsr;
using test::random_tensor;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ugtsr_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

LatentGrid grid_of(int h, int w, int n_z, std::uint64_t seed) {
  LatentGrid g;
  g.h = h;
  g.w = w;
  g.values = random_tensor({h * w, n_z}, seed);
  return g;
}

Codebook codebook_of(int K, int n_z, std::uint64_t seed) {
  Codebook cb;
  cb.entries = random_tensor({K, n_z}, seed);
  return cb;
}

}  // namespace

TEST_SUITE("matching_bench") {
  TEST_CASE("slope fitting recovers known exponents") {
    // y = 3 x^2 exactly -> slope 2; y = 5 x -> slope 1.
    std::vector<std::pair<double, double>> quad, lin;
    for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      quad.emplace_back(x, 3.0 * x * x);
      lin.emplace_back(x, 5.0 * x);
    }
    CHECK(loglog_slope(quad) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(loglog_slope(lin) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(loglog_slope({{1.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(loglog_slope({{1.0, 1.0}, {2.0, -1.0}}), std::invalid_argument);
  }

  TEST_CASE("the global-attention reference mixes every token with every token") {
    const LatentGrid grid = grid_of(2, 2, 4, 1);
    const Codebook cb = codebook_of(3, 4, 2);
    const Tensor out = naive_global_attention(grid, cb);
    REQUIRE(out.shape() == std::vector<int>{7, 4});  // 4 cells + 3 codes
    CHECK(out.all_finite());

    // Direct dense oracle: concatenate, then softmax(QK^T/sqrt(d)) V with
    // Q=K=V=sequence.
    const int n = 7, d = 4;
    std::vector<double> seq(static_cast<std::size_t>(n) * d);
    for (int t = 0; t < 4; ++t) {
      for (int c = 0; c < d; ++c) seq[static_cast<std::size_t>(t) * d + c] = grid.values.at(t, c);
    }
    for (int k = 0; k < 3; ++k) {
      for (int c = 0; c < d; ++c) {
        seq[static_cast<std::size_t>(4 + k) * d + c] = cb.entry(k)[c];
      }
    }
    for (int i = 0; i < n; ++i) {
      std::vector<double> logits(n);
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) {
          dot += seq[static_cast<std::size_t>(i) * d + c] * seq[static_cast<std::size_t>(j) * d + c];
        }
        logits[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
        mx = std::max(mx, logits[static_cast<std::size_t>(j)]);
      }
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
      }
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
          acc += logits[static_cast<std::size_t>(j)] / z * seq[static_cast<std::size_t>(j) * d + c];
        }
        CHECK(out.at(i, c) == doctest::Approx(acc).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("a reduced benchmark run produces consistent rows and slopes") {
    BenchConfig cfg;
    cfg.codebook_sizes = {16, 32, 64};
    cfg.grid_h = 3;
    cfg.grid_w = 3;
    cfg.n_z = 4;
    cfg.k = 2;
    cfg.repeats = 3;
    cfg.min_repeat_seconds = 1e-4;
    const BenchReport rep = run_matching_bench(cfg);

    REQUIRE(rep.rows.size() == 6);  // two matchers x three sizes
    int topk_rows = 0, naive_rows = 0;
    for (const BenchRow& row : rep.rows) {
      CHECK(row.median_seconds > 0.0);
      if (row.matcher == "topk") ++topk_rows;
      if (row.matcher == "naive") ++naive_rows;
    }
    CHECK(topk_rows == 3);
    CHECK(naive_rows == 3);
    CHECK(std::isfinite(rep.topk_slope));
    CHECK(std::isfinite(rep.naive_slope));

    // The reference should already cost more per call at the largest K: its
    // work grows with (cells + K)^2 rather than K.
    double topk_at_max = 0.0, naive_at_max = 0.0;
    for (const BenchRow& row : rep.rows) {
      if (row.codebook_size == 64) {
        (row.matcher == "topk" ? topk_at_max : naive_at_max) = row.median_seconds;
      }
    }
    CHECK(naive_at_max > topk_at_max);
  }

  TEST_CASE("bench config validation rejects degenerate setups") {
    BenchConfig cfg;
    cfg.codebook_sizes.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = BenchConfig{};
    cfg.repeats = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = BenchConfig{};
    cfg.k = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("bench csv carries one row per measurement with the fitted slope") {
    TempDir tmp("bench_csv");
    BenchReport rep;
    rep.rows = {{"topk", 64, 1e-5}, {"topk", 128, 2e-5}, {"naive", 64, 3e-5}, {"naive", 128, 1.2e-4}};
    rep.topk_slope = 1.0;
    rep.naive_slope = 2.0;
    const std::string path = (tmp.path / "bench.csv").string();
    write_bench_csv(rep, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "matcher,K,median_seconds,slope");
    int rows = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++rows;
      char name[32];
      int K = 0;
      double secs = 0.0, slope = 0.0;
      REQUIRE(std::sscanf(line.c_str(), "%31[^,],%d,%lf,%lf", name, &K, &secs, &slope) == 4);
      CHECK(slope == (std::string(name) == "topk" ? 1.0 : 2.0));
    }
    CHECK(rows == 4);
  }
}

TEST_SUITE("svg_plot") {
  TEST_CASE("the chart embeds every series and basic structure") {
    PlotSeries a{"first", "#ff0000", {{1.0, 1.0}, {10.0, 100.0}}};
    PlotSeries b{"second", "#0000ff", {{1.0, 2.0}, {10.0, 20.0}}};
    const std::string svg = render_loglog_chart({a, b}, "scaling", "K", "seconds");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("scaling") != std::string::npos);
    CHECK(svg.find("first") != std::string::npos);
    CHECK(svg.find("second") != std::string::npos);
    CHECK(svg.find("#ff0000") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
  }

  TEST_CASE("log axes refuse non-positive data and empty input") {
    CHECK_THROWS_AS(render_loglog_chart({}, "t", "x", "y"), std::invalid_argument);
    PlotSeries bad{"bad", "#000000", {{0.0, 1.0}}};
    CHECK_THROWS_AS(render_loglog_chart({bad}, "t", "x", "y"), std::invalid_argument);
    PlotSeries neg{"neg", "#000000", {{1.0, -2.0}}};
    CHECK_THROWS_AS(render_loglog_chart({neg}, "t", "x", "y"), std::invalid_argument);
  }

  TEST_CASE("write_bench_plot emits a parseable svg file with both matchers") {
    TempDir tmp("bench_svg");
    BenchReport rep;
    rep.rows = {{"topk", 64, 1e-5}, {"topk", 128, 2e-5}, {"naive", 64, 3e-5}, {"naive", 128, 1.2e-4}};
    rep.topk_slope = 1.0;
    rep.naive_slope = 2.0;
    const std::string path = (tmp.path / "bench.svg").string();
    write_bench_plot(rep, path);

    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string svg = ss.str();
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("top-k matcher") != std::string::npos);
    CHECK(svg.find("global attention") != std::string::npos);
  }
}
