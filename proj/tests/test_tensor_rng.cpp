#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ugtsr/rng.hpp"
#include "ugtsr/tensor.hpp"

using namespace ugtsr;

TEST_SUITE("tensor") {
  TEST_CASE("factories and element access") {
    Tensor z = Tensor::zeros({2, 3});
    CHECK(z.rank() == 2);
    CHECK(z.size() == 6);
    CHECK(z.rows() == 2);
    CHECK(z.cols() == 3);
    for (std::int64_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

    Tensor f = Tensor::full({4}, 2.5);
    for (std::int64_t i = 0; i < f.size(); ++i) CHECK(f[i] == 2.5);

    Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(0, 1) == 2);
    CHECK(m.at(1, 0) == 3);
    CHECK(m.at(1, 1) == 4);
    m.at(1, 1) = 9;
    CHECK(m[3] == 9);
  }

  TEST_CASE("from() rejects mismatched payload") {
    CHECK_THROWS(Tensor::from({2, 2}, {1, 2, 3}));
  }

  TEST_CASE("all_finite flags NaN and infinity") {
    Tensor t = Tensor::zeros({3});
    CHECK(t.all_finite());
    t[1] = std::nan("");
    CHECK_FALSE(t.all_finite());
    t[1] = 0.0;
    t[2] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(t.all_finite());
  }

  TEST_CASE("shape helpers") {
    CHECK(shape_count({2, 3, 4}) == 24);
    CHECK(shape_count({}) == 1);  // empty product: a rank-0 tensor is a scalar
    CHECK(Tensor::zeros({2, 3}).same_shape(Tensor::zeros({2, 3})));
    CHECK_FALSE(Tensor::zeros({2, 3}).same_shape(Tensor::zeros({3, 2})));
  }
}

TEST_SUITE("rng") {
  TEST_CASE("same seed, same stream; different seed, different stream") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
      const double x = a.uniform();
      all_equal = all_equal && (x == b.uniform());
      any_diff = any_diff || (x != c.uniform());
    }
    CHECK(all_equal);
    CHECK(any_diff);
  }

  TEST_CASE("mix_seed separates streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(mix_seed(7, i));
    CHECK(seen.size() == 1000);
    CHECK(mix_seed(7, 1) != mix_seed(8, 1));
  }

  TEST_CASE("uniform stays in [0,1) and respects bounds") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
      const double u = rng.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
      const double v = rng.uniform(-2.0, 3.0);
      CHECK(v >= -2.0);
      CHECK(v < 3.0);
    }
  }

  TEST_CASE("uniform_int covers its closed range") {
    Rng rng(5);
    std::set<int> seen;
    for (int i = 0; i < 2000; ++i) {
      const int v = rng.uniform_int(2, 6);
      CHECK(v >= 2);
      CHECK(v <= 6);
      seen.insert(v);
    }
    CHECK(seen.size() == 5);
  }

  TEST_CASE("normal has roughly the requested moments") {
    Rng rng(9);
    const int n = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = rng.normal(1.0, 2.0);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
    CHECK(var == doctest::Approx(4.0).epsilon(0.08));
  }

  TEST_CASE("shuffle is a permutation and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
    std::vector<int> w = v;
    Rng a(3), b(3);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  }

  TEST_CASE("index stays in bounds") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
      const int k = rng.index(7);
      CHECK(k >= 0);
      CHECK(k < 7);
    }
  }
}
