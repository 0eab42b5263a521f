#include "ugtsr/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ugtsr::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

MapMat mat(Tensor& t, int r, int c) { return MapMat(t.data(), r, c); }

thread_local int g_value_only_depth = 0;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!value_only()) {
    for (const auto& p : parents) {
      if (p->needs_grad) {
        n->needs_grad = true;
        break;
      }
    }
    if (n->needs_grad) {
      n->parents = std::move(parents);
      n->backward_fn = std::move(backward_fn);
    }
  }
  return n;
}

}  // namespace

ValueOnlyScope::ValueOnlyScope() { ++g_value_only_depth; }
ValueOnlyScope::~ValueOnlyScope() { --g_value_only_depth; }
bool value_only() { return g_value_only_depth > 0; }

Tensor& Node::ensure_grad() {
  if (grad.empty() && value.size() > 0) grad = Tensor::zeros(value.shape());
  return grad;
}

Var constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

Var leaf(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->needs_grad = true;
  return n;
}

// ---------------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "add: shape mismatch");
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) {
      Tensor& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
    }
    if (b->needs_grad) {
      Tensor& gb = b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) gb[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "sub: shape mismatch");
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) {
      Tensor& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
    }
    if (b->needs_grad) {
      Tensor& gb = b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) gb[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require(a->value.same_shape(b->value), "mul: shape mismatch");
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return make_node(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) {
      Tensor& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * b->value[i];
    }
    if (b->needs_grad) {
      Tensor& gb = b->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) gb[i] += n.grad[i] * a->value[i];
    }
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= s;
  return make_node(std::move(out), {a}, [a, s](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += s * n.grad[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += s;
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
  });
}

Var abs(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::abs(out[i]);
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) {
      const double v = a->value[i];
      const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      ga[i] += sign * n.grad[i];
    }
  });
}

Var square(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= out[i];
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += 2.0 * a->value[i] * n.grad[i];
  });
}

Var exp(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  auto result = make_node(std::move(out), {a}, nullptr);
  if (result->needs_grad) {
    result->backward_fn = [a, self_value = result->value](Node& n) {
      Tensor& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += self_value[i] * n.grad[i];
    };
  }
  return result;
}

Var log(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] / a->value[i];
  });
}

Var tanh(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  auto result = make_node(std::move(out), {a}, nullptr);
  if (result->needs_grad) {
    result->backward_fn = [a, self_value = result->value](Node& n) {
      Tensor& ga = a->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) {
        ga[i] += (1.0 - self_value[i] * self_value[i]) * n.grad[i];
      }
    };
  }
  return result;
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) out[i] *= slope;
  }
  return make_node(std::move(out), {a}, [a, slope](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) {
      ga[i] += (a->value[i] >= 0.0 ? 1.0 : slope) * n.grad[i];
    }
  });
}

Var clamp01(const Var& a) {
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
  return make_node(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) {
      const double v = a->value[i];
      if (v >= 0.0 && v <= 1.0) ga[i] += n.grad[i];
    }
  });
}

Var sigmoid_clamped(const Var& logits, double eps) {
  Tensor out = logits->value;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-out[i]));
    out[i] = std::clamp(p, eps, 1.0 - eps);
  }
  auto result = make_node(std::move(out), {logits}, nullptr);
  if (result->needs_grad) {
    result->backward_fn = [logits, eps, self_value = result->value](Node& n) {
      Tensor& ga = logits->ensure_grad();
      for (std::int64_t i = 0; i < n.grad.size(); ++i) {
        const double p = self_value[i];
        if (p > eps && p < 1.0 - eps) ga[i] += p * (1.0 - p) * n.grad[i];
      }
    };
  }
  return result;
}

// ---------------------------------------------------------------------------
// reductions

Var sum_all(const Var& a) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return make_node(Tensor::from({1}, {s}), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    const double g = n.grad[0];
    for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean_all(const Var& a) {
  require(a->value.size() > 0, "mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a->value.size()));
}

Var min_all(const Var& a) {
  require(a->value.size() > 0, "min_all: empty tensor");
  std::int64_t arg = 0;
  for (std::int64_t i = 1; i < a->value.size(); ++i) {
    if (a->value[i] < a->value[arg]) arg = i;
  }
  return make_node(Tensor::from({1}, {a->value[arg]}), {a}, [a, arg](Node& n) {
    a->ensure_grad()[arg] += n.grad[0];
  });
}

Var sum_channels(const Var& chw) {
  require(chw->value.rank() == 3, "sum_channels: expected {C,H,W}");
  const int c = chw->value.dim(0), h = chw->value.dim(1), w = chw->value.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({1, h, w});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = chw->value.data() + ch * plane;
    for (std::int64_t i = 0; i < plane; ++i) out[i] += src[i];
  }
  return make_node(std::move(out), {chw}, [chw, c, plane](Node& n) {
    Tensor& g = chw->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      double* dst = g.data() + ch * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] += n.grad[i];
    }
  });
}

Var sum_rows(const Var& a) {
  require(a->value.rank() == 2, "sum_rows: expected rank-2");
  const int r = a->value.rows(), c = a->value.cols();
  Tensor out = Tensor::zeros({r, 1});
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += a->value.at(i, j);
    out[i] = s;
  }
  return make_node(std::move(out), {a}, [a, r, c](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double gi = n.grad[i];
      for (int j = 0; j < c; ++j) g.at(i, j) += gi;
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(const Var& a, const Var& b) {
  require(a->value.rank() == 2 && b->value.rank() == 2, "matmul: expected rank-2");
  require(a->value.cols() == b->value.rows(), "matmul: inner dimension mismatch");
  const int m = a->value.rows(), k = a->value.cols(), n_ = b->value.cols();
  Tensor out = Tensor::zeros({m, n_});
  mat(out, m, n_).noalias() = mat(a->value, m, k) * mat(b->value, k, n_);
  return make_node(std::move(out), {a, b}, [a, b, m, k, n_](Node& n) {
    if (a->needs_grad) {
      mat(a->ensure_grad(), m, k).noalias() +=
          mat(n.grad, m, n_) * mat(b->value, k, n_).transpose();
    }
    if (b->needs_grad) {
      mat(b->ensure_grad(), k, n_).noalias() +=
          mat(a->value, m, k).transpose() * mat(n.grad, m, n_);
    }
  });
}

Var transpose(const Var& a) {
  require(a->value.rank() == 2, "transpose: expected rank-2");
  const int r = a->value.rows(), c = a->value.cols();
  Tensor out = Tensor::zeros({c, r});
  mat(out, c, r) = mat(a->value, r, c).transpose();
  return make_node(std::move(out), {a}, [a, r, c](Node& n) {
    mat(a->ensure_grad(), r, c) += mat(n.grad, c, r).transpose();
  });
}

Var softmax_rows(const Var& a) {
  require(a->value.rank() == 2, "softmax_rows: expected rank-2");
  const int r = a->value.rows(), c = a->value.cols();
  Tensor out = a->value;
  for (int i = 0; i < r; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      const double e = std::exp(out.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (int j = 0; j < c; ++j) out.at(i, j) /= denom;
  }
  auto result = make_node(std::move(out), {a}, nullptr);
  if (result->needs_grad) {
    result->backward_fn = [a, r, c, p = result->value](Node& n) {
      Tensor& g = a->ensure_grad();
      for (int i = 0; i < r; ++i) {
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += n.grad.at(i, j) * p.at(i, j);
        for (int j = 0; j < c; ++j) g.at(i, j) += p.at(i, j) * (n.grad.at(i, j) - dot);
      }
    };
  }
  return result;
}

// ---------------------------------------------------------------------------
// shaping

Var reshape(const Var& a, std::vector<int> shape) {
  require(shape_count(shape) == a->value.size(), "reshape: element count mismatch");
  Tensor out = a->value;
  std::vector<double> data(out.data(), out.data() + out.size());
  Tensor reshaped = Tensor::from(shape, std::move(data));
  return make_node(std::move(reshaped), {a}, [a](Node& n) {
    Tensor& g = a->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

Var repeat_rows(const Var& a, int k) {
  require(a->value.rank() == 2 && k >= 1, "repeat_rows: expected rank-2, k>=1");
  const int r = a->value.rows(), c = a->value.cols();
  Tensor out = Tensor::zeros({r * k, c});
  for (int i = 0; i < r; ++i) {
    for (int rep = 0; rep < k; ++rep) {
      std::copy(a->value.data() + static_cast<std::int64_t>(i) * c,
                a->value.data() + static_cast<std::int64_t>(i + 1) * c,
                out.data() + (static_cast<std::int64_t>(i) * k + rep) * c);
    }
  }
  return make_node(std::move(out), {a}, [a, r, c, k](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < r; ++i) {
      for (int rep = 0; rep < k; ++rep) {
        const double* src = n.grad.data() + (static_cast<std::int64_t>(i) * k + rep) * c;
        double* dst = g.data() + static_cast<std::int64_t>(i) * c;
        for (int j = 0; j < c; ++j) dst[j] += src[j];
      }
    }
  });
}

Var sum_row_groups(const Var& a, int k) {
  require(a->value.rank() == 2 && k >= 1, "sum_row_groups: expected rank-2, k>=1");
  require(a->value.rows() % k == 0, "sum_row_groups: rows not divisible by k");
  const int r = a->value.rows() / k, c = a->value.cols();
  Tensor out = Tensor::zeros({r, c});
  for (int i = 0; i < r; ++i) {
    for (int rep = 0; rep < k; ++rep) {
      const double* src = a->value.data() + (static_cast<std::int64_t>(i) * k + rep) * c;
      double* dst = out.data() + static_cast<std::int64_t>(i) * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j];
    }
  }
  return make_node(std::move(out), {a}, [a, r, c, k](Node& n) {
    Tensor& g = a->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* src = n.grad.data() + static_cast<std::int64_t>(i) * c;
      for (int rep = 0; rep < k; ++rep) {
        double* dst = g.data() + (static_cast<std::int64_t>(i) * k + rep) * c;
        for (int j = 0; j < c; ++j) dst[j] += src[j];
      }
    }
  });
}

Var mul_rows(const Var& a, const Var& col) {
  require(a->value.rank() == 2 && col->value.rank() == 2, "mul_rows: expected rank-2");
  require(col->value.cols() == 1 && col->value.rows() == a->value.rows(),
          "mul_rows: column shape mismatch");
  const int r = a->value.rows(), c = a->value.cols();
  Tensor out = a->value;
  for (int i = 0; i < r; ++i) {
    const double s = col->value[i];
    for (int j = 0; j < c; ++j) out.at(i, j) *= s;
  }
  return make_node(std::move(out), {a, col}, [a, col, r, c](Node& n) {
    if (a->needs_grad) {
      Tensor& g = a->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const double s = col->value[i];
        for (int j = 0; j < c; ++j) g.at(i, j) += s * n.grad.at(i, j);
      }
    }
    if (col->needs_grad) {
      Tensor& g = col->ensure_grad();
      for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += a->value.at(i, j) * n.grad.at(i, j);
        g[i] += s;
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  require(a->value.rank() == 3 && b->value.rank() == 3, "concat_channels: expected {C,H,W}");
  require(a->value.dim(1) == b->value.dim(1) && a->value.dim(2) == b->value.dim(2),
          "concat_channels: spatial dims mismatch");
  const int ca = a->value.dim(0), cb = b->value.dim(0);
  const int h = a->value.dim(1), w = a->value.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({ca + cb, h, w});
  std::copy(a->value.data(), a->value.data() + ca * plane, out.data());
  std::copy(b->value.data(), b->value.data() + cb * plane, out.data() + ca * plane);
  return make_node(std::move(out), {a, b}, [a, b, ca, cb, plane](Node& n) {
    if (a->needs_grad) {
      Tensor& g = a->ensure_grad();
      for (std::int64_t i = 0; i < ca * plane; ++i) g[i] += n.grad[i];
    }
    if (b->needs_grad) {
      Tensor& g = b->ensure_grad();
      const double* src = n.grad.data() + ca * plane;
      for (std::int64_t i = 0; i < cb * plane; ++i) g[i] += src[i];
    }
  });
}

Var chw_to_tokens(const Var& chw) {
  require(chw->value.rank() == 3, "chw_to_tokens: expected {C,H,W}");
  const int c = chw->value.dim(0), h = chw->value.dim(1), w = chw->value.dim(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({h * w, c});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = chw->value.data() + ch * plane;
    for (std::int64_t p = 0; p < plane; ++p) out[p * c + ch] = src[p];
  }
  return make_node(std::move(out), {chw}, [chw, c, plane](Node& n) {
    Tensor& g = chw->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      double* dst = g.data() + ch * plane;
      for (std::int64_t p = 0; p < plane; ++p) dst[p] += n.grad[p * c + ch];
    }
  });
}

Var tokens_to_chw(const Var& t, int h, int w) {
  require(t->value.rank() == 2, "tokens_to_chw: expected {H*W,C}");
  require(t->value.rows() == h * w, "tokens_to_chw: token count mismatch");
  const int c = t->value.cols();
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor out = Tensor::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    double* dst = out.data() + ch * plane;
    for (std::int64_t p = 0; p < plane; ++p) dst[p] = t->value[p * c + ch];
  }
  return make_node(std::move(out), {t}, [t, c, plane](Node& n) {
    Tensor& g = t->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double* src = n.grad.data() + ch * plane;
      for (std::int64_t p = 0; p < plane; ++p) g[p * c + ch] += src[p];
    }
  });
}

// ---------------------------------------------------------------------------
// convolution

namespace {

struct ConvDims {
  int ci, hi, wi;
  int co, kh, kw;
  int ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  require(x.rank() == 3, "conv2d: input must be {C,H,W}");
  require(w.rank() == 4, "conv2d: weight must be {Co,Ci,kh,kw}");
  require(x.dim(0) == w.dim(1), "conv2d: channel mismatch between input and weight");
  require(stride >= 1, "conv2d: stride must be >= 1");
  ConvDims d;
  d.ci = x.dim(0);
  d.hi = x.dim(1);
  d.wi = x.dim(2);
  d.co = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.ho = (d.hi + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.wi + 2 * pad - d.kw) / stride + 1;
  require(d.ho >= 1 && d.wo >= 1, "conv2d: output would be empty");
  return d;
}

// patches laid out {Ci*kh*kw, Ho*Wo}, zero padding
void im2col(const Tensor& x, const ConvDims& d, int stride, int pad, Tensor& col) {
  const std::int64_t plane = static_cast<std::int64_t>(d.hi) * d.wi;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.ho) * d.wo;
  double* dst = col.data();
  for (int c = 0; c < d.ci; ++c) {
    const double* src = x.data() + c * plane;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          double* row = dst + (((static_cast<std::int64_t>(c) * d.kh + ky) * d.kw + kx) * out_plane) +
                        static_cast<std::int64_t>(oy) * d.wo;
          if (iy < 0 || iy >= d.hi) {
            std::fill(row, row + d.wo, 0.0);
            continue;
          }
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            row[ox] = (ix < 0 || ix >= d.wi) ? 0.0 : src[static_cast<std::int64_t>(iy) * d.wi + ix];
          }
        }
      }
    }
  }
}

void col2im_accumulate(const Tensor& col, const ConvDims& d, int stride, int pad, Tensor& gx) {
  const std::int64_t plane = static_cast<std::int64_t>(d.hi) * d.wi;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.ho) * d.wo;
  for (int c = 0; c < d.ci; ++c) {
    double* dst = gx.data() + c * plane;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* src_base =
            col.data() + ((static_cast<std::int64_t>(c) * d.kh + ky) * d.kw + kx) * out_plane;
        for (int oy = 0; oy < d.ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= d.hi) continue;
          const double* src = src_base + static_cast<std::int64_t>(oy) * d.wo;
          for (int ox = 0; ox < d.wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= d.wi) continue;
            dst[static_cast<std::int64_t>(iy) * d.wi + ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const ConvDims d = conv_dims(x->value, w->value, stride, pad);
  require(b->value.rank() == 1 && b->value.dim(0) == d.co, "conv2d: bias shape mismatch");
  const int patch = d.ci * d.kh * d.kw;
  const std::int64_t out_plane = static_cast<std::int64_t>(d.ho) * d.wo;

  Tensor col = Tensor::zeros({patch, d.ho * d.wo});
  im2col(x->value, d, stride, pad, col);
  Tensor out = Tensor::zeros({d.co, d.ho, d.wo});
  mat(out, d.co, static_cast<int>(out_plane)).noalias() =
      mat(w->value, d.co, patch) * mat(col, patch, static_cast<int>(out_plane));
  for (int c = 0; c < d.co; ++c) {
    double* dst = out.data() + c * out_plane;
    const double bias = b->value[c];
    for (std::int64_t i = 0; i < out_plane; ++i) dst[i] += bias;
  }

  // The im2col buffer is recomputed in the backward pass to keep graph
  // memory proportional to activations, not patches.
  return make_node(std::move(out), {x, w, b}, [x, w, b, d, stride, pad, patch, out_plane](Node& n) {
    const CMapMat gy(n.grad.data(), d.co, static_cast<int>(out_plane));
    if (w->needs_grad || b->needs_grad) {
      if (b->needs_grad) {
        Tensor& gb = b->ensure_grad();
        for (int c = 0; c < d.co; ++c) {
          double s = 0.0;
          const double* src = n.grad.data() + c * out_plane;
          for (std::int64_t i = 0; i < out_plane; ++i) s += src[i];
          gb[c] += s;
        }
      }
      if (w->needs_grad) {
        Tensor col = Tensor::zeros({patch, static_cast<int>(out_plane)});
        im2col(x->value, d, stride, pad, col);
        mat(w->ensure_grad(), d.co, patch).noalias() +=
            gy * mat(col, patch, static_cast<int>(out_plane)).transpose();
      }
    }
    if (x->needs_grad) {
      Tensor gcol = Tensor::zeros({patch, static_cast<int>(out_plane)});
      mat(gcol, patch, static_cast<int>(out_plane)).noalias() =
          mat(w->value, d.co, patch).transpose() * gy;
      col2im_accumulate(gcol, d, stride, pad, x->ensure_grad());
    }
  });
}

Var upsample_nearest(const Var& x, int factor) {
  require(x->value.rank() == 3 && factor >= 1, "upsample_nearest: expected {C,H,W}, factor>=1");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  const int ho = h * factor, wo = w * factor;
  Tensor out = Tensor::zeros({c, ho, wo});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = x->value.data() + static_cast<std::int64_t>(ch) * h * w;
    double* dst = out.data() + static_cast<std::int64_t>(ch) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      const double* srow = src + static_cast<std::int64_t>(y / factor) * w;
      double* drow = dst + static_cast<std::int64_t>(y) * wo;
      for (int xo = 0; xo < wo; ++xo) drow[xo] = srow[xo / factor];
    }
  }
  return make_node(std::move(out), {x}, [x, c, h, w, factor](Node& n) {
    const int ho = h * factor, wo = w * factor;
    Tensor& g = x->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double* src = n.grad.data() + static_cast<std::int64_t>(ch) * ho * wo;
      double* dst = g.data() + static_cast<std::int64_t>(ch) * h * w;
      for (int y = 0; y < ho; ++y) {
        const double* srow = src + static_cast<std::int64_t>(y) * wo;
        double* drow = dst + static_cast<std::int64_t>(y / factor) * w;
        for (int xo = 0; xo < wo; ++xo) drow[xo / factor] += srow[xo];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// codebook bridge

Var gather_rows(const Var& table, const std::vector<int>& indices) {
  require(table->value.rank() == 2, "gather_rows: table must be rank-2");
  const int c = table->value.cols();
  const int rows = table->value.rows();
  Tensor out = Tensor::zeros({static_cast<int>(indices.size()), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < rows, "gather_rows: index out of range");
    std::copy(table->value.data() + static_cast<std::int64_t>(indices[i]) * c,
              table->value.data() + static_cast<std::int64_t>(indices[i] + 1) * c,
              out.data() + static_cast<std::int64_t>(i) * c);
  }
  return make_node(std::move(out), {table}, [table, indices, c](Node& n) {
    Tensor& g = table->ensure_grad();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const double* src = n.grad.data() + static_cast<std::int64_t>(i) * c;
      double* dst = g.data() + static_cast<std::int64_t>(indices[i]) * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var straight_through(Tensor value, const Var& x) {
  require(value.same_shape(x->value), "straight_through: shape mismatch");
  return make_node(std::move(value), {x}, [x](Node& n) {
    Tensor& g = x->ensure_grad();
    for (std::int64_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

Var detach(const Var& a) { return constant(a->value); }

// ---------------------------------------------------------------------------
// backward

void backward(const Var& root) {
  if (!root->needs_grad) return;
  if (root->value.size() != 1) throw std::invalid_argument("backward: root must be scalar");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next].get();
      ++next;
      if (p->needs_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

double scalar(const Var& v) {
  if (v->value.size() != 1) throw std::invalid_argument("scalar: tensor is not scalar");
  return v->value[0];
}

}  // namespace ugtsr::ad
