#include "ugtsr/optimizer.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ugtsr {

Adam::Adam(std::vector<ad::Var> params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
  if (params_.empty()) throw std::invalid_argument("Adam: empty parameter list");
  if (!(cfg_.lr > 0.0) || !(cfg_.eps > 0.0) || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 ||
      cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
    throw std::invalid_argument("Adam: invalid hyperparameters");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::zero_grad() {
  for (const auto& p : params_) {
    if (!p->grad.empty()) p->grad.fill(0.0);
  }
}

void Adam::step(double lr_scale) {
  if (!(lr_scale > 0.0)) throw std::invalid_argument("Adam: lr_scale must be positive");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i]->value;
    const Tensor& g = params_[i]->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const bool has_grad = !g.empty();
    for (std::int64_t j = 0; j < p.size(); ++j) {
      const double gj = has_grad ? g[j] : 0.0;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= lr_scale * cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

void Adam::save_state(std::ostream& out) const {
  out.write(reinterpret_cast<const char*>(&t_), sizeof(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.write(reinterpret_cast<const char*>(m_[i].data()),
              static_cast<std::streamsize>(sizeof(double) * m_[i].size()));
    out.write(reinterpret_cast<const char*>(v_[i].data()),
              static_cast<std::streamsize>(sizeof(double) * v_[i].size()));
  }
  if (!out) throw std::runtime_error("Adam: state write failed");
}

void Adam::load_state(std::istream& in) {
  in.read(reinterpret_cast<char*>(&t_), sizeof(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    in.read(reinterpret_cast<char*>(m_[i].data()),
            static_cast<std::streamsize>(sizeof(double) * m_[i].size()));
    in.read(reinterpret_cast<char*>(v_[i].data()),
            static_cast<std::streamsize>(sizeof(double) * v_[i].size()));
  }
  if (!in) throw std::runtime_error("Adam: state read failed or truncated");
}

}  // namespace ugtsr
