#pragma once

#include <cmath>
#include <vector>

#include "chat2map/core/nn.hpp"

namespace chat2map::nn {

template <typename T>
class Adam {
 public:
  explicit Adam(ParamList<T>& params, T lr = T(1e-4), T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8))
      : params_(&params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params.params) {
      m_.emplace_back(p->v.val().shape);
      v_.emplace_back(p->v.val().shape);
    }
  }

  void zero_grad() { params_->zero_grad(); }

  // Global gradient-norm clipping; returns the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    double sq = 0;
    for (auto* p : params_->params) {
      auto& g = p->v.grad();
      for (long i = 0; i < g.numel(); ++i) sq += static_cast<double>(g[i]) * g[i];
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0) {
      T scale = static_cast<T>(max_norm / norm);
      for (auto* p : params_->params) {
        auto& g = p->v.grad();
        for (long i = 0; i < g.numel(); ++i) g[i] *= scale;
      }
    }
    return norm;
  }

  void step() {
    ++t_;
    T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1_), t_));
    T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2_), t_));
    for (size_t k = 0; k < params_->params.size(); ++k) {
      auto& p = params_->params[k]->v;
      auto& g = p.grad();
      auto& w = p.val_mut();
      auto& m = m_[k];
      auto& v = v_[k];
      for (long i = 0; i < w.numel(); ++i) {
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
        w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
    }
  }

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }

 private:
  ParamList<T>* params_;
  T lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace chat2map::nn
