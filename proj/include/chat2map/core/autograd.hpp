#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "chat2map/core/rng.hpp"
#include "chat2map/core/tensor.hpp"

namespace chat2map::nn {

// Reverse-mode autograd on a define-by-run graph. Every op returns a Var that
// owns its value; backward() walks the DAG in reverse topological order.

inline thread_local bool g_grad_enabled = true;

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
  ~NoGradGuard() { g_grad_enabled = prev; }
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;
  int topo_mark = 0;

  Tensor<T>& g() {
    if (grad.numel() == 0) grad = Tensor<T>(value.shape);
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> v, bool requires_grad = false) : n_(std::make_shared<Node<T>>()) {
    n_->value = std::move(v);
    n_->requires_grad = requires_grad && g_grad_enabled;
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Tensor<T>& val() const { return n_->value; }
  Tensor<T>& val_mut() { return n_->value; }
  Tensor<T>& grad() { return n_->g(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  std::shared_ptr<Node<T>> node() const { return n_; }

  void zero_grad() {
    if (n_ && n_->grad.numel() > 0) std::fill(n_->grad.data.begin(), n_->grad.data.end(), T(0));
  }

  // Root must be a scalar (numel == 1).
  void backward() const {
    if (n_->value.numel() != 1) throw std::runtime_error("backward: root must be scalar");
    std::vector<Node<T>*> order;
    topo_collect(n_.get(), order);
    n_->g()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* nd = *it;
      nd->topo_mark = 0;
      if (nd->backprop && nd->requires_grad) {
        nd->g();  // a node no child wrote into backpropagates a zero grad
        nd->backprop(*nd);
      }
    }
  }

 private:
  static void topo_collect(Node<T>* root, std::vector<Node<T>*>& order) {
    // Iterative DFS; topo_mark: 0 unvisited, 1 on stack, 2 done.
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.push_back({root, 0});
    root->topo_mark = 1;
    while (!stack.empty()) {
      auto& [nd, idx] = stack.back();
      if (idx < nd->parents.size()) {
        Node<T>* p = nd->parents[idx++].get();
        if (p->topo_mark == 0 && p->requires_grad) {
          p->topo_mark = 1;
          stack.push_back({p, 0});
        }
      } else {
        nd->topo_mark = 2;
        order.push_back(nd);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
  Var<T> out(std::move(value), false);
  bool need = false;
  if (g_grad_enabled)
    for (auto& p : parents) need = need || p.requires_grad();
  if (need) {
    auto nd = out.node();
    nd->requires_grad = true;
    for (auto& p : parents) nd->parents.push_back(p.node());
    nd->backprop = std::move(backprop);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a.val().same_shape(b.val())) throw std::invalid_argument("add: shape mismatch");
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] += b.val()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(std::move(v), {a, b}, [an, bn](Node<T>& o) {
    if (an->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i];
    if (bn->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) bn->g()[i] += o.grad[i];
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a.val().same_shape(b.val())) throw std::invalid_argument("sub: shape mismatch");
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] -= b.val()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(std::move(v), {a, b}, [an, bn](Node<T>& o) {
    if (an->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i];
    if (bn->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) bn->g()[i] -= o.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!a.val().same_shape(b.val())) throw std::invalid_argument("mul: shape mismatch");
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] *= b.val()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(std::move(v), {a, b}, [an, bn](Node<T>& o) {
    if (an->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i] * bn->value[i];
    if (bn->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) bn->g()[i] += o.grad[i] * an->value[i];
  });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T s) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] *= s;
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, s](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i] * s;
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] += s;
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i];
  });
}

// Elementwise product with a constant tensor (no gradient through the mask).
template <typename T>
Var<T> mul_const(const Var<T>& a, const Tensor<T>& m) {
  if (!a.val().same_shape(m)) throw std::invalid_argument("mul_const: shape mismatch");
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] *= m[i];
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, m](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i] * m[i];
  });
}

template <typename T>
Var<T> add_const(const Var<T>& a, const Tensor<T>& m) {
  if (!a.val().same_shape(m)) throw std::invalid_argument("add_const: shape mismatch");
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] += m[i];
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i];
  });
}

template <typename T>
Var<T> minimum(const Var<T>& a, const Var<T>& b) {
  if (!a.val().same_shape(b.val())) throw std::invalid_argument("minimum: shape mismatch");
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = std::min(a.val()[i], b.val()[i]);
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(std::move(v), {a, b}, [an, bn](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) {
      if (an->value[i] <= bn->value[i]) {
        if (an->requires_grad) an->g()[i] += o.grad[i];
      } else if (bn->requires_grad) {
        bn->g()[i] += o.grad[i];
      }
    }
  });
}

template <typename T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = std::clamp(v[i], lo, hi);
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, lo, hi](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i)
      if (an->value[i] > lo && an->value[i] < hi) an->g()[i] += o.grad[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = v[i] > T(0) ? v[i] : T(0);
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i)
      if (an->value[i] > T(0)) an->g()[i] += o.grad[i];
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = v[i] > T(0) ? v[i] : slope * v[i];
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, slope](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i)
      an->g()[i] += o.grad[i] * (an->value[i] > T(0) ? T(1) : slope);
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = T(1) / (T(1) + std::exp(-v[i]));
  Tensor<T> sv = v;
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, sv](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i)
      an->g()[i] += o.grad[i] * sv[i] * (T(1) - sv[i]);
  });
}

template <typename T>
Var<T> tanh_(const Var<T>& a) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = std::tanh(v[i]);
  Tensor<T> tv = v;
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, tv](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i)
      an->g()[i] += o.grad[i] * (T(1) - tv[i] * tv[i]);
  });
}

template <typename T>
Var<T> exp_(const Var<T>& a) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = std::exp(v[i]);
  Tensor<T> ev = v;
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, ev](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i] * ev[i];
  });
}

template <typename T>
Var<T> vexp(const Var<T>& a) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] = std::exp(v[i]);
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i)
      an->g()[i] += o.grad[i] * std::exp(an->value[i]);
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  Tensor<T> v = a.val();
  for (long i = 0; i < v.numel(); ++i) v[i] *= v[i];
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i] * T(2) * an->value[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  T s = T(0);
  for (long i = 0; i < a.val().numel(); ++i) s += a.val()[i];
  auto an = a.node();
  return detail::make_op<T>(Tensor<T>({1}, {s}), {a}, [an](Node<T>& o) {
    for (long i = 0; i < an->value.numel(); ++i) an->g()[i] += o.grad[0];
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  long n = a.val().numel();
  T s = T(0);
  for (long i = 0; i < n; ++i) s += a.val()[i];
  s /= static_cast<T>(n);
  auto an = a.node();
  return detail::make_op<T>(Tensor<T>({1}, {s}), {a}, [an, n](Node<T>& o) {
    T g = o.grad[0] / static_cast<T>(n);
    for (long i = 0; i < n; ++i) an->g()[i] += g;
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
  Tensor<T> v = a.val().reshaped(shape);
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i];
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  const auto& x = a.val();
  if (x.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
  int R = x.dim(0), C = x.dim(1);
  Tensor<T> v({C, R});
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) v.at2(c, r) = x.at2(r, c);
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, R, C](Node<T>& o) {
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) an->g().at2(r, c) += o.grad.at2(c, r);
  });
}

namespace detail {
inline void split_strides(const std::vector<int>& shape, int dim, long& outer, long& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < dim; ++i) outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(dim) + 1; i < shape.size(); ++i) inner *= shape[i];
}
}  // namespace detail

template <typename T>
Var<T> slice(const Var<T>& a, int dim, int start, int len) {
  const auto& x = a.val();
  if (dim < 0 || dim >= x.rank() || start < 0 || start + len > x.dim(dim))
    throw std::invalid_argument("slice: out of range");
  long outer, inner;
  detail::split_strides(x.shape, dim, outer, inner);
  std::vector<int> oshape = x.shape;
  oshape[static_cast<size_t>(dim)] = len;
  Tensor<T> v(oshape);
  int D = x.dim(dim);
  for (long o = 0; o < outer; ++o)
    for (int d = 0; d < len; ++d)
      for (long i = 0; i < inner; ++i)
        v[(o * len + d) * inner + i] = x[(o * D + start + d) * inner + i];
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, outer, inner, D, start, len](Node<T>& o2) {
    for (long o = 0; o < outer; ++o)
      for (int d = 0; d < len; ++d)
        for (long i = 0; i < inner; ++i)
          an->g()[(o * D + start + d) * inner + i] += o2.grad[(o * len + d) * inner + i];
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int dim) {
  if (parts.empty()) throw std::invalid_argument("concat: empty");
  std::vector<int> oshape = parts[0].val().shape;
  int total = 0;
  for (auto& p : parts) total += p.val().dim(dim);
  oshape[static_cast<size_t>(dim)] = total;
  long outer, inner;
  detail::split_strides(oshape, dim, outer, inner);
  Tensor<T> v(oshape);
  std::vector<int> sizes, offsets;
  int off = 0;
  for (auto& p : parts) {
    sizes.push_back(p.val().dim(dim));
    offsets.push_back(off);
    off += sizes.back();
  }
  for (size_t k = 0; k < parts.size(); ++k) {
    const auto& x = parts[k].val();
    int D = sizes[k];
    for (long o = 0; o < outer; ++o)
      for (int d = 0; d < D; ++d)
        for (long i = 0; i < inner; ++i)
          v[(o * total + offsets[k] + d) * inner + i] = x[(o * D + d) * inner + i];
  }
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (auto& p : parts) nodes.push_back(p.node());
  return detail::make_op<T>(std::move(v), parts,
                            [nodes, sizes, offsets, outer, inner, total](Node<T>& o2) {
    for (size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      int D = sizes[k];
      for (long o = 0; o < outer; ++o)
        for (int d = 0; d < D; ++d)
          for (long i = 0; i < inner; ++i)
            nodes[k]->g()[(o * D + d) * inner + i] +=
                o2.grad[(o * total + offsets[k] + d) * inner + i];
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const auto& x = a.val();
  const auto& y = b.val();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0))
    throw std::invalid_argument("matmul: bad shapes " + x.shape_str() + " x " + y.shape_str());
  int M = x.dim(0), K = x.dim(1), N = y.dim(1);
  Tensor<T> v({M, N});
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      T xv = x.at2(m, k);
      if (xv == T(0)) continue;
      const T* yr = &y.data[static_cast<size_t>(k) * N];
      T* vr = &v.data[static_cast<size_t>(m) * N];
      for (int n = 0; n < N; ++n) vr[n] += xv * yr[n];
    }
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(std::move(v), {a, b}, [an, bn, M, K, N](Node<T>& o) {
    // dX = dO * Y^T ; dY = X^T * dO
    if (an->requires_grad) {
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
          T s = T(0);
          const T* orow = &o.grad.data[static_cast<size_t>(m) * N];
          const T* yr = &bn->value.data[static_cast<size_t>(k) * N];
          for (int n = 0; n < N; ++n) s += orow[n] * yr[n];
          an->g().at2(m, k) += s;
        }
    }
    if (bn->requires_grad) {
      for (int m = 0; m < M; ++m)
        for (int k = 0; k < K; ++k) {
          T xv = an->value.at2(m, k);
          if (xv == T(0)) continue;
          const T* orow = &o.grad.data[static_cast<size_t>(m) * N];
          T* gr = &bn->g().data[static_cast<size_t>(k) * N];
          for (int n = 0; n < N; ++n) gr[n] += xv * orow[n];
        }
    }
  });
}

// x: [R, C] + bias[C] broadcast over rows.
template <typename T>
Var<T> add_rows(const Var<T>& a, const Var<T>& bias) {
  const auto& x = a.val();
  const auto& b = bias.val();
  if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
    throw std::invalid_argument("add_rows: bad shapes");
  int R = x.dim(0), C = x.dim(1);
  Tensor<T> v = x;
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) v.at2(r, c) += b[c];
  auto an = a.node(), bn = bias.node();
  return detail::make_op<T>(std::move(v), {a, bias}, [an, bn, R, C](Node<T>& o) {
    if (an->requires_grad)
      for (long i = 0; i < o.grad.numel(); ++i) an->g()[i] += o.grad[i];
    if (bn->requires_grad)
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) bn->g()[c] += o.grad.at2(r, c);
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& a) {
  const auto& x = a.val();
  if (x.rank() != 2) throw std::invalid_argument("softmax_rows: rank-2 only");
  int R = x.dim(0), C = x.dim(1);
  Tensor<T> v({R, C});
  for (int r = 0; r < R; ++r) {
    T mx = x.at2(r, 0);
    for (int c = 1; c < C; ++c) mx = std::max(mx, x.at2(r, c));
    T s = T(0);
    for (int c = 0; c < C; ++c) {
      T e = std::exp(x.at2(r, c) - mx);
      v.at2(r, c) = e;
      s += e;
    }
    for (int c = 0; c < C; ++c) v.at2(r, c) /= s;
  }
  Tensor<T> sv = v;
  auto an = a.node();
  return detail::make_op<T>(std::move(v), {a}, [an, sv, R, C](Node<T>& o) {
    for (int r = 0; r < R; ++r) {
      T dot = T(0);
      for (int c = 0; c < C; ++c) dot += o.grad.at2(r, c) * sv.at2(r, c);
      for (int c = 0; c < C; ++c)
        an->g().at2(r, c) += sv.at2(r, c) * (o.grad.at2(r, c) - dot);
    }
  });
}

template <typename T>
Var<T> layernorm_rows(const Var<T>& a, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const auto& x = a.val();
  int R = x.dim(0), C = x.dim(1);
  Tensor<T> v({R, C});
  Tensor<T> mean({R}), istd({R});
  for (int r = 0; r < R; ++r) {
    T m = T(0);
    for (int c = 0; c < C; ++c) m += x.at2(r, c);
    m /= C;
    T var = T(0);
    for (int c = 0; c < C; ++c) {
      T d = x.at2(r, c) - m;
      var += d * d;
    }
    var /= C;
    T is = T(1) / std::sqrt(var + eps);
    mean[r] = m;
    istd[r] = is;
    for (int c = 0; c < C; ++c)
      v.at2(r, c) = (x.at2(r, c) - m) * is * gamma.val()[c] + beta.val()[c];
  }
  auto an = a.node(), gn = gamma.node(), bn = beta.node();
  return detail::make_op<T>(std::move(v), {a, gamma, beta},
                            [an, gn, bn, mean, istd, R, C](Node<T>& o) {
    for (int r = 0; r < R; ++r) {
      T m = mean[r], is = istd[r];
      // xhat_c = (x_c - m) * is
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int c = 0; c < C; ++c) {
        T xhat = (an->value.at2(r, c) - m) * is;
        T dy = o.grad.at2(r, c) * gn->value[c];
        sum_dy += dy;
        sum_dy_xhat += dy * xhat;
        if (gn->requires_grad) gn->g()[c] += o.grad.at2(r, c) * xhat;
        if (bn->requires_grad) bn->g()[c] += o.grad.at2(r, c);
      }
      if (an->requires_grad) {
        for (int c = 0; c < C; ++c) {
          T xhat = (an->value.at2(r, c) - m) * is;
          T dy = o.grad.at2(r, c) * gn->value[c];
          an->g().at2(r, c) += is * (dy - sum_dy / C - xhat * sum_dy_xhat / C);
        }
      }
    }
  });
}

template <typename T>
Var<T> dropout(const Var<T>& a, T p, Rng& rng, bool training) {
  if (!training || p <= T(0)) return a;
  Tensor<T> mask(a.val().shape);
  T scale = T(1) / (T(1) - p);
  for (long i = 0; i < mask.numel(); ++i)
    mask[i] = rng.uniform() < static_cast<double>(p) ? T(0) : scale;
  return mul_const(a, mask);
}

// ---------------------------------------------------------------------------
// Convolutions (NCHW)
// ---------------------------------------------------------------------------

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  const auto& xv = x.val();
  const auto& wv = w.val();
  if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(1))
    throw std::invalid_argument("conv2d: bad shapes " + xv.shape_str() + " w " + wv.shape_str());
  int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  int O = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  int OH = (H + 2 * pad - kh) / stride + 1;
  int OW = (W + 2 * pad - kw) / stride + 1;
  if (OH <= 0 || OW <= 0) throw std::invalid_argument("conv2d: empty output");
  Tensor<T> v({N, O, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          T s = T(0);
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i) {
              int ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int j = 0; j < kw; ++j) {
                int iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                s += xv.at4(n, c, ih, iw) * wv.at4(o, c, i, j);
              }
            }
          v.at4(n, o, oh, ow) = s;
        }
  auto xn = x.node(), wn = w.node();
  return detail::make_op<T>(std::move(v), {x, w},
                            [xn, wn, N, C, H, W, O, kh, kw, OH, OW, stride, pad](Node<T>& out) {
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < O; ++o)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T go = out.grad.at4(n, o, oh, ow);
            if (go == T(0)) continue;
            for (int c = 0; c < C; ++c)
              for (int i = 0; i < kh; ++i) {
                int ih = oh * stride - pad + i;
                if (ih < 0 || ih >= H) continue;
                for (int j = 0; j < kw; ++j) {
                  int iw = ow * stride - pad + j;
                  if (iw < 0 || iw >= W) continue;
                  if (xn->requires_grad) xn->g().at4(n, c, ih, iw) += go * wn->value.at4(o, c, i, j);
                  if (wn->requires_grad) wn->g().at4(o, c, i, j) += go * xn->value.at4(n, c, ih, iw);
                }
              }
          }
  });
}

// w: [C_in, C_out, kh, kw]
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  const auto& xv = x.val();
  const auto& wv = w.val();
  if (xv.rank() != 4 || wv.rank() != 4 || xv.dim(1) != wv.dim(0))
    throw std::invalid_argument("conv_transpose2d: bad shapes");
  int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  int O = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
  int OH = (H - 1) * stride - 2 * pad + kh;
  int OW = (W - 1) * stride - 2 * pad + kw;
  Tensor<T> v({N, O, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int ww = 0; ww < W; ++ww) {
          T xval = xv.at4(n, c, h, ww);
          if (xval == T(0)) continue;
          for (int o = 0; o < O; ++o)
            for (int i = 0; i < kh; ++i) {
              int oh = h * stride - pad + i;
              if (oh < 0 || oh >= OH) continue;
              for (int j = 0; j < kw; ++j) {
                int ow = ww * stride - pad + j;
                if (ow < 0 || ow >= OW) continue;
                v.at4(n, o, oh, ow) += xval * wv.at4(c, o, i, j);
              }
            }
        }
  auto xn = x.node(), wn = w.node();
  return detail::make_op<T>(std::move(v), {x, w},
                            [xn, wn, N, C, H, W, O, kh, kw, OH, OW, stride, pad](Node<T>& out) {
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
          for (int ww = 0; ww < W; ++ww) {
            for (int o = 0; o < O; ++o)
              for (int i = 0; i < kh; ++i) {
                int oh = h * stride - pad + i;
                if (oh < 0 || oh >= OH) continue;
                for (int j = 0; j < kw; ++j) {
                  int ow = ww * stride - pad + j;
                  if (ow < 0 || ow >= OW) continue;
                  T go = out.grad.at4(n, o, oh, ow);
                  if (go == T(0)) continue;
                  if (xn->requires_grad)
                    xn->g().at4(n, c, h, ww) += go * wn->value.at4(c, o, i, j);
                  if (wn->requires_grad)
                    wn->g().at4(c, o, i, j) += go * xn->value.at4(n, c, h, ww);
                }
              }
          }
  });
}

template <typename T>
Var<T> adaptive_avg_pool2d(const Var<T>& x, int oh, int ow) {
  const auto& xv = x.val();
  int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  Tensor<T> v({N, C, oh, ow});
  auto bin = [](int o, int n, int total) {  // [start, end) of output bin o
    int s = (o * total) / n;
    int e = ((o + 1) * total + n - 1) / n;
    return std::pair<int, int>(s, e);
  };
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < oh; ++i) {
        auto [hs, he] = bin(i, oh, H);
        for (int j = 0; j < ow; ++j) {
          auto [ws, we] = bin(j, ow, W);
          T s = T(0);
          for (int h = hs; h < he; ++h)
            for (int w2 = ws; w2 < we; ++w2) s += xv.at4(n, c, h, w2);
          v.at4(n, c, i, j) = s / static_cast<T>((he - hs) * (we - ws));
        }
      }
  auto xn = x.node();
  return detail::make_op<T>(std::move(v), {x}, [xn, N, C, H, W, oh, ow, bin](Node<T>& out) {
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < oh; ++i) {
          auto [hs, he] = bin(i, oh, H);
          for (int j = 0; j < ow; ++j) {
            auto [ws, we] = bin(j, ow, W);
            T g = out.grad.at4(n, c, i, j) / static_cast<T>((he - hs) * (we - ws));
            for (int h = hs; h < he; ++h)
              for (int w2 = ws; w2 < we; ++w2) xn->g().at4(n, c, h, w2) += g;
          }
        }
  });
}

// Batch normalization over N,H,W per channel. Running stats are updated in
// training mode (side effect on the provided tensors, which live in the module).
template <typename T>
Var<T> batchnorm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                   Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                   T momentum = T(0.1), T eps = T(1e-5)) {
  const auto& xv = x.val();
  int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  long cnt = static_cast<long>(N) * H * W;
  Tensor<T> mean({C}), var({C});
  if (training) {
    for (int c = 0; c < C; ++c) {
      T m = T(0);
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) m += xv.at4(n, c, h, w);
      m /= cnt;
      T v2 = T(0);
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            T d = xv.at4(n, c, h, w) - m;
            v2 += d * d;
          }
      v2 /= cnt;
      mean[c] = m;
      var[c] = v2;
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * m;
      running_var[c] = (T(1) - momentum) * running_var[c] + momentum * v2;
    }
  } else {
    mean = running_mean;
    var = running_var;
  }
  Tensor<T> v({N, C, H, W});
  Tensor<T> istd({C});
  for (int c = 0; c < C; ++c) istd[c] = T(1) / std::sqrt(var[c] + eps);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          v.at4(n, c, h, w) =
              (xv.at4(n, c, h, w) - mean[c]) * istd[c] * gamma.val()[c] + beta.val()[c];
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return detail::make_op<T>(std::move(v), {x, gamma, beta},
                            [xn, gn, bn, mean, istd, N, C, H, W, cnt, training](Node<T>& out) {
    for (int c = 0; c < C; ++c) {
      T m = mean[c], is = istd[c], g = gn->value[c];
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            T dy = out.grad.at4(n, c, h, w);
            T xhat = (xn->value.at4(n, c, h, w) - m) * is;
            sum_dy += dy;
            sum_dy_xhat += dy * xhat;
            if (gn->requires_grad) gn->g()[c] += dy * xhat;
            if (bn->requires_grad) bn->g()[c] += dy;
          }
      if (xn->requires_grad) {
        for (int n = 0; n < N; ++n)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
              T dy = out.grad.at4(n, c, h, w);
              T xhat = (xn->value.at4(n, c, h, w) - m) * is;
              if (training) {
                xn->g().at4(n, c, h, w) +=
                    g * is * (dy - sum_dy / cnt - xhat * sum_dy_xhat / cnt);
              } else {
                xn->g().at4(n, c, h, w) += g * is * dy;
              }
            }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Mean binary cross entropy between probabilities and a constant target.
// Probabilities are clamped to [clip, 1-clip] for stability; the gradient is
// zero where the clamp is active.
template <typename T>
Var<T> bce_mean(const Var<T>& p, const Tensor<T>& target, T clip = T(1e-7)) {
  const auto& pv = p.val();
  if (!pv.same_shape(target)) throw std::invalid_argument("bce_mean: shape mismatch");
  long n = pv.numel();
  T loss = T(0);
  for (long i = 0; i < n; ++i) {
    T pc = std::clamp(pv[i], clip, T(1) - clip);
    loss += -target[i] * std::log(pc) - (T(1) - target[i]) * std::log(T(1) - pc);
  }
  loss /= static_cast<T>(n);
  auto pn = p.node();
  return detail::make_op<T>(Tensor<T>({1}, {loss}), {p}, [pn, target, clip, n](Node<T>& o) {
    T g = o.grad[0] / static_cast<T>(n);
    for (long i = 0; i < n; ++i) {
      T pv = pn->value[i];
      if (pv <= clip || pv >= T(1) - clip) continue;
      pn->g()[i] += g * (-target[i] / pv + (T(1) - target[i]) / (T(1) - pv));
    }
  });
}

// log P(a | Bernoulli(sigmoid(logit))) computed stably from logits.
template <typename T>
Var<T> bernoulli_logprob(const Var<T>& logits, const Tensor<T>& actions) {
  const auto& lv = logits.val();
  if (!lv.same_shape(actions)) throw std::invalid_argument("bernoulli_logprob: shape mismatch");
  Tensor<T> v(lv.shape);
  auto softplus = [](T x) { return x > T(30) ? x : std::log1p(std::exp(x)); };
  for (long i = 0; i < lv.numel(); ++i)
    v[i] = actions[i] > T(0.5) ? -softplus(-lv[i]) : -softplus(lv[i]);
  auto ln = logits.node();
  return detail::make_op<T>(std::move(v), {logits}, [ln, actions](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) {
      T p = T(1) / (T(1) + std::exp(-ln->value[i]));
      ln->g()[i] += o.grad[i] * (actions[i] - p);
    }
  });
}

// Entropy of Bernoulli(sigmoid(logit)): softplus(l) - l*sigmoid(l).
template <typename T>
Var<T> bernoulli_entropy(const Var<T>& logits) {
  const auto& lv = logits.val();
  Tensor<T> v(lv.shape);
  auto softplus = [](T x) { return x > T(30) ? x : std::log1p(std::exp(x)); };
  for (long i = 0; i < lv.numel(); ++i) {
    T p = T(1) / (T(1) + std::exp(-lv[i]));
    v[i] = softplus(lv[i]) - lv[i] * p;
  }
  auto ln = logits.node();
  return detail::make_op<T>(std::move(v), {logits}, [ln](Node<T>& o) {
    for (long i = 0; i < o.grad.numel(); ++i) {
      T l = ln->value[i];
      T p = T(1) / (T(1) + std::exp(-l));
      ln->g()[i] += o.grad[i] * (-l * p * (T(1) - p));
    }
  });
}

}  // namespace chat2map::nn
