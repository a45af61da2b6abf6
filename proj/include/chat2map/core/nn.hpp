#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "chat2map/core/autograd.hpp"

namespace chat2map::nn {

template <typename T>
struct Param {
  std::string name;
  Var<T> v;
};

// Named tensors that are part of a checkpoint but not optimized (BN stats).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T>* t = nullptr;
};

template <typename T>
struct ParamList {
  std::vector<Param<T>*> params;
  std::vector<Buffer<T>> buffers;

  void add(Param<T>& p) { params.push_back(&p); }
  void add_buffer(std::string name, Tensor<T>& t) { buffers.push_back({std::move(name), &t}); }

  long numel() const {
    long n = 0;
    for (auto* p : params) n += p->v.val().numel();
    return n;
  }
  void zero_grad() {
    for (auto* p : params) p->v.zero_grad();
  }
};

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

template <typename T>
void kaiming_normal(Tensor<T>& w, long fan_in, Rng& rng, double negative_slope = 0.0) {
  double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
  double std = gain / std::sqrt(static_cast<double>(fan_in));
  for (long i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal(0.0, std));
}

template <typename T>
void kaiming_uniform(Tensor<T>& w, long fan_in, Rng& rng, double negative_slope = 0.0) {
  double gain = std::sqrt(2.0 / (1.0 + negative_slope * negative_slope));
  double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  for (long i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// Orthogonal init for a [rows, cols] matrix via Gram-Schmidt on Gaussian rows.
template <typename T>
void orthogonal(Tensor<T>& w, Rng& rng, double gain = 1.0) {
  int R = w.dim(0), C = w.dim(1);
  bool wide = C > R;
  int n = wide ? C : R, m = wide ? R : C;  // n >= m, orthonormalize m vectors of dim n
  std::vector<std::vector<double>> q;
  q.reserve(m);
  while (static_cast<int>(q.size()) < m) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.normal();
    for (auto& u : q) {
      double dot = 0;
      for (int i = 0; i < n; ++i) dot += u[i] * v[i];
      for (int i = 0; i < n; ++i) v[i] -= dot * u[i];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    q.push_back(std::move(v));
  }
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      w.at2(r, c) = static_cast<T>(gain * (wide ? q[r][c] : q[c][r]));
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

enum class Init { KaimingNormal, KaimingUniform, Orthogonal };

template <typename T>
struct Linear {
  Param<T> weight;  // [in, out]; y = x * W + b
  Param<T> bias;    // [out] or empty
  bool has_bias = false;

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, Init init = Init::KaimingNormal,
         bool with_bias = false, double slope = 0.0) {
    Tensor<T> w({in, out});
    switch (init) {
      case Init::KaimingNormal: kaiming_normal(w, in, rng, slope); break;
      case Init::KaimingUniform: kaiming_uniform(w, in, rng, slope); break;
      case Init::Orthogonal: orthogonal(w, rng); break;
    }
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    has_bias = with_bias;
    if (with_bias) bias = {name + ".bias", Var<T>(Tensor<T>({out}), true)};
  }

  Var<T> forward(const Var<T>& x) const {
    Var<T> y = matmul(x, weight.v);
    if (has_bias) y = add_rows(y, bias.v);
    return y;
  }
  void collect(ParamList<T>& pl) {
    pl.add(weight);
    if (has_bias) pl.add(bias);
  }
};

template <typename T>
struct Conv2d {
  Param<T> weight;  // [O, C, kh, kw]
  int stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride_, int pad_, Rng& rng,
         double slope = 0.2) {
    Tensor<T> w({out_ch, in_ch, k, k});
    kaiming_normal(w, static_cast<long>(in_ch) * k * k, rng, slope);
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    stride = stride_;
    pad = pad_;
  }
  Var<T> forward(const Var<T>& x) const { return conv2d(x, weight.v, stride, pad); }
  void collect(ParamList<T>& pl) { pl.add(weight); }
};

template <typename T>
struct ConvT2d {
  Param<T> weight;  // [C, O, kh, kw]
  int stride = 1, pad = 0;

  ConvT2d() = default;
  ConvT2d(const std::string& name, int in_ch, int out_ch, int k, int stride_, int pad_, Rng& rng) {
    Tensor<T> w({in_ch, out_ch, k, k});
    kaiming_normal(w, static_cast<long>(in_ch) * k * k, rng);
    weight = {name + ".weight", Var<T>(std::move(w), true)};
    stride = stride_;
    pad = pad_;
  }
  Var<T> forward(const Var<T>& x) const { return conv_transpose2d(x, weight.v, stride, pad); }
  void collect(ParamList<T>& pl) { pl.add(weight); }
};

template <typename T>
struct BatchNorm2d {
  Param<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  std::string name_;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int ch) {
    gamma = {name + ".gamma", Var<T>(Tensor<T>({ch}, T(1)), true)};
    beta = {name + ".beta", Var<T>(Tensor<T>({ch}), true)};
    running_mean = Tensor<T>({ch});
    running_var = Tensor<T>({ch}, T(1));
    name_ = name;
  }
  Var<T> forward(const Var<T>& x, bool training) {
    return batchnorm2d(x, gamma.v, beta.v, running_mean, running_var, training);
  }
  void collect(ParamList<T>& pl) {
    pl.add(gamma);
    pl.add(beta);
    pl.add_buffer(name_ + ".running_mean", running_mean);
    pl.add_buffer(name_ + ".running_var", running_var);
  }
};

template <typename T>
struct LayerNorm {
  Param<T> gamma, beta;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim) {
    gamma = {name + ".gamma", Var<T>(Tensor<T>({dim}, T(1)), true)};
    beta = {name + ".beta", Var<T>(Tensor<T>({dim}), true)};
  }
  Var<T> forward(const Var<T>& x) const { return layernorm_rows(x, gamma.v, beta.v); }
  void collect(ParamList<T>& pl) {
    pl.add(gamma);
    pl.add(beta);
  }
};

template <typename T>
struct Embedding {
  Param<T> table;  // [rows, dim]

  Embedding() = default;
  Embedding(const std::string& name, int rows, int dim, Rng& rng) {
    Tensor<T> w({rows, dim});
    kaiming_normal(w, dim, rng);
    table = {name + ".table", Var<T>(std::move(w), true)};
  }
  Var<T> forward(int row) const { return slice(table.v, 0, row, 1); }  // [1, dim]
  void collect(ParamList<T>& pl) { pl.add(table); }
};

// One-step GRU cell (torch gate layout: r, z, n).
template <typename T>
struct GRUCell {
  Param<T> w_ih;  // [in, 3H]
  Param<T> w_hh;  // [H, 3H]
  Param<T> b_ih, b_hh;
  int hidden = 0;
  bool has_bias = false;

  GRUCell() = default;
  GRUCell(const std::string& name, int in, int hidden_, Rng& rng, Init init = Init::Orthogonal,
          bool with_bias = true) {
    hidden = hidden_;
    Tensor<T> wi({in, 3 * hidden}), wh({hidden, 3 * hidden});
    if (init == Init::Orthogonal) {
      orthogonal(wi, rng);
      orthogonal(wh, rng);
    } else {
      kaiming_normal(wi, in, rng);
      kaiming_normal(wh, hidden, rng);
    }
    w_ih = {name + ".w_ih", Var<T>(std::move(wi), true)};
    w_hh = {name + ".w_hh", Var<T>(std::move(wh), true)};
    has_bias = with_bias;
    if (with_bias) {
      b_ih = {name + ".b_ih", Var<T>(Tensor<T>({3 * hidden}), true)};
      b_hh = {name + ".b_hh", Var<T>(Tensor<T>({3 * hidden}), true)};
    }
  }

  // x: [1, in], h: [1, H] -> new h [1, H]
  Var<T> forward(const Var<T>& x, const Var<T>& h) const {
    Var<T> gi = matmul(x, w_ih.v);
    Var<T> gh = matmul(h, w_hh.v);
    if (has_bias) {
      gi = add_rows(gi, b_ih.v);
      gh = add_rows(gh, b_hh.v);
    }
    Var<T> r = sigmoid(add(slice(gi, 1, 0, hidden), slice(gh, 1, 0, hidden)));
    Var<T> z = sigmoid(add(slice(gi, 1, hidden, hidden), slice(gh, 1, hidden, hidden)));
    Var<T> n = tanh_(add(slice(gi, 1, 2 * hidden, hidden),
                         mul(r, slice(gh, 1, 2 * hidden, hidden))));
    // h' = (1-z)*n + z*h
    Var<T> one_minus_z = add_scalar(mul_scalar(z, T(-1)), T(1));
    return add(mul(one_minus_z, n), mul(z, h));
  }
  void collect(ParamList<T>& pl) {
    pl.add(w_ih);
    pl.add(w_hh);
    if (has_bias) {
      pl.add(b_ih);
      pl.add(b_hh);
    }
  }
};

// ---------------------------------------------------------------------------
// Transformer blocks (post-norm, per the original architecture)
// ---------------------------------------------------------------------------

template <typename T>
struct MultiHeadAttention {
  Linear<T> wq, wk, wv, wo;
  int d_model = 0, n_heads = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int d, int heads, Rng& rng)
      : wq(name + ".wq", d, d, rng),
        wk(name + ".wk", d, d, rng),
        wv(name + ".wv", d, d, rng),
        wo(name + ".wo", d, d, rng),
        d_model(d),
        n_heads(heads) {
    if (d % heads != 0) throw std::invalid_argument("d_model must divide n_heads");
  }

  // q: [Tq, d], kv: [Tk, d]
  Var<T> forward(const Var<T>& q_in, const Var<T>& kv_in) const {
    int dh = d_model / n_heads;
    Var<T> q = wq.forward(q_in), k = wk.forward(kv_in), v = wv.forward(kv_in);
    std::vector<Var<T>> heads;
    T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int h = 0; h < n_heads; ++h) {
      Var<T> qh = slice(q, 1, h * dh, dh);
      Var<T> kh = slice(k, 1, h * dh, dh);
      Var<T> vh = slice(v, 1, h * dh, dh);
      Var<T> scores = mul_scalar(matmul(qh, transpose(kh)), scale);
      Var<T> attn = softmax_rows(scores);
      heads.push_back(matmul(attn, vh));
    }
    return wo.forward(concat(heads, 1));
  }
  void collect(ParamList<T>& pl) {
    wq.collect(pl);
    wk.collect(pl);
    wv.collect(pl);
    wo.collect(pl);
  }
};

template <typename T>
struct TransformerEncoderLayer {
  MultiHeadAttention<T> attn;
  Linear<T> ff1, ff2;
  LayerNorm<T> ln1, ln2;
  T drop_p = T(0.1);

  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(const std::string& name, int d, int heads, int d_ff, T dropout_p,
                          Rng& rng)
      : attn(name + ".attn", d, heads, rng),
        ff1(name + ".ff1", d, d_ff, rng),
        ff2(name + ".ff2", d_ff, d, rng),
        ln1(name + ".ln1", d),
        ln2(name + ".ln2", d),
        drop_p(dropout_p) {}

  Var<T> forward(const Var<T>& x, bool training, Rng& rng) const {
    Var<T> a = dropout(attn.forward(x, x), drop_p, rng, training);
    Var<T> h = ln1.forward(add(x, a));
    Var<T> f = ff2.forward(relu(ff1.forward(h)));
    return ln2.forward(add(h, dropout(f, drop_p, rng, training)));
  }
  void collect(ParamList<T>& pl) {
    attn.collect(pl);
    ff1.collect(pl);
    ff2.collect(pl);
    ln1.collect(pl);
    ln2.collect(pl);
  }
};

template <typename T>
struct TransformerDecoderLayer {
  MultiHeadAttention<T> self_attn, cross_attn;
  Linear<T> ff1, ff2;
  LayerNorm<T> ln1, ln2, ln3;
  T drop_p = T(0.1);

  TransformerDecoderLayer() = default;
  TransformerDecoderLayer(const std::string& name, int d, int heads, int d_ff, T dropout_p,
                          Rng& rng)
      : self_attn(name + ".self", d, heads, rng),
        cross_attn(name + ".cross", d, heads, rng),
        ff1(name + ".ff1", d, d_ff, rng),
        ff2(name + ".ff2", d_ff, d, rng),
        ln1(name + ".ln1", d),
        ln2(name + ".ln2", d),
        ln3(name + ".ln3", d),
        drop_p(dropout_p) {}

  Var<T> forward(const Var<T>& x, const Var<T>& memory, bool training, Rng& rng) const {
    Var<T> a = dropout(self_attn.forward(x, x), drop_p, rng, training);
    Var<T> h = ln1.forward(add(x, a));
    Var<T> c = dropout(cross_attn.forward(h, memory), drop_p, rng, training);
    h = ln2.forward(add(h, c));
    Var<T> f = ff2.forward(relu(ff1.forward(h)));
    return ln3.forward(add(h, dropout(f, drop_p, rng, training)));
  }
  void collect(ParamList<T>& pl) {
    self_attn.collect(pl);
    cross_attn.collect(pl);
    ff1.collect(pl);
    ff2.collect(pl);
    ln1.collect(pl);
    ln2.collect(pl);
    ln3.collect(pl);
  }
};

}  // namespace chat2map::nn
