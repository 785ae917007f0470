#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpgan/rng.hpp"
#include "cpgan/tensor.hpp"

// Minimal CPU training stack: conv / linear / activation layers with explicit
// forward and backward passes, plus Adam. Convolutions run as im2col + GEMM
// (Eigen). Everything is single-threaded and deterministic for a fixed seed.

namespace cpgan {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using EMap = Eigen::Map<EMat<T>>;
template <typename T>
using ECMap = Eigen::Map<const EMat<T>>;

enum class Init { kHeNormal, kXavierUniform, kZero };

/// One named parameter tensor with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Init init = Init::kHeNormal;
  int fan_in = 0;
  int fan_out = 0;

  void setup(std::string full_name, std::vector<int> shape, Init kind, int fin, int fout) {
    name = std::move(full_name);
    value.resize(shape);
    grad.resize(shape);
    grad.zero();
    init = kind;
    fan_in = fin;
    fan_out = fout;
  }
};

/// Seeds a parameter from (master_seed, param name) only, so identical names
/// get identical values no matter which network instantiates them.
template <typename T>
void init_param(Param<T>& p, std::uint64_t master_seed) {
  std::mt19937_64 rng = make_rng(master_seed, p.name);
  switch (p.init) {
    case Init::kZero:
      p.value.zero();
      break;
    case Init::kHeNormal: {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / std::max(1, p.fan_in)));
      for (int i = 0; i < p.value.numel(); ++i) p.value[i] = static_cast<T>(dist(rng));
      break;
    }
    case Init::kXavierUniform: {
      double limit = std::sqrt(6.0 / std::max(1, p.fan_in + p.fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (int i = 0; i < p.value.numel(); ++i) p.value[i] = static_cast<T>(dist(rng));
      break;
    }
  }
  p.grad.zero();
}

// ---------------------------------------------------------------------------
// Convolution

/// 2-D convolution, square kernel, zero padding, NCHW batches.
/// Weights are stored (C_out, C_in*k*k) so the forward pass is one GEMM per
/// image over an im2col patch matrix.
template <typename T>
class Conv2d {
 public:
  Param<T> w, b;

  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int ksize, int stride, Init init = Init::kHeNormal)
      : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_((ksize - 1) / 2) {
    w.setup(name + ".w", {out_ch, in_ch * ksize * ksize}, init, in_ch * ksize * ksize, out_ch);
    b.setup(name + ".b", {out_ch}, Init::kZero, 0, 0);
  }

  void params(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  int out_hw(int hw) const { return (hw + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<T> forward(const Tensor<T>& x) {
    check_input(x);
    input_ = x;  // kept for the backward im2col
    const int n = x.dim(0), h = x.dim(2), wdt = x.dim(3);
    const int ho = out_hw(h), wo = out_hw(wdt);
    Tensor<T> y({n, out_ch_, ho, wo});
    const int patch = in_ch_ * k_ * k_, pixels = ho * wo;
    cols_.resize({patch, pixels});
    ECMap<T> wm(w.value.data(), out_ch_, patch);
    for (int i = 0; i < n; ++i) {
      im2col(x, i, cols_);
      EMap<T> ym(&y.at(i, 0, 0, 0), out_ch_, pixels);
      ECMap<T> cm(cols_.data(), patch, pixels);
      ym.noalias() = wm * cm;
      for (int c = 0; c < out_ch_; ++c) ym.row(c).array() += b.value[c];
    }
    return y;
  }

  /// Accumulates dW, db (unless weight_grad is false) and returns dL/dx
  /// (empty when input_grad is false).
  Tensor<T> backward(const Tensor<T>& gy, bool input_grad = true, bool weight_grad = true) {
    const int n = input_.dim(0), h = input_.dim(2), wdt = input_.dim(3);
    const int ho = gy.dim(2), wo = gy.dim(3);
    const int patch = in_ch_ * k_ * k_, pixels = ho * wo;
    Tensor<T> gx;
    if (input_grad) gx = Tensor<T>::zeros({n, in_ch_, h, wdt});
    cols_.resize({patch, pixels});
    gcols_.resize({patch, pixels});
    EMap<T> gwm(w.grad.data(), out_ch_, patch);
    ECMap<T> wm(w.value.data(), out_ch_, patch);
    for (int i = 0; i < n; ++i) {
      ECMap<T> gym(&gy.at(i, 0, 0, 0), out_ch_, pixels);
      if (weight_grad) {
        im2col(input_, i, cols_);
        ECMap<T> cm(cols_.data(), patch, pixels);
        gwm.noalias() += gym * cm.transpose();
        for (int c = 0; c < out_ch_; ++c) b.grad[c] += gym.row(c).sum();
      }
      if (input_grad) {
        EMap<T> gcm(gcols_.data(), patch, pixels);
        gcm.noalias() = wm.transpose() * gym;
        col2im(gcols_, gx, i);
      }
    }
    return gx;
  }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != in_ch_)
      throw std::invalid_argument("Conv2d " + w.name + ": bad input shape " + Tensor<T>::shape_str(x.shape()));
  }

  void im2col(const Tensor<T>& x, int img, Tensor<T>& cols) const {
    const int h = x.dim(2), wdt = x.dim(3);
    const int ho = out_hw(h), wo = out_hw(wdt);
    T* out = cols.data();
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              for (int ox = 0; ox < wo; ++ox) *out++ = T(0);
              continue;
            }
            const T* src = &x.at(img, c, iy, 0);
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              *out++ = (ix >= 0 && ix < wdt) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const Tensor<T>& cols, Tensor<T>& gx, int img) const {
    const int h = gx.dim(2), wdt = gx.dim(3);
    const int ho = out_hw(h), wo = out_hw(wdt);
    const T* in = cols.data();
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              in += wo;
              continue;
            }
            T* dst = &gx.at(img, c, iy, 0);
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < wdt) dst[ix] += *in;
              ++in;
            }
          }
        }
      }
    }
  }

  int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  Tensor<T> input_, cols_, gcols_;
};

// ---------------------------------------------------------------------------
// Linear

template <typename T>
class Linear {
 public:
  Param<T> w, b;

  Linear() = default;
  Linear(const std::string& name, int in_dim, int out_dim, Init init = Init::kHeNormal)
      : in_(in_dim), out_(out_dim) {
    w.setup(name + ".w", {out_dim, in_dim}, init, in_dim, out_dim);
    b.setup(name + ".b", {out_dim}, Init::kZero, 0, 0);
  }

  void params(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.ndim() != 2 || x.dim(1) != in_)
      throw std::invalid_argument("Linear " + w.name + ": bad input shape " + Tensor<T>::shape_str(x.shape()));
    input_ = x;
    const int n = x.dim(0);
    Tensor<T> y({n, out_});
    ECMap<T> xm(x.data(), n, in_);
    ECMap<T> wm(w.value.data(), out_, in_);
    EMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    ECMap<T> bm(b.value.data(), 1, out_);
    ym.rowwise() += bm.row(0);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int n = input_.dim(0);
    Tensor<T> gx({n, in_});
    ECMap<T> gym(gy.data(), n, out_);
    ECMap<T> xm(input_.data(), n, in_);
    ECMap<T> wm(w.value.data(), out_, in_);
    EMap<T> gwm(w.grad.data(), out_, in_);
    EMap<T> gxm(gx.data(), n, in_);
    gwm.noalias() += gym.transpose() * xm;
    EMap<T> gbm(b.grad.data(), 1, out_);
    gbm.row(0) += gym.colwise().sum();
    gxm.noalias() = gym * wm;
    return gx;
  }

 private:
  int in_ = 0, out_ = 0;
  Tensor<T> input_;
};

// ---------------------------------------------------------------------------
// Activations (cache their output; gradients derive from it)

template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.0) : slope_(static_cast<T>(slope)) {}

  Tensor<T> forward(const Tensor<T>& x) {
    out_ = x;
    for (int i = 0; i < out_.numel(); ++i)
      if (out_[i] < T(0)) out_[i] *= slope_;
    return out_;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx = gy;
    for (int i = 0; i < gx.numel(); ++i)
      if (out_[i] <= T(0)) gx[i] *= slope_;
    return gx;
  }

 private:
  T slope_;
  Tensor<T> out_;
};

template <typename T>
using Relu = LeakyRelu<T>;

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    out_ = x;
    for (int i = 0; i < out_.numel(); ++i) out_[i] = std::tanh(out_[i]);
    return out_;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx = gy;
    for (int i = 0; i < gx.numel(); ++i) gx[i] *= T(1) - out_[i] * out_[i];
    return gx;
  }

 private:
  Tensor<T> out_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    out_ = x;
    for (int i = 0; i < out_.numel(); ++i) out_[i] = T(1) / (T(1) + std::exp(-out_[i]));
    return out_;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    Tensor<T> gx = gy;
    for (int i = 0; i < gx.numel(); ++i) gx[i] *= out_[i] * (T(1) - out_[i]);
    return gx;
  }

 private:
  Tensor<T> out_;
};

// ---------------------------------------------------------------------------
// Shape ops

template <typename T>
class GlobalAvgPool {
 public:
  /// N,C,H,W -> N,C
  Tensor<T> forward(const Tensor<T>& x) {
    h_ = x.dim(2);
    w_ = x.dim(3);
    const int n = x.dim(0), c = x.dim(1), hw = h_ * w_;
    Tensor<T> y({n, c});
    const T scale = T(1) / static_cast<T>(hw);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) {
        const T* p = &x.at(i, j, 0, 0);
        T s = T(0);
        for (int e = 0; e < hw; ++e) s += p[e];
        y.at(i, j) = s * scale;
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    const int n = gy.dim(0), c = gy.dim(1), hw = h_ * w_;
    Tensor<T> gx({n, c, h_, w_});
    const T scale = T(1) / static_cast<T>(hw);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j) {
        const T g = gy.at(i, j) * scale;
        T* p = &gx.at(i, j, 0, 0);
        for (int e = 0; e < hw; ++e) p[e] = g;
      }
    return gx;
  }

 private:
  int h_ = 0, w_ = 0;
};

/// Nearest-neighbour 2x upsampling.
template <typename T>
class Upsample2x {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> y({n, c, 2 * h, 2 * w});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j)
        for (int yy = 0; yy < 2 * h; ++yy) {
          const T* src = &x.at(i, j, yy / 2, 0);
          T* dst = &y.at(i, j, yy, 0);
          for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
        }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) const {
    const int n = gy.dim(0), c = gy.dim(1), h = gy.dim(2) / 2, w = gy.dim(3) / 2;
    Tensor<T> gx = Tensor<T>::zeros({n, c, h, w});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j)
        for (int yy = 0; yy < 2 * h; ++yy) {
          T* dst = &gx.at(i, j, yy / 2, 0);
          const T* src = &gy.at(i, j, yy, 0);
          for (int xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
        }
    return gx;
  }
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw std::invalid_argument("concat_channels: spatial/batch mismatch");
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  Tensor<T> y({n, ca + cb, h, w});
  const int plane = h * w;
  for (int i = 0; i < n; ++i) {
    std::copy(&a.at(i, 0, 0, 0), &a.at(i, 0, 0, 0) + ca * plane, &y.at(i, 0, 0, 0));
    std::copy(&b.at(i, 0, 0, 0), &b.at(i, 0, 0, 0) + cb * plane, &y.at(i, ca, 0, 0));
  }
  return y;
}

template <typename T>
void split_channels(const Tensor<T>& y, int ca, Tensor<T>& a, Tensor<T>& b) {
  const int n = y.dim(0), c = y.dim(1), h = y.dim(2), w = y.dim(3);
  const int cb = c - ca, plane = h * w;
  a.resize({n, ca, h, w});
  b.resize({n, cb, h, w});
  for (int i = 0; i < n; ++i) {
    std::copy(&y.at(i, 0, 0, 0), &y.at(i, 0, 0, 0) + ca * plane, &a.at(i, 0, 0, 0));
    std::copy(&y.at(i, ca, 0, 0), &y.at(i, ca, 0, 0) + cb * plane, &b.at(i, 0, 0, 0));
  }
}

/// Stack two tensors along the batch (first) dimension.
template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != b.ndim()) throw std::invalid_argument("concat_batch: rank mismatch");
  for (int d = 1; d < a.ndim(); ++d)
    if (a.dim(d) != b.dim(d)) throw std::invalid_argument("concat_batch: trailing shape mismatch");
  std::vector<int> shape = a.shape();
  shape[0] += b.dim(0);
  Tensor<T> y(shape);
  std::copy(a.data(), a.data() + a.numel(), y.data());
  std::copy(b.data(), b.data() + b.numel(), y.data() + a.numel());
  return y;
}

/// Split along the batch dimension: first `na` rows into a, rest into b.
template <typename T>
void split_batch(const Tensor<T>& y, int na, Tensor<T>& a, Tensor<T>& b) {
  std::vector<int> sa = y.shape(), sb = y.shape();
  sa[0] = na;
  sb[0] = y.dim(0) - na;
  a.resize(sa);
  b.resize(sb);
  std::copy(y.data(), y.data() + a.numel(), a.data());
  std::copy(y.data() + a.numel(), y.data() + y.numel(), b.data());
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
  for (int i = 0; i < a.numel(); ++i) a[i] += b[i];
}

// ---------------------------------------------------------------------------
// Adam

/// Adam over a fixed parameter set. Moment buffers are addressed by parameter
/// name so optimizer state survives checkpoint round-trips.
template <typename T>
class Adam {
 public:
  struct Hyper {
    double lr = 4e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(std::vector<Param<T>*> params, Hyper hyper = {}) : params_(std::move(params)), hyper_(hyper) {
    for (Param<T>* p : params_) {
      m_.push_back(Tensor<T>::zeros(p->value.shape()));
      v_.push_back(Tensor<T>::zeros(p->value.shape()));
    }
  }

  const std::vector<Param<T>*>& params() const { return params_; }
  Hyper& hyper() { return hyper_; }
  std::int64_t steps() const { return t_; }

  void zero_grad() {
    for (Param<T>* p : params_) p->grad.zero();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(hyper_.beta1), b2 = static_cast<T>(hyper_.beta2);
    const T lr = static_cast<T>(hyper_.lr / bc1);
    const T vscale = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(hyper_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param<T>& p = *params_[k];
      Tensor<T>& m = m_[k];
      Tensor<T>& v = v_[k];
      for (int i = 0; i < p.value.numel(); ++i) {
        const T g = p.grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        p.value[i] -= lr * m[i] / (std::sqrt(v[i] * vscale) + eps);
      }
    }
  }

  /// Optimizer state as named tensors for checkpointing.
  void export_state(std::vector<std::pair<std::string, const Tensor<T>*>>& out) const {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      out.emplace_back("adam.m." + params_[k]->name, &m_[k]);
      out.emplace_back("adam.v." + params_[k]->name, &v_[k]);
    }
  }

  void import_state(const std::string& name, const Tensor<T>& t) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      if (name == "adam.m." + params_[k]->name) {
        m_[k] = t;
        return;
      }
      if (name == "adam.v." + params_[k]->name) {
        v_[k] = t;
        return;
      }
    }
    throw std::invalid_argument("Adam::import_state: unknown state tensor " + name);
  }

  void set_steps(std::int64_t t) { t_ = t; }

 private:
  std::vector<Param<T>*> params_;
  Hyper hyper_;
  std::vector<Tensor<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace cpgan
