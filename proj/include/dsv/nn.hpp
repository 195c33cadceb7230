// dsv/nn.hpp
//
// Minimal dense / LSTM / GRU layers with hand-written backward passes, plus
// the Adam optimizer. Everything is batch-first: activations are B x D
// matrices, sequences are vectors of per-step matrices. Backward passes
// accumulate into each parameter's grad buffer so a batch can be backed
// through several networks before one optimizer step.
//
// Copyright 2026  DSV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DSV_NN_HPP
#define DSV_NN_HPP

#include <cmath>
#include <string>
#include <vector>

#include "dsv/common.hpp"

namespace dsv {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param(std::string name_in, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name_in)),
        value(Matrix::Zero(rows, cols)),
        grad(Matrix::Zero(rows, cols)) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

namespace detail {

inline Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], fan_in = input rows
inline void init_uniform(Param& p, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      p.value(i, j) = rng.uniform(-bound, bound);
}

}  // namespace detail

// y = x * w + b
class DenseLayer {
 public:
  DenseLayer(const std::string& prefix, Eigen::Index in, Eigen::Index out)
      : w_(prefix + ".w", in, out), b_(prefix + ".b", 1, out) {}

  void init(Rng& rng) { detail::init_uniform(w_, rng); }

  Matrix forward(const Matrix& x) const {
    Matrix y = x * w_.value;
    y.rowwise() += b_.value.row(0);
    return y;
  }

  // caller keeps x from the forward pass
  Matrix backward(const Matrix& x, const Matrix& dy) {
    w_.grad.noalias() += x.transpose() * dy;
    b_.grad.row(0) += dy.colwise().sum();
    return dy * w_.value.transpose();
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&w_);
    out.push_back(&b_);
  }

  Eigen::Index in_dim() const { return w_.value.rows(); }
  Eigen::Index out_dim() const { return w_.value.cols(); }

 private:
  Param w_, b_;
};

struct LstmCache {
  std::vector<Matrix> x;           // L of B x I
  std::vector<Matrix> i, f, g, o;  // L of B x H
  std::vector<Matrix> c, h;        // L+1 of B x H; index 0 is the zero state
};

// Single-direction LSTM, gate order [input | forget | cell | output].
class LstmLayer {
 public:
  LstmLayer(const std::string& prefix, Eigen::Index in, Eigen::Index hidden)
      : hidden_(hidden),
        wx_(prefix + ".wx", in, 4 * hidden),
        wh_(prefix + ".wh", hidden, 4 * hidden),
        b_(prefix + ".b", 1, 4 * hidden) {}

  void init(Rng& rng) {
    detail::init_uniform(wx_, rng);
    detail::init_uniform(wh_, rng);
  }

  // Returns hidden states h_1..h_L; fills the cache for backward.
  std::vector<Matrix> forward(const std::vector<Matrix>& xs,
                              LstmCache* cache) const {
    require(!xs.empty(), "lstm: empty input sequence");
    const Eigen::Index batch = xs.front().rows();
    const Eigen::Index steps = static_cast<Eigen::Index>(xs.size());
    Matrix h = Matrix::Zero(batch, hidden_);
    Matrix c = Matrix::Zero(batch, hidden_);
    if (cache) {
      cache->x = xs;
      cache->i.resize(steps);
      cache->f.resize(steps);
      cache->g.resize(steps);
      cache->o.resize(steps);
      cache->c.assign(1, c);
      cache->h.assign(1, h);
    }
    std::vector<Matrix> hs;
    hs.reserve(steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
      require(xs[t].rows() == batch && xs[t].cols() == wx_.value.rows(),
              "lstm: input shape mismatch at step " + std::to_string(t));
      Matrix a = xs[t] * wx_.value;
      a.noalias() += h * wh_.value;
      a.rowwise() += b_.value.row(0);
      Matrix i = detail::sigmoid(a.leftCols(hidden_));
      Matrix f = detail::sigmoid(a.middleCols(hidden_, hidden_));
      Matrix g = a.middleCols(2 * hidden_, hidden_).array().tanh().matrix();
      Matrix o = detail::sigmoid(a.rightCols(hidden_));
      c = (f.array() * c.array() + i.array() * g.array()).matrix();
      h = (o.array() * c.array().tanh()).matrix();
      if (cache) {
        cache->i[t] = i;
        cache->f[t] = f;
        cache->g[t] = g;
        cache->o[t] = o;
        cache->c.push_back(c);
        cache->h.push_back(h);
      }
      hs.push_back(h);
    }
    return hs;
  }

  // dhs[t] is the external gradient w.r.t. h_{t+1}; returns gradients w.r.t.
  // the inputs and accumulates parameter gradients.
  std::vector<Matrix> backward(const LstmCache& cache,
                               const std::vector<Matrix>& dhs) {
    const auto steps = static_cast<Eigen::Index>(cache.x.size());
    require(static_cast<Eigen::Index>(dhs.size()) == steps,
            "lstm backward: gradient count mismatch");
    const Eigen::Index batch = cache.x.front().rows();
    Matrix dh_carry = Matrix::Zero(batch, hidden_);
    Matrix dc_carry = Matrix::Zero(batch, hidden_);
    std::vector<Matrix> dxs(steps);
    Matrix da(batch, 4 * hidden_);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const Matrix& i = cache.i[t];
      const Matrix& f = cache.f[t];
      const Matrix& g = cache.g[t];
      const Matrix& o = cache.o[t];
      const Matrix& c_prev = cache.c[t];
      Matrix tc = cache.c[t + 1].array().tanh().matrix();
      Matrix dh = dhs[t] + dh_carry;
      Matrix dc = dc_carry.array() +
                  dh.array() * o.array() * (1.0 - tc.array().square());
      da.leftCols(hidden_) =
          (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
      da.middleCols(hidden_, hidden_) =
          (dc.array() * c_prev.array() * f.array() * (1.0 - f.array()))
              .matrix();
      da.middleCols(2 * hidden_, hidden_) =
          (dc.array() * i.array() * (1.0 - g.array().square())).matrix();
      da.rightCols(hidden_) =
          (dh.array() * tc.array() * o.array() * (1.0 - o.array())).matrix();
      wx_.grad.noalias() += cache.x[t].transpose() * da;
      wh_.grad.noalias() += cache.h[t].transpose() * da;
      b_.grad.row(0) += da.colwise().sum();
      dxs[t] = da * wx_.value.transpose();
      dh_carry.noalias() = da * wh_.value.transpose();
      dc_carry = (dc.array() * f.array()).matrix();
    }
    return dxs;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&wx_);
    out.push_back(&wh_);
    out.push_back(&b_);
  }

  Eigen::Index hidden_dim() const { return hidden_; }
  Eigen::Index in_dim() const { return wx_.value.rows(); }

 private:
  Eigen::Index hidden_;
  Param wx_, wh_, b_;
};

struct GruCache {
  std::vector<Matrix> x, h_prev, r, z, n, ah_n;  // L entries each
};

// Single-direction GRU, gate order [reset | update | candidate]; the hidden
// bias enters the candidate through the reset gate, so it matters even when
// the previous state is zero.
class GruLayer {
 public:
  GruLayer(const std::string& prefix, Eigen::Index in, Eigen::Index hidden)
      : hidden_(hidden),
        wx_(prefix + ".wx", in, 3 * hidden),
        wh_(prefix + ".wh", hidden, 3 * hidden),
        bx_(prefix + ".bx", 1, 3 * hidden),
        bh_(prefix + ".bh", 1, 3 * hidden) {}

  void init(Rng& rng) {
    detail::init_uniform(wx_, rng);
    detail::init_uniform(wh_, rng);
  }

  std::vector<Matrix> forward(const std::vector<Matrix>& xs,
                              GruCache* cache) const {
    require(!xs.empty(), "gru: empty input sequence");
    const Eigen::Index batch = xs.front().rows();
    const auto steps = static_cast<Eigen::Index>(xs.size());
    Matrix h = Matrix::Zero(batch, hidden_);
    if (cache) {
      cache->x = xs;
      cache->h_prev.resize(steps);
      cache->r.resize(steps);
      cache->z.resize(steps);
      cache->n.resize(steps);
      cache->ah_n.resize(steps);
    }
    std::vector<Matrix> hs;
    hs.reserve(steps);
    for (Eigen::Index t = 0; t < steps; ++t) {
      Matrix ax = xs[t] * wx_.value;
      ax.rowwise() += bx_.value.row(0);
      Matrix ah = h * wh_.value;
      ah.rowwise() += bh_.value.row(0);
      Matrix r = detail::sigmoid(ax.leftCols(hidden_) + ah.leftCols(hidden_));
      Matrix z = detail::sigmoid(ax.middleCols(hidden_, hidden_) +
                                 ah.middleCols(hidden_, hidden_));
      Matrix ah_n = ah.rightCols(hidden_);
      Matrix n = (ax.rightCols(hidden_).array() + r.array() * ah_n.array())
                     .tanh()
                     .matrix();
      Matrix h_new =
          ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
      if (cache) {
        cache->h_prev[t] = h;
        cache->r[t] = r;
        cache->z[t] = z;
        cache->n[t] = n;
        cache->ah_n[t] = ah_n;
      }
      h = std::move(h_new);
      hs.push_back(h);
    }
    return hs;
  }

  std::vector<Matrix> backward(const GruCache& cache,
                               const std::vector<Matrix>& dhs) {
    const auto steps = static_cast<Eigen::Index>(cache.x.size());
    require(static_cast<Eigen::Index>(dhs.size()) == steps,
            "gru backward: gradient count mismatch");
    const Eigen::Index batch = cache.x.front().rows();
    Matrix dh_carry = Matrix::Zero(batch, hidden_);
    std::vector<Matrix> dxs(steps);
    Matrix dax(batch, 3 * hidden_), dah(batch, 3 * hidden_);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const Matrix& r = cache.r[t];
      const Matrix& z = cache.z[t];
      const Matrix& n = cache.n[t];
      const Matrix& h_prev = cache.h_prev[t];
      Matrix dh = dhs[t] + dh_carry;
      Matrix da_z = (dh.array() * (h_prev.array() - n.array()) * z.array() *
                     (1.0 - z.array()))
                        .matrix();
      Matrix dn_pre =
          (dh.array() * (1.0 - z.array()) * (1.0 - n.array().square()))
              .matrix();
      Matrix dah_n = (dn_pre.array() * r.array()).matrix();
      Matrix da_r = (dn_pre.array() * cache.ah_n[t].array() * r.array() *
                     (1.0 - r.array()))
                        .matrix();
      dax.leftCols(hidden_) = da_r;
      dax.middleCols(hidden_, hidden_) = da_z;
      dax.rightCols(hidden_) = dn_pre;
      dah.leftCols(hidden_) = da_r;
      dah.middleCols(hidden_, hidden_) = da_z;
      dah.rightCols(hidden_) = dah_n;
      wx_.grad.noalias() += cache.x[t].transpose() * dax;
      wh_.grad.noalias() += h_prev.transpose() * dah;
      bx_.grad.row(0) += dax.colwise().sum();
      bh_.grad.row(0) += dah.colwise().sum();
      dxs[t] = dax * wx_.value.transpose();
      dh_carry = dah * wh_.value.transpose() +
                 (dh.array() * z.array()).matrix();
    }
    return dxs;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&wx_);
    out.push_back(&wh_);
    out.push_back(&bx_);
    out.push_back(&bh_);
  }

  Eigen::Index hidden_dim() const { return hidden_; }

 private:
  Eigen::Index hidden_;
  Param wx_, wh_, bx_, bh_;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate = 1e-3, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void attach(const std::vector<Param*>& params) {
    m_.clear();
    v_.clear();
    for (const Param* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
    step_count_ = 0;
  }

  void step(const std::vector<Param*>& params) {
    require(params.size() == m_.size(), "adam: not attached to these params");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Param& p = *params[k];
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * p.grad;
      v_[k] = (beta2_ * v_[k].array() +
               (1.0 - beta2_) * p.grad.array().square())
                  .matrix();
      p.value.array() -= lr_ * (m_[k].array() / bc1) /
                         ((v_[k].array() / bc2).sqrt() + eps_);
    }
  }

  long step_count() const { return step_count_; }
  double learning_rate() const { return lr_; }

  // serialization access for checkpoint resume
  std::vector<Matrix>& moments_m() { return m_; }
  std::vector<Matrix>& moments_v() { return v_; }
  const std::vector<Matrix>& moments_m() const { return m_; }
  const std::vector<Matrix>& moments_v() const { return v_; }
  void set_step_count(long n) { step_count_ = n; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  std::vector<Matrix> m_, v_;
};

inline void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

inline long parameter_count(const std::vector<Param*>& params) {
  long n = 0;
  for (const Param* p : params) n += p->size();
  return n;
}

}  // namespace dsv

#endif  // DSV_NN_HPP
