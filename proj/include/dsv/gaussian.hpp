// dsv/gaussian.hpp
//
// Diagonal-Gaussian primitives: log-density, KL divergence, reparameterized
// sampling, and the standard-normal log-prior used for s-vectors. All math is
// in natural log and double precision; distributions are parameterized by
// (mean, logvar) so that variance = exp(logvar) stays positive without
// constraints.
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

#ifndef DSV_GAUSSIAN_HPP
#define DSV_GAUSSIAN_HPP

#include <cmath>
#include <string>

#include "dsv/common.hpp"

namespace dsv {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

struct DiagGaussian {
  Vector mean;
  Vector logvar;

  DiagGaussian() = default;
  DiagGaussian(Vector mean_in, Vector logvar_in)
      : mean(std::move(mean_in)), logvar(std::move(logvar_in)) {}

  Eigen::Index dim() const { return mean.size(); }

  static DiagGaussian standard(Eigen::Index d) {
    return DiagGaussian(Vector::Zero(d), Vector::Zero(d));
  }
};

namespace detail {

inline void check_gaussian(const DiagGaussian& g, const char* who) {
  require(g.mean.size() >= 1, std::string(who) + ": empty distribution");
  require(g.mean.size() == g.logvar.size(),
          std::string(who) + ": mean/logvar dimension mismatch");
  require(g.mean.allFinite() && g.logvar.allFinite(),
          std::string(who) + ": non-finite parameters");
}

}  // namespace detail

// KL(q || p) = sum_j 1/2 [ exp(lq-lp) + (mq-mp)^2/exp(lp) - 1 + lp - lq ].
inline double kl_diag_gaussians(const DiagGaussian& q, const DiagGaussian& p) {
  detail::check_gaussian(q, "kl_diag_gaussians");
  detail::check_gaussian(p, "kl_diag_gaussians");
  require(q.dim() == p.dim(), "kl_diag_gaussians: dimension mismatch");
  const auto dl = (q.logvar - p.logvar).array();
  const auto dm = (q.mean - p.mean).array();
  return 0.5 * (dl.exp() + dm.square() * (-p.logvar).array().exp() - 1.0 - dl)
                   .sum();
}

struct KlGradients {
  Vector q_mean, q_logvar, p_mean, p_logvar;
};

inline KlGradients kl_diag_gaussians_grad(const DiagGaussian& q,
                                          const DiagGaussian& p) {
  detail::check_gaussian(q, "kl_diag_gaussians_grad");
  detail::check_gaussian(p, "kl_diag_gaussians_grad");
  require(q.dim() == p.dim(), "kl_diag_gaussians_grad: dimension mismatch");
  KlGradients g;
  const auto dm = (q.mean - p.mean).array();
  const auto inv_vp = (-p.logvar).array().exp();
  g.q_mean = (dm * inv_vp).matrix();
  g.p_mean = -g.q_mean;
  g.q_logvar = 0.5 * ((q.logvar - p.logvar).array().exp() - 1.0).matrix();
  g.p_logvar =
      0.5 * (1.0 - (q.logvar - p.logvar).array().exp() - dm.square() * inv_vp)
                .matrix();
  return g;
}

// log N(x; mean, exp(logvar)) summed over dimensions.
inline double gaussian_log_prob(const Vector& x, const DiagGaussian& g) {
  detail::check_gaussian(g, "gaussian_log_prob");
  require(x.size() == g.dim(), "gaussian_log_prob: dimension mismatch");
  require(x.allFinite(), "gaussian_log_prob: non-finite input");
  const auto dm = (x - g.mean).array();
  return -0.5 * (kLog2Pi + g.logvar.array() +
                 dm.square() * (-g.logvar).array().exp())
                    .sum();
}

struct LogProbGradients {
  Vector x, mean, logvar;
};

inline LogProbGradients gaussian_log_prob_grad(const Vector& x,
                                               const DiagGaussian& g) {
  detail::check_gaussian(g, "gaussian_log_prob_grad");
  require(x.size() == g.dim(), "gaussian_log_prob_grad: dimension mismatch");
  LogProbGradients out;
  const auto dm = (x - g.mean).array();
  const auto inv_v = (-g.logvar).array().exp();
  out.x = -(dm * inv_v).matrix();
  out.mean = (dm * inv_v).matrix();
  out.logvar = (-0.5 * (1.0 - dm.square() * inv_v)).matrix();
  return out;
}

// mean + exp(logvar/2) .* noise
inline Vector reparam_sample(const DiagGaussian& g, const Vector& noise) {
  detail::check_gaussian(g, "reparam_sample");
  require(noise.size() == g.dim(), "reparam_sample: noise dimension mismatch");
  return g.mean.array() + (0.5 * g.logvar.array()).exp() * noise.array();
}

struct ReparamGradients {
  Vector mean, logvar;  // of sum(upstream .* sample) w.r.t. parameters
};

inline ReparamGradients reparam_sample_grad(const DiagGaussian& g,
                                            const Vector& noise,
                                            const Vector& upstream) {
  detail::check_gaussian(g, "reparam_sample_grad");
  require(noise.size() == g.dim() && upstream.size() == g.dim(),
          "reparam_sample_grad: dimension mismatch");
  ReparamGradients out;
  out.mean = upstream;
  out.logvar = (0.5 * (0.5 * g.logvar.array()).exp() * noise.array() *
                upstream.array())
                   .matrix();
  return out;
}

// log N(mu2; 0, I); the s-vector hyperprior.
inline double log_prior_mu2(const Vector& mu2) {
  require(mu2.size() >= 1, "log_prior_mu2: empty vector");
  require(mu2.allFinite(), "log_prior_mu2: non-finite input");
  return -0.5 * (kLog2Pi * static_cast<double>(mu2.size()) +
                 mu2.array().square().sum());
}

inline Vector log_prior_mu2_grad(const Vector& mu2) {
  require(mu2.size() >= 1 && mu2.allFinite(), "log_prior_mu2_grad: bad input");
  return -mu2;
}

}  // namespace dsv

#endif  // DSV_GAUSSIAN_HPP
