// tests/test_gaussian.cpp
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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dsv/gaussian.hpp"
#include "test_util.hpp"

using namespace dsv;
using dsv_test::central_difference;
using dsv_test::relative_error;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Monte-Carlo estimate of KL(q || p) = E_q[log q - log p].
double kl_monte_carlo(const DiagGaussian& q, const DiagGaussian& p,
                      long samples, std::uint64_t seed) {
  Rng rng(seed);
  double acc = 0.0;
  for (long s = 0; s < samples; ++s) {
    Vector x = reparam_sample(q, rng.normal_vector(q.dim()));
    acc += gaussian_log_prob(x, q) - gaussian_log_prob(x, p);
  }
  return acc / static_cast<double>(samples);
}

}  // namespace

TEST_CASE("kl is zero for identical parameters", "[gaussian]") {
  DiagGaussian g(vec({0.3, -1.2}), vec({0.1, 0.5}));
  REQUIRE(kl_diag_gaussians(g, g) == 0.0);
}

TEST_CASE("kl matches the monte-carlo oracle", "[gaussian]") {
  DiagGaussian q1(vec({1.0}), vec({0.0}));
  DiagGaussian p1(vec({0.0}), vec({0.0}));
  REQUIRE(kl_diag_gaussians(q1, p1) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(relative_error(kl_monte_carlo(q1, p1, 1000000, 7), 0.5, 1e-2) <
          1.0);
  REQUIRE(std::abs(kl_monte_carlo(q1, p1, 1000000, 7) - 0.5) < 1e-2);

  DiagGaussian q2(vec({0.0}), vec({0.0}));
  DiagGaussian p2(vec({0.0}), vec({std::log(4.0)}));
  const double expected = 0.5 * (std::log(4.0) + 0.25 - 1.0);
  REQUIRE(kl_diag_gaussians(q2, p2) ==
          Catch::Approx(expected).margin(1e-12));
  REQUIRE(expected == Catch::Approx(0.3181).margin(5e-4));
  REQUIRE(std::abs(kl_monte_carlo(q2, p2, 1000000, 11) - expected) < 1e-2);
}

TEST_CASE("kl rejects bad inputs", "[gaussian]") {
  DiagGaussian a(vec({0.0, 1.0}), vec({0.0, 0.0}));
  DiagGaussian b(vec({0.0}), vec({0.0}));
  REQUIRE_THROWS_AS(kl_diag_gaussians(a, b), ContractViolation);
  DiagGaussian bad(vec({std::nan(""), 0.0}), vec({0.0, 0.0}));
  REQUIRE_THROWS_AS(kl_diag_gaussians(bad, a), ContractViolation);
}

TEST_CASE("kl nonnegativity and identity of indiscernibles", "[gaussian]") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.integer(6));
    DiagGaussian q(rng.normal_vector(d), rng.normal_vector(d));
    DiagGaussian p(rng.normal_vector(d), rng.normal_vector(d));
    const double kl = kl_diag_gaussians(q, p);
    REQUIRE(kl >= 0.0);
    if (kl == 0.0) {
      REQUIRE(q.mean == p.mean);
      REQUIRE(q.logvar == p.logvar);
    }
  }
}

TEST_CASE("kl is additive across dimensions", "[gaussian]") {
  Rng rng(5);
  const Eigen::Index d = 6;
  DiagGaussian q(rng.normal_vector(d), rng.normal_vector(d));
  DiagGaussian p(rng.normal_vector(d), rng.normal_vector(d));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    DiagGaussian qj(q.mean.segment(j, 1), q.logvar.segment(j, 1));
    DiagGaussian pj(p.mean.segment(j, 1), p.logvar.segment(j, 1));
    sum += kl_diag_gaussians(qj, pj);
  }
  REQUIRE(kl_diag_gaussians(q, p) == Catch::Approx(sum).epsilon(1e-12));
}

TEST_CASE("log prob at the mean with unit variance", "[gaussian]") {
  DiagGaussian g(vec({0.7, -0.4}), vec({0.0, 0.0}));
  REQUIRE(gaussian_log_prob(g.mean, g) ==
          Catch::Approx(-kLog2Pi).margin(1e-12));
  REQUIRE(-kLog2Pi == Catch::Approx(-1.8379).margin(5e-5));
}

TEST_CASE("log prob matches direct density evaluation and normalizes",
          "[gaussian]") {
  DiagGaussian g(vec({0.0}), vec({0.0}));
  // density at x=1 computed from first principles
  const double direct = std::log(std::exp(-0.5) / std::sqrt(2.0 * M_PI));
  REQUIRE(gaussian_log_prob(vec({1.0}), g) ==
          Catch::Approx(direct).margin(1e-12));
  REQUIRE(direct == Catch::Approx(-1.4189).margin(5e-5));
  // exp(log_prob) integrates to 1 on a wide grid
  const double h = 1e-3;
  double integral = 0.0;
  for (double x = -10.0; x < 10.0; x += h)
    integral += std::exp(gaussian_log_prob(vec({x + h / 2}), g)) * h;
  REQUIRE(integral == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("log prob rejects empty input", "[gaussian]") {
  DiagGaussian g;
  g.mean = Vector(0);
  g.logvar = Vector(0);
  REQUIRE_THROWS_AS(gaussian_log_prob(Vector(0), g), ContractViolation);
}

TEST_CASE("reparameterized sampling base cases", "[gaussian]") {
  DiagGaussian g(vec({0.5, -2.0}), vec({0.3, -0.7}));
  REQUIRE(reparam_sample(g, vec({0.0, 0.0})) == g.mean);
  DiagGaussian unit(vec({0.5, -2.0}), vec({0.0, 0.0}));
  Vector s = reparam_sample(unit, vec({1.0, 1.0}));
  REQUIRE(s(0) == Catch::Approx(1.5).margin(1e-15));
  REQUIRE(s(1) == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("reparameterization gradient w.r.t. logvar at unit noise",
          "[gaussian]") {
  // d sample / d logvar = 0.5 exp(logvar/2) * noise = 0.5 at logvar=0, noise=1
  DiagGaussian g(vec({0.2}), vec({0.0}));
  Vector noise = vec({1.0});
  auto fd = central_difference(g.logvar(0), 1e-6, [&] {
    return reparam_sample(g, noise)(0);
  });
  REQUIRE(fd == Catch::Approx(0.5).margin(1e-6));
  ReparamGradients an = reparam_sample_grad(g, noise, vec({1.0}));
  REQUIRE(an.logvar(0) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(an.mean(0) == 1.0);
}

TEST_CASE("reparameterized samples match the target moments", "[gaussian]") {
  DiagGaussian g(vec({0.8, -1.5, 2.0}), vec({0.4, -0.9, 0.0}));
  Rng rng(99);
  const long n = 100000;
  Vector sum = Vector::Zero(3), sumsq = Vector::Zero(3);
  for (long i = 0; i < n; ++i) {
    Vector s = reparam_sample(g, rng.normal_vector(3));
    sum += s;
    sumsq += s.cwiseProduct(s);
  }
  Vector mean = sum / n;
  Vector var = sumsq / n - mean.cwiseProduct(mean);
  for (int j = 0; j < 3; ++j) {
    const double sigma2 = std::exp(g.logvar(j));
    const double se_mean = std::sqrt(sigma2 / n);
    const double se_var = sigma2 * std::sqrt(2.0 / n);
    REQUIRE(std::abs(mean(j) - g.mean(j)) < 3.0 * se_mean);
    REQUIRE(std::abs(var(j) - sigma2) < 3.0 * se_var);
  }
}

TEST_CASE("s-vector log prior values", "[gaussian]") {
  REQUIRE(log_prior_mu2(Vector::Zero(32)) ==
          Catch::Approx(-16.0 * kLog2Pi).margin(1e-12));
  REQUIRE(-16.0 * kLog2Pi == Catch::Approx(-29.4062).margin(5e-5));
  Vector e1 = Vector::Zero(32);
  e1(0) = 1.0;
  REQUIRE(log_prior_mu2(e1) ==
          Catch::Approx(-16.0 * kLog2Pi - 0.5).margin(1e-12));
}

TEST_CASE("s-vector log prior equals the standard-normal log prob",
          "[gaussian]") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.integer(40));
    Vector v = rng.normal_vector(d);
    REQUIRE(log_prior_mu2(v) ==
            Catch::Approx(gaussian_log_prob(v, DiagGaussian::standard(d)))
                .epsilon(1e-13));
  }
}

TEST_CASE("analytic gradients match central differences", "[gaussian]") {
  Rng rng(31337);
  const Eigen::Index d = 5;
  const double h = 1e-6;

  DiagGaussian q(rng.normal_vector(d), rng.normal_vector(d));
  DiagGaussian p(rng.normal_vector(d), rng.normal_vector(d));
  KlGradients kg = kl_diag_gaussians_grad(q, p);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto eval = [&] { return kl_diag_gaussians(q, p); };
    REQUIRE(relative_error(central_difference(q.mean(j), h, eval),
                           kg.q_mean(j)) < 1e-4);
    REQUIRE(relative_error(central_difference(q.logvar(j), h, eval),
                           kg.q_logvar(j)) < 1e-4);
    REQUIRE(relative_error(central_difference(p.mean(j), h, eval),
                           kg.p_mean(j)) < 1e-4);
    REQUIRE(relative_error(central_difference(p.logvar(j), h, eval),
                           kg.p_logvar(j)) < 1e-4);
  }

  Vector x = rng.normal_vector(d);
  LogProbGradients lg = gaussian_log_prob_grad(x, q);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto eval = [&] { return gaussian_log_prob(x, q); };
    REQUIRE(relative_error(central_difference(x(j), h, eval), lg.x(j)) < 1e-4);
    REQUIRE(relative_error(central_difference(q.mean(j), h, eval),
                           lg.mean(j)) < 1e-4);
    REQUIRE(relative_error(central_difference(q.logvar(j), h, eval),
                           lg.logvar(j)) < 1e-4);
  }

  Vector noise = rng.normal_vector(d);
  Vector upstream = rng.normal_vector(d);
  ReparamGradients rg = reparam_sample_grad(q, noise, upstream);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto eval = [&] { return upstream.dot(reparam_sample(q, noise)); };
    REQUIRE(relative_error(central_difference(q.mean(j), h, eval),
                           rg.mean(j)) < 1e-4);
    REQUIRE(relative_error(central_difference(q.logvar(j), h, eval),
                           rg.logvar(j)) < 1e-4);
  }

  Vector v = rng.normal_vector(d);
  Vector pg = log_prior_mu2_grad(v);
  for (Eigen::Index j = 0; j < d; ++j) {
    auto eval = [&] { return log_prior_mu2(v); };
    REQUIRE(relative_error(central_difference(v(j), h, eval), pg(j)) < 1e-4);
  }
}
