// dsv/loss.hpp
//
// Per-segment training objectives. The baseline objective scores the
// reconstruction with a Gaussian log-likelihood; the apc objectives score
// reconstruction and future-frame prediction with squared error. Both share
// the KL terms, the per-sequence prior term (weighted 1/N over the
// sequence's segments), and an optional discriminative segment-to-sequence
// term. All breakdown fields are stored as the signed contribution to the
// minimized total, so total == sum of components always.
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

#ifndef DSV_LOSS_HPP
#define DSV_LOSS_HPP

#include <json.hpp>

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/gaussian.hpp"
#include "dsv/model.hpp"
#include "dsv/nn.hpp"

namespace dsv {

struct LossBreakdown {
  double total = 0;
  double recon = 0;
  double prediction = 0;
  double kl_z1 = 0;
  double kl_z2 = 0;
  double mu2_prior = 0;
  double discriminative = 0;

  double component_sum() const {
    return recon + prediction + kl_z1 + kl_z2 + mu2_prior + discriminative;
  }

  LossBreakdown& operator+=(const LossBreakdown& o) {
    total += o.total;
    recon += o.recon;
    prediction += o.prediction;
    kl_z1 += o.kl_z1;
    kl_z2 += o.kl_z2;
    mu2_prior += o.mu2_prior;
    discriminative += o.discriminative;
    return *this;
  }

  LossBreakdown& operator*=(double s) {
    total *= s;
    recon *= s;
    prediction *= s;
    kl_z1 *= s;
    kl_z2 *= s;
    mu2_prior *= s;
    discriminative *= s;
    return *this;
  }
};

// The decomposition contract is kept on at all times.
inline void check_breakdown(const LossBreakdown& b) {
  const double sum = b.component_sum();
  const double scale = std::max({1.0, std::abs(b.total), std::abs(sum)});
  require(std::abs(b.total - sum) <= 1e-6 * scale,
          "loss breakdown: total does not match component sum");
}

inline nlohmann::json breakdown_to_json(const LossBreakdown& b) {
  return {{"total", b.total},           {"recon", b.recon},
          {"prediction", b.prediction}, {"kl_z1", b.kl_z1},
          {"kl_z2", b.kl_z2},           {"mu2_prior", b.mu2_prior},
          {"discriminative", b.discriminative}};
}

// Trainable per-sequence prior means, one row per training sequence, plus
// each sequence's segment count.
class SVectorTable {
 public:
  SVectorTable(const std::vector<std::pair<std::string, int>>& sequences,
               int latent_dim)
      : vectors_("svectors", static_cast<Eigen::Index>(sequences.size()),
                 latent_dim) {
    require(!sequences.empty(), "svector table: no sequences");
    for (const auto& [id, count] : sequences) {
      require(count >= 1,
              "svector table: sequence '" + id + "' has no segments");
      if (!index_.emplace(id, static_cast<int>(ids_.size())).second)
        throw ContractViolation("svector table: duplicate sequence '" + id +
                                "'");
      ids_.push_back(id);
      counts_.push_back(count);
    }
  }

  int size() const { return static_cast<int>(ids_.size()); }
  int dim() const { return static_cast<int>(vectors_.value.cols()); }

  int row_of(const std::string& sequence_id) const {
    auto it = index_.find(sequence_id);
    if (it == index_.end())
      throw LookupError("svector table: unknown sequence '" + sequence_id +
                        "'");
    return it->second;
  }

  bool contains(const std::string& sequence_id) const {
    return index_.count(sequence_id) != 0;
  }

  Vector svector(int row) const { return vectors_.value.row(row).transpose(); }
  Vector svector(const std::string& id) const { return svector(row_of(id)); }
  int segment_count(int row) const { return counts_[row]; }
  int segment_count(const std::string& id) const {
    return counts_[row_of(id)];
  }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<int>& counts() const { return counts_; }

  Param& param() { return vectors_; }
  const Param& param() const { return vectors_; }

 private:
  std::vector<std::string> ids_;
  std::vector<int> counts_;
  std::map<std::string, int> index_;
  Param vectors_;  // n x latent_dim, zero-initialized
};

namespace detail {

inline void check_loss_inputs(const LatentOutputs& out, const Segment& seg,
                              const Vector& svector, int n_segments,
                              const ModelConfig& config, const char* who) {
  require(n_segments >= 1, std::string(who) + ": n_segments must be >= 1");
  require(svector.size() == config.latent_dim_z2,
          std::string(who) + ": svector dimension mismatch");
  require(seg.frames.rows() == config.segment_len &&
              seg.frames.cols() == config.feature_dim,
          std::string(who) + ": segment shape mismatch");
  require(out.recon.rows() == config.segment_len &&
              out.recon.cols() == config.feature_dim,
          std::string(who) + ": reconstruction shape mismatch");
}

inline DiagGaussian z2_prior(const Vector& svector, const ModelConfig& c) {
  return DiagGaussian(
      svector, Vector::Constant(c.latent_dim_z2, std::log(c.sigma2_z2)));
}

}  // namespace detail

// Baseline objective: negative Gaussian log-likelihood of the segment plus
// both KL terms plus the per-sequence prior term.
inline LossBreakdown fhvae_loss(const LatentOutputs& out, const Segment& seg,
                                const Vector& svector, int n_segments,
                                const ModelConfig& config) {
  if (config.variant != Variant::kFhvae)
    throw VariantError("fhvae_loss: config variant is " +
                       variant_name(config.variant));
  if (out.prediction.size() != 0)
    throw VariantError("fhvae_loss: prediction output present");
  detail::check_loss_inputs(out, seg, svector, n_segments, config,
                            "fhvae_loss");
  require(out.recon_logvar.rows() == config.segment_len &&
              out.recon_logvar.cols() == config.feature_dim,
          "fhvae_loss: reconstruction log-variance missing");
  const Matrix x = seg.frames.cast<double>();
  const auto diff = (x - out.recon).array();
  const auto lv = out.recon_logvar.array();
  const double nll =
      0.5 * (kLog2Pi + lv + diff.square() * (-lv).exp()).sum();

  LossBreakdown b;
  b.recon = nll;
  b.kl_z1 = kl_diag_gaussians(out.q_z1,
                              DiagGaussian::standard(config.latent_dim_z1));
  b.kl_z2 = kl_diag_gaussians(out.q_z2, detail::z2_prior(svector, config));
  b.mu2_prior = -log_prior_mu2(svector) / n_segments;
  b.total = b.component_sum();
  check_breakdown(b);
  return b;
}

// apc objective: squared-error reconstruction and future-frame prediction
// (summed over all L*F entries), plus the same KL and prior terms. Segments
// at the sequence tail have no future window; their prediction term is 0.
inline LossBreakdown fhvae_apc_loss(const LatentOutputs& out,
                                    const Segment& seg, const Vector& svector,
                                    int n_segments,
                                    const ModelConfig& config) {
  if (config.variant == Variant::kFhvae)
    throw VariantError("fhvae_apc_loss: config variant is fhvae");
  if (out.prediction.size() == 0)
    throw VariantError("fhvae_apc_loss: prediction output missing");
  detail::check_loss_inputs(out, seg, svector, n_segments, config,
                            "fhvae_apc_loss");
  const Matrix x = seg.frames.cast<double>();
  LossBreakdown b;
  b.recon = (x - out.recon).array().square().sum();
  if (seg.has_target) {
    const Matrix target = seg.future_frames.cast<double>();
    b.prediction = (target - out.prediction).array().square().sum();
  }
  b.kl_z1 = kl_diag_gaussians(out.q_z1,
                              DiagGaussian::standard(config.latent_dim_z1));
  b.kl_z2 = kl_diag_gaussians(out.q_z2, detail::z2_prior(svector, config));
  b.mu2_prior = -log_prior_mu2(svector) / n_segments;
  b.total = b.component_sum();
  check_breakdown(b);
  return b;
}

inline LossBreakdown segment_loss(const LatentOutputs& out, const Segment& seg,
                                  const Vector& svector, int n_segments,
                                  const ModelConfig& config) {
  return config.variant == Variant::kFhvae
             ? fhvae_loss(out, seg, svector, n_segments, config)
             : fhvae_apc_loss(out, seg, svector, n_segments, config);
}

// -log softmax over table entries of -||mean - s_j||^2 / (2 sigma2),
// evaluated at the segment's own sequence. Unscaled; the caller applies
// alpha_dis.
inline double discriminative_loss(const DiagGaussian& q_z2,
                                  const std::string& sequence_id,
                                  const SVectorTable& table,
                                  const ModelConfig& config) {
  require(q_z2.dim() == config.latent_dim_z2,
          "discriminative_loss: dimension mismatch");
  const int own = table.row_of(sequence_id);
  const Matrix& s = table.param().value;
  Vector logits(table.size());
  for (int j = 0; j < table.size(); ++j) {
    const double d2 = (q_z2.mean.transpose() - s.row(j)).squaredNorm();
    logits(j) = -d2 / (2.0 * config.sigma2_z2);
  }
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(own);
}

}  // namespace dsv

#endif  // DSV_LOSS_HPP
