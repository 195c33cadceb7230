// dsv/model.hpp
//
// The hierarchical sequence VAE: a z2 encoder over the segment frames, a z1
// encoder conditioned on the sampled z2, a reconstruction decoder, and (for
// the apc-* variants) a parallel prediction decoder with its own weights.
// Variants differ only in layer counts:
//
//   variant        z1-encoder LSTMs   prediction-decoder LSTMs
//   fhvae                 1                  - (absent)
//   apc-enc1-dec1         1                  1
//   apc-enc2-dec1         2                  1
//   apc-enc2-dec2         2                  2
//
// The reconstruction decoder of the fhvae variant emits per-frame mean and
// log-variance for a Gaussian likelihood; the apc variants emit a point
// estimate scored by squared error.
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

#ifndef DSV_MODEL_HPP
#define DSV_MODEL_HPP

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/features.hpp"
#include "dsv/gaussian.hpp"
#include "dsv/nn.hpp"

namespace dsv {

enum class Variant { kFhvae, kApcEnc1Dec1, kApcEnc2Dec1, kApcEnc2Dec2 };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFhvae: return "fhvae";
    case Variant::kApcEnc1Dec1: return "apc-enc1-dec1";
    case Variant::kApcEnc2Dec1: return "apc-enc2-dec1";
    case Variant::kApcEnc2Dec2: return "apc-enc2-dec2";
  }
  throw ContractViolation("variant_name: bad enum value");
}

inline Variant variant_from_name(const std::string& name) {
  if (name == "fhvae") return Variant::kFhvae;
  if (name == "apc-enc1-dec1") return Variant::kApcEnc1Dec1;
  if (name == "apc-enc2-dec1") return Variant::kApcEnc2Dec1;
  if (name == "apc-enc2-dec2") return Variant::kApcEnc2Dec2;
  throw ConfigError("unknown variant '" + name +
                    "'; expected one of fhvae, apc-enc1-dec1, apc-enc2-dec1, "
                    "apc-enc2-dec2");
}

struct ModelConfig {
  Variant variant = Variant::kApcEnc1Dec1;
  int feature_dim = 200;
  int segment_len = 20;
  int latent_dim_z1 = 32;
  int latent_dim_z2 = 32;
  int hidden_units = 256;
  int prediction_shift = 3;   // m, in frames
  double sigma2_z2 = 0.25;    // fixed prior variance of p(z2 | s-vector)
  double alpha_dis = 10.0;    // discriminative weight; 0 disables
  std::uint64_t seed = 0;

  int z1_encoder_layers() const {
    return (variant == Variant::kApcEnc2Dec1 ||
            variant == Variant::kApcEnc2Dec2)
               ? 2
               : 1;
  }
  int prediction_decoder_layers() const {
    switch (variant) {
      case Variant::kFhvae: return 0;
      case Variant::kApcEnc2Dec2: return 2;
      default: return 1;
    }
  }
  bool has_prediction() const { return variant != Variant::kFhvae; }

  void validate() const {
    require(feature_dim >= 1 && segment_len >= 1 && latent_dim_z1 >= 1 &&
                latent_dim_z2 >= 1 && hidden_units >= 1,
            "model config: all dimensions must be >= 1");
    require(prediction_shift >= 0, "model config: m must be >= 0");
    require(sigma2_z2 > 0.0, "model config: sigma2_z2 must be positive");
    require(alpha_dis >= 0.0, "model config: alpha_dis must be >= 0");
  }
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"feature_dim", c.feature_dim},
          {"segment_len", c.segment_len},
          {"latent_dim_z1", c.latent_dim_z1},
          {"latent_dim_z2", c.latent_dim_z2},
          {"hidden_units", c.hidden_units},
          {"prediction_shift", c.prediction_shift},
          {"sigma2_z2", c.sigma2_z2},
          {"alpha_dis", c.alpha_dis},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.feature_dim = j.at("feature_dim").get<int>();
  c.segment_len = j.at("segment_len").get<int>();
  c.latent_dim_z1 = j.at("latent_dim_z1").get<int>();
  c.latent_dim_z2 = j.at("latent_dim_z2").get<int>();
  c.hidden_units = j.at("hidden_units").get<int>();
  c.prediction_shift = j.at("prediction_shift").get<int>();
  c.sigma2_z2 = j.at("sigma2_z2").get<double>();
  c.alpha_dis = j.at("alpha_dis").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

// Per-segment view of one forward pass.
struct LatentOutputs {
  DiagGaussian q_z2, q_z1;
  Vector z2_sample, z1_sample;
  Matrix recon;          // L x F
  Matrix recon_logvar;   // L x F, fhvae only, else empty
  Matrix prediction;     // L x F, apc variants only, else empty
};

class SeqVaeModel {
 public:
  // All grad/cache state lives outside the weights, so forward passes on a
  // const model are safe to run concurrently.
  struct ForwardCache {
    std::vector<Matrix> xs;  // L of B x F
    Matrix eps1, eps2;
    LstmCache enc2_lstm;
    Matrix mu2, lv2, z2;
    LstmCache enc1_lstm0, enc1_lstm1;
    Matrix enc1_top_last;  // head input
    Matrix mu1, lv1, z1;
    Matrix dec_in;  // B x (z1+z2)
    LstmCache dec_recon_lstm;
    std::vector<Matrix> recon, recon_logvar;  // L of B x F
    LstmCache dec_pred_lstm0, dec_pred_lstm1;
    std::vector<Matrix> pred;  // L of B x F
    Eigen::Index batch = 0;
  };

  explicit SeqVaeModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    const int F = config_.feature_dim;
    const int H = config_.hidden_units;
    const int z1 = config_.latent_dim_z1;
    const int z2 = config_.latent_dim_z2;
    enc_z2_lstm_.emplace("enc_z2.lstm", F, H);
    enc_z2_head_.emplace("enc_z2.head", H, 2 * z2);
    enc_z1_lstm0_.emplace("enc_z1.lstm0", F + z2, H);
    if (config_.z1_encoder_layers() == 2)
      enc_z1_lstm1_.emplace("enc_z1.lstm1", H, H);
    enc_z1_head_.emplace("enc_z1.head", H, 2 * z1);
    dec_recon_lstm_.emplace("dec_recon.lstm", z1 + z2, H);
    dec_recon_head_.emplace("dec_recon.head", H,
                            config_.variant == Variant::kFhvae ? 2 * F : F);
    if (config_.prediction_decoder_layers() >= 1) {
      dec_pred_lstm0_.emplace("dec_pred.lstm0", z1 + z2, H);
      if (config_.prediction_decoder_layers() == 2)
        dec_pred_lstm1_.emplace("dec_pred.lstm1", H, H);
      dec_pred_head_.emplace("dec_pred.head", H, F);
    }
    Rng rng(derive_seed(config_.seed, "model-init"));
    enc_z2_lstm_->init(rng);
    enc_z2_head_->init(rng);
    enc_z1_lstm0_->init(rng);
    if (enc_z1_lstm1_) enc_z1_lstm1_->init(rng);
    enc_z1_head_->init(rng);
    dec_recon_lstm_->init(rng);
    dec_recon_head_->init(rng);
    if (dec_pred_lstm0_) {
      dec_pred_lstm0_->init(rng);
      if (dec_pred_lstm1_) dec_pred_lstm1_->init(rng);
      dec_pred_head_->init(rng);
    }
  }

  const ModelConfig& config() const { return config_; }

  std::vector<Param*> parameters() {
    std::vector<Param*> out;
    enc_z2_lstm_->collect(out);
    enc_z2_head_->collect(out);
    enc_z1_lstm0_->collect(out);
    if (enc_z1_lstm1_) enc_z1_lstm1_->collect(out);
    enc_z1_head_->collect(out);
    dec_recon_lstm_->collect(out);
    dec_recon_head_->collect(out);
    if (dec_pred_lstm0_) {
      dec_pred_lstm0_->collect(out);
      if (dec_pred_lstm1_) dec_pred_lstm1_->collect(out);
      dec_pred_head_->collect(out);
    }
    return out;
  }

  std::vector<Param*> prediction_decoder_parameters() {
    std::vector<Param*> out;
    if (dec_pred_lstm0_) {
      dec_pred_lstm0_->collect(out);
      if (dec_pred_lstm1_) dec_pred_lstm1_->collect(out);
      dec_pred_head_->collect(out);
    }
    return out;
  }

  std::vector<Param*> reconstruction_decoder_parameters() {
    std::vector<Param*> out;
    dec_recon_lstm_->collect(out);
    dec_recon_head_->collect(out);
    return out;
  }

  long parameter_count() {
    long n = 0;
    for (const Param* p : parameters()) n += p->size();
    return n;
  }

  // ---- batched forward / backward ----------------------------------------

  void forward_batch(const std::vector<Matrix>& xs, const Matrix& eps1,
                     const Matrix& eps2, ForwardCache* cache) const {
    require(static_cast<int>(xs.size()) == config_.segment_len,
            "forward: expected " + std::to_string(config_.segment_len) +
                " steps, got " + std::to_string(xs.size()));
    const Eigen::Index B = xs.front().rows();
    require(xs.front().cols() == config_.feature_dim,
            "forward: feature dim mismatch");
    require(eps2.rows() == B && eps2.cols() == config_.latent_dim_z2 &&
                eps1.rows() == B && eps1.cols() == config_.latent_dim_z1,
            "forward: noise shape mismatch");
    cache->batch = B;
    cache->xs = xs;
    cache->eps1 = eps1;
    cache->eps2 = eps2;

    // z2 posterior from the final hidden state
    auto hs2 = enc_z2_lstm_->forward(xs, &cache->enc2_lstm);
    Matrix head2 = enc_z2_head_->forward(hs2.back());
    cache->mu2 = head2.leftCols(config_.latent_dim_z2);
    cache->lv2 = head2.rightCols(config_.latent_dim_z2);
    cache->z2 = cache->mu2.array() +
                (0.5 * cache->lv2.array()).exp() * eps2.array();

    // z1 posterior conditioned on the z2 sample (appended to every frame)
    std::vector<Matrix> xs1(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
      xs1[t].resize(B, config_.feature_dim + config_.latent_dim_z2);
      xs1[t] << xs[t], cache->z2;
    }
    auto hs1 = enc_z1_lstm0_->forward(xs1, &cache->enc1_lstm0);
    if (enc_z1_lstm1_) hs1 = enc_z1_lstm1_->forward(hs1, &cache->enc1_lstm1);
    cache->enc1_top_last = hs1.back();
    Matrix head1 = enc_z1_head_->forward(cache->enc1_top_last);
    cache->mu1 = head1.leftCols(config_.latent_dim_z1);
    cache->lv1 = head1.rightCols(config_.latent_dim_z1);
    cache->z1 = cache->mu1.array() +
                (0.5 * cache->lv1.array()).exp() * eps1.array();

    // decoders see [z1 ; z2] at every step
    cache->dec_in.resize(B, config_.latent_dim_z1 + config_.latent_dim_z2);
    cache->dec_in << cache->z1, cache->z2;
    std::vector<Matrix> dec_steps(xs.size(), cache->dec_in);
    auto hsr = dec_recon_lstm_->forward(dec_steps, &cache->dec_recon_lstm);
    cache->recon.resize(xs.size());
    cache->recon_logvar.clear();
    if (config_.variant == Variant::kFhvae) cache->recon_logvar.resize(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
      Matrix y = dec_recon_head_->forward(hsr[t]);
      if (config_.variant == Variant::kFhvae) {
        cache->recon[t] = y.leftCols(config_.feature_dim);
        cache->recon_logvar[t] = y.rightCols(config_.feature_dim);
      } else {
        cache->recon[t] = std::move(y);
      }
    }

    cache->pred.clear();
    if (dec_pred_lstm0_) {
      auto hsp = dec_pred_lstm0_->forward(dec_steps, &cache->dec_pred_lstm0);
      if (dec_pred_lstm1_)
        hsp = dec_pred_lstm1_->forward(hsp, &cache->dec_pred_lstm1);
      cache->pred.resize(xs.size());
      for (std::size_t t = 0; t < xs.size(); ++t)
        cache->pred[t] = dec_pred_head_->forward(hsp[t]);
    }
  }

  // Upstream gradients: d_recon / d_recon_logvar / d_pred per step, and the
  // direct loss gradients on the posterior parameters. Accumulates into the
  // parameter grad buffers.
  void backward_batch(const ForwardCache& cache,
                      const std::vector<Matrix>& d_recon,
                      const std::vector<Matrix>& d_recon_logvar,
                      const std::vector<Matrix>& d_pred, const Matrix& d_mu1,
                      const Matrix& d_lv1, const Matrix& d_mu2,
                      const Matrix& d_lv2) {
    const Eigen::Index B = cache.batch;
    const auto L = static_cast<Eigen::Index>(cache.xs.size());
    const int z1d = config_.latent_dim_z1;
    const int z2d = config_.latent_dim_z2;

    Matrix d_dec_in =
        Matrix::Zero(B, z1d + z2d);  // gradient w.r.t. [z1 ; z2]

    {  // reconstruction decoder
      std::vector<Matrix> dh(L);
      for (Eigen::Index t = 0; t < L; ++t) {
        Matrix dy;
        if (config_.variant == Variant::kFhvae) {
          dy.resize(B, 2 * config_.feature_dim);
          dy << d_recon[t], d_recon_logvar[t];
        } else {
          dy = d_recon[t];
        }
        dh[t] = dec_recon_head_->backward(cache.dec_recon_lstm.h[t + 1], dy);
      }
      auto dxs = dec_recon_lstm_->backward(cache.dec_recon_lstm, dh);
      for (const Matrix& dx : dxs) d_dec_in += dx;
    }

    if (dec_pred_lstm0_) {  // prediction decoder
      std::vector<Matrix> dh(L);
      const LstmCache& top =
          dec_pred_lstm1_ ? cache.dec_pred_lstm1 : cache.dec_pred_lstm0;
      for (Eigen::Index t = 0; t < L; ++t)
        dh[t] = dec_pred_head_->backward(top.h[t + 1], d_pred[t]);
      if (dec_pred_lstm1_) dh = dec_pred_lstm1_->backward(cache.dec_pred_lstm1, dh);
      auto dxs = dec_pred_lstm0_->backward(cache.dec_pred_lstm0, dh);
      for (const Matrix& dx : dxs) d_dec_in += dx;
    }

    Matrix dz1 = d_dec_in.leftCols(z1d);
    Matrix dz2 = d_dec_in.rightCols(z2d);

    // reparameterization of z1
    Matrix dmu1 = d_mu1 + dz1;
    Matrix dlv1 = d_lv1 + (dz1.array() * 0.5 * (0.5 * cache.lv1.array()).exp() *
                           cache.eps1.array())
                              .matrix();

    {  // z1 encoder; its per-step inputs also carry gradient into z2
      Matrix dhead(B, 2 * z1d);
      dhead << dmu1, dlv1;
      Matrix dh_last = enc_z1_head_->backward(cache.enc1_top_last, dhead);
      std::vector<Matrix> dh(L, Matrix::Zero(B, config_.hidden_units));
      dh[L - 1] = dh_last;
      if (enc_z1_lstm1_) dh = enc_z1_lstm1_->backward(cache.enc1_lstm1, dh);
      auto dxs1 = enc_z1_lstm0_->backward(cache.enc1_lstm0, dh);
      for (const Matrix& dx : dxs1) dz2 += dx.rightCols(z2d);
    }

    // reparameterization of z2
    Matrix dmu2 = d_mu2 + dz2;
    Matrix dlv2 = d_lv2 + (dz2.array() * 0.5 * (0.5 * cache.lv2.array()).exp() *
                           cache.eps2.array())
                              .matrix();

    {  // z2 encoder
      Matrix dhead(B, 2 * z2d);
      dhead << dmu2, dlv2;
      Matrix dh_last =
          enc_z2_head_->backward(cache.enc2_lstm.h.back(), dhead);
      std::vector<Matrix> dh(L, Matrix::Zero(B, config_.hidden_units));
      dh[L - 1] = dh_last;
      enc_z2_lstm_->backward(cache.enc2_lstm, dh);
    }
  }

  // ---- single-segment operations ------------------------------------------

  DiagGaussian encode_z2(const Matrix& segment_frames) const {
    check_segment_shape(segment_frames, "encode_z2");
    LstmCache cache;
    auto hs = enc_z2_lstm_->forward(to_steps(segment_frames), &cache);
    Matrix head = enc_z2_head_->forward(hs.back());
    return split_head(head, config_.latent_dim_z2);
  }

  DiagGaussian encode_z1(const Matrix& segment_frames,
                         const Vector& z2) const {
    check_segment_shape(segment_frames, "encode_z1");
    require(z2.size() == config_.latent_dim_z2,
            "encode_z1: z2 dimension mismatch");
    std::vector<Matrix> xs1(config_.segment_len);
    for (int t = 0; t < config_.segment_len; ++t) {
      xs1[t].resize(1, config_.feature_dim + config_.latent_dim_z2);
      xs1[t] << segment_frames.row(t), z2.transpose();
    }
    LstmCache c0, c1;
    auto hs = enc_z1_lstm0_->forward(xs1, &c0);
    if (enc_z1_lstm1_) hs = enc_z1_lstm1_->forward(hs, &c1);
    Matrix head = enc_z1_head_->forward(hs.back());
    return split_head(head, config_.latent_dim_z1);
  }

  Matrix decode_recon(const Vector& z1, const Vector& z2,
                      Matrix* logvar_out = nullptr) const {
    require(z1.size() == config_.latent_dim_z1 &&
                z2.size() == config_.latent_dim_z2,
            "decode_recon: latent dimension mismatch");
    std::vector<Matrix> steps(config_.segment_len, latent_row(z1, z2));
    LstmCache cache;
    auto hs = dec_recon_lstm_->forward(steps, &cache);
    Matrix out(config_.segment_len, config_.feature_dim);
    Matrix lv(config_.segment_len, config_.feature_dim);
    for (int t = 0; t < config_.segment_len; ++t) {
      Matrix y = dec_recon_head_->forward(hs[t]);
      if (config_.variant == Variant::kFhvae) {
        out.row(t) = y.leftCols(config_.feature_dim).row(0);
        lv.row(t) = y.rightCols(config_.feature_dim).row(0);
      } else {
        out.row(t) = y.row(0);
      }
    }
    if (logvar_out) {
      if (config_.variant == Variant::kFhvae)
        *logvar_out = lv;
      else
        logvar_out->resize(0, 0);
    }
    return out;
  }

  Matrix decode_predict(const Vector& z1, const Vector& z2) const {
    if (!dec_pred_lstm0_)
      throw VariantError("decode_predict: variant '" +
                         variant_name(config_.variant) +
                         "' has no prediction decoder");
    require(z1.size() == config_.latent_dim_z1 &&
                z2.size() == config_.latent_dim_z2,
            "decode_predict: latent dimension mismatch");
    std::vector<Matrix> steps(config_.segment_len, latent_row(z1, z2));
    LstmCache c0, c1;
    auto hs = dec_pred_lstm0_->forward(steps, &c0);
    if (dec_pred_lstm1_) hs = dec_pred_lstm1_->forward(hs, &c1);
    Matrix out(config_.segment_len, config_.feature_dim);
    for (int t = 0; t < config_.segment_len; ++t)
      out.row(t) = dec_pred_head_->forward(hs[t]).row(0);
    return out;
  }

  LatentOutputs forward(const Segment& segment, const Vector& eps1,
                        const Vector& eps2) const {
    Matrix frames = segment.frames.cast<double>();
    LatentOutputs out;
    out.q_z2 = encode_z2(frames);
    out.z2_sample = reparam_sample(out.q_z2, eps2);
    out.q_z1 = encode_z1(frames, out.z2_sample);
    out.z1_sample = reparam_sample(out.q_z1, eps1);
    out.recon = decode_recon(out.z1_sample, out.z2_sample, &out.recon_logvar);
    if (config_.has_prediction())
      out.prediction = decode_predict(out.z1_sample, out.z2_sample);
    return out;
  }

  LatentOutputs forward(const Segment& segment) const {  // zero-noise
    return forward(segment, Vector::Zero(config_.latent_dim_z1),
                   Vector::Zero(config_.latent_dim_z2));
  }

 private:
  static DiagGaussian split_head(const Matrix& head, int dim) {
    return DiagGaussian(head.leftCols(dim).row(0).transpose(),
                        head.rightCols(dim).row(0).transpose());
  }

  Matrix latent_row(const Vector& z1, const Vector& z2) const {
    Matrix row(1, config_.latent_dim_z1 + config_.latent_dim_z2);
    row << z1.transpose(), z2.transpose();
    return row;
  }

  void check_segment_shape(const Matrix& frames, const char* who) const {
    require(frames.rows() == config_.segment_len &&
                frames.cols() == config_.feature_dim,
            std::string(who) + ": expected " +
                std::to_string(config_.segment_len) + "x" +
                std::to_string(config_.feature_dim) + " frames, got " +
                std::to_string(frames.rows()) + "x" +
                std::to_string(frames.cols()));
  }

  std::vector<Matrix> to_steps(const Matrix& frames) const {
    std::vector<Matrix> xs(config_.segment_len);
    for (int t = 0; t < config_.segment_len; ++t) xs[t] = frames.row(t);
    return xs;
  }

  ModelConfig config_;
  std::optional<LstmLayer> enc_z2_lstm_;
  std::optional<DenseLayer> enc_z2_head_;
  std::optional<LstmLayer> enc_z1_lstm0_, enc_z1_lstm1_;
  std::optional<DenseLayer> enc_z1_head_;
  std::optional<LstmLayer> dec_recon_lstm_;
  std::optional<DenseLayer> dec_recon_head_;
  std::optional<LstmLayer> dec_pred_lstm0_, dec_pred_lstm1_;
  std::optional<DenseLayer> dec_pred_head_;
};

}  // namespace dsv

#endif  // DSV_MODEL_HPP
