// dsv/trainer.hpp
//
// Minibatch training of the sequence VAE: batched loss evaluation with
// hand-derived gradients, the Adam update over model weights and the
// s-vector table, per-epoch dev evaluation with early stopping, NDJSON
// logging and resumable checkpoints. Per-epoch generators are derived from
// (seed, epoch), so a resumed run reproduces the uninterrupted one bitwise.
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

#ifndef DSV_TRAINER_HPP
#define DSV_TRAINER_HPP

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dsv/checkpoint.hpp"
#include "dsv/common.hpp"
#include "dsv/loss.hpp"
#include "dsv/manifest.hpp"
#include "dsv/model.hpp"

namespace dsv {

// Closed-form posterior-mean estimate of a sequence's s-vector under the
// unit-variance hyperprior: sum of per-segment posterior means over
// (N + sigma2_z2).
inline Vector infer_svector(const std::vector<Segment>& segments,
                            const SeqVaeModel& model) {
  require(!segments.empty(), "infer_svector: empty segment list");
  const ModelConfig& cfg = model.config();
  Vector sum = Vector::Zero(cfg.latent_dim_z2);
  for (const Segment& s : segments)
    sum += model.encode_z2(s.frames.cast<double>()).mean;
  const double n = static_cast<double>(segments.size());
  return sum / (n + cfg.sigma2_z2 / 1.0);
}

struct TrainingBatch {
  std::vector<const Segment*> segments;  // B entries
  std::vector<int> table_row;            // B entries, rows into the table
  Matrix eps1, eps2;                     // B x z1, B x z2
};

namespace detail {

inline LatentOutputs row_outputs(const SeqVaeModel::ForwardCache& cache,
                                 Eigen::Index i, const ModelConfig& cfg) {
  LatentOutputs out;
  out.q_z2 = DiagGaussian(cache.mu2.row(i).transpose(),
                          cache.lv2.row(i).transpose());
  out.q_z1 = DiagGaussian(cache.mu1.row(i).transpose(),
                          cache.lv1.row(i).transpose());
  out.z2_sample = cache.z2.row(i).transpose();
  out.z1_sample = cache.z1.row(i).transpose();
  const auto L = static_cast<Eigen::Index>(cache.xs.size());
  out.recon.resize(L, cfg.feature_dim);
  for (Eigen::Index t = 0; t < L; ++t) out.recon.row(t) = cache.recon[t].row(i);
  if (!cache.recon_logvar.empty()) {
    out.recon_logvar.resize(L, cfg.feature_dim);
    for (Eigen::Index t = 0; t < L; ++t)
      out.recon_logvar.row(t) = cache.recon_logvar[t].row(i);
  }
  if (!cache.pred.empty()) {
    out.prediction.resize(L, cfg.feature_dim);
    for (Eigen::Index t = 0; t < L; ++t)
      out.prediction.row(t) = cache.pred[t].row(i);
  }
  return out;
}

// softmax of -||mean - s_j||^2 / (2 sigma2) over table rows
inline Vector sequence_softmax(const Eigen::RowVectorXd& mean,
                               const Matrix& svectors, double sigma2) {
  Vector logits =
      (svectors.rowwise() - mean).rowwise().squaredNorm() / (-2.0 * sigma2);
  const double m = logits.maxCoeff();
  Vector p = (logits.array() - m).exp();
  return p / p.sum();
}

}  // namespace detail

// Mean loss over the batch; optionally accumulates analytic gradients into
// the model parameters and the s-vector table. per_segment, when given, gets
// each row's breakdown.
inline LossBreakdown batch_loss(SeqVaeModel& model, SVectorTable& table,
                                const TrainingBatch& batch,
                                bool accumulate_grads,
                                std::vector<LossBreakdown>* per_segment =
                                    nullptr) {
  const ModelConfig& cfg = model.config();
  const auto B = static_cast<Eigen::Index>(batch.segments.size());
  require(B >= 1, "batch_loss: empty batch");
  require(static_cast<Eigen::Index>(batch.table_row.size()) == B,
          "batch_loss: row index count mismatch");
  const int L = cfg.segment_len;
  const int F = cfg.feature_dim;

  std::vector<Matrix> xs(L, Matrix(B, F));
  for (Eigen::Index i = 0; i < B; ++i) {
    const Segment& seg = *batch.segments[i];
    require(seg.frames.rows() == L && seg.frames.cols() == F,
            "batch_loss: segment shape mismatch");
    for (int t = 0; t < L; ++t) xs[t].row(i) = seg.frames.row(t).cast<double>();
  }

  SeqVaeModel::ForwardCache cache;
  model.forward_batch(xs, batch.eps1, batch.eps2, &cache);

  const Matrix& svectors = table.param().value;
  const bool use_disc = cfg.alpha_dis > 0.0;
  LossBreakdown mean;
  std::vector<Vector> softmaxes(use_disc ? B : 0);
  for (Eigen::Index i = 0; i < B; ++i) {
    const int row = batch.table_row[i];
    LatentOutputs out = detail::row_outputs(cache, i, cfg);
    LossBreakdown lb =
        segment_loss(out, *batch.segments[i], table.svector(row),
                     table.segment_count(row), cfg);
    if (use_disc) {
      softmaxes[i] =
          detail::sequence_softmax(cache.mu2.row(i), svectors, cfg.sigma2_z2);
      // -log p(own) from the cached softmax
      lb.discriminative =
          cfg.alpha_dis * (-std::log(std::max(softmaxes[i](row),
                                              1e-300)));
      lb.total += lb.discriminative;
      check_breakdown(lb);
    }
    if (per_segment) per_segment->push_back(lb);
    mean += lb;
  }
  mean *= 1.0 / static_cast<double>(B);

  if (!accumulate_grads) return mean;

  const double w = 1.0 / static_cast<double>(B);
  std::vector<Matrix> d_recon(L, Matrix::Zero(B, F));
  std::vector<Matrix> d_recon_lv;
  std::vector<Matrix> d_pred;
  if (cfg.variant == Variant::kFhvae)
    d_recon_lv.assign(L, Matrix::Zero(B, F));
  if (cfg.has_prediction()) d_pred.assign(L, Matrix::Zero(B, F));
  Matrix d_mu1 = Matrix::Zero(B, cfg.latent_dim_z1);
  Matrix d_lv1 = Matrix::Zero(B, cfg.latent_dim_z1);
  Matrix d_mu2 = Matrix::Zero(B, cfg.latent_dim_z2);
  Matrix d_lv2 = Matrix::Zero(B, cfg.latent_dim_z2);
  Matrix& s_grad = table.param().grad;

  for (Eigen::Index i = 0; i < B; ++i) {
    const Segment& seg = *batch.segments[i];
    const int row = batch.table_row[i];
    const Eigen::RowVectorXd svec = svectors.row(row);
    const double inv_n = 1.0 / table.segment_count(row);

    for (int t = 0; t < L; ++t) {
      const auto x_t = seg.frames.row(t).cast<double>();
      if (cfg.variant == Variant::kFhvae) {
        const auto mu = cache.recon[t].row(i).array();
        const auto lv = cache.recon_logvar[t].row(i).array();
        const auto diff = mu - x_t.array();
        d_recon[t].row(i) = w * (diff * (-lv).exp()).matrix();
        d_recon_lv[t].row(i) =
            (w * 0.5 * (1.0 - diff.square() * (-lv).exp())).matrix();
      } else {
        d_recon[t].row(i) =
            w * 2.0 * (cache.recon[t].row(i).array() - x_t.array()).matrix();
        if (seg.has_target) {
          const auto y_t = seg.future_frames.row(t).cast<double>();
          d_pred[t].row(i) =
              w * 2.0 *
              (cache.pred[t].row(i).array() - y_t.array()).matrix();
        }
      }
    }

    // KL(q_z1 || N(0, I))
    d_mu1.row(i) = w * cache.mu1.row(i);
    d_lv1.row(i) = w * 0.5 * (cache.lv1.row(i).array().exp() - 1.0).matrix();
    // KL(q_z2 || N(s, sigma2 I)) and the 1/N prior term on s
    d_mu2.row(i) = w * (cache.mu2.row(i) - svec) / cfg.sigma2_z2;
    d_lv2.row(i) =
        w * 0.5 *
        (cache.lv2.row(i).array().exp() / cfg.sigma2_z2 - 1.0).matrix();
    s_grad.row(row) += w * ((svec - cache.mu2.row(i)) / cfg.sigma2_z2 +
                            inv_n * svec);

    if (use_disc) {
      Vector q = softmaxes[i];
      q(row) -= 1.0;
      const double scale = w * cfg.alpha_dis / cfg.sigma2_z2;
      d_mu2.row(i) += scale * (q.transpose() * svectors);
      s_grad.noalias() +=
          scale * (q * cache.mu2.row(i) - q.asDiagonal() * svectors);
    }
  }

  model.backward_batch(cache, d_recon, d_recon_lv, d_pred, d_mu1, d_lv1,
                       d_mu2, d_lv2);
  return mean;
}

struct TrainOptions {
  int batch_size = 256;
  double learning_rate = 1e-3;
  int max_epochs = 500;
  int patience = 10;
  std::uint64_t seed = 0;
  std::string run_dir;      // checkpoints + log land here; "" disables files
  std::string resume_from;  // checkpoint path to resume, "" for fresh start
};

struct TrainResult {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_dev_total = std::numeric_limits<double>::infinity();
  LossBreakdown final_train_mean;
  std::string best_checkpoint, last_checkpoint, log_path;
};

class Trainer {
 public:
  Trainer(const CorpusManifest& manifest,
          const std::vector<SequenceRecord>& records,
          const ModelConfig& model_config, const TrainOptions& options)
      : manifest_(manifest), options_(options), model_(model_config) {
    const ModelConfig& cfg = model_.config();
    if (cfg.feature_dim != manifest.feature_dim)
      throw IncompatibilityError(
          "trainer: model feature_dim " + std::to_string(cfg.feature_dim) +
          " != corpus feature_dim " + std::to_string(manifest.feature_dim));
    if (cfg.segment_len != manifest.segment_len ||
        cfg.prediction_shift != manifest.prediction_shift)
      throw IncompatibilityError(
          "trainer: segmentation parameters disagree with the manifest");
    require(records.size() == manifest.entries.size(),
            "trainer: record/manifest count mismatch");

    std::vector<std::pair<std::string, int>> train_sequences;
    for (std::size_t r = 0; r < records.size(); ++r) {
      const ManifestEntry& e = manifest.entries[r];
      SequenceRecord normalized = records[r];
      normalized.features = manifest.normalization.apply(records[r].features);
      auto segs = segment_sequence(normalized, manifest.segment_len,
                                   manifest.segment_shift,
                                   manifest.prediction_shift);
      if (segs.empty()) continue;  // shorter than one segment
      if (e.split == "train") {
        train_sequences.emplace_back(e.sequence_id,
                                     static_cast<int>(segs.size()));
        train_segments_.push_back(std::move(segs));
      } else {
        dev_ids_.push_back(e.sequence_id);
        dev_segments_.push_back(std::move(segs));
      }
    }
    require(!train_sequences.empty(), "trainer: no training sequences");
    table_ = std::make_unique<SVectorTable>(train_sequences,
                                            cfg.latent_dim_z2);
    optimizer_ = AdamOptimizer(options_.learning_rate);
    optimizer_.attach(all_parameters());

    if (!options_.resume_from.empty()) resume(options_.resume_from);
    if (!options_.run_dir.empty())
      std::filesystem::create_directories(options_.run_dir);
  }

  SeqVaeModel& model() { return model_; }
  SVectorTable& table() { return *table_; }
  AdamOptimizer& optimizer() { return optimizer_; }

  std::vector<Param*> all_parameters() {
    std::vector<Param*> params = model_.parameters();
    params.push_back(&table_->param());
    return params;
  }

  TrainResult run() {
    TrainResult result;
    int epochs_without_improvement = epoch_ - best_epoch_ - 1;
    if (best_epoch_ < 0) epochs_without_improvement = 0;
    for (; epoch_ < options_.max_epochs; ++epoch_) {
      LossBreakdown train_mean = run_train_epoch(epoch_);
      LossBreakdown dev_mean = evaluate_dev();
      log_epoch(epoch_, "train", train_mean);
      log_epoch(epoch_, "dev", dev_mean);
      result.epochs_run = epoch_ + 1;
      result.final_train_mean = train_mean;
      if (dev_mean.total < best_dev_) {
        best_dev_ = dev_mean.total;
        best_epoch_ = epoch_;
        epochs_without_improvement = 0;
        if (!options_.run_dir.empty()) {
          result.best_checkpoint = options_.run_dir + "/best.ckpt";
          save_checkpoint(result.best_checkpoint, model_, *table_,
                          manifest_.normalization, manifest_.corpus_hash,
                          make_meta());
        }
      } else {
        ++epochs_without_improvement;
      }
      if (!options_.run_dir.empty()) {
        result.last_checkpoint = options_.run_dir + "/last.ckpt";
        save_checkpoint(result.last_checkpoint, model_, *table_,
                        manifest_.normalization, manifest_.corpus_hash,
                        make_meta(), &optimizer_);
      }
      if (epochs_without_improvement >= options_.patience) {
        ++epoch_;
        break;
      }
    }
    result.best_epoch = best_epoch_;
    result.best_dev_total = best_dev_;
    result.log_path =
        options_.run_dir.empty() ? "" : options_.run_dir + "/training_log.ndjson";
    if (result.best_checkpoint.empty() && !options_.run_dir.empty())
      result.best_checkpoint = options_.run_dir + "/best.ckpt";
    return result;
  }

  // Zero-noise evaluation of the mean loss over the training split with the
  // current parameters and table.
  LossBreakdown evaluate_train() {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t s = 0; s < train_segments_.size(); ++s)
      for (std::size_t j = 0; j < train_segments_[s].size(); ++j)
        pairs.emplace_back(static_cast<int>(s), static_cast<int>(j));
    LossBreakdown total;
    long count = 0;
    for (std::size_t at = 0; at < pairs.size();
         at += static_cast<std::size_t>(options_.batch_size)) {
      const auto n = std::min<std::size_t>(options_.batch_size,
                                           pairs.size() - at);
      TrainingBatch batch;
      for (std::size_t k = 0; k < n; ++k) {
        const auto& [s, j] = pairs[at + k];
        batch.segments.push_back(&train_segments_[s][j]);
        batch.table_row.push_back(
            table_->row_of(train_segments_[s][j].sequence_id));
      }
      const auto B = static_cast<Eigen::Index>(n);
      batch.eps1 = Matrix::Zero(B, model_.config().latent_dim_z1);
      batch.eps2 = Matrix::Zero(B, model_.config().latent_dim_z2);
      LossBreakdown mean = batch_loss(model_, *table_, batch, false);
      mean *= static_cast<double>(n);
      total += mean;
      count += static_cast<long>(n);
    }
    total *= 1.0 / static_cast<double>(count);
    return total;
  }

  // Dev loss under zero noise with inferred s-vectors for the dev sequences.
  LossBreakdown evaluate_dev() {
    if (dev_segments_.empty()) return evaluate_train();
    std::vector<std::pair<std::string, int>> dev_sequences;
    for (std::size_t s = 0; s < dev_segments_.size(); ++s)
      dev_sequences.emplace_back(dev_ids_[s],
                                 static_cast<int>(dev_segments_[s].size()));
    SVectorTable dev_table(dev_sequences, model_.config().latent_dim_z2);
    for (std::size_t s = 0; s < dev_segments_.size(); ++s)
      dev_table.param().value.row(static_cast<Eigen::Index>(s)) =
          infer_svector(dev_segments_[s], model_).transpose();

    LossBreakdown total;
    long count = 0;
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t s = 0; s < dev_segments_.size(); ++s)
      for (std::size_t j = 0; j < dev_segments_[s].size(); ++j)
        pairs.emplace_back(static_cast<int>(s), static_cast<int>(j));
    for (std::size_t at = 0; at < pairs.size();
         at += static_cast<std::size_t>(options_.batch_size)) {
      const auto n = std::min<std::size_t>(options_.batch_size,
                                           pairs.size() - at);
      TrainingBatch batch;
      for (std::size_t k = 0; k < n; ++k) {
        const auto& [s, j] = pairs[at + k];
        batch.segments.push_back(&dev_segments_[s][j]);
        batch.table_row.push_back(s);
      }
      const auto B = static_cast<Eigen::Index>(n);
      batch.eps1 = Matrix::Zero(B, model_.config().latent_dim_z1);
      batch.eps2 = Matrix::Zero(B, model_.config().latent_dim_z2);
      LossBreakdown mean = batch_loss(model_, dev_table, batch, false);
      mean *= static_cast<double>(n);
      total += mean;
      count += static_cast<long>(n);
    }
    total *= 1.0 / static_cast<double>(count);
    return total;
  }

 private:
  CheckpointMeta make_meta() const {
    CheckpointMeta meta;
    meta.epoch = epoch_ + 1;  // epochs completed
    meta.best_dev = best_dev_;
    meta.seed = options_.seed;
    meta.train_options = {{"batch_size", options_.batch_size},
                          {"learning_rate", options_.learning_rate},
                          {"max_epochs", options_.max_epochs},
                          {"patience", options_.patience},
                          {"best_epoch", best_epoch_}};
    return meta;
  }

  void resume(const std::string& path) {
    LoadedCheckpoint ckpt = load_checkpoint(path);
    if (model_config_to_json(ckpt.model->config()) !=
        model_config_to_json(model_.config()))
      throw IncompatibilityError(
          "resume: checkpoint model config differs from requested config");
    if (ckpt.corpus_hash != manifest_.corpus_hash)
      throw IncompatibilityError(
          "resume: checkpoint was trained on a different corpus");
    if (ckpt.table->ids() != table_->ids())
      throw IncompatibilityError("resume: training split changed");
    auto src = ckpt.model->parameters();
    auto dst = model_.parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
    table_->param().value = ckpt.table->param().value;
    if (!ckpt.has_optimizer)
      throw IncompatibilityError(
          "resume: checkpoint has no optimizer state (use the last.ckpt "
          "written during training)");
    optimizer_.moments_m() = ckpt.adam_m;
    optimizer_.moments_v() = ckpt.adam_v;
    optimizer_.set_step_count(ckpt.adam_step);
    epoch_ = ckpt.meta.epoch;
    best_dev_ = ckpt.meta.best_dev;
    best_epoch_ = ckpt.meta.train_options.value("best_epoch", -1);
  }

  LossBreakdown run_train_epoch(int epoch) {
    Rng rng(derive_seed(options_.seed, "epoch-" + std::to_string(epoch)));
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t s = 0; s < train_segments_.size(); ++s)
      for (std::size_t j = 0; j < train_segments_[s].size(); ++j)
        pairs.emplace_back(static_cast<int>(s), static_cast<int>(j));
    rng.shuffle(pairs);

    auto params = all_parameters();
    LossBreakdown epoch_mean;
    long count = 0;
    int batch_index = 0;
    for (std::size_t at = 0; at < pairs.size();
         at += static_cast<std::size_t>(options_.batch_size), ++batch_index) {
      const auto n = std::min<std::size_t>(options_.batch_size,
                                           pairs.size() - at);
      TrainingBatch batch;
      for (std::size_t k = 0; k < n; ++k) {
        const auto& [s, j] = pairs[at + k];
        batch.segments.push_back(&train_segments_[s][j]);
        batch.table_row.push_back(
            table_->row_of(train_segments_[s][j].sequence_id));
      }
      const auto B = static_cast<Eigen::Index>(n);
      batch.eps2 = rng.normal_matrix(B, model_.config().latent_dim_z2);
      batch.eps1 = rng.normal_matrix(B, model_.config().latent_dim_z1);
      zero_grads(params);
      LossBreakdown mean = batch_loss(model_, *table_, batch, true);
      if (!std::isfinite(mean.total))
        abort_diverged(epoch, batch_index, batch, mean);
      optimizer_.step(params);
      mean *= static_cast<double>(n);
      epoch_mean += mean;
      count += static_cast<long>(n);
    }
    epoch_mean *= 1.0 / static_cast<double>(count);
    return epoch_mean;
  }

  [[noreturn]] void abort_diverged(int epoch, int batch_index,
                                   const TrainingBatch& batch,
                                   const LossBreakdown& mean) {
    std::string dump_path;
    if (!options_.run_dir.empty()) {
      nlohmann::json dump;
      dump["epoch"] = epoch;
      dump["batch_index"] = batch_index;
      dump["loss"] = breakdown_to_json(mean);
      dump["segments"] = nlohmann::json::array();
      for (const Segment* s : batch.segments)
        dump["segments"].push_back({{"sequence_id", s->sequence_id},
                                    {"segment_index", s->segment_index},
                                    {"start_frame", s->start_frame}});
      dump_path = options_.run_dir + "/diverged_batch.json";
      std::ofstream out(dump_path, std::ios::trunc);
      out << dump.dump(2) << "\n";
    }
    throw DivergenceError(
        "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
        std::to_string(batch_index) +
        (dump_path.empty() ? "" : "; diagnostic dump at " + dump_path));
  }

  void log_epoch(int epoch, const char* split, const LossBreakdown& mean) {
    if (options_.run_dir.empty()) return;
    nlohmann::json line = breakdown_to_json(mean);
    line["epoch"] = epoch;
    line["split"] = split;
    std::ofstream out(options_.run_dir + "/training_log.ndjson",
                      std::ios::app);
    out << line.dump() << "\n";
  }

  CorpusManifest manifest_;
  TrainOptions options_;
  SeqVaeModel model_;
  std::unique_ptr<SVectorTable> table_;
  AdamOptimizer optimizer_{1e-3};
  std::vector<std::vector<Segment>> train_segments_;  // normalized
  std::vector<std::vector<Segment>> dev_segments_;    // normalized
  std::vector<std::string> dev_ids_;
  int epoch_ = 0;
  int best_epoch_ = -1;
  double best_dev_ = std::numeric_limits<double>::infinity();
};

}  // namespace dsv

#endif  // DSV_TRAINER_HPP
