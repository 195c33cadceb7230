// dsv/features.hpp
//
// Sequence records, log-magnitude STFT analysis, fixed-length segmentation
// with m-frames-ahead prediction targets, and per-bin normalization.
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

#ifndef DSV_FEATURES_HPP
#define DSV_FEATURES_HPP

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "dsv/common.hpp"

namespace dsv {

inline constexpr double kLogMagnitudeEps = 1e-10;

// One utterance worth of features plus identity labels.
struct SequenceRecord {
  std::string sequence_id;
  std::string speaker_id;
  MatrixF features;  // T x F, log-magnitude units
  double frame_rate = 100.0;
};

// Fixed-length window of L consecutive frames; the model's unit of
// encoding/decoding. future_frames holds the m-frames-ahead prediction
// target when the source sequence is long enough.
struct Segment {
  std::string sequence_id;
  int segment_index = 0;
  int start_frame = 0;
  MatrixF frames;         // L x F
  MatrixF future_frames;  // L x F when has_target, else empty
  bool has_target = false;
};

struct StftConfig {
  double sample_rate = 16000.0;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int n_bins = 200;

  int window_samples() const {
    return static_cast<int>(std::lround(sample_rate * window_ms / 1000.0));
  }
  int hop_samples() const {
    return static_cast<int>(std::lround(sample_rate * hop_ms / 1000.0));
  }
  // FFT size equals the window length; DC is dropped so bins 1..n_bins are
  // kept, which caps n_bins at fft_size/2.
  int fft_size() const { return window_samples(); }
};

namespace detail {

inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));  // periodic form
  return w;
}

// Complex half-spectrum STFT, frames in rows, fft_size/2 + 1 bins.
inline Eigen::MatrixXcd stft_complex(const std::vector<double>& waveform,
                                     const StftConfig& cfg) {
  const int win = cfg.window_samples();
  const int hop = cfg.hop_samples();
  require(hop >= 1, "stft: non-positive hop");
  if (static_cast<int>(waveform.size()) < win)
    throw ContractViolation("stft: waveform shorter than one window (" +
                            std::to_string(waveform.size()) + " < " +
                            std::to_string(win) + " samples)");
  const int frames =
      1 + static_cast<int>((waveform.size() - static_cast<std::size_t>(win)) /
                           static_cast<std::size_t>(hop));
  const std::vector<double> window = hann_window(win);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::MatrixXcd out(frames, win / 2 + 1);
  std::vector<double> buf(win);
  std::vector<std::complex<double>> spec;
  for (int t = 0; t < frames; ++t) {
    const std::size_t base = static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < win; ++i) buf[i] = waveform[base + i] * window[i];
    fft.fwd(spec, buf);
    for (int k = 0; k <= win / 2; ++k) out(t, k) = spec[k];
  }
  return out;
}

}  // namespace detail

// Hann-windowed STFT, entries ln(|S| + eps); DC bin dropped, F = n_bins.
inline MatrixF stft_log_magnitude(const std::vector<double>& waveform,
                                  const StftConfig& cfg) {
  require(cfg.n_bins >= 1 && cfg.n_bins <= cfg.fft_size() / 2,
          "stft_log_magnitude: n_bins out of range for fft size " +
              std::to_string(cfg.fft_size()));
  Eigen::MatrixXcd spec = detail::stft_complex(waveform, cfg);
  MatrixF out(spec.rows(), cfg.n_bins);
  for (Eigen::Index t = 0; t < spec.rows(); ++t)
    for (int k = 0; k < cfg.n_bins; ++k)
      out(t, k) = static_cast<float>(
          std::log(std::abs(spec(t, k + 1)) + kLogMagnitudeEps));
  return out;
}

inline MatrixF stft_log_magnitude(const std::vector<double>& waveform,
                                  double sample_rate, double window_ms,
                                  double hop_ms, int n_bins) {
  StftConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.window_ms = window_ms;
  cfg.hop_ms = hop_ms;
  cfg.n_bins = n_bins;
  return stft_log_magnitude(waveform, cfg);
}

// Segments start at 0, shift, 2*shift, ... while start + L <= T. A segment
// carries a prediction target iff the window m frames ahead fits entirely
// inside the sequence.
inline std::vector<Segment> segment_sequence(const SequenceRecord& seq, int L,
                                             int shift, int m) {
  require(L >= 1, "segment_sequence: L must be >= 1");
  require(shift >= 1, "segment_sequence: shift must be >= 1");
  require(m >= 0, "segment_sequence: m must be >= 0");
  const int T = static_cast<int>(seq.features.rows());
  std::vector<Segment> out;
  for (int start = 0, index = 0; start + L <= T; start += shift, ++index) {
    Segment s;
    s.sequence_id = seq.sequence_id;
    s.segment_index = index;
    s.start_frame = start;
    s.frames = seq.features.middleRows(start, L);
    s.has_target = start + m + L <= T;
    if (s.has_target) s.future_frames = seq.features.middleRows(start + m, L);
    out.push_back(std::move(s));
  }
  return out;
}

// Per-bin mean/std, computed on the training split only.
struct FeatureNormalization {
  Eigen::VectorXf mean;  // F
  Eigen::VectorXf std;   // F, floored away from zero

  bool empty() const { return mean.size() == 0; }

  MatrixF apply(const MatrixF& x) const {
    if (empty()) return x;
    require(x.cols() == mean.size(), "normalization: feature dim mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           std.transpose().array();
  }

  MatrixF invert(const MatrixF& x) const {
    if (empty()) return x;
    require(x.cols() == mean.size(), "normalization: feature dim mismatch");
    return (x.array().rowwise() * std.transpose().array()).matrix().rowwise() +
           mean.transpose();
  }
};

inline FeatureNormalization compute_normalization(
    const std::vector<const MatrixF*>& matrices) {
  require(!matrices.empty(), "compute_normalization: no input matrices");
  const Eigen::Index dim = matrices.front()->cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
  double count = 0;
  for (const MatrixF* m : matrices) {
    require(m->cols() == dim, "compute_normalization: feature dim mismatch");
    sum += m->cast<double>().colwise().sum();
    sumsq += m->cast<double>().array().square().colwise().sum().matrix();
    count += static_cast<double>(m->rows());
  }
  FeatureNormalization norm;
  Eigen::VectorXd mean = sum / count;
  Eigen::VectorXd var = (sumsq / count - mean.array().square().matrix())
                            .cwiseMax(1e-12);
  norm.mean = mean.cast<float>();
  norm.std = var.array().sqrt().cast<float>();
  return norm;
}

}  // namespace dsv

#endif  // DSV_FEATURES_HPP
