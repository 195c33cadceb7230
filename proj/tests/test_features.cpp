// tests/test_features.cpp
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
#include <complex>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "dsv/feature_io.hpp"
#include "dsv/features.hpp"

using namespace dsv;

namespace {

std::vector<double> sine(double freq_hz, double rate_hz, double seconds) {
  std::vector<double> w(static_cast<std::size_t>(rate_hz * seconds));
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate_hz);
  return w;
}

SequenceRecord record_with(const MatrixF& features) {
  SequenceRecord rec;
  rec.sequence_id = "seq";
  rec.speaker_id = "spk";
  rec.features = features;
  return rec;
}

MatrixF indexed_features(int T, int F) {
  // entry (t, f) = 1000 t + f, so row provenance is visible bitwise
  MatrixF m(T, F);
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) m(t, f) = static_cast<float>(1000 * t + f);
  return m;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("stft of silence is the log floor with the expected frame count",
          "[features]") {
  std::vector<double> zeros(16000, 0.0);
  MatrixF m = stft_log_magnitude(zeros, 16000.0, 25.0, 10.0, 200);
  REQUIRE(m.rows() == 98);  // 1 + (16000 - 400) / 160
  REQUIRE(m.cols() == 200);
  const float floor = std::log(1e-10f);
  REQUIRE(m.minCoeff() == Catch::Approx(floor).margin(1e-4));
  REQUIRE(m.maxCoeff() == Catch::Approx(floor).margin(1e-4));
  REQUIRE(floor == Catch::Approx(-23.026).margin(1e-3));
}

TEST_CASE("stft peak bin matches a direct dft oracle", "[features]") {
  auto wave = sine(1000.0, 16000.0, 0.5);
  StftConfig cfg;
  MatrixF m = stft_log_magnitude(wave, cfg);
  const int expected_bin =
      static_cast<int>(std::lround(1000.0 * cfg.fft_size() / 16000.0));
  REQUIRE(expected_bin == 25);
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    Eigen::Index argmax;
    m.row(t).maxCoeff(&argmax);
    REQUIRE(argmax + 1 == expected_bin);  // DC dropped: column k is bin k+1
  }

  // direct O(N^2) DFT of the first Hann-windowed frame
  const int N = cfg.fft_size();
  std::vector<std::complex<double>> dft(N / 2 + 1, 0.0);
  for (int k = 0; k <= N / 2; ++k)
    for (int n = 0; n < N; ++n) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * n / N));
      dft[k] += wave[n] * w *
                std::exp(std::complex<double>(0, -2.0 * M_PI * k * n / N));
    }
  for (int k = 1; k <= 200; ++k) {
    const double oracle = std::log(std::abs(dft[k]) + 1e-10);
    REQUIRE(m(0, k - 1) == Catch::Approx(oracle).margin(1e-4));
  }
}

TEST_CASE("stft emits a single frame when the waveform fits one window",
          "[features]") {
  std::vector<double> wave(400, 0.25);
  MatrixF m = stft_log_magnitude(wave, 16000.0, 25.0, 10.0, 200);
  REQUIRE(m.rows() == 1);
}

TEST_CASE("stft rejects short input and bad bin counts", "[features]") {
  std::vector<double> tiny(399, 0.0);
  REQUIRE_THROWS_AS(stft_log_magnitude(tiny, 16000.0, 25.0, 10.0, 200),
                    ContractViolation);
  std::vector<double> ok(400, 0.0);
  REQUIRE_THROWS_AS(stft_log_magnitude(ok, 16000.0, 25.0, 10.0, 201),
                    ContractViolation);
}

TEST_CASE("segmentation counts and target availability", "[features]") {
  SequenceRecord rec = record_with(indexed_features(100, 3));
  auto segs = segment_sequence(rec, 20, 20, 3);
  REQUIRE(segs.size() == 5);
  int with_target = 0;
  for (const auto& s : segs) with_target += s.has_target ? 1 : 0;
  REQUIRE(with_target == 4);
  REQUIRE_FALSE(segs.back().has_target);  // start 80 needs frames 100..102
  REQUIRE(segs.back().future_frames.size() == 0);
}

TEST_CASE("segmentation of a too-short sequence is empty", "[features]") {
  SequenceRecord rec = record_with(indexed_features(19, 3));
  REQUIRE(segment_sequence(rec, 20, 20, 3).empty());
}

TEST_CASE("zero prediction shift makes targets equal the frames",
          "[features]") {
  SequenceRecord rec = record_with(indexed_features(100, 3));
  auto segs = segment_sequence(rec, 20, 20, 0);
  REQUIRE(segs.size() == 5);
  for (const auto& s : segs) {
    REQUIRE(s.has_target);
    REQUIRE(s.future_frames == s.frames);
  }
}

TEST_CASE("segment targets are bit-exact shifted source rows", "[features]") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 5 + static_cast<int>(rng.integer(60));
    const int F = 1 + static_cast<int>(rng.integer(6));
    const int L = 1 + static_cast<int>(rng.integer(10));
    const int shift = 1 + static_cast<int>(rng.integer(10));
    const int m = static_cast<int>(rng.integer(6));
    SequenceRecord rec = record_with(
        rng.normal_matrix(T, F).cast<float>());
    auto segs = segment_sequence(rec, L, shift, m);
    int expected_index = 0;
    for (const auto& s : segs) {
      REQUIRE(s.segment_index == expected_index++);
      REQUIRE(s.start_frame + L <= T);
      REQUIRE(s.frames == rec.features.middleRows(s.start_frame, L));
      REQUIRE(s.has_target == (s.start_frame + m + L <= T));
      if (s.has_target)
        REQUIRE(s.future_frames ==
                rec.features.middleRows(s.start_frame + m, L));
    }
  }
}

TEST_CASE("non-overlapping segments reproduce the sequence prefix",
          "[features]") {
  SequenceRecord rec = record_with(indexed_features(47, 4));
  const int L = 10;
  auto segs = segment_sequence(rec, L, L, 3);
  REQUIRE(segs.size() == 4);
  MatrixF glued(static_cast<int>(segs.size()) * L, 4);
  for (std::size_t i = 0; i < segs.size(); ++i)
    glued.middleRows(static_cast<int>(i) * L, L) = segs[i].frames;
  REQUIRE(glued == rec.features.topRows(40));
}

TEST_CASE("feature files round-trip bitwise", "[features]") {
  Rng rng(4);
  MatrixF m = rng.normal_matrix(7, 13).cast<float>();
  auto path = temp_file("dsv_roundtrip.dsvf");
  write_features(path.string(), m);
  MatrixF back = read_features(path.string());
  REQUIRE(back == m);
  std::filesystem::remove(path);
}

TEST_CASE("feature decoding reports corruption with a byte offset",
          "[features]") {
  Rng rng(5);
  MatrixF m = rng.normal_matrix(4, 3).cast<float>();
  std::string bytes = encode_features(m);

  std::string truncated = bytes.substr(0, bytes.size() - 5);
  REQUIRE_THROWS_WITH(decode_features(truncated),
                      Catch::Matchers::ContainsSubstring("byte offset"));
  REQUIRE_THROWS_AS(decode_features(truncated), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  REQUIRE_THROWS_AS(decode_features(bad_magic), FormatError);

  std::string trailing = bytes + "zz";
  REQUIRE_THROWS_AS(decode_features(trailing), FormatError);
}

TEST_CASE("empty matrices are rejected at write time", "[features]") {
  MatrixF empty(0, 5);
  REQUIRE_THROWS_AS(encode_features(empty), ContractViolation);
}

TEST_CASE("normalization round-trips and matches direct statistics",
          "[features]") {
  Rng rng(6);
  MatrixF a = (rng.normal_matrix(30, 4) * 2.5).cast<float>();
  MatrixF b = (rng.normal_matrix(50, 4) * 0.5).cast<float>();
  FeatureNormalization norm = compute_normalization({&a, &b});

  MatrixF normalized = norm.apply(a);
  MatrixF back = norm.invert(normalized);
  REQUIRE((back - a).cwiseAbs().maxCoeff() < 1e-4f);

  // normalized statistics over the pooled data are ~(0, 1)
  MatrixF nb = norm.apply(b);
  Eigen::VectorXf mean =
      (normalized.colwise().sum() + nb.colwise().sum()) / (30.0f + 50.0f);
  REQUIRE(mean.cwiseAbs().maxCoeff() < 1e-3f);
}
