// tests/test_synthetic.cpp
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

#include <filesystem>
#include <map>

#include "dsv/manifest.hpp"
#include "dsv/synthetic.hpp"

using namespace dsv;

namespace {

// Nearest-centroid speaker classifier on per-sequence mean vectors:
// centroids from even-indexed sequences, evaluation on odd-indexed ones.
double nearest_centroid_speaker_accuracy(const SyntheticCorpus& corpus) {
  std::map<std::string, Eigen::VectorXf> centroid;
  std::map<std::string, int> counts;
  for (std::size_t i = 0; i < corpus.records.size(); i += 2) {
    const auto& r = corpus.records[i];
    Eigen::VectorXf mean = r.features.colwise().mean();
    auto [it, fresh] = centroid.try_emplace(r.speaker_id, mean);
    if (!fresh) it->second += mean;
    counts[r.speaker_id] += 1;
  }
  for (auto& [spk, c] : centroid) c /= static_cast<float>(counts[spk]);

  int correct = 0, total = 0;
  for (std::size_t i = 1; i < corpus.records.size(); i += 2) {
    const auto& r = corpus.records[i];
    Eigen::VectorXf mean = r.features.colwise().mean();
    std::string best;
    float best_d = std::numeric_limits<float>::infinity();
    for (const auto& [spk, c] : centroid) {
      const float d = (mean - c).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = spk;
      }
    }
    correct += best == r.speaker_id ? 1 : 0;
    ++total;
  }
  return static_cast<double>(correct) / total;
}

}  // namespace

TEST_CASE("synthetic corpus generation is deterministic", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.n_speakers = 4;
  cfg.sequences_per_speaker = 3;
  cfg.frames_per_sequence = 60;
  cfg.feature_dim = 8;
  cfg.seed = 42;
  SyntheticCorpus a = make_synthetic_corpus(cfg);
  SyntheticCorpus b = make_synthetic_corpus(cfg);
  REQUIRE(a.records.size() == 12);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].sequence_id == b.records[i].sequence_id);
    REQUIRE(a.records[i].features == b.records[i].features);
    REQUIRE(a.content_labels[i] == b.content_labels[i]);
  }
}

TEST_CASE("speakers are separable at the default settings", "[synthetic]") {
  SyntheticCorpus corpus = make_synthetic_corpus(SyntheticConfig{});
  REQUIRE(corpus.records.size() == 480);
  REQUIRE(nearest_centroid_speaker_accuracy(corpus) >= 0.95);
}

TEST_CASE("zero speaker factor collapses speaker identity", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.n_speakers = 8;
  cfg.sequences_per_speaker = 6;
  cfg.gamma_spk = 0.0;
  cfg.seed = 3;
  SyntheticCorpus corpus = make_synthetic_corpus(cfg);
  // all speakers share the generating distribution; accuracy sits near chance
  REQUIRE(nearest_centroid_speaker_accuracy(corpus) < 0.5);
}

TEST_CASE("degenerate content settings leave only the speaker offset",
          "[synthetic]") {
  SyntheticConfig cfg;
  cfg.n_speakers = 3;
  cfg.sequences_per_speaker = 2;
  cfg.frames_per_sequence = 40;
  cfg.feature_dim = 5;
  cfg.n_content_classes = 1;
  cfg.sigma_noise = 0.0;
  cfg.seed = 9;
  SyntheticCorpus corpus = make_synthetic_corpus(cfg);
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const MatrixF& m = corpus.records[i].features;
    for (Eigen::Index t = 1; t < m.rows(); ++t)
      REQUIRE(m.row(t) == m.row(0));  // constant within every sequence
  }
  // and sequences of the same speaker are identical to each other
  REQUIRE(corpus.records[0].features == corpus.records[1].features);
  REQUIRE(corpus.records[0].features != corpus.records[2].features);
}

TEST_CASE("content labels change only at block boundaries", "[synthetic]") {
  SyntheticConfig cfg;
  cfg.n_speakers = 2;
  cfg.sequences_per_speaker = 2;
  cfg.frames_per_sequence = 55;  // deliberately not a block multiple
  cfg.block_len = 10;
  cfg.seed = 21;
  SyntheticCorpus corpus = make_synthetic_corpus(cfg);
  for (const auto& labels : corpus.content_labels) {
    REQUIRE(labels.size() == 55);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      REQUIRE(labels[t] >= 0);
      REQUIRE(labels[t] < cfg.n_content_classes);
      if (t % cfg.block_len != 0) REQUIRE(labels[t] == labels[t - 1]);
    }
  }
}

TEST_CASE("manifest round-trips through json with records intact",
          "[synthetic]") {
  namespace fs = std::filesystem;
  SyntheticConfig cfg;
  cfg.n_speakers = 3;
  cfg.sequences_per_speaker = 2;
  cfg.frames_per_sequence = 40;
  cfg.feature_dim = 6;
  cfg.seed = 11;
  SyntheticCorpus corpus = make_synthetic_corpus(cfg);

  fs::path dir = fs::temp_directory_path() / "dsv_manifest_test";
  fs::create_directories(dir / "features");

  CorpusManifest manifest;
  manifest.segment_len = 10;
  manifest.segment_shift = 10;
  manifest.prediction_shift = 3;
  manifest.feature_dim = cfg.feature_dim;
  manifest.creation_seed = cfg.seed;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    ManifestEntry e;
    e.sequence_id = r.sequence_id;
    e.speaker_id = r.speaker_id;
    e.feature_path = "features/" + r.sequence_id + ".dsvf";
    e.n_frames = static_cast<int>(r.features.rows());
    e.split = i % 6 == 5 ? "dev" : "train";
    e.content_labels = corpus.content_labels[i];
    write_features((dir / e.feature_path).string(), r.features);
    manifest.entries.push_back(std::move(e));
  }
  std::vector<const MatrixF*> train_mats;
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    if (manifest.entries[i].split == "train")
      train_mats.push_back(&corpus.records[i].features);
  manifest.normalization = compute_normalization(train_mats);
  manifest.corpus_hash = compute_corpus_hash(manifest, corpus.records);

  const std::string path = (dir / "manifest.json").string();
  save_manifest(path, manifest);
  CorpusManifest loaded = load_manifest(path);
  REQUIRE(manifest_to_json(loaded) == manifest_to_json(manifest));

  auto records = load_records(loaded, path);
  REQUIRE(records.size() == corpus.records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    REQUIRE(records[i].features == corpus.records[i].features);

  REQUIRE(compute_corpus_hash(loaded, records) == manifest.corpus_hash);
  fs::remove_all(dir);
}
