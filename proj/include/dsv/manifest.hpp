// dsv/manifest.hpp
//
// Corpus manifest: the JSON index tying sequence ids, speaker labels and
// feature files together with the segmentation/feature parameters and the
// train-split normalization statistics.
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

#ifndef DSV_MANIFEST_HPP
#define DSV_MANIFEST_HPP

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/feature_io.hpp"
#include "dsv/features.hpp"

namespace dsv {

struct ManifestEntry {
  std::string sequence_id;
  std::string speaker_id;
  std::string feature_path;  // relative to the manifest's directory
  int n_frames = 0;
  std::string split = "train";          // "train" or "dev"
  std::vector<int> content_labels;      // per frame; empty if unknown
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  int segment_len = 20;
  int segment_shift = 20;
  int prediction_shift = 3;
  int feature_dim = 200;
  bool from_audio = false;
  StftConfig stft;
  std::uint64_t creation_seed = 0;
  FeatureNormalization normalization;
  std::string corpus_hash;  // content hash over ids, labels and feature bytes

  const ManifestEntry& find(const std::string& sequence_id) const {
    for (const auto& e : entries)
      if (e.sequence_id == sequence_id) return e;
    throw LookupError("manifest: unknown sequence '" + sequence_id + "'");
  }
};

namespace detail {

inline void check_unique_ids(const CorpusManifest& m) {
  std::set<std::string> seen;
  for (const auto& e : m.entries) {
    require(e.n_frames >= 1, "manifest: sequence '" + e.sequence_id +
                                 "' has no frames");
    if (!seen.insert(e.sequence_id).second)
      throw ContractViolation("manifest: duplicate sequence id '" +
                              e.sequence_id + "'");
  }
}

}  // namespace detail

inline std::string compute_corpus_hash(
    const CorpusManifest& manifest,
    const std::vector<SequenceRecord>& records) {
  std::uint64_t h = fnv1a64("dsv-corpus-v1");
  for (std::size_t i = 0; i < records.size(); ++i) {
    h = fnv1a64(records[i].sequence_id, h);
    h = fnv1a64(records[i].speaker_id, h);
    const MatrixF& m = records[i].features;
    for (Eigen::Index t = 0; t < m.rows(); ++t)
      h = fnv1a64(m.row(t).data(), sizeof(float) * m.cols(), h);
    if (i < manifest.entries.size())
      for (int label : manifest.entries[i].content_labels)
        h = fnv1a64(&label, sizeof(label), h);
  }
  return to_hex(h);
}

inline nlohmann::json manifest_to_json(const CorpusManifest& m) {
  nlohmann::json j;
  j["format"] = "dsv-manifest";
  j["version"] = 1;
  j["segment_len"] = m.segment_len;
  j["segment_shift"] = m.segment_shift;
  j["prediction_shift"] = m.prediction_shift;
  j["feature_dim"] = m.feature_dim;
  j["from_audio"] = m.from_audio;
  j["stft"] = {{"sample_rate", m.stft.sample_rate},
               {"window_ms", m.stft.window_ms},
               {"hop_ms", m.stft.hop_ms},
               {"n_bins", m.stft.n_bins}};
  j["creation_seed"] = m.creation_seed;
  j["corpus_hash"] = m.corpus_hash;
  if (!m.normalization.empty()) {
    std::vector<float> mean(m.normalization.mean.data(),
                            m.normalization.mean.data() +
                                m.normalization.mean.size());
    std::vector<float> std(m.normalization.std.data(),
                           m.normalization.std.data() +
                               m.normalization.std.size());
    j["normalization"] = {{"mean", mean}, {"std", std}};
  }
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json je = {{"sequence_id", e.sequence_id},
                         {"speaker_id", e.speaker_id},
                         {"feature_path", e.feature_path},
                         {"n_frames", e.n_frames},
                         {"split", e.split}};
    if (!e.content_labels.empty()) je["content_labels"] = e.content_labels;
    j["entries"].push_back(je);
  }
  return j;
}

inline CorpusManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "dsv-manifest")
    throw FormatError("manifest: missing or wrong format marker");
  if (j.value("version", 0) != 1)
    throw FormatError("manifest: unsupported version");
  CorpusManifest m;
  m.segment_len = j.at("segment_len").get<int>();
  m.segment_shift = j.at("segment_shift").get<int>();
  m.prediction_shift = j.at("prediction_shift").get<int>();
  m.feature_dim = j.at("feature_dim").get<int>();
  m.from_audio = j.value("from_audio", false);
  if (j.contains("stft")) {
    const auto& js = j.at("stft");
    m.stft.sample_rate = js.at("sample_rate").get<double>();
    m.stft.window_ms = js.at("window_ms").get<double>();
    m.stft.hop_ms = js.at("hop_ms").get<double>();
    m.stft.n_bins = js.at("n_bins").get<int>();
  }
  m.creation_seed = j.at("creation_seed").get<std::uint64_t>();
  m.corpus_hash = j.value("corpus_hash", "");
  if (j.contains("normalization")) {
    auto mean = j.at("normalization").at("mean").get<std::vector<float>>();
    auto std = j.at("normalization").at("std").get<std::vector<float>>();
    require(mean.size() == std.size(), "manifest: normalization size mismatch");
    m.normalization.mean =
        Eigen::Map<const Eigen::VectorXf>(mean.data(), mean.size());
    m.normalization.std =
        Eigen::Map<const Eigen::VectorXf>(std.data(), std.size());
  }
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.sequence_id = je.at("sequence_id").get<std::string>();
    e.speaker_id = je.at("speaker_id").get<std::string>();
    e.feature_path = je.at("feature_path").get<std::string>();
    e.n_frames = je.at("n_frames").get<int>();
    e.split = je.at("split").get<std::string>();
    require(e.split == "train" || e.split == "dev",
            "manifest: bad split '" + e.split + "'");
    if (je.contains("content_labels"))
      e.content_labels = je.at("content_labels").get<std::vector<int>>();
    m.entries.push_back(std::move(e));
  }
  detail::check_unique_ids(m);
  return m;
}

inline void save_manifest(const std::string& path, const CorpusManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) throw FileError("short write to '" + path + "'");
}

inline CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path + "': " + e.what());
  }
  return manifest_from_json(j);
}

// Loads every referenced feature file, resolving paths against the manifest
// location, and checks the recorded shapes.
inline std::vector<SequenceRecord> load_records(
    const CorpusManifest& manifest, const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<SequenceRecord> records;
  records.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    SequenceRecord rec;
    rec.sequence_id = e.sequence_id;
    rec.speaker_id = e.speaker_id;
    rec.features = read_features((base / e.feature_path).string());
    if (rec.features.rows() != e.n_frames ||
        rec.features.cols() != manifest.feature_dim)
      throw FormatError("manifest: feature file '" + e.feature_path +
                        "' shape does not match recorded " +
                        std::to_string(e.n_frames) + "x" +
                        std::to_string(manifest.feature_dim));
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace dsv

#endif  // DSV_MANIFEST_HPP
