// dsv/checkpoint.hpp
//
// Versioned checkpoint container: a JSON header (model config, normalization
// statistics, corpus hash, training progress, tensor table) followed by the
// raw little-endian double payload and an FNV-1a integrity hash over it.
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

#ifndef DSV_CHECKPOINT_HPP
#define DSV_CHECKPOINT_HPP

#include <json.hpp>

#include <cstring>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/feature_io.hpp"
#include "dsv/loss.hpp"
#include "dsv/model.hpp"

namespace dsv {

inline constexpr char kCheckpointMagic[4] = {'D', 'S', 'V', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int epoch = 0;  // epochs completed
  double best_dev = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  nlohmann::json train_options;  // snapshot, free-form
};

namespace detail {

inline void append_tensor(std::string& payload, nlohmann::json& table,
                          const std::string& name, const Matrix& m) {
  table.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
  const std::size_t at = payload.size();
  payload.resize(at + bytes);
  std::memcpy(payload.data() + at, m.data(), bytes);
}

inline Matrix take_tensor(const std::string& payload, std::size_t& offset,
                          Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  const std::size_t bytes = sizeof(double) * static_cast<std::size_t>(m.size());
  require(offset + bytes <= payload.size(), "checkpoint: payload truncated");
  std::memcpy(m.data(), payload.data() + offset, bytes);
  offset += bytes;
  return m;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, SeqVaeModel& model,
                            const SVectorTable& table,
                            const FeatureNormalization& normalization,
                            const std::string& corpus_hash,
                            const CheckpointMeta& meta,
                            const AdamOptimizer* optimizer = nullptr) {
  nlohmann::json header;
  header["model_config"] = model_config_to_json(model.config());
  header["corpus_hash"] = corpus_hash;
  header["epoch"] = meta.epoch;
  header["best_dev"] = meta.best_dev;
  header["seed"] = meta.seed;
  header["train_options"] = meta.train_options;
  header["code_version"] = kVersion;
  if (!normalization.empty()) {
    std::vector<float> mean(normalization.mean.data(),
                            normalization.mean.data() +
                                normalization.mean.size());
    std::vector<float> std(normalization.std.data(),
                           normalization.std.data() +
                               normalization.std.size());
    header["normalization"] = {{"mean", mean}, {"std", std}};
  }
  header["svector_ids"] = table.ids();
  header["svector_counts"] = table.counts();

  nlohmann::json tensor_table = nlohmann::json::array();
  std::string payload;
  for (Param* p : model.parameters())
    detail::append_tensor(payload, tensor_table, p->name, p->value);
  detail::append_tensor(payload, tensor_table, "svectors",
                        table.param().value);
  header["has_optimizer"] = optimizer != nullptr;
  if (optimizer) {
    header["adam_step"] = optimizer->step_count();
    const auto& m = optimizer->moments_m();
    const auto& v = optimizer->moments_v();
    for (std::size_t i = 0; i < m.size(); ++i) {
      detail::append_tensor(payload, tensor_table,
                            "adam_m." + std::to_string(i), m[i]);
      detail::append_tensor(payload, tensor_table,
                            "adam_v." + std::to_string(i), v[i]);
    }
  }
  header["tensors"] = tensor_table;

  std::string bytes;
  bytes.append(kCheckpointMagic, 4);
  char v32[4];
  std::uint32_t version = kCheckpointVersion;
  std::memcpy(v32, &version, 4);
  bytes.append(v32, 4);
  const std::string header_str = header.dump();
  std::uint64_t header_len = header_str.size();
  char v64[8];
  std::memcpy(v64, &header_len, 8);
  bytes.append(v64, 8);
  bytes += header_str;
  bytes += payload;
  std::uint64_t hash = fnv1a64(payload.data(), payload.size());
  std::memcpy(v64, &hash, 8);
  bytes.append(v64, 8);
  detail::write_file_bytes(path, bytes);
}

struct LoadedCheckpoint {
  std::unique_ptr<SeqVaeModel> model;
  std::unique_ptr<SVectorTable> table;
  FeatureNormalization normalization;
  std::string corpus_hash;
  CheckpointMeta meta;
  bool has_optimizer = false;
  long adam_step = 0;
  std::vector<Matrix> adam_m, adam_v;  // aligned with model params + svectors
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  auto fail = [&](const std::string& what) -> void {
    throw FormatError("checkpoint '" + path + "': " + what);
  };
  if (bytes.size() < 16) fail("truncated header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) fail("bad magic");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion)
    fail("unsupported version " + std::to_string(version));
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (bytes.size() < 16 + header_len + 8) fail("truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("bad header: ") + e.what());
  }
  const std::string payload =
      bytes.substr(16 + header_len, bytes.size() - 16 - header_len - 8);
  std::uint64_t stored_hash;
  std::memcpy(&stored_hash, bytes.data() + bytes.size() - 8, 8);
  if (stored_hash != fnv1a64(payload.data(), payload.size()))
    fail("content hash mismatch");

  LoadedCheckpoint out;
  out.model = std::make_unique<SeqVaeModel>(
      model_config_from_json(header.at("model_config")));
  out.corpus_hash = header.value("corpus_hash", "");
  out.meta.epoch = header.value("epoch", 0);
  out.meta.best_dev =
      header.value("best_dev", std::numeric_limits<double>::infinity());
  out.meta.seed = header.value("seed", std::uint64_t{0});
  if (header.contains("train_options"))
    out.meta.train_options = header.at("train_options");
  if (header.contains("normalization")) {
    auto mean = header.at("normalization").at("mean").get<std::vector<float>>();
    auto std = header.at("normalization").at("std").get<std::vector<float>>();
    out.normalization.mean =
        Eigen::Map<const Eigen::VectorXf>(mean.data(), mean.size());
    out.normalization.std =
        Eigen::Map<const Eigen::VectorXf>(std.data(), std.size());
  }

  auto ids = header.at("svector_ids").get<std::vector<std::string>>();
  auto counts = header.at("svector_counts").get<std::vector<int>>();
  if (ids.size() != counts.size()) fail("svector table size mismatch");
  std::vector<std::pair<std::string, int>> sequences;
  for (std::size_t i = 0; i < ids.size(); ++i)
    sequences.emplace_back(ids[i], counts[i]);
  out.table = std::make_unique<SVectorTable>(
      sequences, out.model->config().latent_dim_z2);

  std::map<std::string, Matrix> tensors;
  std::size_t offset = 0;
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    tensors[name] = detail::take_tensor(payload, offset,
                                        t.at("rows").get<Eigen::Index>(),
                                        t.at("cols").get<Eigen::Index>());
  }
  if (offset != payload.size()) fail("trailing payload bytes");

  auto fetch = [&](const std::string& name) -> const Matrix& {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail("missing tensor '" + name + "'");
    return it->second;
  };
  for (Param* p : out.model->parameters()) {
    const Matrix& m = fetch(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      fail("tensor '" + p->name + "' shape mismatch");
    p->value = m;
  }
  out.table->param().value = fetch("svectors");

  out.has_optimizer = header.value("has_optimizer", false);
  if (out.has_optimizer) {
    out.adam_step = header.value("adam_step", 0L);
    const std::size_t n_params = out.model->parameters().size() + 1;
    for (std::size_t i = 0; i < n_params; ++i) {
      out.adam_m.push_back(fetch("adam_m." + std::to_string(i)));
      out.adam_v.push_back(fetch("adam_v." + std::to_string(i)));
    }
  }
  return out;
}

}  // namespace dsv

#endif  // DSV_CHECKPOINT_HPP
