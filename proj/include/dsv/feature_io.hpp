// dsv/feature_io.hpp
//
// Binary feature-matrix container: magic "DSVF", u32 version, u32 T, u32 F,
// then T*F row-major float32, all little-endian.
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

#ifndef DSV_FEATURE_IO_HPP
#define DSV_FEATURE_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dsv/common.hpp"

namespace dsv {

inline constexpr char kFeatureMagic[4] = {'D', 'S', 'V', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

inline std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  const auto* p = reinterpret_cast<const unsigned char*>(in.data() + offset);
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FileError("short write to '" + path + "'");
}

}  // namespace detail

inline std::string encode_features(const MatrixF& features) {
  require(features.rows() >= 1 && features.cols() >= 1,
          "encode_features: empty matrix rejected");
  require(features.allFinite(), "encode_features: non-finite entries");
  std::string out;
  out.reserve(16 + static_cast<std::size_t>(features.size()) * 4);
  out.append(kFeatureMagic, 4);
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(features.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    for (Eigen::Index f = 0; f < features.cols(); ++f) {
      float v = features(t, f);
      char b[4];
      std::memcpy(b, &v, 4);
      out.append(b, 4);
    }
  }
  return out;
}

inline MatrixF decode_features(const std::string& bytes,
                               const std::string& origin = "<memory>") {
  auto fail = [&](std::size_t offset, const std::string& what) -> void {
    throw FormatError("feature file '" + origin + "': " + what +
                      " at byte offset " + std::to_string(offset));
  };
  if (bytes.size() < 16) fail(bytes.size(), "truncated header");
  if (std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) fail(0, "bad magic");
  std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kFeatureVersion)
    fail(4, "unsupported version " + std::to_string(version));
  std::uint32_t rows = detail::get_u32(bytes, 8);
  std::uint32_t cols = detail::get_u32(bytes, 12);
  if (rows == 0 || cols == 0) fail(8, "zero dimension");
  std::size_t expected = 16 + static_cast<std::size_t>(rows) * cols * 4;
  if (bytes.size() < expected) fail(bytes.size(), "truncated payload");
  if (bytes.size() > expected) fail(expected, "trailing bytes");
  MatrixF m(rows, cols);
  std::size_t offset = 16;
  for (std::uint32_t t = 0; t < rows; ++t) {
    for (std::uint32_t f = 0; f < cols; ++f) {
      float v;
      std::memcpy(&v, bytes.data() + offset, 4);
      m(t, f) = v;
      offset += 4;
    }
  }
  return m;
}

inline void write_features(const std::string& path, const MatrixF& features) {
  detail::write_file_bytes(path, encode_features(features));
}

inline MatrixF read_features(const std::string& path) {
  return decode_features(detail::read_file_bytes(path), path);
}

}  // namespace dsv

#endif  // DSV_FEATURE_IO_HPP
