// dsv/common.hpp
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

#ifndef DSV_COMMON_HPP
#define DSV_COMMON_HPP

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace dsv {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixF = Eigen::MatrixXf;  // storage type of feature matrices

// Every error raised by the toolkit carries a stable machine-parsable class
// string; the CLI prints it as "error[<class>]: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& message)
      : std::runtime_error(message), class_(std::move(error_class)) {}
  const std::string& error_class() const { return class_; }

 private:
  std::string class_;
};

class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& msg)
      : Error("contract-violation", msg) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error("format-error", msg) {}
};

class FileError : public Error {
 public:
  explicit FileError(const std::string& msg) : Error("file-error", msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg)
      : Error("config-validation", msg) {}
};

class VariantError : public Error {
 public:
  explicit VariantError(const std::string& msg)
      : Error("variant-mismatch", msg) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& msg) : Error("lookup-error", msg) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& msg)
      : Error("protocol-error", msg) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg)
      : Error("divergence", msg) {}
};

class IncompatibilityError : public Error {
 public:
  explicit IncompatibilityError(const std::string& msg)
      : Error("incompatibility", msg) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

// FNV-1a, used for content hashes and run ids.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t state = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ull;
  }
  return state;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t state = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), state);
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Derives an independent stream seed from a base seed and a tag, so that
// per-epoch / per-component generators never share a stream.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = fnv1a64(tag);
  h = fnv1a64(&seed, sizeof(seed), h);
  // splitmix64 finalizer
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

// Seeded standard-normal source for reparameterization noise and init.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t integer(std::uint64_t n) {  // in [0, n)
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = integer(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dsv

#endif  // DSV_COMMON_HPP
