/* Copyright 2026 The ladapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef LADAPT_TENSOR_IO_HPP_
#define LADAPT_TENSOR_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/errors.hpp"
#include "ladapt/tensor.hpp"

namespace ladapt {

/// Named-tensor container file.
///
/// Layout (all integers little-endian, no padding or alignment):
///   magic "LADT" (4 bytes)
///   version          u16   (currently 1)
///   entry count      u16
///   per entry:
///     name length    u16, then UTF-8 name bytes
///     rank           u8
///     extents        u32 each
///     payload        IEEE-754 float64, row-major
///
/// Writes are canonical: the same tensors produce the same bytes.
constexpr std::uint16_t kTensorFileVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

namespace detail {

struct ByteWriter {
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
      bytes.push_back(static_cast<std::uint8_t>(v >> s));
    }
  }
  void f64(double v) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    for (int s = 0; s < 64; s += 8) {
      bytes.push_back(static_cast<std::uint8_t>(u >> s));
    }
  }
  void raw(const std::string& s) {
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
};

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  bool have(std::size_t n) const { return bytes.size() - pos >= n; }

  std::uint8_t u8() { return bytes[pos++]; }
  std::uint16_t u16() {
    std::uint16_t v = static_cast<std::uint16_t>(bytes[pos]) |
                      static_cast<std::uint16_t>(bytes[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) {
      v |= static_cast<std::uint32_t>(bytes[pos++]) << s;
    }
    return v;
  }
  double f64() {
    std::uint64_t u = 0;
    for (int s = 0; s < 64; s += 8) {
      u |= static_cast<std::uint64_t>(bytes[pos++]) << s;
    }
    return std::bit_cast<double>(u);
  }
  std::string str(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline void save_tensors(const std::string& path,
                         const NamedTensors& entries) {
  if (entries.size() > UINT16_MAX) {
    throw IoError(IoError::Kind::kBadShape,
                  "save_tensors: too many entries for " + path);
  }
  detail::ByteWriter w;
  w.raw("LADT");
  w.u16(kTensorFileVersion);
  w.u16(static_cast<std::uint16_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    if (name.size() > UINT16_MAX) {
      throw IoError(IoError::Kind::kBadShape,
                    "save_tensors: name too long: " + name);
    }
    if (tensor.rank() > UINT8_MAX) {
      throw IoError(IoError::Kind::kBadShape,
                    "save_tensors: rank too large for '" + name + "'");
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) {
      if (d > UINT32_MAX) {
        throw IoError(IoError::Kind::kBadShape,
                      "save_tensors: extent too large for '" + name + "'");
      }
      w.u32(static_cast<std::uint32_t>(d));
    }
    for (double v : tensor.values()) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError(IoError::Kind::kOpenFailed,
                  "save_tensors: cannot open " + path);
  }
  out.write(reinterpret_cast<const char*>(w.bytes.data()),
            static_cast<std::streamsize>(w.bytes.size()));
  if (!out) {
    throw IoError(IoError::Kind::kOpenFailed,
                  "save_tensors: short write to " + path);
  }
}

inline NamedTensors load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(IoError::Kind::kOpenFailed,
                  "load_tensors: cannot open " + path);
  }
  std::vector<std::uint8_t> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r{bytes};

  if (!r.have(8)) {
    throw IoError(IoError::Kind::kTruncatedHeader,
                  "load_tensors: truncated header in " + path);
  }
  if (r.str(4) != "LADT") {
    throw IoError(IoError::Kind::kBadMagic,
                  "load_tensors: bad magic in " + path);
  }
  std::uint16_t version = r.u16();
  if (version != kTensorFileVersion) {
    throw IoError(IoError::Kind::kBadVersion,
                  "load_tensors: unsupported version " +
                      std::to_string(version) + " in " + path);
  }
  std::uint16_t count = r.u16();

  NamedTensors out;
  for (std::uint16_t e = 0; e < count; ++e) {
    if (!r.have(2)) {
      throw IoError(IoError::Kind::kTruncatedHeader,
                    "load_tensors: truncated entry header in " + path);
    }
    std::uint16_t name_len = r.u16();
    if (!r.have(name_len + 1u)) {
      throw IoError(IoError::Kind::kTruncatedHeader,
                    "load_tensors: truncated entry header in " + path);
    }
    std::string name = r.str(name_len);
    std::uint8_t rank = r.u8();
    if (rank == 0 || rank > 8) {
      throw IoError(IoError::Kind::kBadShape,
                    "load_tensors: bad rank for '" + name + "' in " + path);
    }
    if (!r.have(4u * rank)) {
      throw IoError(IoError::Kind::kTruncatedHeader,
                    "load_tensors: truncated shape for '" + name + "'");
    }
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
      shape[i] = r.u32();
      if (shape[i] == 0 || numel > (std::size_t{1} << 40) / shape[i]) {
        throw IoError(IoError::Kind::kBadShape,
                      "load_tensors: bad extent for '" + name + "' in " + path);
      }
      numel *= shape[i];
    }
    if (!r.have(8 * numel)) {
      throw IoError(IoError::Kind::kTruncatedPayload,
                    "load_tensors: truncated payload for '" + name + "' in " +
                        path);
    }
    std::vector<double> values(numel);
    for (std::size_t i = 0; i < numel; ++i) values[i] = r.f64();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

/// Finds an entry by name; throws IoError if absent.
inline const Tensor& find_tensor(const NamedTensors& entries,
                                 const std::string& name) {
  for (const auto& [n, t] : entries) {
    if (n == name) return t;
  }
  throw IoError(IoError::Kind::kBadShape,
                "tensor file: missing entry '" + name + "'");
}

inline bool has_tensor(const NamedTensors& entries, const std::string& name) {
  for (const auto& [n, t] : entries) {
    if (n == name) return true;
  }
  return false;
}

}  // namespace ladapt

#endif  // LADAPT_TENSOR_IO_HPP_
