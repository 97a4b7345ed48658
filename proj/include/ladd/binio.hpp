// Copyright (c) 2026 The LADD Workbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian scalar encoding for the on-disk formats.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "ladd/errors.hpp"

namespace ladd::binio {

template <typename T>
  requires std::is_arithmetic_v<T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
void put_array(std::string& out, const T* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    out.append(reinterpret_cast<const char*>(data), n * sizeof(T));
  } else {
    for (std::size_t i = 0; i < n; ++i) put(out, data[i]);
  }
}

/// Bounds-checked cursor over a byte buffer.
class Reader {
 public:
  Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    unsigned char b[sizeof(T)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    }
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_array(T* dst, std::size_t n) {
    need(n * sizeof(T));
    if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
      std::memcpy(dst, bytes_.data() + pos_, n * sizeof(T));
      pos_ += n * sizeof(T);
    } else {
      for (std::size_t i = 0; i < n; ++i) dst[i] = get<T>();
    }
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(what_ + ": truncated at byte offset " + std::to_string(pos_) + " (need " +
                        std::to_string(n) + " more bytes, have " +
                        std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace ladd::binio
