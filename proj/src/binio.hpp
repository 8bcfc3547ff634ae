// Copyright 2026 The otrlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian POD stream helpers shared by the checkpoint and dataset
// formats. Hosts are assumed little-endian (checked at compile time).

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "otrlab/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace otr::binio {

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    Require(out_.good(), ErrorKind::kIo, "cannot open for writing: " + path);
  }

  template <typename T>
  void Put(const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void PutBytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void PutDoubles(const double* data, std::size_t n) {
    Put<std::uint64_t>(n);
    PutBytes(data, n * sizeof(double));
  }
  void Close() {
    out_.close();
    Require(!out_.fail(), ErrorKind::kIo, "write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    Require(in_.good(), ErrorKind::kIo, "cannot open for reading: " + path);
  }

  template <typename T>
  T Get() {
    static_assert(std::is_trivially_copyable_v<T>);
    T value;
    GetBytes(&value, sizeof(T));
    return value;
  }
  void GetBytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    Require(static_cast<std::size_t>(in_.gcount()) == n, ErrorKind::kData,
            "truncated file: " + path_);
  }
  std::vector<double> GetDoubles(std::uint64_t max_count = 1ull << 32) {
    const auto n = Get<std::uint64_t>();
    Require(n <= max_count, ErrorKind::kData, "corrupt array length in " + path_);
    std::vector<double> v(n);
    GetBytes(v.data(), n * sizeof(double));
    return v;
  }
  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace otr::binio
