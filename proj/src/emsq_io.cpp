/*
 * Copyright 2026 The emoseq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "emoseq/emsq_io.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "emoseq/error.hpp"

namespace emoseq {

namespace binio {

namespace {

void require_good(std::istream& in) {
  if (!in) fail(ErrorCode::kMalformedFile, "unexpected end of binary stream");
}

}  // namespace

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_bytes(std::ostream& out, const std::string& bytes) {
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint8_t get_u8(std::istream& in) {
  char c = 0;
  in.get(c);
  require_good(in);
  return static_cast<std::uint8_t>(c);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2] = {0, 0};
  in.read(reinterpret_cast<char*>(b), 2);
  require_good(in);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(b), 4);
  require_good(in);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require_good(in);
  return s;
}

}  // namespace binio

void write_emsq(std::ostream& out, const Tensor& tensor) {
  if (tensor.rank() > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorCode::kInvalidArgument, "tensor rank too large for EMSQ");
  }
  binio::put_bytes(out, "EMSQ");
  binio::put_u16(out, kEmsqVersion);
  binio::put_u16(out, static_cast<std::uint16_t>(tensor.rank()));
  for (auto d : tensor.shape()) {
    if (d > std::numeric_limits<std::uint16_t>::max()) {
      fail(ErrorCode::kInvalidArgument, "tensor extent " + std::to_string(d) + " exceeds u16");
    }
    binio::put_u16(out, static_cast<std::uint16_t>(d));
  }
  for (double v : tensor.values()) binio::put_f32(out, static_cast<float>(v));
}

Tensor read_emsq(std::istream& in) {
  if (binio::get_bytes(in, 4) != "EMSQ") fail(ErrorCode::kMalformedFile, "missing EMSQ magic");
  const auto version = binio::get_u16(in);
  if (version != kEmsqVersion) {
    fail(ErrorCode::kMalformedFile, "unsupported EMSQ version " + std::to_string(version));
  }
  const auto ndims = binio::get_u16(in);
  Shape shape(ndims);
  for (auto& d : shape) d = binio::get_u16(in);
  Tensor t(shape);
  for (auto& v : t.values()) v = static_cast<double>(binio::get_f32(in));
  return t;
}

void save_emsq(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  write_emsq(out, tensor);
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Tensor load_emsq(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return read_emsq(in);
}

}  // namespace emoseq
