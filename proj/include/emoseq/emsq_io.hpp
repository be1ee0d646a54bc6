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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "emoseq/tensor.hpp"

namespace emoseq {

// EMSQ tensor record:
//   "EMSQ" | u16 version (1) | u16 ndims | ndims x u16 extent | f32 values
// All integers and floats are little-endian, values row-major.
inline constexpr std::uint16_t kEmsqVersion = 1;

void write_emsq(std::ostream& out, const Tensor& tensor);
Tensor read_emsq(std::istream& in);

void save_emsq(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_emsq(const std::filesystem::path& path);

namespace binio {

void put_u8(std::ostream& out, std::uint8_t v);
void put_u16(std::ostream& out, std::uint16_t v);
void put_u32(std::ostream& out, std::uint32_t v);
void put_f32(std::ostream& out, float v);
void put_bytes(std::ostream& out, const std::string& bytes);

std::uint8_t get_u8(std::istream& in);
std::uint16_t get_u16(std::istream& in);
std::uint32_t get_u32(std::istream& in);
float get_f32(std::istream& in);
std::string get_bytes(std::istream& in, std::size_t n);

}  // namespace binio

}  // namespace emoseq
