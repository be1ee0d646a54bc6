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

#include "emoseq/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <unordered_map>

#include "emoseq/error.hpp"

namespace emoseq {

namespace detail {
namespace {

constexpr std::size_t kPoolMinBytes = std::size_t{1} << 20;
constexpr std::size_t kPoolMaxCachedBytes = std::size_t{3} << 29;  // 1.5 GiB

struct BlockPool {
  std::mutex mu;
  std::unordered_map<std::size_t, std::vector<void*>> free_blocks;
  std::size_t cached_bytes = 0;

  ~BlockPool() {
    for (auto& [bytes, blocks] : free_blocks) {
      for (void* p : blocks) std::free(p);
    }
  }
};

BlockPool& pool() {
  static BlockPool* instance = new BlockPool();  // outlives static tensors
  return *instance;
}

}  // namespace

void* pool_allocate(std::size_t bytes) {
  if (bytes >= kPoolMinBytes) {
    BlockPool& bp = pool();
    std::lock_guard lock(bp.mu);
    auto it = bp.free_blocks.find(bytes);
    if (it != bp.free_blocks.end() && !it->second.empty()) {
      void* p = it->second.back();
      it->second.pop_back();
      bp.cached_bytes -= bytes;
      return p;
    }
  }
  void* p = std::malloc(bytes == 0 ? 1 : bytes);
  if (!p) throw std::bad_alloc();
  return p;
}

void pool_deallocate(void* p, std::size_t bytes) noexcept {
  if (bytes >= kPoolMinBytes) {
    BlockPool& bp = pool();
    std::lock_guard lock(bp.mu);
    if (bp.cached_bytes + bytes <= kPoolMaxCachedBytes) {
      try {
        bp.free_blocks[bytes].push_back(p);
        bp.cached_bytes += bytes;
        return;
      } catch (...) {
      }
    }
  }
  std::free(p);
}

}  // namespace detail

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : Tensor(std::move(shape), Storage(values.begin(), values.end())) {}

Tensor Tensor::uninitialized(Shape shape) {
  Tensor t;
  t.values_.resize(shape_numel(shape));
  t.shape_ = std::move(shape);
  return t;
}

Tensor::Tensor(Shape shape, Storage values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_numel(shape_)) {
    fail(ErrorCode::kShapeMismatch,
         "tensor of shape " + shape_to_string(shape_) + " given " +
             std::to_string(values_.size()) + " values");
  }
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    fail(ErrorCode::kShapeMismatch, "index rank does not match tensor rank");
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) fail(ErrorCode::kIndexOutOfRange, "tensor index out of range");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return values_[offset(index)]; }

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return values_[offset(index)];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != values_.size()) {
    fail(ErrorCode::kShapeMismatch, "cannot reshape " + shape_to_string(shape_) + " to " +
                                        shape_to_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

bool Tensor::all_finite() const noexcept {
  // Integer test on the exponent field so the loop vectorises.
  constexpr std::uint64_t kExp = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : values_) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExp) == kExp);
  return bad == 0;
}

}  // namespace emoseq
