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

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "emoseq/tensor.hpp"

namespace emoseq::ad {

struct Node {
  Tensor value;
  Storage grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool leaf = true;
};

// Shared handle onto a tape node. Copies alias the same value and gradient.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);
  // Interior node produced by a primitive; used by the op implementations.
  static Var intermediate(Tensor value, bool requires_grad);

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  double item() const;

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
  // Empty span when nothing has been accumulated (equivalent to all zeros).
  std::span<const double> grad() const { return node_->grad; }
  // Zero-initialised on first use.
  std::span<double> grad_buffer() const;
  // Like grad_buffer(), but a buffer created by this call is left
  // uninitialised and `fresh` is set; the caller must then overwrite every
  // element instead of accumulating.
  std::span<double> grad_buffer_for_write(bool& fresh) const;
  void zero_grad() const { node_->grad.clear(); }
  void release_grad_if_interior() const;

  const Node* node() const noexcept { return node_.get(); }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Ordered record of executed primitives. Entries are appended in execution
// order, so replaying them backwards is a valid reverse-topological sweep.
// A tape is single-writer.
class Tape {
 public:
  Tape() = default;
  // A non-recording tape drops every entry; use it for inference.
  explicit Tape(bool recording) : recording_(recording) {}

  void record(std::function<void()> backward_fn) {
    if (recording_) entries_.push_back(std::move(backward_fn));
  }
  bool recording() const noexcept { return recording_; }

  // Seeds d(loss)/d(loss) = 1 and runs every entry in reverse, then clears
  // the tape. Gradients accumulate into whatever is already stored on leaves.
  void backward(const Var& loss);

  void clear() noexcept { entries_.clear(); }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<std::function<void()>> entries_;
  bool recording_ = true;
};

enum class Mode { kTrain, kEval };

struct BatchNormState {
  explicit BatchNormState(std::size_t channels)
      : running_mean({channels}, 0.0), running_var({channels}, 1.0) {}

  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;
};

// Elementwise, identical shapes.
Var add(Tape& tape, const Var& a, const Var& b);
Var sub(Tape& tape, const Var& a, const Var& b);
Var mul(Tape& tape, const Var& a, const Var& b);
Var scale(Tape& tape, const Var& a, double factor);

// a: m x k, b: k x n.
Var matmul(Tape& tape, const Var& a, const Var& b);
// x: n x in, weight: in x out, bias: out.
Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias);

Var relu(Tape& tape, const Var& x);
Var sigmoid(Tape& tape, const Var& x);
Var tanh(Tape& tape, const Var& x);

Var concat(Tape& tape, std::span<const Var> parts, std::size_t axis);
Var reshape(Tape& tape, const Var& x, Shape shape);
Var slice(Tape& tape, const Var& x, std::size_t axis, std::size_t begin, std::size_t end);

// Normalises over the last axis; gamma and beta have the last axis' extent.
Var layer_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
               double eps = 1e-5);
// Softmax over the last axis.
Var softmax(Tape& tape, const Var& x);
// Removes `axis`; the gradient goes to the first maximum of each slice.
Var max_over_axis(Tape& tape, const Var& x, std::size_t axis);
// softmax(q k^T / sqrt(d_k)) v with q: tq x d, k: tk x d, v: tk x dv.
Var scaled_dot_attention(Tape& tape, const Var& q, const Var& k, const Var& v);

// x: N x H x W x Cin, kernel: k x k x Cin x Cout (k odd), bias: Cout.
// Stride 1, zero "same" padding.
Var conv2d(Tape& tape, const Var& x, const Var& kernel, const Var& bias);
// Per-channel normalisation over (N, H, W) of an N x H x W x C input.
Var batchnorm2d(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, Mode mode);
// 2x2 window, stride 2; ties go to the first element in row-major order.
Var maxpool2d(Tape& tape, const Var& x);
// maxpool2d(batchnorm2d(x)) without materialising the normalised input.
// Each window selects its maximum of x for channels with gamma >= 0 and its
// minimum otherwise, so values match the composition and gradients differ
// only where rounding creates ties.
Var batchnorm_maxpool2d(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
                        BatchNormState& state, Mode mode);

// Mean over the batch of -log softmax(logits)[label]; logits: N x C.
Var softmax_cross_entropy(Tape& tape, const Var& logits, std::span<const int> labels);

}  // namespace emoseq::ad
