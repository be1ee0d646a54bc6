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

#include "emoseq/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "emoseq/error.hpp"

namespace emoseq::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void require_shape(bool ok, const char* op, const std::string& detail) {
  if (!ok) fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + detail);
}

Var emit(Tensor&& out, bool requires_grad, const char* op) {
  if (!out.all_finite()) {
    fail(ErrorCode::kNonFiniteValue, std::string(op) + " produced a non-finite value");
  }
  return Var::intermediate(std::move(out), requires_grad);
}

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(std::span<double> s, std::size_t rows, std::size_t cols) {
  return MatMap(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatMap as_matrix(std::span<const double> s, std::size_t rows, std::size_t cols) {
  return ConstMatMap(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <class Fn>
Var unary(Tape& tape, const Var& x, const char* name, Fn&& fn,
          void (*local_grad)(std::span<const double> in, std::span<const double> out,
                             std::span<const double> g, std::span<double> gx)) {
  Tensor out = Tensor::uninitialized(x.shape());
  const auto in = x.value().values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  Var y = emit(std::move(out), x.requires_grad(), name);
  if (y.requires_grad()) {
    tape.record([x, y, local_grad]() mutable {
      if (!y.has_grad()) return;
      local_grad(x.value().values(), y.value().values(), y.grad(), x.grad_buffer());
      y.release_grad_if_interior();
    });
  }
  return y;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var Var::intermediate(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->leaf = false;
  return Var(std::move(node));
}

double Var::item() const {
  if (size() != 1) fail(ErrorCode::kNotScalar, "item() on a non-scalar tensor");
  return node_->value[0];
}

std::span<double> Var::grad_buffer() const {
  if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

std::span<double> Var::grad_buffer_for_write(bool& fresh) const {
  fresh = node_->grad.empty();
  if (fresh) node_->grad.resize(node_->value.size());
  return node_->grad;
}

void Var::release_grad_if_interior() const {
  if (!node_->leaf) {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
}

void Tape::backward(const Var& loss) {
  if (!loss.defined() || loss.size() != 1) {
    fail(ErrorCode::kNotScalar, "backward() requires a scalar loss");
  }
  if (!loss.requires_grad()) {
    entries_.clear();
    return;
  }
  Var seed = loss;
  seed.grad_buffer()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

Var add(Tape& tape, const Var& a, const Var& b) {
  require_shape(a.shape() == b.shape(), "add",
                shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  Tensor out = Tensor::uninitialized(a.shape());
  const auto av = a.value().values();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Var y = emit(std::move(out), a.requires_grad() || b.requires_grad(), "add");
  if (y.requires_grad()) {
    tape.record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var sub(Tape& tape, const Var& a, const Var& b) {
  require_shape(a.shape() == b.shape(), "sub",
                shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  Tensor out = Tensor::uninitialized(a.shape());
  const auto av = a.value().values();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Var y = emit(std::move(out), a.requires_grad() || b.requires_grad(), "sub");
  if (y.requires_grad()) {
    tape.record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var mul(Tape& tape, const Var& a, const Var& b) {
  require_shape(a.shape() == b.shape(), "mul",
                shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  Tensor out = Tensor::uninitialized(a.shape());
  const auto av = a.value().values();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Var y = emit(std::move(out), a.requires_grad() || b.requires_grad(), "mul");
  if (y.requires_grad()) {
    tape.record([a, b, y]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      const auto av = a.value().values();
      const auto bv = b.value().values();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var scale(Tape& tape, const Var& a, double factor) {
  Tensor out = Tensor::uninitialized(a.shape());
  const auto av = a.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  Var y = emit(std::move(out), a.requires_grad(), "scale");
  if (y.requires_grad()) {
    tape.record([a, y, factor]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var matmul(Tape& tape, const Var& a, const Var& b) {
  require_shape(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
                "matmul", shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = Tensor::uninitialized({m, n});
  as_matrix(out.values(), m, n).noalias() = as_matrix(a.value(), m, k) * as_matrix(b.value(), k, n);
  Var y = emit(std::move(out), a.requires_grad() || b.requires_grad(), "matmul");
  if (y.requires_grad()) {
    tape.record([a, b, y, m, k, n]() mutable {
      if (!y.has_grad()) return;
      const auto g = as_matrix(y.grad(), m, n);
      if (a.requires_grad()) {
        as_matrix(a.grad_buffer(), m, k).noalias() += g * as_matrix(b.value(), k, n).transpose();
      }
      if (b.requires_grad()) {
        as_matrix(b.grad_buffer(), k, n).noalias() += as_matrix(a.value(), m, k).transpose() * g;
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var linear(Tape& tape, const Var& x, const Var& weight, const Var& bias) {
  require_shape(x.shape().size() == 2 && weight.shape().size() == 2 &&
                    x.shape()[1] == weight.shape()[0] && bias.shape().size() == 1 &&
                    bias.shape()[0] == weight.shape()[1],
                "linear",
                shape_to_string(x.shape()) + " x " + shape_to_string(weight.shape()) + " + " +
                    shape_to_string(bias.shape()));
  const std::size_t n = x.shape()[0], in = x.shape()[1], o = weight.shape()[1];
  Tensor out = Tensor::uninitialized({n, o});
  auto om = as_matrix(out.values(), n, o);
  om.noalias() = as_matrix(x.value(), n, in) * as_matrix(weight.value(), in, o);
  om.rowwise() += as_matrix(bias.value(), 1, o).row(0);
  const bool rg = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  Var y = emit(std::move(out), rg, "linear");
  if (y.requires_grad()) {
    tape.record([x, weight, bias, y, n, in, o]() mutable {
      if (!y.has_grad()) return;
      const auto g = as_matrix(y.grad(), n, o);
      if (x.requires_grad()) {
        as_matrix(x.grad_buffer(), n, in).noalias() +=
            g * as_matrix(weight.value(), in, o).transpose();
      }
      if (weight.requires_grad()) {
        as_matrix(weight.grad_buffer(), in, o).noalias() +=
            as_matrix(x.value(), n, in).transpose() * g;
      }
      if (bias.requires_grad()) {
        as_matrix(bias.grad_buffer(), 1, o) += g.colwise().sum();
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var relu(Tape& tape, const Var& x) {
  Tensor out = Tensor::uninitialized(x.shape());
  {
    const double* __restrict in = x.value().data();
    double* __restrict o = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  }
  Var y = emit(std::move(out), x.requires_grad(), "relu");
  if (y.requires_grad()) {
    tape.record([x, y]() mutable {
      if (!y.has_grad()) return;
      bool fresh = false;
      double* __restrict gx = x.grad_buffer_for_write(fresh).data();
      const double* __restrict xi = x.value().data();
      const double* __restrict g = y.grad().data();
      const std::size_t n = x.size();
      if (fresh) {
        for (std::size_t i = 0; i < n; ++i) gx[i] = xi[i] > 0.0 ? g[i] : 0.0;
      } else {
        for (std::size_t i = 0; i < n; ++i) gx[i] += xi[i] > 0.0 ? g[i] : 0.0;
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var sigmoid(Tape& tape, const Var& x) {
  return unary(
      tape, x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](std::span<const double>, std::span<const double> out, std::span<const double> g,
         std::span<double> gx) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * out[i] * (1.0 - out[i]);
      });
}

Var tanh(Tape& tape, const Var& x) {
  return unary(
      tape, x, "tanh", [](double v) { return std::tanh(v); },
      [](std::span<const double>, std::span<const double> out, std::span<const double> g,
         std::span<double> gx) {
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - out[i] * out[i]);
      });
}

Var concat(Tape& tape, std::span<const Var> parts, std::size_t axis) {
  require_shape(!parts.empty(), "concat", "no inputs");
  const Shape& first = parts[0].shape();
  require_shape(axis < first.size(), "concat", "axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  bool rg = false;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool same = s.size() == first.size();
    for (std::size_t i = 0; same && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) same = false;
    }
    require_shape(same, "concat", shape_to_string(s) + " vs " + shape_to_string(first));
    out_shape[axis] += s[axis];
    rg = rg || p.requires_grad();
  }
  const AxisSplit outer = split_at(out_shape, axis);
  Tensor out = Tensor::uninitialized(out_shape);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t block = p.shape()[axis] * outer.inner;
    const auto pv = p.value().values();
    for (std::size_t o = 0; o < outer.outer; ++o) {
      std::copy_n(pv.data() + o * block, block,
                  out.data() + o * outer.extent * outer.inner + offset);
    }
    offset += block;
  }
  Var y = emit(std::move(out), rg, "concat");
  if (y.requires_grad()) {
    std::vector<Var> inputs(parts.begin(), parts.end());
    tape.record([inputs, y, outer, axis]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        const std::size_t block = p.shape()[axis] * outer.inner;
        if (p.requires_grad()) {
          auto gp = p.grad_buffer();
          for (std::size_t o = 0; o < outer.outer; ++o) {
            const double* src = g.data() + o * outer.extent * outer.inner + offset;
            double* dst = gp.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset += block;
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var reshape(Tape& tape, const Var& x, Shape shape) {
  require_shape(shape_numel(shape) == x.size(), "reshape",
                shape_to_string(x.shape()) + " -> " + shape_to_string(shape));
  Var y = emit(x.value().reshaped(std::move(shape)), x.requires_grad(), "reshape");
  if (y.requires_grad()) {
    tape.record([x, y]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var slice(Tape& tape, const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_shape(axis < x.shape().size() && begin < end && end <= x.shape()[axis], "slice",
                "range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                    std::to_string(axis) + " of " + shape_to_string(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  Tensor out = Tensor::uninitialized(out_shape);
  const auto xv = x.value().values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + o * s.extent * s.inner + begin * s.inner, block, out.data() + o * block);
  }
  Var y = emit(std::move(out), x.requires_grad(), "slice");
  if (y.requires_grad()) {
    tape.record([x, y, s, begin, block]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o) {
        double* dst = gx.data() + o * s.extent * s.inner + begin * s.inner;
        const double* src = g.data() + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var layer_norm(Tape& tape, const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_shape(!x.shape().empty() && gamma.shape() == Shape{x.shape().back()} &&
                    beta.shape() == gamma.shape(),
                "layer_norm", shape_to_string(x.shape()) + " with " + shape_to_string(gamma.shape()));
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  Tensor xhat(x.shape());
  std::vector<double> inv_std(rows);
  Tensor out(x.shape());
  const auto xv = x.value().values();
  const auto gv = gamma.value().values();
  const auto bv = beta.value().values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * inv_std[r];
      xhat[r * d + j] = h;
      out[r * d + j] = gv[j] * h + bv[j];
    }
  }
  const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Var y = emit(std::move(out), rg, "layer_norm");
  if (y.requires_grad()) {
    tape.record([x, gamma, beta, y, xhat = std::move(xhat), inv_std = std::move(inv_std), d,
                 rows]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      const auto gv = gamma.value().values();
      if (gamma.requires_grad() || beta.requires_grad()) {
        std::vector<double> dg(d, 0.0), db(d, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            dg[j] += g[r * d + j] * xhat[r * d + j];
            db[j] += g[r * d + j];
          }
        }
        if (gamma.requires_grad()) {
          auto gg = gamma.grad_buffer();
          for (std::size_t j = 0; j < d; ++j) gg[j] += dg[j];
        }
        if (beta.requires_grad()) {
          auto gb = beta.grad_buffer();
          for (std::size_t j = 0; j < d; ++j) gb[j] += db[j];
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad_buffer();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_g = 0.0, mean_gh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gv[j];
            mean_g += gh;
            mean_gh += gh * xhat[r * d + j];
          }
          mean_g *= inv_d;
          mean_gh *= inv_d;
          for (std::size_t j = 0; j < d; ++j) {
            const double gh = g[r * d + j] * gv[j];
            gx[r * d + j] += inv_std[r] * (gh - mean_g - xhat[r * d + j] * mean_gh);
          }
        }
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

namespace {

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in + r * cols;
    double* dst = out + r * cols;
    const double peak = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      dst[j] = std::exp(row[j] - peak);
      total += dst[j];
    }
    for (std::size_t j = 0; j < cols; ++j) dst[j] /= total;
  }
}

// gx += y * (g - sum(g * y)) row by row.
void softmax_rows_backward(const double* y, const double* g, double* gx, std::size_t rows,
                           std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = y + r * cols;
    const double* gr = g + r * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
    for (std::size_t j = 0; j < cols; ++j) gx[r * cols + j] += yr[j] * (gr[j] - dot);
  }
}

}  // namespace

Var softmax(Tape& tape, const Var& x) {
  require_shape(!x.shape().empty(), "softmax", "rank-0 input");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = x.size() / cols;
  Tensor out = Tensor::uninitialized(x.shape());
  softmax_rows(x.value().data(), out.data(), rows, cols);
  Var y = emit(std::move(out), x.requires_grad(), "softmax");
  if (y.requires_grad()) {
    tape.record([x, y, rows, cols]() mutable {
      if (!y.has_grad()) return;
      softmax_rows_backward(y.value().data(), y.grad().data(), x.grad_buffer().data(), rows, cols);
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var max_over_axis(Tape& tape, const Var& x, std::size_t axis) {
  require_shape(axis < x.shape().size(), "max_over_axis", "axis out of range");
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.shape().size(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out = Tensor::uninitialized(out_shape);
  std::vector<std::size_t> argmax(out.size());
  const auto xv = x.value().values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = o * s.extent * s.inner + i;
      for (std::size_t e = 1; e < s.extent; ++e) {
        const std::size_t idx = (o * s.extent + e) * s.inner + i;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[o * s.inner + i] = xv[best];
      argmax[o * s.inner + i] = best;
    }
  }
  Var y = emit(std::move(out), x.requires_grad(), "max_over_axis");
  if (y.requires_grad()) {
    tape.record([x, y, argmax = std::move(argmax)]() mutable {
      if (!y.has_grad()) return;
      const auto g = y.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var scaled_dot_attention(Tape& tape, const Var& q, const Var& k, const Var& v) {
  require_shape(q.shape().size() == 2 && k.shape().size() == 2 && v.shape().size() == 2 &&
                    q.shape()[1] == k.shape()[1] && k.shape()[0] == v.shape()[0],
                "scaled_dot_attention",
                shape_to_string(q.shape()) + ", " + shape_to_string(k.shape()) + ", " +
                    shape_to_string(v.shape()));
  const std::size_t tq = q.shape()[0], tk = k.shape()[0], d = q.shape()[1], dv = v.shape()[1];
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  RowMat scores = (as_matrix(q.value(), tq, d) * as_matrix(k.value(), tk, d).transpose()) * inv_sqrt_d;
  RowMat probs(tq, tk);
  softmax_rows(scores.data(), probs.data(), tq, tk);
  Tensor out({tq, dv});
  as_matrix(out.values(), tq, dv).noalias() = probs * as_matrix(v.value(), tk, dv);
  const bool rg = q.requires_grad() || k.requires_grad() || v.requires_grad();
  Var y = emit(std::move(out), rg, "scaled_dot_attention");
  if (y.requires_grad()) {
    tape.record([q, k, v, y, probs = std::move(probs), tq, tk, d, dv, inv_sqrt_d]() mutable {
      if (!y.has_grad()) return;
      const auto g = as_matrix(y.grad(), tq, dv);
      if (v.requires_grad()) as_matrix(v.grad_buffer(), tk, dv).noalias() += probs.transpose() * g;
      if (q.requires_grad() || k.requires_grad()) {
        const RowMat gp = g * as_matrix(v.value(), tk, dv).transpose();
        RowMat gs = RowMat::Zero(tq, tk);
        softmax_rows_backward(probs.data(), gp.data(), gs.data(), tq, tk);
        gs *= inv_sqrt_d;
        if (q.requires_grad()) {
          as_matrix(q.grad_buffer(), tq, d).noalias() += gs * as_matrix(k.value(), tk, d);
        }
        if (k.requires_grad()) {
          as_matrix(k.grad_buffer(), tk, d).noalias() += gs.transpose() * as_matrix(q.value(), tq, d);
        }
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var softmax_cross_entropy(Tape& tape, const Var& logits, std::span<const int> labels) {
  require_shape(logits.shape().size() == 2 && logits.shape()[0] == labels.size(),
                "softmax_cross_entropy",
                shape_to_string(logits.shape()) + " with " + std::to_string(labels.size()) +
                    " labels");
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      fail(ErrorCode::kLabelOutOfRange,
           "label " + std::to_string(label) + " outside [0, " + std::to_string(c) + ")");
    }
  }
  std::vector<double> probs(n * c);
  softmax_rows(logits.value().data(), probs.data(), n, c);
  const auto lv = logits.value().values();
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = lv.data() + r * c;
    const double peak = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - peak);
    total += peak + std::log(sum) - row[labels[r]];
  }
  Var y = emit(Tensor::scalar(total / static_cast<double>(n)), logits.requires_grad(),
               "softmax_cross_entropy");
  if (y.requires_grad()) {
    std::vector<int> owned(labels.begin(), labels.end());
    tape.record([logits, y, probs = std::move(probs), owned = std::move(owned), n, c]() mutable {
      if (!y.has_grad()) return;
      const double g = y.grad()[0] / static_cast<double>(n);
      auto gl = logits.grad_buffer();
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
          const double onehot = static_cast<int>(j) == owned[r] ? 1.0 : 0.0;
          gl[r * c + j] += g * (probs[r * c + j] - onehot);
        }
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

}  // namespace emoseq::ad
