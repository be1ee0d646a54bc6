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

// Image-shaped primitives: convolution, batch normalisation, spatial pooling.
// Activations are channels-last (N x H x W x C).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emoseq/autograd.hpp"
#include "emoseq/error.hpp"

namespace emoseq::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct ConvGeometry {
  std::size_t n, h, w, cin, k, cout, pad;
  std::size_t patch() const { return k * k * cin; }
  std::size_t pixels() const { return h * w; }
};

void im2col(const double* frame, const ConvGeometry& g, double* cols) {
  const std::size_t patch = g.patch();
  std::fill_n(cols, g.pixels() * patch, 0.0);
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t x = 0; x < g.w; ++x) {
      double* row = cols + (y * g.w + x) * patch;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
          std::copy_n(frame + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin,
                      g.cin, row + (ky * g.k + kx) * g.cin);
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* frame_grad) {
  const std::size_t patch = g.patch();
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t x = 0; x < g.w; ++x) {
      const double* row = cols + (y * g.w + x) * patch;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
          double* dst = frame_grad + (static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin;
          const double* src = row + (ky * g.k + kx) * g.cin;
          for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

// Small patches (first layer, cin = 1) make poor GEMMs; a direct loop over
// taps with the output channels innermost is several times faster there.
constexpr std::size_t kDirectPatchLimit = 64;

template <class Visit>
void for_each_tap(const ConvGeometry& g, std::size_t y, std::size_t x, Visit&& visit) {
  for (std::size_t ky = 0; ky < g.k; ++ky) {
    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.pad);
    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
    for (std::size_t kx = 0; kx < g.k; ++kx) {
      const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pad);
      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
      visit((static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)) * g.cin,
            (ky * g.k + kx) * g.cin);
    }
  }
}

void direct_forward(const double* __restrict frame, const double* __restrict kernel,
                    const double* __restrict bias, const ConvGeometry& g, double* __restrict out) {
  const std::size_t co = g.cout;
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t x = 0; x < g.w; ++x) {
      double* __restrict o = out + (y * g.w + x) * co;
      for (std::size_t c = 0; c < co; ++c) o[c] = bias[c];
      for_each_tap(g, y, x, [&](std::size_t in_off, std::size_t tap_off) {
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const double v = frame[in_off + ci];
          const double* __restrict kr = kernel + (tap_off + ci) * co;
          for (std::size_t c = 0; c < co; ++c) o[c] += v * kr[c];
        }
      });
    }
  }
}

void direct_backward(const double* __restrict frame, const double* __restrict kernel,
                     const double* __restrict go, const ConvGeometry& g, double* __restrict gk,
                     double* __restrict gx) {
  const std::size_t co = g.cout;
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t x = 0; x < g.w; ++x) {
      const double* __restrict gr = go + (y * g.w + x) * co;
      for_each_tap(g, y, x, [&](std::size_t in_off, std::size_t tap_off) {
        for (std::size_t ci = 0; ci < g.cin; ++ci) {
          const std::size_t kidx = (tap_off + ci) * co;
          if (gk) {
            const double v = frame[in_off + ci];
            double* __restrict dst = gk + kidx;
            for (std::size_t c = 0; c < co; ++c) dst[c] += v * gr[c];
          }
          if (gx) {
            const double* __restrict kr = kernel + kidx;
            double acc = 0.0;
            for (std::size_t c = 0; c < co; ++c) acc += kr[c] * gr[c];
            gx[in_off + ci] += acc;
          }
        }
      });
    }
  }
}

Var emit(Tensor&& out, bool requires_grad, const char* op) {
  if (!out.all_finite()) {
    fail(ErrorCode::kNonFiniteValue, std::string(op) + " produced a non-finite value");
  }
  return Var::intermediate(std::move(out), requires_grad);
}

}  // namespace

Var conv2d(Tape& tape, const Var& x, const Var& kernel, const Var& bias) {
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 4 || ks.size() != 4 || ks[0] != ks[1] || ks[0] % 2 == 0 || ks[2] != xs[3] ||
      bias.shape() != Shape{ks[3]}) {
    fail(ErrorCode::kShapeMismatch, "conv2d: input " + shape_to_string(xs) + ", kernel " +
                                        shape_to_string(ks) + ", bias " +
                                        shape_to_string(bias.shape()));
  }
  const ConvGeometry g{xs[0], xs[1], xs[2], xs[3], ks[0], ks[3], (ks[0] - 1) / 2};
  const auto rows = static_cast<Eigen::Index>(g.pixels());
  const auto patch = static_cast<Eigen::Index>(g.patch());
  const auto cout = static_cast<Eigen::Index>(g.cout);

  Tensor out = Tensor::uninitialized({g.n, g.h, g.w, g.cout});
  const bool direct = g.patch() <= kDirectPatchLimit;
  const std::size_t in_frame = g.pixels() * g.cin;
  const std::size_t out_frame = g.pixels() * g.cout;
  if (direct) {
    for (std::size_t f = 0; f < g.n; ++f) {
      direct_forward(x.value().data() + f * in_frame, kernel.value().data(), bias.value().data(), g,
                     out.data() + f * out_frame);
    }
  } else {
    RowMat cols(rows, patch);
    const ConstMatMap kmat(kernel.value().data(), patch, cout);
    const Eigen::Map<const Eigen::RowVectorXd> bvec(bias.value().data(), cout);
    for (std::size_t f = 0; f < g.n; ++f) {
      im2col(x.value().data() + f * in_frame, g, cols.data());
      MatMap o(out.data() + f * out_frame, rows, cout);
      o.noalias() = cols * kmat;
      o.rowwise() += bvec;
    }
  }

  const bool rg = x.requires_grad() || kernel.requires_grad() || bias.requires_grad();
  Var y = emit(std::move(out), rg, "conv2d");
  if (y.requires_grad()) {
    tape.record([x, kernel, bias, y, g, rows, patch, cout, in_frame, out_frame, direct]() mutable {
      if (!y.has_grad()) return;
      const auto gy = y.grad();
      double* gk = kernel.requires_grad() ? kernel.grad_buffer().data() : nullptr;
      double* gb = bias.requires_grad() ? bias.grad_buffer().data() : nullptr;
      double* gx = x.requires_grad() ? x.grad_buffer().data() : nullptr;
      if (direct) {
        for (std::size_t f = 0; f < g.n; ++f) {
          const double* go = gy.data() + f * out_frame;
          direct_backward(x.value().data() + f * in_frame, kernel.value().data(), go, g, gk,
                          gx ? gx + f * in_frame : nullptr);
          if (gb) {
            for (std::size_t p = 0; p < g.pixels(); ++p) {
              for (std::size_t c = 0; c < g.cout; ++c) gb[c] += go[p * g.cout + c];
            }
          }
        }
        y.release_grad_if_interior();
        return;
      }
      RowMat cols(rows, patch);
      RowMat dcols;
      const ConstMatMap kmat(kernel.value().data(), patch, cout);
      for (std::size_t f = 0; f < g.n; ++f) {
        const ConstMatMap go(gy.data() + f * out_frame, rows, cout);
        if (gk) {
          im2col(x.value().data() + f * in_frame, g, cols.data());
          MatMap(gk, patch, cout).noalias() += cols.transpose() * go;
        }
        if (gb) Eigen::Map<Eigen::RowVectorXd>(gb, cout) += go.colwise().sum();
        if (gx) {
          dcols.noalias() = go * kmat.transpose();
          col2im_add(dcols.data(), g, gx + f * in_frame);
        }
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

namespace {

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> inv_std;
};

void check_batchnorm_shapes(const char* op, const Var& x, const Var& gamma, const Var& beta,
                            const BatchNormState& state) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || gamma.shape() != Shape{xs[3]} || beta.shape() != gamma.shape() ||
      state.running_mean.shape() != gamma.shape()) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": input " + shape_to_string(xs) + ", gamma " +
                                        shape_to_string(gamma.shape()));
  }
}

// Train mode: statistics of x over its first three axes, folded into the
// running averages. Eval mode: the running averages themselves.
ChannelStats channel_stats(const Var& x, BatchNormState& state, Mode mode) {
  const std::size_t c = x.shape()[3];
  const std::size_t m = x.size() / c;
  ChannelStats s{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  if (mode == Mode::kEval) {
    for (std::size_t j = 0; j < c; ++j) {
      s.mean[j] = state.running_mean[j];
      s.inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + state.eps);
    }
    return s;
  }
  if (m < 2) {
    fail(ErrorCode::kDegenerateBatch, "batchnorm in train mode needs at least two elements per channel");
  }
  std::vector<double> var(c, 0.0);
  const double* __restrict src = x.value().data();
  double* __restrict mu = s.mean.data();
  double* __restrict sq = var.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) mu[j] += src[i * c + j];
  }
  for (auto& v : s.mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double d = src[i * c + j] - mu[j];
      sq[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    var[j] /= static_cast<double>(m);
    s.inv_std[j] = 1.0 / std::sqrt(var[j] + state.eps);
    state.running_mean[j] = state.momentum * state.running_mean[j] + (1.0 - state.momentum) * s.mean[j];
    state.running_var[j] = state.momentum * state.running_var[j] + (1.0 - state.momentum) * var[j];
  }
  return s;
}

// y = a * x + b per channel.
void affine_coefficients(const ChannelStats& s, const Var& gamma, const Var& beta, std::vector<double>& a,
                         std::vector<double>& b) {
  const std::size_t c = s.mean.size();
  const double* gv = gamma.value().data();
  const double* bv = beta.value().data();
  a.resize(c);
  b.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    a[j] = gv[j] * s.inv_std[j];
    b[j] = bv[j] - a[j] * s.mean[j];
  }
}

// Given sum(g) and sum(g * x) per channel, accumulates the gamma and beta
// gradients and returns p, q, r with dL/dx = p * g + q * x + r.
struct InputGradient {
  std::vector<double> p, q, r;
};

InputGradient batchnorm_backward_coefficients(const ChannelStats& s, const Var& gamma, const Var& beta,
                                              std::span<const double> sum_g, std::span<const double> sum_gx,
                                              std::size_t m, Mode mode) {
  const std::size_t c = s.mean.size();
  std::vector<double> sum_gh(c);
  // sum(g * xhat) = inv_std * (sum(g * x) - mean * sum(g))
  for (std::size_t j = 0; j < c; ++j) sum_gh[j] = s.inv_std[j] * (sum_gx[j] - s.mean[j] * sum_g[j]);
  if (gamma.requires_grad()) {
    auto gg = gamma.grad_buffer();
    for (std::size_t j = 0; j < c; ++j) gg[j] += sum_gh[j];
  }
  if (beta.requires_grad()) {
    auto gb = beta.grad_buffer();
    for (std::size_t j = 0; j < c; ++j) gb[j] += sum_g[j];
  }
  InputGradient ig{std::vector<double>(c), std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  const double* gv = gamma.value().data();
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < c; ++j) {
    const double scale = gv[j] * s.inv_std[j];
    ig.p[j] = scale;
    if (mode == Mode::kTrain) {
      const double k = sum_gh[j] * inv_m * s.inv_std[j];
      ig.q[j] = -scale * k;
      ig.r[j] = scale * (k * s.mean[j] - sum_g[j] * inv_m);
    }
  }
  return ig;
}

}  // namespace

Var batchnorm2d(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, Mode mode) {
  check_batchnorm_shapes("batchnorm2d", x, gamma, beta, state);
  const std::size_t c = x.shape()[3];
  const std::size_t m = x.size() / c;
  ChannelStats stats = channel_stats(x, state, mode);

  Tensor out = Tensor::uninitialized(x.shape());
  {
    std::vector<double> a, b;
    affine_coefficients(stats, gamma, beta, a, b);
    const double* __restrict src = x.value().data();
    double* __restrict dst = out.data();
    const double* __restrict pa = a.data();
    const double* __restrict pb = b.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < c; ++j) dst[i * c + j] = pa[j] * src[i * c + j] + pb[j];
    }
  }

  const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Var y = emit(std::move(out), rg, "batchnorm2d");
  if (y.requires_grad()) {
    // The normalised input is recomputed from x rather than kept alive.
    tape.record([x, gamma, beta, y, stats = std::move(stats), c, m, mode]() mutable {
      if (!y.has_grad()) return;
      const double* __restrict g = y.grad().data();
      const double* __restrict xs = x.value().data();
      std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
      {
        double* __restrict sg = sum_g.data();
        double* __restrict sgx = sum_gx.data();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            sg[j] += g[i * c + j];
            sgx[j] += g[i * c + j] * xs[i * c + j];
          }
        }
      }
      const InputGradient ig = batchnorm_backward_coefficients(stats, gamma, beta, sum_g, sum_gx, m, mode);
      if (x.requires_grad()) {
        bool fresh = false;
        double* __restrict gx = x.grad_buffer_for_write(fresh).data();
        const double* __restrict pp = ig.p.data();
        const double* __restrict pq = ig.q.data();
        const double* __restrict pr = ig.r.data();
        if (fresh) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              gx[i * c + j] = pp[j] * g[i * c + j] + pq[j] * xs[i * c + j] + pr[j];
            }
          }
        } else {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              gx[i * c + j] += pp[j] * g[i * c + j] + pq[j] * xs[i * c + j] + pr[j];
            }
          }
        }
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var batchnorm_maxpool2d(Tape& tape, const Var& x, const Var& gamma, const Var& beta,
                        BatchNormState& state, Mode mode) {
  check_batchnorm_shapes("batchnorm_maxpool2d", x, gamma, beta, state);
  const Shape& xs = x.shape();
  if (xs[1] < 2 || xs[2] < 2) fail(ErrorCode::kShapeMismatch, "batchnorm_maxpool2d: input " + shape_to_string(xs));
  const std::size_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const std::size_t m = x.size() / c;
  const std::size_t oh = h / 2, ow = w / 2;
  ChannelStats stats = channel_stats(x, state, mode);
  std::vector<double> a, b;
  affine_coefficients(stats, gamma, beta, a, b);

  // With a >= 0 the window maximum of a * x + b is at the maximum of x,
  // otherwise at its minimum. Ties keep the first element.
  Tensor out = Tensor::uninitialized({n, oh, ow, c});
  std::vector<std::uint32_t> chosen(out.size());
  const double* xv = x.value().data();
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t yo = 0; yo < oh; ++yo) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        const std::size_t base = ((f * h + 2 * yo) * w + 2 * xo) * c;
        const std::size_t cand[4] = {base, base + c, base + w * c, base + w * c + c};
        const std::size_t dst = ((f * oh + yo) * ow + xo) * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t best = cand[0] + ch;
          if (a[ch] >= 0.0) {
            for (int q = 1; q < 4; ++q) {
              if (xv[cand[q] + ch] > xv[best]) best = cand[q] + ch;
            }
          } else {
            for (int q = 1; q < 4; ++q) {
              if (xv[cand[q] + ch] < xv[best]) best = cand[q] + ch;
            }
          }
          out[dst + ch] = a[ch] * xv[best] + b[ch];
          chosen[dst + ch] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }

  const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Var y = emit(std::move(out), rg, "batchnorm_maxpool2d");
  if (y.requires_grad()) {
    tape.record([x, gamma, beta, y, stats = std::move(stats), chosen = std::move(chosen), c, m, mode]() mutable {
      if (!y.has_grad()) return;
      // Only the chosen elements receive gradient from the pooled output.
      const auto g = y.grad();
      const double* xs = x.value().data();
      std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t ch = i % c;
        sum_g[ch] += g[i];
        sum_gx[ch] += g[i] * xs[chosen[i]];
      }
      const InputGradient ig = batchnorm_backward_coefficients(stats, gamma, beta, sum_g, sum_gx, m, mode);
      if (x.requires_grad()) {
        bool fresh = false;
        double* __restrict gx = x.grad_buffer_for_write(fresh).data();
        const double* __restrict pq = ig.q.data();
        const double* __restrict pr = ig.r.data();
        const double* __restrict xr = xs;
        if (fresh) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] = pq[j] * xr[i * c + j] + pr[j];
          }
        } else {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += pq[j] * xr[i * c + j] + pr[j];
          }
        }
        for (std::size_t i = 0; i < g.size(); ++i) gx[chosen[i]] += ig.p[i % c] * g[i];
      }
      y.release_grad_if_interior();
    });
  }
  return y;
}

Var maxpool2d(Tape& tape, const Var& x) {
  const Shape& xs = x.shape();
  if (xs.size() != 4 || xs[1] < 2 || xs[2] < 2) {
    fail(ErrorCode::kShapeMismatch, "maxpool2d: input " + shape_to_string(xs));
  }
  const std::size_t n = xs[0], h = xs[1], w = xs[2], c = xs[3];
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out = Tensor::uninitialized({n, oh, ow, c});
  std::vector<std::uint32_t> argmax(out.size());
  const auto xv = x.value().values();
  for (std::size_t f = 0; f < n; ++f) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        const std::size_t base = ((f * h + 2 * y) * w + 2 * xo) * c;
        const std::size_t cand[4] = {base, base + c, base + w * c, base + w * c + c};
        const std::size_t dst = ((f * oh + y) * ow + xo) * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t best = cand[0] + ch;
          for (int q = 1; q < 4; ++q) {
            if (xv[cand[q] + ch] > xv[best]) best = cand[q] + ch;
          }
          out[dst + ch] = xv[best];
          argmax[dst + ch] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  Var yv = emit(std::move(out), x.requires_grad(), "maxpool2d");
  if (yv.requires_grad()) {
    tape.record([x, yv, argmax = std::move(argmax)]() mutable {
      if (!yv.has_grad()) return;
      const auto g = yv.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
      yv.release_grad_if_interior();
    });
  }
  return yv;
}

}  // namespace emoseq::ad
