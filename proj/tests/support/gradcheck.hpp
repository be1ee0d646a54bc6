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

// Central-difference gradient checking shared by the unit and acceptance
// tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emoseq/autograd.hpp"
#include "emoseq/rng.hpp"

namespace emoseq::testing {

struct GradCheckResult {
  bool ok = true;
  std::size_t checked = 0;
  // Largest failing errors; zero when everything passed.
  double worst_rel = 0.0;
  double worst_abs = 0.0;
  std::string worst;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
};

using LossFn = std::function<ad::Var(ad::Tape&)>;

// `loss` must rebuild the scalar from the current values of `inputs` (which
// must require gradients) on every call.
inline GradCheckResult gradcheck(const std::vector<ad::Var>& inputs, const LossFn& loss,
                                 GradCheckOptions opt = {}) {
  for (const auto& v : inputs) v.zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& v : inputs) {
    std::vector<double> g(v.size(), 0.0);
    if (v.has_grad()) std::copy(v.grad().begin(), v.grad().end(), g.begin());
    analytic.push_back(std::move(g));
  }
  auto eval = [&] {
    ad::Tape tape(false);
    return loss(tape).item();
  };
  GradCheckResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_value().values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double orig = values[j];
      values[j] = orig + opt.eps;
      const double up = eval();
      values[j] = orig - opt.eps;
      const double down = eval();
      values[j] = orig;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double a = analytic[i][j];
      const double abs_err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
      ++r.checked;
      if (abs_err < opt.abs_tol || rel_err < opt.rel_tol) continue;
      r.ok = false;
      if (rel_err >= r.worst_rel) {
        r.worst_rel = rel_err;
        r.worst_abs = abs_err;
        r.worst = "input " + std::to_string(i) + ", element " + std::to_string(j) + ": analytic " +
                  std::to_string(a) + " vs numeric " + std::to_string(numeric);
      }
    }
  }
  for (const auto& v : inputs) v.zero_grad();
  return r;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// sum(y * w) for a fixed random weight tensor w, making any output scalar.
inline ad::Var weighted_sum(ad::Tape& tape, const ad::Var& y, const Tensor& w) {
  const ad::Var flat = ad::reshape(tape, y, {1, y.size()});
  const ad::Var col = ad::Var::constant(w.reshaped({w.size(), 1}));
  return ad::reshape(tape, ad::matmul(tape, flat, col), {1});
}

}  // namespace emoseq::testing
