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

#include "emoseq/adam.hpp"

#include <cmath>
#include <string>

#include "emoseq/error.hpp"

namespace emoseq::ad {

Adam::Adam(std::vector<Var> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step() {
  // Validate everything first so a bad gradient leaves the parameters intact.
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (double g : params_[i].grad()) {
      if (!std::isfinite(g)) {
        fail(ErrorCode::kNonFiniteGradient,
             "non-finite gradient on parameter #" + std::to_string(i));
      }
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const auto g = p.grad();
    auto theta = p.mutable_value().values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      theta[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
    p.zero_grad();
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace emoseq::ad
