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
#include <vector>

#include "emoseq/autograd.hpp"

namespace emoseq::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moments are allocated lazily to match the
// parameter list the first time step() runs.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var> params, AdamConfig config);

  // Applies one update from the gradients currently stored on the
  // parameters, then clears them. Missing gradients count as zero.
  void step();
  void zero_grad();

  const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) noexcept { config_.lr = lr; }
  std::uint64_t steps() const noexcept { return t_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Var> params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

}  // namespace emoseq::ad
