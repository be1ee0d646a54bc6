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

// Randomised finite-difference cases, one per autograd primitive, shared by
// the unit and acceptance tests.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "emoseq/autograd.hpp"
#include "support/gradcheck.hpp"

namespace emoseq::testing {

// Fills `inputs` with fresh parameters and returns the loss over them.
using CaseSetup = std::function<LossFn(Rng&, std::vector<ad::Var>&)>;

struct PrimitiveCase {
  std::string name;
  std::uint64_t seed;
  CaseSetup setup;
};

namespace detail {

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }
inline ad::Var param(Tensor t) { return ad::Var::parameter(std::move(t)); }

}  // namespace detail

inline std::vector<PrimitiveCase> primitive_cases() {
  using detail::param;
  using detail::pick;
  std::vector<PrimitiveCase> cases;
  auto add = [&cases](std::string name, std::uint64_t seed, CaseSetup setup) {
    cases.push_back({std::move(name), seed, std::move(setup)});
  };
  add("add", 1, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    in = {param(random_tensor(s, rng)), param(random_tensor(s, rng))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::add(t, in[0], in[1]), w); };
  });
  add("sub", 2, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    in = {param(random_tensor(s, rng)), param(random_tensor(s, rng))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::sub(t, in[0], in[1]), w); };
  });
  add("mul", 3, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
    in = {param(random_tensor(s, rng)), param(random_tensor(s, rng))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::mul(t, in[0], in[1]), w); };
  });
  add("mul with itself", 4, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 6)};
    in = {param(random_tensor(s, rng))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::mul(t, in[0], in[0]), w); };
  });
  add("scale", 5, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
    in = {param(random_tensor(s, rng))};
    const double f = rng.uniform(-3.0, 3.0);
    const Tensor w = random_tensor(s, rng);
    return [in, w, f](ad::Tape& t) { return weighted_sum(t, ad::scale(t, in[0], f), w); };
  });
  add("relu", 6, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 5), pick(rng, 1, 5)};
    in = {param(random_tensor(s, rng))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::relu(t, in[0]), w); };
  });
  add("sigmoid", 7, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 5), pick(rng, 1, 5)};
    in = {param(random_tensor(s, rng, -6.0, 6.0))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::sigmoid(t, in[0]), w); };
  });
  add("tanh", 8, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 5), pick(rng, 1, 5)};
    in = {param(random_tensor(s, rng, -3.0, 3.0))};
    const Tensor w = random_tensor(s, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::tanh(t, in[0]), w); };
  });
  add("matmul", 9, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t m = pick(rng, 1, 4), k = pick(rng, 1, 5), n = pick(rng, 1, 4);
    in = {param(random_tensor({m, k}, rng)), param(random_tensor({k, n}, rng))};
    const Tensor w = random_tensor({m, n}, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::matmul(t, in[0], in[1]), w); };
  });
  add("linear", 10, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 4), i = pick(rng, 1, 5), o = pick(rng, 1, 4);
    in = {param(random_tensor({n, i}, rng)), param(random_tensor({i, o}, rng)),
          param(random_tensor({o}, rng))};
    const Tensor w = random_tensor({n, o}, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::linear(t, in[0], in[1], in[2]), w); };
  });
  add("scaled_dot_attention", 11, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t tq = pick(rng, 1, 4), tk = pick(rng, 1, 4), d = pick(rng, 1, 4),
                      dv = pick(rng, 1, 3);
    in = {param(random_tensor({tq, d}, rng)), param(random_tensor({tk, d}, rng)),
          param(random_tensor({tk, dv}, rng))};
    const Tensor w = random_tensor({tq, dv}, rng);
    return [in, w](ad::Tape& t) {
      return weighted_sum(t, ad::scaled_dot_attention(t, in[0], in[1], in[2]), w);
    };
  });
  add("concat", 12, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t axis = rng.below(2);
    const std::size_t other = pick(rng, 1, 3);
    const std::size_t parts = pick(rng, 1, 3);
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      const std::size_t extent = pick(rng, 1, 3);
      total += extent;
      in.push_back(param(random_tensor(axis == 0 ? Shape{extent, other} : Shape{other, extent}, rng)));
    }
    const Tensor w = random_tensor(axis == 0 ? Shape{total, other} : Shape{other, total}, rng);
    return [in, w, axis](ad::Tape& t) { return weighted_sum(t, ad::concat(t, in, axis), w); };
  });
  add("reshape", 13, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 4);
    in = {param(random_tensor({a, b}, rng))};
    const Tensor w = random_tensor({b, a}, rng);
    return [in, w, a, b](ad::Tape& t) { return weighted_sum(t, ad::reshape(t, in[0], {b, a}), w); };
  });
  add("slice", 14, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 2, 4), pick(rng, 2, 5), pick(rng, 1, 3)};
    const std::size_t axis = rng.below(3);
    const std::size_t begin = rng.below(s[axis]);
    const std::size_t end = begin + 1 + rng.below(s[axis] - begin);
    in = {param(random_tensor(s, rng))};
    Shape out = s;
    out[axis] = end - begin;
    const Tensor w = random_tensor(out, rng);
    return [in, w, axis, begin, end](ad::Tape& t) {
      return weighted_sum(t, ad::slice(t, in[0], axis, begin, end), w);
    };
  });
  add("max_over_axis", 15, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 3)};
    const std::size_t axis = rng.below(3);
    in = {param(random_tensor(s, rng))};
    Shape out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis) out.push_back(s[i]);
    }
    const Tensor w = random_tensor(out, rng);
    return [in, w, axis](ad::Tape& t) { return weighted_sum(t, ad::max_over_axis(t, in[0], axis), w); };
  });
  add("layer_norm", 16, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 4), d = pick(rng, 2, 6);
    in = {param(random_tensor({n, d}, rng)), param(random_tensor({d}, rng)),
          param(random_tensor({d}, rng))};
    const Tensor w = random_tensor({n, d}, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::layer_norm(t, in[0], in[1], in[2]), w); };
  });
  add("softmax", 17, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 4), d = pick(rng, 1, 6);
    in = {param(random_tensor({n, d}, rng, -3.0, 3.0))};
    const Tensor w = random_tensor({n, d}, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::softmax(t, in[0]), w); };
  });
  add("batchnorm2d (train)", 18, [mode = ad::Mode::kTrain](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 2, 3), pick(rng, 1, 3)};
    in = {param(random_tensor(s, rng)), param(random_tensor({s[3]}, rng, 0.5, 1.5)),
          param(random_tensor({s[3]}, rng))};
    auto state = std::make_shared<ad::BatchNormState>(s[3]);
    for (auto& v : state->running_mean.values()) v = rng.uniform(-0.5, 0.5);
    for (auto& v : state->running_var.values()) v = rng.uniform(0.5, 2.0);
    const Tensor w = random_tensor(s, rng);
    return [in, w, state, mode](ad::Tape& t) {
      return weighted_sum(t, ad::batchnorm2d(t, in[0], in[1], in[2], *state, mode), w);
    };
  });
  add("batchnorm2d (eval)", 24, [mode = ad::Mode::kEval](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 2, 3), pick(rng, 1, 3)};
    in = {param(random_tensor(s, rng)), param(random_tensor({s[3]}, rng, 0.5, 1.5)),
          param(random_tensor({s[3]}, rng))};
    auto state = std::make_shared<ad::BatchNormState>(s[3]);
    for (auto& v : state->running_mean.values()) v = rng.uniform(-0.5, 0.5);
    for (auto& v : state->running_var.values()) v = rng.uniform(0.5, 2.0);
    const Tensor w = random_tensor(s, rng);
    return [in, w, state, mode](ad::Tape& t) {
      return weighted_sum(t, ad::batchnorm2d(t, in[0], in[1], in[2], *state, mode), w);
    };
  });
  for (const ad::Mode mode : {ad::Mode::kTrain, ad::Mode::kEval}) {
    const bool train = mode == ad::Mode::kTrain;
    add(train ? "batchnorm_maxpool2d (train)" : "batchnorm_maxpool2d (eval)", train ? 25 : 26,
        [mode](Rng& rng, std::vector<ad::Var>& in) {
          const Shape s{pick(rng, 1, 2), pick(rng, 2, 5), pick(rng, 2, 5), pick(rng, 1, 3)};
          // Mixed-sign gamma exercises both the max and the min selection.
          in = {param(random_tensor(s, rng)), param(random_tensor({s[3]}, rng, -1.5, 1.5)),
                param(random_tensor({s[3]}, rng))};
          auto state = std::make_shared<ad::BatchNormState>(s[3]);
          for (auto& v : state->running_mean.values()) v = rng.uniform(-0.5, 0.5);
          for (auto& v : state->running_var.values()) v = rng.uniform(0.5, 2.0);
          const Tensor w = random_tensor({s[0], s[1] / 2, s[2] / 2, s[3]}, rng);
          return [in, w, state, mode](ad::Tape& t) {
            return weighted_sum(t, ad::batchnorm_maxpool2d(t, in[0], in[1], in[2], *state, mode), w);
          };
        });
  }
  add("conv2d", 19, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 1, 5), w = pick(rng, 1, 5),
                      cin = pick(rng, 1, 3), cout = pick(rng, 1, 3);
    const std::size_t k = rng.below(2) ? 3 : 1;
    in = {param(random_tensor({n, h, w, cin}, rng)), param(random_tensor({k, k, cin, cout}, rng)),
          param(random_tensor({cout}, rng))};
    const Tensor wt = random_tensor({n, h, w, cout}, rng);
    return [in, wt](ad::Tape& t) { return weighted_sum(t, ad::conv2d(t, in[0], in[1], in[2]), wt); };
  });
  // Large patches take the im2col / GEMM path.
  add("conv2d (gemm path)", 20, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 2), h = pick(rng, 2, 4), w = pick(rng, 2, 4),
                      cin = pick(rng, 8, 10), cout = pick(rng, 1, 3);
    in = {param(random_tensor({n, h, w, cin}, rng)), param(random_tensor({3, 3, cin, cout}, rng)),
          param(random_tensor({cout}, rng))};
    const Tensor wt = random_tensor({n, h, w, cout}, rng);
    return [in, wt](ad::Tape& t) { return weighted_sum(t, ad::conv2d(t, in[0], in[1], in[2]), wt); };
  });
  add("maxpool2d", 21, [](Rng& rng, std::vector<ad::Var>& in) {
    const Shape s{pick(rng, 1, 2), pick(rng, 2, 5), pick(rng, 2, 5), pick(rng, 1, 3)};
    in = {param(random_tensor(s, rng))};
    const Tensor w = random_tensor({s[0], s[1] / 2, s[2] / 2, s[3]}, rng);
    return [in, w](ad::Tape& t) { return weighted_sum(t, ad::maxpool2d(t, in[0]), w); };
  });
  add("softmax_cross_entropy", 22, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 4), c = pick(rng, 2, 6);
    in = {param(random_tensor({n, c}, rng, -3.0, 3.0))};
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(c));
    return [in, labels](ad::Tape& t) { return ad::softmax_cross_entropy(t, in[0], labels); };
  });
  add("composite", 23, [](Rng& rng, std::vector<ad::Var>& in) {
    const std::size_t n = pick(rng, 1, 3), d = pick(rng, 2, 4);
    in = {param(random_tensor({n, d}, rng)), param(random_tensor({d, d}, rng))};
    const Tensor w = random_tensor({n, d}, rng);
    return [in, w](ad::Tape& t) {
      const ad::Var h = ad::tanh(t, ad::matmul(t, in[0], in[1]));
      return weighted_sum(t, ad::add(t, ad::mul(t, h, h), ad::sigmoid(t, h)), w);
    };
  });
  return cases;
}

// Every failing draw of `c` over `instances` random instances, as messages.
inline std::vector<std::string> run_case(const PrimitiveCase& c, int instances,
                                         std::size_t* checked = nullptr) {
  Rng rng(c.seed);
  std::vector<std::string> failures;
  for (int i = 0; i < instances; ++i) {
    std::vector<ad::Var> inputs;
    const LossFn loss = c.setup(rng, inputs);
    const GradCheckResult r = gradcheck(inputs, loss);
    if (checked) *checked += r.checked;
    if (!r.ok) failures.push_back(c.name + " instance " + std::to_string(i) + ": " + r.worst);
  }
  return failures;
}

}  // namespace emoseq::testing
