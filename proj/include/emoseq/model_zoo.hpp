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
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoseq/adam.hpp"
#include "emoseq/autograd.hpp"
#include "emoseq/rng.hpp"

namespace emoseq::model {

enum class HeadKind { kLstm, kGru, kTransformer, kMaxPoolTime };

inline constexpr HeadKind kAllHeads[] = {HeadKind::kLstm, HeadKind::kGru, HeadKind::kTransformer,
                                         HeadKind::kMaxPoolTime};

// "lstm", "gru", "transformer", "maxpool".
std::string_view head_name(HeadKind kind) noexcept;
std::optional<HeadKind> parse_head(std::string_view name) noexcept;

struct BackboneConfig {
  std::size_t conv_layers = 3;
  std::size_t filters = 32;
  std::size_t kernel = 3;
  std::size_t embed_dim = 64;
};

struct HeadConfig {
  std::size_t recurrent_hidden = 128;
  std::size_t transformer_d_model = 64;
  std::size_t transformer_ffn_hidden = 64;
  std::size_t transformer_heads = 4;
  std::size_t transformer_layers = 1;
};

// fused -> post_fusion (relu) -> fc1 (relu) -> fc2 (relu) -> num_classes.
struct ClassifierConfig {
  std::size_t post_fusion = 128;
  std::size_t fc1 = 128;
  std::size_t fc2 = 64;
  std::size_t num_classes = 6;
};

struct ModelConfig {
  HeadKind head = HeadKind::kLstm;
  BackboneConfig backbone;
  HeadConfig heads;
  ClassifierConfig classifier;

  void validate() const;
};

struct NamedParameter {
  std::string name;
  ad::Var var;
};

struct NamedState {
  std::string name;
  Tensor* tensor;
};

struct Linear {
  ad::Var weight;  // in x out
  ad::Var bias;    // out
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const { return ad::linear(tape, x, weight, bias); }
};

class ParameterSet {
 public:
  ad::Var add(std::string name, Tensor value);
  Linear add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  const std::vector<NamedParameter>& items() const noexcept { return items_; }
  std::vector<ad::Var> vars() const;
  std::size_t scalar_count() const noexcept;

 private:
  std::vector<NamedParameter> items_;
};

// Glorot-uniform tensor for the given fan sizes.
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Per-timestep CNN: conv -> batchnorm -> relu -> maxpool, repeated, then a
// spatial global max and (optionally) an affine embedding.
class Backbone {
 public:
  Backbone(const std::string& prefix, const BackboneConfig& cfg, bool with_embedding,
           ParameterSet& params, Rng& rng);

  // x: T x H x W x 1 with timesteps on the batch axis. Returns T x filters.
  ad::Var pooled_features(ad::Tape& tape, const ad::Var& x, ad::Mode mode);
  // T x embed_dim (or T x filters without an embedding).
  ad::Var forward(ad::Tape& tape, const ad::Var& x, ad::Mode mode);

  std::size_t output_dim() const noexcept;
  std::vector<NamedState> states(const std::string& prefix);

 private:
  struct Block {
    ad::Var kernel, bias, gamma, beta;
    ad::BatchNormState bn;
  };
  BackboneConfig cfg_;
  std::vector<Block> blocks_;
  std::optional<Linear> embed_;
};

// T x d sequence -> one clip-level vector (1 x output_dim).
class SequenceHead {
 public:
  virtual ~SequenceHead() = default;
  virtual ad::Var forward(ad::Tape& tape, const ad::Var& seq) = 0;
  virtual std::size_t output_dim() const noexcept = 0;
};

class LstmHead final : public SequenceHead {
 public:
  LstmHead(const std::string& prefix, std::size_t input, std::size_t hidden, ParameterSet& params,
           Rng& rng);
  ad::Var forward(ad::Tape& tape, const ad::Var& seq) override;
  std::size_t output_dim() const noexcept override { return hidden_; }

  // Gate layout along the 4H axis is i, f, g, o.
  ad::Var wx, wh, bias;

 private:
  std::size_t hidden_;
};

class GruHead final : public SequenceHead {
 public:
  GruHead(const std::string& prefix, std::size_t input, std::size_t hidden, ParameterSet& params,
          Rng& rng);
  ad::Var forward(ad::Tape& tape, const ad::Var& seq) override;
  std::size_t output_dim() const noexcept override { return hidden_; }

  // Gate layout along the 3H axis is z, r, candidate.
  ad::Var wx, u_zr, u_h, bias;

 private:
  std::size_t hidden_;
};

// Sinusoidal position table, T x d.
Tensor positional_encoding(std::size_t timesteps, std::size_t d_model);

class TransformerHead final : public SequenceHead {
 public:
  TransformerHead(const std::string& prefix, const HeadConfig& cfg, ParameterSet& params, Rng& rng);
  ad::Var forward(ad::Tape& tape, const ad::Var& seq) override;
  std::size_t output_dim() const noexcept override { return cfg_.transformer_d_model; }

  // Encoder stack only (no position table, no pooling): T x d -> T x d.
  ad::Var encode(ad::Tape& tape, const ad::Var& x);

 private:
  struct Layer {
    Linear q, k, v, out, ffn_in, ffn_out;
    ad::Var ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
  };
  ad::Var encoder_layer(ad::Tape& tape, const Layer& layer, const ad::Var& x);

  HeadConfig cfg_;
  std::vector<Layer> layers_;
};

class MaxPoolTimeHead final : public SequenceHead {
 public:
  explicit MaxPoolTimeHead(std::size_t dim) : dim_(dim) {}
  ad::Var forward(ad::Tape& tape, const ad::Var& seq) override;
  std::size_t output_dim() const noexcept override { return dim_; }

 private:
  std::size_t dim_;
};

// Snapshot of every trainable parameter and batchnorm statistic.
struct ModelState {
  std::vector<Tensor> parameters;
  std::vector<Tensor> states;
};

class EmotionModel {
 public:
  EmotionModel() = default;  // not built
  EmotionModel(ModelConfig cfg, std::uint64_t seed);
  EmotionModel(EmotionModel&&) noexcept = default;
  EmotionModel& operator=(EmotionModel&&) noexcept = default;

  bool built() const noexcept { return built_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // audio: Ta x Ha x Wa (x 1), video: Tv x Hv x Wv (x 1). Returns 1 x C logits.
  ad::Var forward(ad::Tape& tape, const Tensor& audio, const Tensor& video, ad::Mode mode);
  // Eval-mode logits, one vector per clip.
  std::vector<double> logits(const Tensor& audio, const Tensor& video);
  int predict(const Tensor& audio, const Tensor& video);

  // Vector fed to the post-fusion affine: 1 x (audio head dim + video head dim).
  ad::Var fused(ad::Tape& tape, const Tensor& audio, const Tensor& video, ad::Mode mode);

  const ParameterSet& parameters() const noexcept { return *params_; }
  std::size_t count_parameters() const noexcept;
  std::vector<NamedState> states();

  ModelState snapshot();
  void restore(const ModelState& state);

  ad::Adam& optimizer() noexcept { return optimizer_; }

  Backbone& audio_backbone() { return *audio_backbone_; }
  Backbone& video_backbone() { return *video_backbone_; }
  SequenceHead& audio_head() { return *audio_head_; }
  SequenceHead& video_head() { return *video_head_; }

  // Human-readable architecture listing with per-layer parameter counts.
  std::string describe() const;

 private:
  void require_built() const;

  bool built_ = false;
  ModelConfig cfg_;
  std::uint64_t seed_ = 0;
  std::unique_ptr<ParameterSet> params_;
  std::unique_ptr<Backbone> audio_backbone_;
  std::unique_ptr<Backbone> video_backbone_;
  std::unique_ptr<SequenceHead> audio_head_;
  std::unique_ptr<SequenceHead> video_head_;
  Linear post_fusion_;
  Linear fc1_, fc2_, fc_out_;
  ad::Adam optimizer_;
};

}  // namespace emoseq::model
