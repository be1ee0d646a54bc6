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

#include "emoseq/model_zoo.hpp"

#include <cmath>
#include <sstream>

#include "emoseq/error.hpp"

namespace emoseq::model {

std::string_view head_name(HeadKind kind) noexcept {
  switch (kind) {
    case HeadKind::kLstm: return "lstm";
    case HeadKind::kGru: return "gru";
    case HeadKind::kTransformer: return "transformer";
    case HeadKind::kMaxPoolTime: return "maxpool";
  }
  return "unknown";
}

std::optional<HeadKind> parse_head(std::string_view name) noexcept {
  for (HeadKind k : kAllHeads) {
    if (head_name(k) == name) return k;
  }
  return std::nullopt;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::kInvalidArgument, "invalid model config: " + what);
  };
  require(backbone.conv_layers >= 1, "conv_layers must be >= 1");
  require(backbone.filters >= 1, "filters must be >= 1");
  require(backbone.kernel % 2 == 1, "kernel must be odd");
  require(backbone.embed_dim >= 1, "embed_dim must be >= 1");
  require(heads.recurrent_hidden >= 1, "recurrent_hidden must be >= 1");
  require(heads.transformer_heads >= 1 && heads.transformer_layers >= 1 &&
              heads.transformer_ffn_hidden >= 1,
          "transformer sizes must be >= 1");
  require(heads.transformer_d_model % heads.transformer_heads == 0,
          "transformer_d_model must be divisible by transformer_heads");
  if (head == HeadKind::kTransformer) {
    require(heads.transformer_d_model == backbone.embed_dim,
            "transformer_d_model must equal embed_dim");
  }
  require(classifier.post_fusion >= 1 && classifier.fc1 >= 1 && classifier.fc2 >= 1,
          "classifier sizes must be >= 1");
  require(classifier.num_classes >= 2, "num_classes must be >= 2");
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

ad::Var ParameterSet::add(std::string name, Tensor value) {
  ad::Var v = ad::Var::parameter(std::move(value));
  items_.push_back({std::move(name), v});
  return v;
}

Linear ParameterSet::add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = add(name + ".weight", glorot_uniform({in, out}, in, out, rng));
  l.bias = add(name + ".bias", Tensor({out}, 0.0));
  return l;
}

std::vector<ad::Var> ParameterSet::vars() const {
  std::vector<ad::Var> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.var);
  return out;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.var.size();
  return n;
}

Backbone::Backbone(const std::string& prefix, const BackboneConfig& cfg, bool with_embedding,
                   ParameterSet& params, Rng& rng)
    : cfg_(cfg) {
  std::size_t cin = 1;
  const std::size_t k = cfg.kernel;
  for (std::size_t i = 0; i < cfg.conv_layers; ++i) {
    const std::string name = prefix + ".conv" + std::to_string(i + 1);
    const std::string bn = prefix + ".bn" + std::to_string(i + 1);
    Block b{params.add(name + ".kernel",
                       glorot_uniform({k, k, cin, cfg.filters}, k * k * cin, k * k * cfg.filters, rng)),
            params.add(name + ".bias", Tensor({cfg.filters}, 0.0)),
            params.add(bn + ".gamma", Tensor({cfg.filters}, 1.0)),
            params.add(bn + ".beta", Tensor({cfg.filters}, 0.0)),
            ad::BatchNormState(cfg.filters)};
    blocks_.push_back(std::move(b));
    cin = cfg.filters;
  }
  if (with_embedding) embed_ = params.add_linear(prefix + ".embed", cfg.filters, cfg.embed_dim, rng);
}

ad::Var Backbone::pooled_features(ad::Tape& tape, const ad::Var& x, ad::Mode mode) {
  const Shape& s = x.shape();
  const std::size_t min_side = std::size_t{1} << cfg_.conv_layers;
  if (s.size() != 4 || s[3] != 1 || s[0] == 0 || s[1] < min_side || s[2] < min_side) {
    fail(ErrorCode::kShapeMismatch, "backbone input " + shape_to_string(s) +
                                        " must be T x H x W x 1 with H, W >= " +
                                        std::to_string(min_side));
  }
  ad::Var h = x;
  for (auto& b : blocks_) {
    h = ad::conv2d(tape, h, b.kernel, b.bias);
    // Equal to batchnorm, then max-pool, then relu: relu commutes with max,
    // and the fused op never materialises the full-size normalised tensor.
    h = ad::batchnorm_maxpool2d(tape, h, b.gamma, b.beta, b.bn, mode);
    h = ad::relu(tape, h);
  }
  const Shape& hs = h.shape();
  h = ad::reshape(tape, h, {hs[0], hs[1] * hs[2], hs[3]});
  return ad::max_over_axis(tape, h, 1);
}

ad::Var Backbone::forward(ad::Tape& tape, const ad::Var& x, ad::Mode mode) {
  ad::Var pooled = pooled_features(tape, x, mode);
  return embed_ ? (*embed_)(tape, pooled) : pooled;
}

std::size_t Backbone::output_dim() const noexcept {
  return embed_ ? cfg_.embed_dim : cfg_.filters;
}

std::vector<NamedState> Backbone::states(const std::string& prefix) {
  std::vector<NamedState> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string bn = prefix + ".bn" + std::to_string(i + 1);
    out.push_back({bn + ".running_mean", &blocks_[i].bn.running_mean});
    out.push_back({bn + ".running_var", &blocks_[i].bn.running_var});
  }
  return out;
}

namespace {

void require_sequence(const ad::Var& seq, std::size_t dim, const char* head) {
  if (seq.shape().size() != 2 || seq.shape()[0] == 0 || seq.shape()[1] != dim) {
    fail(ErrorCode::kShapeMismatch, std::string(head) + " expects T x " + std::to_string(dim) +
                                        ", got " + shape_to_string(seq.shape()));
  }
}

}  // namespace

LstmHead::LstmHead(const std::string& prefix, std::size_t input, std::size_t hidden,
                   ParameterSet& params, Rng& rng)
    : hidden_(hidden) {
  wx = params.add(prefix + ".wx", glorot_uniform({input, 4 * hidden}, input, 4 * hidden, rng));
  wh = params.add(prefix + ".wh", glorot_uniform({hidden, 4 * hidden}, hidden, 4 * hidden, rng));
  bias = params.add(prefix + ".bias", Tensor({4 * hidden}, 0.0));
}

ad::Var LstmHead::forward(ad::Tape& tape, const ad::Var& seq) {
  require_sequence(seq, wx.shape()[0], "lstm head");
  const std::size_t t_len = seq.shape()[0];
  const std::size_t hd = hidden_;
  const ad::Var xw = ad::linear(tape, seq, wx, bias);
  ad::Var h = ad::Var::constant(Tensor({1, hd}, 0.0));
  ad::Var c = ad::Var::constant(Tensor({1, hd}, 0.0));
  for (std::size_t t = 0; t < t_len; ++t) {
    const ad::Var gates = ad::add(tape, ad::slice(tape, xw, 0, t, t + 1), ad::matmul(tape, h, wh));
    const ad::Var i = ad::sigmoid(tape, ad::slice(tape, gates, 1, 0, hd));
    const ad::Var f = ad::sigmoid(tape, ad::slice(tape, gates, 1, hd, 2 * hd));
    const ad::Var g = ad::tanh(tape, ad::slice(tape, gates, 1, 2 * hd, 3 * hd));
    const ad::Var o = ad::sigmoid(tape, ad::slice(tape, gates, 1, 3 * hd, 4 * hd));
    c = ad::add(tape, ad::mul(tape, f, c), ad::mul(tape, i, g));
    h = ad::mul(tape, o, ad::tanh(tape, c));
  }
  return h;
}

GruHead::GruHead(const std::string& prefix, std::size_t input, std::size_t hidden,
                 ParameterSet& params, Rng& rng)
    : hidden_(hidden) {
  wx = params.add(prefix + ".wx", glorot_uniform({input, 3 * hidden}, input, 3 * hidden, rng));
  u_zr = params.add(prefix + ".u_zr", glorot_uniform({hidden, 2 * hidden}, hidden, 2 * hidden, rng));
  u_h = params.add(prefix + ".u_h", glorot_uniform({hidden, hidden}, hidden, hidden, rng));
  bias = params.add(prefix + ".bias", Tensor({3 * hidden}, 0.0));
}

ad::Var GruHead::forward(ad::Tape& tape, const ad::Var& seq) {
  require_sequence(seq, wx.shape()[0], "gru head");
  const std::size_t t_len = seq.shape()[0];
  const std::size_t hd = hidden_;
  const ad::Var xw = ad::linear(tape, seq, wx, bias);
  ad::Var h = ad::Var::constant(Tensor({1, hd}, 0.0));
  for (std::size_t t = 0; t < t_len; ++t) {
    const ad::Var xt = ad::slice(tape, xw, 0, t, t + 1);
    const ad::Var hzr = ad::matmul(tape, h, u_zr);
    const ad::Var z = ad::sigmoid(
        tape, ad::add(tape, ad::slice(tape, xt, 1, 0, hd), ad::slice(tape, hzr, 1, 0, hd)));
    const ad::Var r = ad::sigmoid(
        tape, ad::add(tape, ad::slice(tape, xt, 1, hd, 2 * hd), ad::slice(tape, hzr, 1, hd, 2 * hd)));
    const ad::Var candidate = ad::tanh(
        tape, ad::add(tape, ad::slice(tape, xt, 1, 2 * hd, 3 * hd),
                      ad::matmul(tape, ad::mul(tape, r, h), u_h)));
    // (1 - z) * h + z * candidate
    h = ad::add(tape, h, ad::mul(tape, z, ad::sub(tape, candidate, h)));
  }
  return h;
}

Tensor positional_encoding(std::size_t timesteps, std::size_t d_model) {
  Tensor pe({timesteps, d_model});
  for (std::size_t t = 0; t < timesteps; ++t) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      const double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
      pe[t * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

TransformerHead::TransformerHead(const std::string& prefix, const HeadConfig& cfg,
                                 ParameterSet& params, Rng& rng)
    : cfg_(cfg) {
  const std::size_t d = cfg.transformer_d_model;
  const std::size_t ffn = cfg.transformer_ffn_hidden;
  for (std::size_t i = 0; i < cfg.transformer_layers; ++i) {
    const std::string p = prefix + ".layer" + std::to_string(i);
    Layer l;
    l.q = params.add_linear(p + ".query", d, d, rng);
    l.k = params.add_linear(p + ".key", d, d, rng);
    l.v = params.add_linear(p + ".value", d, d, rng);
    l.out = params.add_linear(p + ".attn_out", d, d, rng);
    l.ln1_gamma = params.add(p + ".ln1.gamma", Tensor({d}, 1.0));
    l.ln1_beta = params.add(p + ".ln1.beta", Tensor({d}, 0.0));
    l.ffn_in = params.add_linear(p + ".ffn_in", d, ffn, rng);
    l.ffn_out = params.add_linear(p + ".ffn_out", ffn, d, rng);
    l.ln2_gamma = params.add(p + ".ln2.gamma", Tensor({d}, 1.0));
    l.ln2_beta = params.add(p + ".ln2.beta", Tensor({d}, 0.0));
    layers_.push_back(std::move(l));
  }
}

ad::Var TransformerHead::encoder_layer(ad::Tape& tape, const Layer& layer, const ad::Var& x) {
  const std::size_t d = cfg_.transformer_d_model;
  const std::size_t dh = d / cfg_.transformer_heads;
  const ad::Var q = layer.q(tape, x);
  const ad::Var k = layer.k(tape, x);
  const ad::Var v = layer.v(tape, x);
  std::vector<ad::Var> heads;
  heads.reserve(cfg_.transformer_heads);
  for (std::size_t h = 0; h < cfg_.transformer_heads; ++h) {
    heads.push_back(ad::scaled_dot_attention(tape, ad::slice(tape, q, 1, h * dh, (h + 1) * dh),
                                             ad::slice(tape, k, 1, h * dh, (h + 1) * dh),
                                             ad::slice(tape, v, 1, h * dh, (h + 1) * dh)));
  }
  const ad::Var attn = layer.out(tape, ad::concat(tape, heads, 1));
  const ad::Var y = ad::layer_norm(tape, ad::add(tape, x, attn), layer.ln1_gamma, layer.ln1_beta);
  const ad::Var f = layer.ffn_out(tape, ad::relu(tape, layer.ffn_in(tape, y)));
  return ad::layer_norm(tape, ad::add(tape, y, f), layer.ln2_gamma, layer.ln2_beta);
}

ad::Var TransformerHead::encode(ad::Tape& tape, const ad::Var& x) {
  require_sequence(x, cfg_.transformer_d_model, "transformer head");
  ad::Var h = x;
  for (const auto& layer : layers_) h = encoder_layer(tape, layer, h);
  return h;
}

ad::Var TransformerHead::forward(ad::Tape& tape, const ad::Var& seq) {
  require_sequence(seq, cfg_.transformer_d_model, "transformer head");
  const ad::Var pe =
      ad::Var::constant(positional_encoding(seq.shape()[0], cfg_.transformer_d_model));
  const ad::Var encoded = encode(tape, ad::add(tape, seq, pe));
  return ad::reshape(tape, ad::max_over_axis(tape, encoded, 0), {1, cfg_.transformer_d_model});
}

ad::Var MaxPoolTimeHead::forward(ad::Tape& tape, const ad::Var& seq) {
  require_sequence(seq, dim_, "maxpool head");
  return ad::reshape(tape, ad::max_over_axis(tape, seq, 0), {1, dim_});
}

namespace {

std::unique_ptr<SequenceHead> make_head(const ModelConfig& cfg, const std::string& prefix,
                                        std::size_t input, ParameterSet& params, Rng& rng) {
  switch (cfg.head) {
    case HeadKind::kLstm:
      return std::make_unique<LstmHead>(prefix, input, cfg.heads.recurrent_hidden, params, rng);
    case HeadKind::kGru:
      return std::make_unique<GruHead>(prefix, input, cfg.heads.recurrent_hidden, params, rng);
    case HeadKind::kTransformer:
      return std::make_unique<TransformerHead>(prefix, cfg.heads, params, rng);
    case HeadKind::kMaxPoolTime:
      return std::make_unique<MaxPoolTimeHead>(input);
  }
  fail(ErrorCode::kInvalidArgument, "unknown head kind");
}

Tensor as_frames(const Tensor& t, const char* which) {
  if (t.rank() == 3) return t.reshaped({t.dim(0), t.dim(1), t.dim(2), 1});
  if (t.rank() == 4 && t.dim(3) == 1) return t;
  fail(ErrorCode::kShapeMismatch, std::string(which) + " features must be T x H x W (x 1), got " +
                                      shape_to_string(t.shape()));
}

}  // namespace

EmotionModel::EmotionModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  Rng rng(seed);
  params_ = std::make_unique<ParameterSet>();
  const bool embed = cfg_.head != HeadKind::kMaxPoolTime;
  audio_backbone_ = std::make_unique<Backbone>("audio", cfg_.backbone, embed, *params_, rng);
  video_backbone_ = std::make_unique<Backbone>("video", cfg_.backbone, embed, *params_, rng);
  audio_head_ = make_head(cfg_, "audio.head", audio_backbone_->output_dim(), *params_, rng);
  video_head_ = make_head(cfg_, "video.head", video_backbone_->output_dim(), *params_, rng);
  const std::size_t fused = audio_head_->output_dim() + video_head_->output_dim();
  const auto& c = cfg_.classifier;
  post_fusion_ = params_->add_linear("fusion", fused, c.post_fusion, rng);
  fc1_ = params_->add_linear("classifier.0", c.post_fusion, c.fc1, rng);
  fc2_ = params_->add_linear("classifier.1", c.fc1, c.fc2, rng);
  fc_out_ = params_->add_linear("classifier.2", c.fc2, c.num_classes, rng);
  optimizer_ = ad::Adam(params_->vars(), ad::AdamConfig{});
  built_ = true;
}

void EmotionModel::require_built() const {
  if (!built_) fail(ErrorCode::kModelNotBuilt, "emotion model has not been built");
}

ad::Var EmotionModel::fused(ad::Tape& tape, const Tensor& audio, const Tensor& video, ad::Mode mode) {
  require_built();
  const ad::Var a = ad::Var::constant(as_frames(audio, "audio"));
  const ad::Var v = ad::Var::constant(as_frames(video, "video"));
  const ad::Var ha = audio_head_->forward(tape, audio_backbone_->forward(tape, a, mode));
  const ad::Var hv = video_head_->forward(tape, video_backbone_->forward(tape, v, mode));
  const ad::Var parts[] = {ha, hv};
  return ad::concat(tape, parts, 1);
}

ad::Var EmotionModel::forward(ad::Tape& tape, const Tensor& audio, const Tensor& video, ad::Mode mode) {
  ad::Var h = ad::relu(tape, post_fusion_(tape, fused(tape, audio, video, mode)));
  h = ad::relu(tape, fc1_(tape, h));
  h = ad::relu(tape, fc2_(tape, h));
  return fc_out_(tape, h);
}

std::vector<double> EmotionModel::logits(const Tensor& audio, const Tensor& video) {
  ad::Tape tape(false);
  const ad::Var out = forward(tape, audio, video, ad::Mode::kEval);
  return {out.value().values().begin(), out.value().values().end()};
}

int EmotionModel::predict(const Tensor& audio, const Tensor& video) {
  const auto z = logits(audio, video);
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return static_cast<int>(best);
}

std::size_t EmotionModel::count_parameters() const noexcept {
  return params_ ? params_->scalar_count() : 0;
}

std::vector<NamedState> EmotionModel::states() {
  require_built();
  auto out = audio_backbone_->states("audio");
  auto video = video_backbone_->states("video");
  out.insert(out.end(), video.begin(), video.end());
  return out;
}

ModelState EmotionModel::snapshot() {
  ModelState s;
  for (const auto& p : params_->items()) s.parameters.push_back(p.var.value());
  for (const auto& st : states()) s.states.push_back(*st.tensor);
  return s;
}

void EmotionModel::restore(const ModelState& state) {
  require_built();
  const auto& items = params_->items();
  auto named_states = states();
  if (state.parameters.size() != items.size() || state.states.size() != named_states.size()) {
    fail(ErrorCode::kShapeMismatch, "model snapshot does not match architecture");
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (state.parameters[i].shape() != items[i].var.shape()) {
      fail(ErrorCode::kShapeMismatch, "snapshot shape mismatch for " + items[i].name);
    }
    ad::Var v = items[i].var;
    v.mutable_value() = state.parameters[i];
  }
  for (std::size_t i = 0; i < named_states.size(); ++i) {
    if (state.states[i].shape() != named_states[i].tensor->shape()) {
      fail(ErrorCode::kShapeMismatch, "snapshot shape mismatch for " + named_states[i].name);
    }
    *named_states[i].tensor = state.states[i];
  }
}

std::string EmotionModel::describe() const {
  require_built();
  std::ostringstream out;
  const auto& b = cfg_.backbone;
  const auto& h = cfg_.heads;
  const auto& c = cfg_.classifier;
  out << "head=" << head_name(cfg_.head) << "\n";
  out << "seed=" << seed_ << "\n";
  out << "backbone: " << b.conv_layers << " x (conv " << b.kernel << "x" << b.kernel << "/"
      << b.filters << " -> batchnorm -> relu -> maxpool 2x2), spatial global max";
  if (cfg_.head != HeadKind::kMaxPoolTime) out << " -> affine " << b.filters << "->" << b.embed_dim;
  out << "\n";
  switch (cfg_.head) {
    case HeadKind::kLstm:
    case HeadKind::kGru:
      out << "sequence head: " << head_name(cfg_.head) << " hidden " << h.recurrent_hidden
          << ", last timestep\n";
      break;
    case HeadKind::kTransformer:
      out << "sequence head: transformer d_model " << h.transformer_d_model << ", heads "
          << h.transformer_heads << ", ffn " << h.transformer_ffn_hidden << ", layers "
          << h.transformer_layers << ", post-norm, global max over time\n";
      break;
    case HeadKind::kMaxPoolTime:
      out << "sequence head: max over time\n";
      break;
  }
  out << "fusion: concat(" << audio_head_->output_dim() << " + " << video_head_->output_dim()
      << ") -> affine " << c.post_fusion << " -> relu\n";
  out << "classifier: " << c.fc1 << " -> relu -> " << c.fc2 << " -> relu -> " << c.num_classes
      << "\n";
  out << "parameters:\n";
  for (const auto& p : params_->items()) {
    out << "  " << p.name << " " << shape_to_string(p.var.shape()) << " " << p.var.size() << "\n";
  }
  out << "total_parameters=" << count_parameters() << "\n";
  return out.str();
}

}  // namespace emoseq::model
