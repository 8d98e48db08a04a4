#include "attnlab/blocks.hpp"

#include <cmath>
#include <functional>

#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"

namespace attnlab {

NormParams NormParams::layer_norm(std::size_t d) {
  NormParams p;
  p.kind = NormKind::LayerNorm;
  p.gamma.assign(d, 1.0);
  p.beta.assign(d, 0.0);
  return p;
}

NormParams NormParams::rms_norm(std::size_t d) {
  NormParams p;
  p.kind = NormKind::RmsNorm;
  p.gamma.assign(d, 1.0);
  return p;
}

std::vector<double> layer_norm(std::span<const double> x, const NormParams& p) {
  const std::size_t d = x.size();
  if (p.gamma.size() != d || p.beta.size() != d) {
    throw ShapeError("layer_norm: gain/shift of length " +
                     std::to_string(p.gamma.size()) + "/" +
                     std::to_string(p.beta.size()) + " for input of length " +
                     std::to_string(d));
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(d);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const double inv = 1.0 / std::sqrt(var + p.epsilon);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = p.gamma[i] * ((x[i] - mean) * inv) + p.beta[i];
  }
  return out;
}

std::vector<double> rms_norm(std::span<const double> x, const NormParams& p) {
  const std::size_t d = x.size();
  if (p.gamma.size() != d) {
    throw ShapeError("rms_norm: gain of length " + std::to_string(p.gamma.size()) +
                     " for input of length " + std::to_string(d));
  }
  double mean_sq = 0.0;
  for (double v : x) mean_sq += v * v;
  mean_sq /= static_cast<double>(d);
  const double inv = 1.0 / std::sqrt(mean_sq + p.epsilon);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = p.gamma[i] * x[i] * inv;
  return out;
}

Matrix apply_norm(const Matrix& x, const NormParams& p) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::vector<double> row = p.kind == NormKind::LayerNorm
                                        ? layer_norm(x.row(i), p)
                                        : rms_norm(x.row(i), p);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = row[j];
  }
  return out;
}

double activate(Activation f, double x) {
  switch (f) {
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Silu:
      return x / (1.0 + std::exp(-x));
  }
  return x;
}

Matrix ffn_forward(const Matrix& x, const FfnParams& p) {
  if (x.cols() != p.w1.rows()) {
    throw ShapeError("ffn_forward: input " + x.shape_string() + " vs w1 " +
                     p.w1.shape_string());
  }
  const std::size_t d_ff = p.w1.cols();
  if (p.b1.size() != d_ff) {
    throw ShapeError("ffn_forward: b1 length " + std::to_string(p.b1.size()) +
                     " vs hidden width " + std::to_string(d_ff));
  }
  Matrix hidden = matmul(x, p.w1);
  for (std::size_t i = 0; i < hidden.rows(); ++i) {
    for (std::size_t j = 0; j < d_ff; ++j) {
      hidden(i, j) = activate(p.activation, hidden(i, j) + p.b1[j]);
    }
  }
  if (p.gated) {
    if (p.w2.rows() != p.w1.rows() || p.w2.cols() != d_ff || p.b2.size() != d_ff) {
      throw ShapeError("ffn_forward: gate weights " + p.w2.shape_string() +
                       " inconsistent with w1 " + p.w1.shape_string());
    }
    Matrix gate = matmul(x, p.w2);
    for (std::size_t i = 0; i < hidden.rows(); ++i) {
      for (std::size_t j = 0; j < d_ff; ++j) {
        hidden(i, j) *= gate(i, j) + p.b2[j];
      }
    }
  }
  return matmul(hidden, p.w_out);
}

namespace {

Matrix self_attn_sublayer(const Matrix& x, const LayerConfig& cfg,
                          const MaskPolicy& mask, std::size_t rope_start) {
  std::optional<RopeApplication> rope;
  if (cfg.rope) {
    rope = RopeApplication{*cfg.rope, rope_start, rope_start};
  }
  return self_attention(x, cfg.attn_weights, cfg.attn_spec, mask, rope);
}

// skip + norm wiring shared by every sublayer.
Matrix run_sublayer(const Matrix& x, const NormParams& norm, NormPlacement placement,
                    const std::function<Matrix(const Matrix&)>& body) {
  if (placement == NormPlacement::PreLn) {
    return add(x, body(apply_norm(x, norm)));
  }
  return apply_norm(add(x, body(x)), norm);
}

}  // namespace

Matrix encoder_layer(const Matrix& x, const LayerConfig& cfg,
                     const MaskPolicy& self_mask, std::size_t rope_start) {
  const Matrix after_attn =
      run_sublayer(x, cfg.norm_attn, cfg.placement, [&](const Matrix& in) {
        return self_attn_sublayer(in, cfg, self_mask, rope_start);
      });
  return run_sublayer(after_attn, cfg.norm_ffn, cfg.placement,
                      [&](const Matrix& in) { return ffn_forward(in, cfg.ffn); });
}

Matrix decoder_layer(const Matrix& x, const Matrix& enc_out, const LayerConfig& cfg) {
  if (!cfg.cross_spec || !cfg.cross_weights || !cfg.norm_cross) {
    throw ArgumentError("decoder_layer: config has no cross-attention sublayer");
  }
  const Matrix after_self =
      run_sublayer(x, cfg.norm_attn, cfg.placement, [&](const Matrix& in) {
        return self_attn_sublayer(in, cfg, MaskPolicy::causal(), 0);
      });
  const Matrix after_cross =
      run_sublayer(after_self, *cfg.norm_cross, cfg.placement, [&](const Matrix& in) {
        return mha_forward(in, enc_out, *cfg.cross_weights, *cfg.cross_spec,
                           MaskPolicy::none());
      });
  return run_sublayer(after_cross, cfg.norm_ffn, cfg.placement,
                      [&](const Matrix& in) { return ffn_forward(in, cfg.ffn); });
}

Matrix transformer_forward(const std::vector<std::size_t>& src_tokens,
                           const std::vector<std::size_t>& tgt_tokens,
                           const TransformerModel& model) {
  if (model.encoder_layers.size() != model.decoder_layers.size()) {
    throw ArgumentError("transformer_forward: " +
                        std::to_string(model.encoder_layers.size()) +
                        " encoder layers vs " +
                        std::to_string(model.decoder_layers.size()) + " decoder");
  }
  Matrix enc = embed(src_tokens, model.embedding);
  for (const LayerConfig& layer : model.encoder_layers) {
    enc = encoder_layer(enc, layer);
  }
  Matrix dec = embed(tgt_tokens, model.embedding);
  for (const LayerConfig& layer : model.decoder_layers) {
    dec = decoder_layer(dec, enc, layer);
  }
  return dec;
}

Matrix gpt_forward(const std::vector<std::size_t>& tokens, const GptModel& model) {
  Matrix x = embed(tokens, model.embedding);
  for (const LayerConfig& layer : model.layers) {
    x = encoder_layer(x, layer, MaskPolicy::causal(), 0);
  }
  return x;
}

GptModel build_gpt_model(const StackConfig& cfg, std::size_t vocab_size) {
  if (cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0) {
    throw ArgumentError("build_gpt_model: n_heads " + std::to_string(cfg.n_heads) +
                        " must divide d_model " + std::to_string(cfg.d_model));
  }
  const std::size_t n_kv = cfg.n_kv_heads == 0 ? cfg.n_heads : cfg.n_kv_heads;
  const std::size_t d_head = cfg.d_model / cfg.n_heads;
  const std::size_t d_ff = cfg.d_ff == 0 ? 4 * cfg.d_model : cfg.d_ff;
  if (cfg.rope && d_head % 2 != 0) {
    throw ArgumentError("build_gpt_model: rotary needs an even head width, got " +
                        std::to_string(d_head));
  }

  Rng rng = make_rng(cfg.seed);
  GptModel model;
  model.embedding.table =
      gaussian_matrix(vocab_size, cfg.d_model, rng,
                      1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const MhaSpec spec(cfg.n_heads, n_kv, cfg.d_model, d_head, d_head, cfg.d_model);
    LayerConfig layer(spec);
    layer.placement = cfg.placement;
    layer.attn_weights = random_mha_weights(spec, rng());
    layer.norm_attn = cfg.norm_kind == NormKind::LayerNorm
                          ? NormParams::layer_norm(cfg.d_model)
                          : NormParams::rms_norm(cfg.d_model);
    layer.norm_ffn = layer.norm_attn;
    layer.ffn.gated = cfg.gated_ffn;
    layer.ffn.activation = cfg.activation;
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    const double ff_scale = 1.0 / std::sqrt(static_cast<double>(d_ff));
    layer.ffn.w1 = gaussian_matrix(cfg.d_model, d_ff, rng, in_scale);
    layer.ffn.b1.assign(d_ff, 0.0);
    if (cfg.gated_ffn) {
      layer.ffn.w2 = gaussian_matrix(cfg.d_model, d_ff, rng, in_scale);
      layer.ffn.b2.assign(d_ff, 1.0);
    }
    layer.ffn.w_out = gaussian_matrix(d_ff, cfg.d_model, rng, ff_scale);
    if (cfg.rope) layer.rope = RopeParams{d_head, 10000.0};
    model.layers.push_back(std::move(layer));
  }
  return model;
}

GptDecoder::GptDecoder(const GptModel& model) : model_(model) {
  caches_.reserve(model.layers.size());
  for (const LayerConfig& layer : model.layers) {
    caches_.emplace_back(layer.attn_spec);
  }
}

Matrix GptDecoder::decode_step(const std::vector<std::size_t>& new_tokens) {
  Matrix x = embed(new_tokens, model_.embedding);
  for (std::size_t l = 0; l < model_.layers.size(); ++l) {
    const LayerConfig& cfg = model_.layers[l];
    std::optional<RopeParams> rope;
    if (cfg.rope) rope = *cfg.rope;

    // The cache holds the projected rows of whatever this sublayer feeds to
    // attention, so PreLN appends normalized rows and PostLN raw ones.
    if (cfg.placement == NormPlacement::PreLn) {
      const Matrix attn_in = apply_norm(x, cfg.norm_attn);
      x = add(x, streaming_decode_step(caches_[l], attn_in, cfg.attn_weights,
                                       cfg.attn_spec, rope));
      x = add(x, ffn_forward(apply_norm(x, cfg.norm_ffn), cfg.ffn));
    } else {
      x = apply_norm(add(x, streaming_decode_step(caches_[l], x, cfg.attn_weights,
                                                  cfg.attn_spec, rope)),
                     cfg.norm_attn);
      x = apply_norm(add(x, ffn_forward(x, cfg.ffn)), cfg.norm_ffn);
    }
  }
  position_ += new_tokens.size();
  return x;
}

}  // namespace attnlab
