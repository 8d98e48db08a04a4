#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "attnlab/cache.hpp"
#include "attnlab/matrix.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/tokenizer.hpp"

namespace attnlab {

enum class NormKind { LayerNorm, RmsNorm };

struct NormParams {
  NormKind kind = NormKind::LayerNorm;
  std::vector<double> gamma;  // gain, length d
  std::vector<double> beta;   // shift, length d; ignored by RmsNorm
  double epsilon = 1e-5;

  static NormParams layer_norm(std::size_t d);
  static NormParams rms_norm(std::size_t d);
};

// (x - mean) / sqrt(var + eps), then gain and shift.
std::vector<double> layer_norm(std::span<const double> x, const NormParams& p);

// x / sqrt(mean(x^2) + eps), then gain; no recentering, no shift.
std::vector<double> rms_norm(std::span<const double> x, const NormParams& p);

// Row-wise application of whichever norm p selects.
Matrix apply_norm(const Matrix& x, const NormParams& p);

enum class Activation { Relu, Silu };

double activate(Activation f, double x);

// Two-layer feed-forward d -> d_ff -> d. The gated form multiplies the
// activated branch by a second affine map before the output projection.
struct FfnParams {
  bool gated = false;
  Activation activation = Activation::Relu;
  Matrix w1;               // d x d_ff
  std::vector<double> b1;  // d_ff
  Matrix w2;               // d x d_ff, gated only
  std::vector<double> b2;  // d_ff, gated only
  Matrix w_out;            // d_ff x d
};

Matrix ffn_forward(const Matrix& x, const FfnParams& p);

enum class NormPlacement { PostLn, PreLn };

// One encoder/decoder layer. Skip connections force the attention output and
// FFN output widths back to d_in, so d_out == d_in for both attention specs.
struct LayerConfig {
  NormPlacement placement = NormPlacement::PostLn;
  MhaSpec attn_spec;
  MhaWeights attn_weights;
  NormParams norm_attn;
  NormParams norm_ffn;
  FfnParams ffn;
  std::optional<RopeParams> rope;  // rotary Q/K in self-attention only

  // Cross-attention sublayer (decoder layers only).
  std::optional<MhaSpec> cross_spec;
  std::optional<MhaWeights> cross_weights;
  std::optional<NormParams> norm_cross;

  explicit LayerConfig(MhaSpec spec) : attn_spec(spec) {}
};

// Self-attention then FFN, skips and norms per placement. self_mask lets the
// decoder-only stacks reuse the same sublayer wiring with a causal mask;
// rope_start carries the absolute position of row 0 for streaming.
Matrix encoder_layer(const Matrix& x, const LayerConfig& cfg,
                     const MaskPolicy& self_mask = MaskPolicy::none(),
                     std::size_t rope_start = 0);

// Causal self-attention, cross-attention against enc_out, then FFN.
Matrix decoder_layer(const Matrix& x, const Matrix& enc_out, const LayerConfig& cfg);

struct TransformerModel {
  EmbeddingTable embedding;  // shared by source and target
  std::vector<LayerConfig> encoder_layers;
  std::vector<LayerConfig> decoder_layers;
};

// Full encoder-decoder forward; returns the final decoder state (no task head).
Matrix transformer_forward(const std::vector<std::size_t>& src_tokens,
                           const std::vector<std::size_t>& tgt_tokens,
                           const TransformerModel& model);

struct GptModel {
  EmbeddingTable embedding;
  std::vector<LayerConfig> layers;  // causal self-attention only
};

Matrix gpt_forward(const std::vector<std::size_t>& tokens, const GptModel& model);

// Declarative stack shape, loadable from JSON (module io). Zero means "use
// the default": n_kv_heads falls back to n_heads and d_ff to 4 * d_model.
struct StackConfig {
  std::size_t depth = 1;
  std::size_t d_model = 8;
  std::size_t n_heads = 1;
  std::size_t n_kv_heads = 0;
  std::size_t d_ff = 0;
  NormPlacement placement = NormPlacement::PostLn;
  NormKind norm_kind = NormKind::LayerNorm;
  Activation activation = Activation::Relu;
  bool gated_ffn = false;
  bool rope = false;
  std::uint64_t seed = 42;
};

// Deterministic seeded GPT stack with the given shape.
GptModel build_gpt_model(const StackConfig& cfg, std::size_t vocab_size);

// Incremental GPT forward over per-layer key/value caches: feeding tokens in
// chunks reproduces gpt_forward on the concatenated sequence row for row.
class GptDecoder {
 public:
  explicit GptDecoder(const GptModel& model);

  std::size_t position() const { return position_; }

  // Returns the final-layer rows for the new tokens only.
  Matrix decode_step(const std::vector<std::size_t>& new_tokens);

 private:
  const GptModel& model_;
  std::vector<KvCache> caches_;
  std::size_t position_ = 0;
};

}  // namespace attnlab
