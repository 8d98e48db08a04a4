#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/matrix.hpp"
#include "attnlab/tokenizer.hpp"

namespace attnlab {

// Dimensions of a multi-headed attention block. n_kv_heads must divide
// n_heads: equal counts is plain MHA, one key-value head is MQA, anything in
// between is GQA with contiguous groups of query heads per key-value head.
struct MhaSpec {
  MhaSpec(std::size_t n_heads, std::size_t n_kv_heads, std::size_t d_in,
          std::size_t d_qk, std::size_t d_head, std::size_t d_out);
  MhaSpec(std::size_t n_heads, std::size_t n_kv_heads, std::size_t d_in,
          std::size_t d_qk, std::size_t d_head, std::size_t d_out, Kernel kernel);

  std::size_t n_heads;
  std::size_t n_kv_heads;
  std::size_t d_in;
  std::size_t d_qk;
  std::size_t d_head;
  std::size_t d_out;
  Kernel kernel;

  std::size_t group_size() const { return n_heads / n_kv_heads; }
  // Key-value head serving query head h (contiguous blocks).
  std::size_t kv_head_for(std::size_t h) const { return h / group_size(); }
};

struct MhaWeights {
  std::vector<Matrix> wq;  // n_heads matrices, d_in x d_qk
  std::vector<Matrix> wk;  // n_kv_heads matrices, d_in x d_qk
  std::vector<Matrix> wv;  // n_kv_heads matrices, d_in x d_head
  Matrix wo;               // (n_heads * d_head) x d_out
};

// Throws when the weight list lengths or shapes disagree with the spec.
void validate_weights(const MhaWeights& w, const MhaSpec& spec);

struct StackedWeights {
  Matrix wq;  // d_in x (n_heads * d_qk)
  Matrix wk;  // d_in x (n_kv_heads * d_qk)
  Matrix wv;  // d_in x (n_kv_heads * d_head)
};

// Column-wise concatenations; per-head products fall out of one matmul.
StackedWeights stacked_weights(const MhaWeights& w);

// Optional rotary embedding applied to the projected per-head queries and
// keys, with explicit absolute start positions for streaming.
struct RopeApplication {
  RopeParams params;
  std::size_t query_start = 0;
  std::size_t key_start = 0;
};

Matrix mha_forward(const Matrix& xq, const Matrix& xkv, const MhaWeights& w,
                   const MhaSpec& spec, const MaskPolicy& mask,
                   const std::optional<RopeApplication>& rope = {});

Matrix self_attention(const Matrix& x, const MhaWeights& w, const MhaSpec& spec,
                      const MaskPolicy& mask,
                      const std::optional<RopeApplication>& rope = {});

// Deterministic weight bundle for a given spec; entries are standard normal
// scaled by 1/sqrt(fan-in) so desk-scale logits stay moderate.
MhaWeights random_mha_weights(const MhaSpec& spec, std::uint64_t seed);

}  // namespace attnlab
