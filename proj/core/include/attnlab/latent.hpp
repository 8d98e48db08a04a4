#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/matrix.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/tokenizer.hpp"

namespace attnlab {

// Dimensions of a multi-head latent attention block. The key/value latent
// width d_l and the query latent width d_lq are both at most d_in; every head
// shares the same latent, so per-head lists always have n_heads entries.
struct MlaSpec {
  MlaSpec(std::size_t n_heads, std::size_t d_in, std::size_t d_l, std::size_t d_lq,
          std::size_t d_head, std::size_t d_out);

  std::size_t n_heads;
  std::size_t d_in;
  std::size_t d_l;
  std::size_t d_lq;
  std::size_t d_head;
  std::size_t d_out;
};

// Unmerged latent weights: shared latent projections plus per-head maps from
// the latents back to the query/key/value embeddings.
struct MlaWeights {
  Matrix w_l;                // d_in x d_l, shared key/value latent
  Matrix w_lq;               // d_in x d_lq, query latent
  std::vector<Matrix> w_lqq; // n_heads, d_lq x d_head
  std::vector<Matrix> w_lk;  // n_heads, d_l x d_head
  std::vector<Matrix> w_lv;  // n_heads, d_l x d_head
  Matrix wo;                 // (n_heads * d_head) x d_out
};

// Post-merge form: w_lqk[h] = w_lqq[h] * w_lk[h]^T scores queries directly
// against latents, and w_lo = block_diag(w_lv) * wo carries the concatenated
// per-head latent outputs to d_out. These four tensors are all that decode
// needs.
struct MergedMlaWeights {
  Matrix w_l;                 // d_in x d_l
  Matrix w_lq;                // d_in x d_lq
  std::vector<Matrix> w_lqk;  // n_heads, d_lq x d_l
  Matrix w_lo;                // (n_heads * d_l) x d_out
};

void validate_weights(const MlaWeights& w, const MlaSpec& spec);
void validate_weights(const MergedMlaWeights& w, const MlaSpec& spec);

MergedMlaWeights merge_weights(const MlaWeights& w);

// Latent attention with merged weights: L = x w_l is computed once and shared
// across heads, per-head scores are exp(L_Q w_lqk[h] L^T / logit_denom), and
// head outputs are the normalized score-weighted latents. logit_denom
// defaults to sqrt(d_head) to match the scaled-exponential kernel.
Matrix mla_forward(const Matrix& x, const MergedMlaWeights& w, const MlaSpec& spec,
                   const MaskPolicy& mask,
                   std::optional<double> logit_denom = {});

// Cross form of the above: queries and key/values from different inputs.
Matrix mla_forward_split(const Matrix& xq, const Matrix& xkv,
                         const MergedMlaWeights& w, const MlaSpec& spec,
                         const MaskPolicy& mask,
                         std::optional<double> logit_denom = {});

// Attention over precomputed query latents and (typically cached) latents.
// rope_q holds the n_heads rotated query parts side by side and rope_k the
// shared rotated key part; both null for the plain latent path.
Matrix mla_attend_latents(const Matrix& lq, const Matrix& latents,
                          const MergedMlaWeights& w, const MlaSpec& spec,
                          const MaskPolicy& mask,
                          std::optional<double> logit_denom = {},
                          const Matrix* rope_q = nullptr,
                          const Matrix* rope_k = nullptr);

// Two-stage reference path that materializes per-head Q, K, V from the
// unmerged weights; the merged path must agree with it.
Matrix mla_forward_unmerged(const Matrix& x, const MlaWeights& w, const MlaSpec& spec,
                            const MaskPolicy& mask);

// Explicit MHA weights equivalent to the latent model (each head gets its own
// expanded key/value projection).
MhaWeights expand_to_mha(const MlaWeights& w, const MlaSpec& spec);
MhaSpec expanded_mha_spec(const MlaSpec& spec);

struct MlaFactorization {
  MlaWeights weights;
  double kv_error;     // Frobenius residual of the shared [K|V] factorization
  double query_error;  // Frobenius residual of the query factorization
  double total_error;  // sqrt(kv_error^2 + query_error^2)
};

// Builds latent weights from plain MHA weights (n_kv_heads == n_heads,
// d_qk == d_head) by a rank-d_l SVD of the column-stacked [W_K | W_V] and a
// rank-d_lq SVD of the stacked W_Q. Exact whenever the stacked matrices have
// rank at most the requested latent widths.
MlaFactorization factorize_mha_to_mla(const MhaWeights& w, const MhaSpec& spec,
                                      std::size_t d_l, std::size_t d_lq);

// Decoupled rotary variant: each head carries an extra d_rope-wide query part
// and all heads share one d_rope-wide key part; the rotation is applied to
// those parts only, keeping the latent score merge valid. d_rope is
// params.head_dim and may be zero.
struct DecoupledRopeWeights {
  std::vector<Matrix> wq_rope;  // n_heads, d_in x d_rope
  Matrix wk_rope;               // d_in x d_rope, shared across heads
};

Matrix mla_forward_decoupled_rope(const Matrix& x, const MergedMlaWeights& w,
                                  const DecoupledRopeWeights& rope_w,
                                  const RopeParams& params, const MlaSpec& spec,
                                  const MaskPolicy& mask, std::size_t start_pos = 0);

// Demonstration pair for the rotary/merge conflict. The unmerged reference
// rotates the materialized per-head queries and keys; the naive merged path
// can only rotate the latents themselves and therefore computes something
// else. Requires even d_l and d_lq for the naive path.
Matrix mla_forward_rope_unmerged(const Matrix& x, const MlaWeights& w,
                                 const MlaSpec& spec, const MaskPolicy& mask,
                                 double rope_base = 10000.0,
                                 std::size_t start_pos = 0);
Matrix mla_forward_rope_naive(const Matrix& x, const MergedMlaWeights& w,
                              const MlaSpec& spec, const MaskPolicy& mask,
                              double rope_base = 10000.0, std::size_t start_pos = 0);

// Deterministic latent weight bundle, 1/sqrt(fan-in) scaling.
MlaWeights random_mla_weights(const MlaSpec& spec, std::uint64_t seed);
DecoupledRopeWeights random_decoupled_rope_weights(const MlaSpec& spec,
                                                   std::size_t d_rope,
                                                   std::uint64_t seed);

}  // namespace attnlab
