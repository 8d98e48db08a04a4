#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "attnlab/latent.hpp"
#include "attnlab/matrix.hpp"
#include "attnlab/multihead.hpp"

namespace attnlab {

// Append-only per-layer store of projected key/value rows, one pair of
// growing matrices per key-value head. Rows are never mutated after append;
// reallocation is geometric (std::vector) and invisible in results.
class KvCache {
 public:
  explicit KvCache(const MhaSpec& spec);

  std::size_t length() const { return length_; }
  std::size_t kv_heads() const { return k_data_.size(); }

  Matrix keys(std::size_t kv_head) const;    // length x d_qk
  Matrix values(std::size_t kv_head) const;  // length x d_head

  // Projects the new token rows once and appends them. When rope is given,
  // keys are rotated at their absolute positions before caching.
  void append(const Matrix& new_tokens, const MhaWeights& w,
              const std::optional<RopeParams>& rope = {});

 private:
  MhaSpec spec_;
  std::size_t length_ = 0;
  std::vector<std::vector<double>> k_data_;
  std::vector<std::vector<double>> v_data_;
};

// Append-only store of shared latent rows (and, for the decoupled rotary
// variant, the shared rotated key parts). One store serves every head.
class LatentCache {
 public:
  explicit LatentCache(std::size_t d_l, std::size_t d_rope = 0);

  std::size_t length() const { return length_; }
  std::size_t latent_dim() const { return d_l_; }
  std::size_t rope_dim() const { return d_rope_; }

  Matrix latents() const;    // length x d_l
  Matrix rope_keys() const;  // length x d_rope

  void append(const Matrix& new_tokens, const Matrix& w_l);
  void append(const Matrix& new_tokens, const Matrix& w_l, const Matrix& wk_rope,
              const RopeParams& params);

 private:
  std::size_t d_l_;
  std::size_t d_rope_;
  std::size_t length_ = 0;
  std::vector<double> latent_data_;
  std::vector<double> rope_data_;
};

// One streaming step: appends the new tokens' key/value rows, then computes
// attention output only for the new query rows (earlier queries are gone;
// they live on only through the cached keys/values). The causal mask offset
// is the cache length before the append.
Matrix streaming_decode_step(KvCache& cache, const Matrix& query_tokens,
                             const MhaWeights& w, const MhaSpec& spec,
                             const std::optional<RopeParams>& rope = {});

// Latent-path streaming step; only the shared latents are cached.
Matrix streaming_decode_step(LatentCache& cache, const Matrix& query_tokens,
                             const MergedMlaWeights& w, const MlaSpec& spec);

// Decoupled-rotary streaming step; caches latents plus rotated key parts.
Matrix streaming_decode_step(LatentCache& cache, const Matrix& query_tokens,
                             const MergedMlaWeights& w,
                             const DecoupledRopeWeights& rope_w,
                             const RopeParams& params, const MlaSpec& spec);

}  // namespace attnlab
