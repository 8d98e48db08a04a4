#include "attnlab/cache.hpp"

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

Matrix rows_from(const std::vector<double>& data, std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols,
                std::vector<double>(data.begin(), data.begin() + rows * cols));
}

void append_rows(std::vector<double>& store, const Matrix& m) {
  store.insert(store.end(), m.data().begin(), m.data().end());
}

}  // namespace

KvCache::KvCache(const MhaSpec& spec)
    : spec_(spec), k_data_(spec.n_kv_heads), v_data_(spec.n_kv_heads) {}

Matrix KvCache::keys(std::size_t kv_head) const {
  return rows_from(k_data_[kv_head], length_, spec_.d_qk);
}

Matrix KvCache::values(std::size_t kv_head) const {
  return rows_from(v_data_[kv_head], length_, spec_.d_head);
}

void KvCache::append(const Matrix& new_tokens, const MhaWeights& w,
                     const std::optional<RopeParams>& rope) {
  validate_weights(w, spec_);
  if (new_tokens.rows() == 0) return;
  if (new_tokens.cols() != spec_.d_in) {
    throw ShapeError("KvCache::append: tokens " + new_tokens.shape_string() +
                     " must have d_in " + std::to_string(spec_.d_in) + " columns");
  }
  for (std::size_t g = 0; g < spec_.n_kv_heads; ++g) {
    Matrix k = matmul(new_tokens, w.wk[g]);
    if (rope) k = apply_rope(k, length_, *rope);
    append_rows(k_data_[g], k);
    append_rows(v_data_[g], matmul(new_tokens, w.wv[g]));
  }
  length_ += new_tokens.rows();
}

LatentCache::LatentCache(std::size_t d_l, std::size_t d_rope)
    : d_l_(d_l), d_rope_(d_rope) {
  if (d_l_ == 0) {
    throw ArgumentError("LatentCache: d_l must be positive");
  }
}

Matrix LatentCache::latents() const { return rows_from(latent_data_, length_, d_l_); }

Matrix LatentCache::rope_keys() const {
  return rows_from(rope_data_, length_, d_rope_);
}

void LatentCache::append(const Matrix& new_tokens, const Matrix& w_l) {
  if (d_rope_ != 0) {
    throw ArgumentError(
        "LatentCache::append: this cache stores rotated key parts; use the "
        "rope-aware overload");
  }
  if (new_tokens.rows() == 0) return;
  append_rows(latent_data_, matmul(new_tokens, w_l));
  length_ += new_tokens.rows();
}

void LatentCache::append(const Matrix& new_tokens, const Matrix& w_l,
                         const Matrix& wk_rope, const RopeParams& params) {
  if (params.head_dim != d_rope_) {
    throw ShapeError("LatentCache::append: rope width " +
                     std::to_string(params.head_dim) + " differs from cache's " +
                     std::to_string(d_rope_));
  }
  if (new_tokens.rows() == 0) return;
  append_rows(latent_data_, matmul(new_tokens, w_l));
  if (d_rope_ != 0) {
    append_rows(rope_data_, apply_rope(matmul(new_tokens, wk_rope), length_, params));
  }
  length_ += new_tokens.rows();
}

Matrix streaming_decode_step(KvCache& cache, const Matrix& query_tokens,
                             const MhaWeights& w, const MhaSpec& spec,
                             const std::optional<RopeParams>& rope) {
  const std::size_t offset = cache.length();
  cache.append(query_tokens, w, rope);
  if (query_tokens.rows() == 0) return Matrix(0, spec.d_out);

  const MaskPolicy mask = MaskPolicy::causal(offset);
  std::vector<Matrix> head_outputs(spec.n_heads);
  std::vector<Matrix> k(spec.n_kv_heads), v(spec.n_kv_heads);
  for (std::size_t g = 0; g < spec.n_kv_heads; ++g) {
    k[g] = cache.keys(g);
    v[g] = cache.values(g);
  }
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    Matrix q = matmul(query_tokens, w.wq[h]);
    if (rope) q = apply_rope(q, offset, *rope);
    const std::size_t g = spec.kv_head_for(h);
    const Matrix a = attention_scores(q, k[g], spec.kernel, mask);
    const std::vector<double> z = normalizer(a);
    Matrix y(a.rows(), spec.d_head);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double weight = a(i, j) / z[i];
        if (weight == 0.0) continue;
        for (std::size_t c = 0; c < spec.d_head; ++c) {
          y(i, c) += weight * v[g](j, c);
        }
      }
    }
    head_outputs[h] = std::move(y);
  }
  return matmul(concat_cols(head_outputs), w.wo);
}

Matrix streaming_decode_step(LatentCache& cache, const Matrix& query_tokens,
                             const MergedMlaWeights& w, const MlaSpec& spec) {
  const std::size_t offset = cache.length();
  cache.append(query_tokens, w.w_l);
  if (query_tokens.rows() == 0) return Matrix(0, spec.d_out);
  const Matrix lq = matmul(query_tokens, w.w_lq);
  return mla_attend_latents(lq, cache.latents(), w, spec, MaskPolicy::causal(offset));
}

Matrix streaming_decode_step(LatentCache& cache, const Matrix& query_tokens,
                             const MergedMlaWeights& w,
                             const DecoupledRopeWeights& rope_w,
                             const RopeParams& params, const MlaSpec& spec) {
  if (params.head_dim == 0) {
    return streaming_decode_step(cache, query_tokens, w, spec);
  }
  const std::size_t offset = cache.length();
  cache.append(query_tokens, w.w_l, rope_w.wk_rope, params);
  if (query_tokens.rows() == 0) return Matrix(0, spec.d_out);

  const Matrix lq = matmul(query_tokens, w.w_lq);
  const Matrix rope_k = cache.rope_keys();
  std::vector<Matrix> rope_q_blocks;
  rope_q_blocks.reserve(spec.n_heads);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    rope_q_blocks.push_back(
        apply_rope(matmul(query_tokens, rope_w.wq_rope[h]), offset, params));
  }
  const Matrix rope_q = concat_cols(rope_q_blocks);
  return mla_attend_latents(lq, cache.latents(), w, spec, MaskPolicy::causal(offset),
                            {}, &rope_q, &rope_k);
}

}  // namespace attnlab
