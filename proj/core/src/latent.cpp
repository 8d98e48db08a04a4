#include "attnlab/latent.hpp"

#include <cmath>
#include <limits>

#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"
#include "attnlab/svd.hpp"

namespace attnlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                 const std::string& role) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(role + " is " + m.shape_string() + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void check_head_count(std::size_t got, std::size_t want, const std::string& role) {
  if (got != want) {
    throw ArgumentError(role + " has " + std::to_string(got) + " heads, expected " +
                        std::to_string(want));
  }
}

// Scores each head's queries against the shared latents, normalizes, and
// combines the latents themselves; the caller supplies the final projection.
Matrix latent_attend(const Matrix& lq, const Matrix& latents,
                     const std::vector<Matrix>& w_lqk, const Matrix& w_lo,
                     const MlaSpec& spec, const MaskPolicy& mask,
                     double logit_denom,
                     const Matrix* rope_q_parts,  // n_heads blocks, optional
                     const Matrix* rope_k_part) {
  mask.validate(lq.rows(), latents.rows());
  std::vector<Matrix> head_outputs(spec.n_heads);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    const Matrix scores = matmul(matmul(lq, w_lqk[h]), transpose(latents));
    Matrix a(scores.rows(), scores.cols());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      for (std::size_t j = 0; j < scores.cols(); ++j) {
        if (!mask.allows(i, j)) {
          a(i, j) = std::exp(kNegInf);
          continue;
        }
        double logit = scores(i, j);
        if (rope_q_parts != nullptr) {
          const std::size_t d_rope = rope_k_part->cols();
          const std::size_t base = h * d_rope;
          double dot = 0.0;
          for (std::size_t c = 0; c < d_rope; ++c) {
            dot += (*rope_q_parts)(i, base + c) * (*rope_k_part)(j, c);
          }
          logit += dot;
        }
        a(i, j) = std::exp(logit / logit_denom);
      }
    }
    const std::vector<double> z = normalizer(a);
    Matrix y(a.rows(), spec.d_l);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double weight = a(i, j) / z[i];
        if (weight == 0.0) continue;
        for (std::size_t c = 0; c < spec.d_l; ++c) {
          y(i, c) += weight * latents(j, c);
        }
      }
    }
    head_outputs[h] = std::move(y);
  }
  return matmul(concat_cols(head_outputs), w_lo);
}

}  // namespace

MlaSpec::MlaSpec(std::size_t n_heads, std::size_t d_in, std::size_t d_l,
                 std::size_t d_lq, std::size_t d_head, std::size_t d_out)
    : n_heads(n_heads), d_in(d_in), d_l(d_l), d_lq(d_lq), d_head(d_head), d_out(d_out) {
  if (n_heads == 0 || d_in == 0 || d_l == 0 || d_lq == 0 || d_head == 0 || d_out == 0) {
    throw ArgumentError("MlaSpec: all dimensions must be positive");
  }
  if (d_l > d_in || d_lq > d_in) {
    throw ArgumentError("MlaSpec: latent widths d_l " + std::to_string(d_l) +
                        ", d_lq " + std::to_string(d_lq) +
                        " must not exceed d_in " + std::to_string(d_in));
  }
}

void validate_weights(const MlaWeights& w, const MlaSpec& spec) {
  check_shape(w.w_l, spec.d_in, spec.d_l, "w_l");
  check_shape(w.w_lq, spec.d_in, spec.d_lq, "w_lq");
  check_head_count(w.w_lqq.size(), spec.n_heads, "w_lqq");
  check_head_count(w.w_lk.size(), spec.n_heads, "w_lk");
  check_head_count(w.w_lv.size(), spec.n_heads, "w_lv");
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    check_shape(w.w_lqq[h], spec.d_lq, spec.d_head, "w_lqq[" + std::to_string(h) + "]");
    check_shape(w.w_lk[h], spec.d_l, spec.d_head, "w_lk[" + std::to_string(h) + "]");
    check_shape(w.w_lv[h], spec.d_l, spec.d_head, "w_lv[" + std::to_string(h) + "]");
  }
  check_shape(w.wo, spec.n_heads * spec.d_head, spec.d_out, "wo");
}

void validate_weights(const MergedMlaWeights& w, const MlaSpec& spec) {
  check_shape(w.w_l, spec.d_in, spec.d_l, "w_l");
  check_shape(w.w_lq, spec.d_in, spec.d_lq, "w_lq");
  check_head_count(w.w_lqk.size(), spec.n_heads, "w_lqk");
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    check_shape(w.w_lqk[h], spec.d_lq, spec.d_l, "w_lqk[" + std::to_string(h) + "]");
  }
  check_shape(w.w_lo, spec.n_heads * spec.d_l, spec.d_out, "w_lo");
}

MergedMlaWeights merge_weights(const MlaWeights& w) {
  if (w.w_lqq.size() != w.w_lk.size() || w.w_lqq.size() != w.w_lv.size()) {
    throw ArgumentError("merge_weights: per-head lists disagree in length");
  }
  MergedMlaWeights merged;
  merged.w_l = w.w_l;
  merged.w_lq = w.w_lq;
  merged.w_lqk.reserve(w.w_lqq.size());
  for (std::size_t h = 0; h < w.w_lqq.size(); ++h) {
    merged.w_lqk.push_back(matmul(w.w_lqq[h], transpose(w.w_lk[h])));
  }
  merged.w_lo = matmul(block_diag(w.w_lv), w.wo);
  return merged;
}

Matrix mla_forward(const Matrix& x, const MergedMlaWeights& w, const MlaSpec& spec,
                   const MaskPolicy& mask, std::optional<double> logit_denom) {
  return mla_forward_split(x, x, w, spec, mask, logit_denom);
}

Matrix mla_forward_split(const Matrix& xq, const Matrix& xkv,
                         const MergedMlaWeights& w, const MlaSpec& spec,
                         const MaskPolicy& mask, std::optional<double> logit_denom) {
  validate_weights(w, spec);
  if (xq.cols() != spec.d_in || xkv.cols() != spec.d_in) {
    throw ShapeError("mla_forward: inputs " + xq.shape_string() + " and " +
                     xkv.shape_string() + " must have d_in " +
                     std::to_string(spec.d_in) + " columns");
  }
  const Matrix latents = matmul(xkv, w.w_l);  // shared by every head
  const Matrix lq = matmul(xq, w.w_lq);
  return mla_attend_latents(lq, latents, w, spec, mask, logit_denom);
}

Matrix mla_attend_latents(const Matrix& lq, const Matrix& latents,
                          const MergedMlaWeights& w, const MlaSpec& spec,
                          const MaskPolicy& mask, std::optional<double> logit_denom,
                          const Matrix* rope_q, const Matrix* rope_k) {
  const double base_dim = static_cast<double>(
      spec.d_head + (rope_k != nullptr ? rope_k->cols() : 0));
  const double denom = logit_denom.value_or(std::sqrt(base_dim));
  return latent_attend(lq, latents, w.w_lqk, w.w_lo, spec, mask, denom, rope_q,
                       rope_k);
}

Matrix mla_forward_unmerged(const Matrix& x, const MlaWeights& w, const MlaSpec& spec,
                            const MaskPolicy& mask) {
  validate_weights(w, spec);
  if (x.cols() != spec.d_in) {
    throw ShapeError("mla_forward_unmerged: input " + x.shape_string() +
                     " must have d_in " + std::to_string(spec.d_in) + " columns");
  }
  const Matrix latents = matmul(x, w.w_l);
  const Matrix lq = matmul(x, w.w_lq);
  const Kernel kernel = Kernel::scaled_exp(spec.d_head);
  std::vector<Matrix> head_outputs(spec.n_heads);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    const Matrix q = matmul(lq, w.w_lqq[h]);
    const Matrix k = matmul(latents, w.w_lk[h]);
    const Matrix v = matmul(latents, w.w_lv[h]);
    const Matrix a = attention_scores(q, k, kernel, mask);
    const std::vector<double> z = normalizer(a);
    Matrix y(a.rows(), spec.d_head);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double weight = a(i, j) / z[i];
        if (weight == 0.0) continue;
        for (std::size_t c = 0; c < spec.d_head; ++c) {
          y(i, c) += weight * v(j, c);
        }
      }
    }
    head_outputs[h] = std::move(y);
  }
  return matmul(concat_cols(head_outputs), w.wo);
}

MhaSpec expanded_mha_spec(const MlaSpec& spec) {
  return MhaSpec(spec.n_heads, spec.n_heads, spec.d_in, spec.d_head, spec.d_head,
                 spec.d_out);
}

MhaWeights expand_to_mha(const MlaWeights& w, const MlaSpec& spec) {
  validate_weights(w, spec);
  MhaWeights out;
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    out.wq.push_back(matmul(w.w_lq, w.w_lqq[h]));
    out.wk.push_back(matmul(w.w_l, w.w_lk[h]));
    out.wv.push_back(matmul(w.w_l, w.w_lv[h]));
  }
  out.wo = w.wo;
  return out;
}

MlaFactorization factorize_mha_to_mla(const MhaWeights& w, const MhaSpec& spec,
                                      std::size_t d_l, std::size_t d_lq) {
  validate_weights(w, spec);
  if (spec.n_kv_heads != spec.n_heads) {
    throw ArgumentError(
        "factorize_mha_to_mla: requires one key/value head per query head "
        "(n_kv_heads == n_heads)");
  }
  if (spec.d_qk != spec.d_head) {
    throw ArgumentError("factorize_mha_to_mla: requires d_qk == d_head, got " +
                        std::to_string(spec.d_qk) + " vs " +
                        std::to_string(spec.d_head));
  }
  if (d_l == 0 || d_l > spec.d_in || d_lq == 0 || d_lq > spec.d_in) {
    throw ArgumentError("factorize_mha_to_mla: latent widths d_l " +
                        std::to_string(d_l) + ", d_lq " + std::to_string(d_lq) +
                        " out of range [1, " + std::to_string(spec.d_in) + "]");
  }

  const StackedWeights stacked = stacked_weights(w);
  const Matrix kv_stack = concat_cols({stacked.wk, stacked.wv});
  if (d_l > std::min(kv_stack.rows(), kv_stack.cols())) {
    throw ArgumentError("factorize_mha_to_mla: d_l " + std::to_string(d_l) +
                        " exceeds the rank bound of the stacked [K|V] matrix " +
                        kv_stack.shape_string());
  }
  if (d_lq > std::min(stacked.wq.rows(), stacked.wq.cols())) {
    throw ArgumentError("factorize_mha_to_mla: d_lq " + std::to_string(d_lq) +
                        " exceeds the rank bound of the stacked query matrix " +
                        stacked.wq.shape_string());
  }

  // Balanced split: sqrt(s) goes to each factor.
  const auto split_factors = [](const SvdResult& svd) {
    Matrix left = svd.u;
    Matrix right = svd.vt;
    for (std::size_t k = 0; k < svd.singular_values.size(); ++k) {
      const double r = std::sqrt(svd.singular_values[k]);
      for (std::size_t i = 0; i < left.rows(); ++i) left(i, k) *= r;
      for (std::size_t j = 0; j < right.cols(); ++j) right(k, j) *= r;
    }
    return std::pair<Matrix, Matrix>(std::move(left), std::move(right));
  };

  const SvdResult kv_svd = truncated_svd(kv_stack, d_l);
  auto [w_l, kv_maps] = split_factors(kv_svd);
  const SvdResult q_svd = truncated_svd(stacked.wq, d_lq);
  auto [w_lq, q_maps] = split_factors(q_svd);

  MlaFactorization out;
  out.kv_error = frobenius_norm(subtract(kv_stack, matmul(w_l, kv_maps)));
  out.query_error = frobenius_norm(subtract(stacked.wq, matmul(w_lq, q_maps)));
  out.total_error = std::sqrt(out.kv_error * out.kv_error +
                              out.query_error * out.query_error);

  std::vector<std::size_t> head_widths(spec.n_heads, spec.d_head);
  std::vector<std::size_t> kv_widths(2 * spec.n_heads, spec.d_head);
  std::vector<Matrix> kv_blocks = split_cols(kv_maps, kv_widths);

  out.weights.w_l = std::move(w_l);
  out.weights.w_lq = std::move(w_lq);
  out.weights.w_lqq = split_cols(q_maps, head_widths);
  out.weights.w_lk.assign(kv_blocks.begin(), kv_blocks.begin() + spec.n_heads);
  out.weights.w_lv.assign(kv_blocks.begin() + spec.n_heads, kv_blocks.end());
  out.weights.wo = w.wo;
  return out;
}

Matrix mla_forward_decoupled_rope(const Matrix& x, const MergedMlaWeights& w,
                                  const DecoupledRopeWeights& rope_w,
                                  const RopeParams& params, const MlaSpec& spec,
                                  const MaskPolicy& mask, std::size_t start_pos) {
  validate_weights(w, spec);
  const std::size_t d_rope = params.head_dim;
  if (d_rope % 2 != 0) {
    throw ShapeError("decoupled rope: d_rope must be even, got " +
                     std::to_string(d_rope));
  }
  if (d_rope == 0) {
    // No positional part; the scaling denominator is still sqrt(d_head + 0).
    return mla_forward(x, w, spec, mask);
  }
  check_head_count(rope_w.wq_rope.size(), spec.n_heads, "wq_rope");
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    check_shape(rope_w.wq_rope[h], spec.d_in, d_rope,
                "wq_rope[" + std::to_string(h) + "]");
  }
  check_shape(rope_w.wk_rope, spec.d_in, d_rope, "wk_rope");
  if (x.cols() != spec.d_in) {
    throw ShapeError("decoupled rope: input " + x.shape_string() +
                     " must have d_in " + std::to_string(spec.d_in) + " columns");
  }

  const Matrix latents = matmul(x, w.w_l);
  const Matrix lq = matmul(x, w.w_lq);
  // Rotated non-latent parts: one key part shared by all heads (cached
  // alongside the latents in streaming decode) and one query part per head.
  const Matrix rope_k = apply_rope(matmul(x, rope_w.wk_rope), start_pos, params);
  std::vector<Matrix> rope_q_blocks;
  rope_q_blocks.reserve(spec.n_heads);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    rope_q_blocks.push_back(
        apply_rope(matmul(x, rope_w.wq_rope[h]), start_pos, params));
  }
  const Matrix rope_q = concat_cols(rope_q_blocks);
  const double denom = std::sqrt(static_cast<double>(spec.d_head + d_rope));
  return latent_attend(lq, latents, w.w_lqk, w.w_lo, spec, mask, denom, &rope_q,
                       &rope_k);
}

Matrix mla_forward_rope_unmerged(const Matrix& x, const MlaWeights& w,
                                 const MlaSpec& spec, const MaskPolicy& mask,
                                 double rope_base, std::size_t start_pos) {
  validate_weights(w, spec);
  const RopeParams head_rope{spec.d_head, rope_base};
  const Matrix latents = matmul(x, w.w_l);
  const Matrix lq = matmul(x, w.w_lq);
  const Kernel kernel = Kernel::scaled_exp(spec.d_head);
  std::vector<Matrix> head_outputs(spec.n_heads);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    const Matrix q = apply_rope(matmul(lq, w.w_lqq[h]), start_pos, head_rope);
    const Matrix k = apply_rope(matmul(latents, w.w_lk[h]), start_pos, head_rope);
    const Matrix v = matmul(latents, w.w_lv[h]);
    const Matrix a = attention_scores(q, k, kernel, mask);
    const std::vector<double> z = normalizer(a);
    Matrix y(a.rows(), spec.d_head);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        const double weight = a(i, j) / z[i];
        if (weight == 0.0) continue;
        for (std::size_t c = 0; c < spec.d_head; ++c) {
          y(i, c) += weight * v(j, c);
        }
      }
    }
    head_outputs[h] = std::move(y);
  }
  return matmul(concat_cols(head_outputs), w.wo);
}

Matrix mla_forward_rope_naive(const Matrix& x, const MergedMlaWeights& w,
                              const MlaSpec& spec, const MaskPolicy& mask,
                              double rope_base, std::size_t start_pos) {
  validate_weights(w, spec);
  if (spec.d_l % 2 != 0 || spec.d_lq % 2 != 0) {
    throw ShapeError("naive latent rope needs even d_l and d_lq, got " +
                     std::to_string(spec.d_l) + ", " + std::to_string(spec.d_lq));
  }
  // Rotating the latents is the only place a merged model can put the
  // rotation; it is not equivalent to rotating the per-head embeddings.
  const Matrix latents =
      apply_rope(matmul(x, w.w_l), start_pos, RopeParams{spec.d_l, rope_base});
  const Matrix lq =
      apply_rope(matmul(x, w.w_lq), start_pos, RopeParams{spec.d_lq, rope_base});
  const double denom = std::sqrt(static_cast<double>(spec.d_head));
  return latent_attend(lq, latents, w.w_lqk, w.w_lo, spec, mask, denom, nullptr,
                       nullptr);
}

MlaWeights random_mla_weights(const MlaSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
  const double lq_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_lq));
  const double l_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_l));
  const double head_scale =
      1.0 / std::sqrt(static_cast<double>(spec.n_heads * spec.d_head));
  MlaWeights w;
  w.w_l = gaussian_matrix(spec.d_in, spec.d_l, rng, in_scale);
  w.w_lq = gaussian_matrix(spec.d_in, spec.d_lq, rng, in_scale);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    w.w_lqq.push_back(gaussian_matrix(spec.d_lq, spec.d_head, rng, lq_scale));
    w.w_lk.push_back(gaussian_matrix(spec.d_l, spec.d_head, rng, l_scale));
    w.w_lv.push_back(gaussian_matrix(spec.d_l, spec.d_head, rng, l_scale));
  }
  w.wo = gaussian_matrix(spec.n_heads * spec.d_head, spec.d_out, rng, head_scale);
  return w;
}

DecoupledRopeWeights random_decoupled_rope_weights(const MlaSpec& spec,
                                                   std::size_t d_rope,
                                                   std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
  DecoupledRopeWeights w;
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    w.wq_rope.push_back(gaussian_matrix(spec.d_in, d_rope, rng, in_scale));
  }
  w.wk_rope = gaussian_matrix(spec.d_in, d_rope, rng, in_scale);
  return w;
}

}  // namespace attnlab
