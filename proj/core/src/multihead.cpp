#include "attnlab/multihead.hpp"

#include <cmath>

#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"

namespace attnlab {

namespace {

void check_dims(const MhaSpec& spec) {
  if (spec.n_heads == 0 || spec.n_kv_heads == 0) {
    throw ArgumentError("MhaSpec: head counts must be positive");
  }
  if (spec.n_heads % spec.n_kv_heads != 0) {
    throw ArgumentError("MhaSpec: n_kv_heads " + std::to_string(spec.n_kv_heads) +
                        " does not divide n_heads " + std::to_string(spec.n_heads));
  }
  if (spec.d_in == 0 || spec.d_qk == 0 || spec.d_head == 0 || spec.d_out == 0) {
    throw ArgumentError("MhaSpec: dimensions must be positive");
  }
  if (spec.kernel.kind() == Kernel::Kind::ScaledExp &&
      spec.kernel.d_qk() != spec.d_qk) {
    throw ArgumentError("MhaSpec: kernel d_qk " + std::to_string(spec.kernel.d_qk()) +
                        " differs from spec d_qk " + std::to_string(spec.d_qk));
  }
}

void check_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                 const std::string& role) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(role + " is " + m.shape_string() + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

MhaSpec::MhaSpec(std::size_t n_heads, std::size_t n_kv_heads, std::size_t d_in,
                 std::size_t d_qk, std::size_t d_head, std::size_t d_out)
    : MhaSpec(n_heads, n_kv_heads, d_in, d_qk, d_head, d_out,
              Kernel::scaled_exp(d_qk)) {}

MhaSpec::MhaSpec(std::size_t n_heads, std::size_t n_kv_heads, std::size_t d_in,
                 std::size_t d_qk, std::size_t d_head, std::size_t d_out,
                 Kernel kernel)
    : n_heads(n_heads),
      n_kv_heads(n_kv_heads),
      d_in(d_in),
      d_qk(d_qk),
      d_head(d_head),
      d_out(d_out),
      kernel(std::move(kernel)) {
  check_dims(*this);
}

void validate_weights(const MhaWeights& w, const MhaSpec& spec) {
  if (w.wq.size() != spec.n_heads) {
    throw ArgumentError("weights: " + std::to_string(w.wq.size()) +
                        " query heads for spec with " + std::to_string(spec.n_heads));
  }
  if (w.wk.size() != spec.n_kv_heads || w.wv.size() != spec.n_kv_heads) {
    throw ArgumentError("weights: " + std::to_string(w.wk.size()) + "/" +
                        std::to_string(w.wv.size()) +
                        " key/value heads for spec with " +
                        std::to_string(spec.n_kv_heads));
  }
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    check_shape(w.wq[h], spec.d_in, spec.d_qk, "wq[" + std::to_string(h) + "]");
  }
  for (std::size_t h = 0; h < spec.n_kv_heads; ++h) {
    check_shape(w.wk[h], spec.d_in, spec.d_qk, "wk[" + std::to_string(h) + "]");
    check_shape(w.wv[h], spec.d_in, spec.d_head, "wv[" + std::to_string(h) + "]");
  }
  check_shape(w.wo, spec.n_heads * spec.d_head, spec.d_out, "wo");
}

StackedWeights stacked_weights(const MhaWeights& w) {
  return StackedWeights{concat_cols(w.wq), concat_cols(w.wk), concat_cols(w.wv)};
}

Matrix mha_forward(const Matrix& xq, const Matrix& xkv, const MhaWeights& w,
                   const MhaSpec& spec, const MaskPolicy& mask,
                   const std::optional<RopeApplication>& rope) {
  validate_weights(w, spec);
  if (xq.cols() != spec.d_in || xkv.cols() != spec.d_in) {
    throw ShapeError("mha_forward: inputs " + xq.shape_string() + " and " +
                     xkv.shape_string() + " must have d_in " +
                     std::to_string(spec.d_in) + " columns");
  }

  // Key/value projections are per key-value head; query groups share them.
  std::vector<Matrix> k(spec.n_kv_heads), v(spec.n_kv_heads);
  for (std::size_t g = 0; g < spec.n_kv_heads; ++g) {
    k[g] = matmul(xkv, w.wk[g]);
    if (rope) k[g] = apply_rope(k[g], rope->key_start, rope->params);
    v[g] = matmul(xkv, w.wv[g]);
  }

  std::vector<Matrix> head_outputs(spec.n_heads);
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    Matrix q = matmul(xq, w.wq[h]);
    if (rope) q = apply_rope(q, rope->query_start, rope->params);
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

Matrix self_attention(const Matrix& x, const MhaWeights& w, const MhaSpec& spec,
                      const MaskPolicy& mask,
                      const std::optional<RopeApplication>& rope) {
  return mha_forward(x, x, w, spec, mask, rope);
}

MhaWeights random_mha_weights(const MhaSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
  const double head_scale =
      1.0 / std::sqrt(static_cast<double>(spec.n_heads * spec.d_head));
  MhaWeights w;
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    w.wq.push_back(gaussian_matrix(spec.d_in, spec.d_qk, rng, in_scale));
  }
  for (std::size_t g = 0; g < spec.n_kv_heads; ++g) {
    w.wk.push_back(gaussian_matrix(spec.d_in, spec.d_qk, rng, in_scale));
    w.wv.push_back(gaussian_matrix(spec.d_in, spec.d_head, rng, in_scale));
  }
  w.wo = gaussian_matrix(spec.n_heads * spec.d_head, spec.d_out, rng, head_scale);
  return w;
}

}  // namespace attnlab
