#include <doctest.h>

#include <cmath>

#include "attnlab/errors.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/random.hpp"
#include "oracles.hpp"

using namespace attnlab;

namespace {

MhaWeights duplicate_kv_heads(const MhaWeights& w, const MhaSpec& spec) {
  MhaWeights out;
  out.wq = w.wq;
  for (std::size_t h = 0; h < spec.n_heads; ++h) {
    out.wk.push_back(w.wk[spec.kv_head_for(h)]);
    out.wv.push_back(w.wv[spec.kv_head_for(h)]);
  }
  out.wo = w.wo;
  return out;
}

}  // namespace

TEST_CASE("single head with identity output projection reduces to attend") {
  Rng rng = make_rng(101);
  const MhaSpec spec(1, 1, 4, 3, 3, 3);
  MhaWeights w = random_mha_weights(spec, 7);
  w.wo = Matrix::identity(3);
  const Matrix x = gaussian_matrix(5, 4, rng);
  const Matrix via_mha = mha_forward(x, x, w, spec, MaskPolicy::none());
  const HeadWeights head{w.wq[0], w.wk[0], w.wv[0]};
  const Matrix via_attend =
      attend(x, x, x, head, Kernel::scaled_exp(3), MaskPolicy::none());
  CHECK(max_abs_diff(via_mha, via_attend) == 0.0);
}

TEST_CASE("two redundant heads with averaging projection equal one head") {
  Rng rng = make_rng(103);
  const MhaSpec one(1, 1, 4, 3, 3, 3);
  MhaWeights base = random_mha_weights(one, 11);
  base.wo = Matrix::identity(3);

  const MhaSpec two(2, 2, 4, 3, 3, 3);
  MhaWeights dup;
  dup.wq = {base.wq[0], base.wq[0]};
  dup.wk = {base.wk[0], base.wk[0]};
  dup.wv = {base.wv[0], base.wv[0]};
  Matrix wo(6, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    wo(i, i) = 0.5;
    wo(3 + i, i) = 0.5;
  }
  dup.wo = wo;

  const Matrix x = gaussian_matrix(4, 4, rng);
  const Matrix a = mha_forward(x, x, base, one, MaskPolicy::causal());
  const Matrix b = mha_forward(x, x, dup, two, MaskPolicy::causal());
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("grouped heads equal the kv-duplication oracle") {
  Rng rng = make_rng(107);
  for (const std::size_t n_kv : {std::size_t{4}, std::size_t{2}, std::size_t{1}}) {
    const MhaSpec grouped(4, n_kv, 6, 3, 3, 6);
    const MhaSpec full(4, 4, 6, 3, 3, 6);
    const MhaWeights w = random_mha_weights(grouped, 13 + n_kv);
    const MhaWeights dup = duplicate_kv_heads(w, grouped);
    const Matrix x = gaussian_matrix(5, 6, rng);
    const Matrix a = mha_forward(x, x, w, grouped, MaskPolicy::causal());
    const Matrix b = mha_forward(x, x, dup, full, MaskPolicy::causal());
    CHECK(max_abs_diff(a, b) < 1e-12);
  }
}

TEST_CASE("stacked weights reproduce per-head products") {
  SUBCASE("single head stacks to itself") {
    const MhaSpec spec(1, 1, 3, 2, 2, 3);
    const MhaWeights w = random_mha_weights(spec, 17);
    const StackedWeights s = stacked_weights(w);
    CHECK(max_abs_diff(s.wq, w.wq[0]) == 0.0);
  }

  SUBCASE("two unit heads stack to the identity") {
    MhaWeights w;
    w.wq = {Matrix{{1}, {0}}, Matrix{{0}, {1}}};
    w.wk = w.wq;
    w.wv = w.wq;
    w.wo = Matrix::identity(2);
    const StackedWeights s = stacked_weights(w);
    CHECK(max_abs_diff(s.wq, Matrix::identity(2)) == 0.0);
  }

  SUBCASE("random stack splits back to per-head products") {
    Rng rng = make_rng(19);
    const MhaSpec spec(3, 3, 5, 2, 4, 5);
    const MhaWeights w = random_mha_weights(spec, 23);
    const StackedWeights s = stacked_weights(w);
    const Matrix x = gaussian_matrix(6, 5, rng);
    const auto q_blocks = split_cols(matmul(x, s.wq), {2, 2, 2});
    const auto v_blocks = split_cols(matmul(x, s.wv), {4, 4, 4});
    for (std::size_t h = 0; h < 3; ++h) {
      CHECK(max_abs_diff(q_blocks[h], oracle::matmul_naive(x, w.wq[h])) < 1e-12);
      CHECK(max_abs_diff(v_blocks[h], oracle::matmul_naive(x, w.wv[h])) < 1e-12);
    }
  }
}

TEST_CASE("self_attention is definitionally mha_forward on one input") {
  Rng rng = make_rng(109);
  const MhaSpec spec(2, 2, 4, 2, 2, 4);
  const MhaWeights w = random_mha_weights(spec, 29);
  const Matrix x = gaussian_matrix(3, 4, rng);
  CHECK(max_abs_diff(self_attention(x, w, spec, MaskPolicy::causal()),
                     mha_forward(x, x, w, spec, MaskPolicy::causal())) == 0.0);
}

TEST_CASE("single token passes its combined value projection through") {
  Rng rng = make_rng(113);
  const MhaSpec spec(2, 2, 4, 2, 3, 5);
  const MhaWeights w = random_mha_weights(spec, 31);
  const Matrix x = gaussian_matrix(1, 4, rng);
  const Matrix out = self_attention(x, w, spec, MaskPolicy::causal());
  const Matrix expected =
      matmul(concat_cols({matmul(x, w.wv[0]), matmul(x, w.wv[1])}), w.wo);
  CHECK(max_abs_diff(out, expected) < 1e-14);
}

TEST_CASE("causal self-attention rows are stable under appends") {
  Rng rng = make_rng(127);
  const MhaSpec spec(2, 1, 6, 3, 3, 6);
  const MhaWeights w = random_mha_weights(spec, 37);
  const Matrix x_full = gaussian_matrix(7, 6, rng);
  Matrix x_prefix(5, 6);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 6; ++j) x_prefix(i, j) = x_full(i, j);
  }
  const Matrix full = self_attention(x_full, w, spec, MaskPolicy::causal());
  const Matrix prefix = self_attention(x_prefix, w, spec, MaskPolicy::causal());
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(std::abs(full(i, j) - prefix(i, j)) < 1e-12);
    }
  }
}

TEST_CASE("scaling wo by a power of two scales the output exactly") {
  Rng rng = make_rng(131);
  const MhaSpec spec(2, 2, 4, 2, 2, 4);
  MhaWeights w = random_mha_weights(spec, 41);
  const Matrix x = gaussian_matrix(3, 4, rng);
  const Matrix base = self_attention(x, w, spec, MaskPolicy::none());
  w.wo = scale(w.wo, 2.0);
  const Matrix doubled = self_attention(x, w, spec, MaskPolicy::none());
  CHECK(max_abs_diff(doubled, scale(base, 2.0)) == 0.0);
}

TEST_CASE("permuting heads with matching wo row blocks changes nothing") {
  Rng rng = make_rng(137);
  const MhaSpec spec(3, 3, 5, 2, 2, 5);
  const MhaWeights w = random_mha_weights(spec, 43);
  const std::size_t perm[3] = {2, 0, 1};
  MhaWeights permuted;
  for (std::size_t h = 0; h < 3; ++h) {
    permuted.wq.push_back(w.wq[perm[h]]);
    permuted.wk.push_back(w.wk[perm[h]]);
    permuted.wv.push_back(w.wv[perm[h]]);
  }
  Matrix wo(6, 5);
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        wo(2 * h + r, c) = w.wo(2 * perm[h] + r, c);
      }
    }
  }
  permuted.wo = wo;
  const Matrix x = gaussian_matrix(4, 5, rng);
  const Matrix a = self_attention(x, w, spec, MaskPolicy::causal());
  const Matrix b = self_attention(x, permuted, spec, MaskPolicy::causal());
  CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("a linear-kernel spec drives the whole multi-head forward") {
  Rng rng = make_rng(149);
  const MhaSpec spec(2, 2, 4, 3, 3, 4, Kernel::linear());
  MhaWeights w;
  for (std::size_t h = 0; h < 2; ++h) {
    w.wq.push_back(uniform_matrix(4, 3, rng, 0.1, 0.5));
    w.wk.push_back(uniform_matrix(4, 3, rng, 0.1, 0.5));
    w.wv.push_back(uniform_matrix(4, 3, rng, 0.1, 0.5));
  }
  w.wo = uniform_matrix(6, 4, rng, 0.1, 0.5);
  const Matrix x = uniform_matrix(4, 4, rng, 0.1, 1.0);  // positive normalizers
  const Matrix out = self_attention(x, w, spec, MaskPolicy::causal());
  CHECK(out.rows() == 4);
  CHECK(out.all_finite());

  // First token sees only itself: its output is its own value projection.
  const Matrix first(1, 4, std::vector<double>(x.row(0).begin(), x.row(0).end()));
  const Matrix expected =
      matmul(concat_cols({matmul(first, w.wv[0]), matmul(first, w.wv[1])}), w.wo);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(out(0, j) == doctest::Approx(expected(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("weight validation names the offending piece") {
  const MhaSpec spec(2, 2, 4, 2, 2, 4);
  MhaWeights w = random_mha_weights(spec, 47);
  w.wk.pop_back();
  CHECK_THROWS_AS(validate_weights(w, spec), ArgumentError);

  MhaWeights bad_shape = random_mha_weights(spec, 53);
  bad_shape.wo = Matrix(3, 3);
  CHECK_THROWS_WITH_AS(validate_weights(bad_shape, spec), doctest::Contains("wo"),
                       ShapeError);

  CHECK_THROWS_AS(MhaSpec(4, 3, 4, 2, 2, 4), ArgumentError);  // 3 does not divide 4
}

TEST_CASE("rotary positions flow through grouped attention") {
  Rng rng = make_rng(139);
  const MhaSpec spec(2, 1, 6, 4, 4, 6);
  const MhaWeights w = random_mha_weights(spec, 59);
  const Matrix x = gaussian_matrix(5, 6, rng);
  const RopeApplication rope{RopeParams{4}, 0, 0};
  const Matrix with_rope = self_attention(x, w, spec, MaskPolicy::causal(), rope);
  const Matrix without = self_attention(x, w, spec, MaskPolicy::causal());
  CHECK(max_abs_diff(with_rope, without) > 1e-6);  // the rotation is live

  // Prefix stability still holds with rotation applied at absolute positions.
  Matrix x_prefix(3, 6);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 6; ++j) x_prefix(i, j) = x(i, j);
  }
  const Matrix prefix = self_attention(x_prefix, w, spec, MaskPolicy::causal(), rope);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(std::abs(prefix(i, j) - with_rope(i, j)) < 1e-12);
    }
  }
}
