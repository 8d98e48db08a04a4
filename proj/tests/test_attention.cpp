#include <doctest.h>

#include <cmath>

#include "attnlab/attention.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"
#include "oracles.hpp"

using namespace attnlab;

namespace {

HeadWeights random_head(std::size_t d_in, std::size_t d_qk, std::size_t d_v,
                        Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d_in));
  return HeadWeights{gaussian_matrix(d_in, d_qk, rng, s),
                     gaussian_matrix(d_in, d_qk, rng, s),
                     gaussian_matrix(d_in, d_v, rng, s)};
}

}  // namespace

TEST_CASE("kernel_eval forced values") {
  const std::vector<double> zero(4, 0.0);
  CHECK(kernel_eval(Kernel::scaled_exp(4), zero, zero) == 1.0);

  const std::vector<double> v{1, 1, 0, 0};
  const std::vector<double> w{1, 1, 0, 0};  // <v,w> = 2, exp(2/sqrt(4)) = e
  CHECK(kernel_eval(Kernel::scaled_exp(4), v, w) ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-15));

  const std::vector<double> a{1, 2};
  const std::vector<double> b{3, 4};
  CHECK(kernel_eval(Kernel::linear(), a, b) == 11.0);
}

TEST_CASE("kernel_eval shape errors") {
  const std::vector<double> v{1, 2};
  const std::vector<double> w{1, 2, 3};
  CHECK_THROWS_AS(kernel_eval(Kernel::linear(), v, w), ShapeError);
  CHECK_THROWS_AS(kernel_eval(Kernel::scaled_exp(4), v, v), ShapeError);
}

TEST_CASE("custom kernels are registered by name") {
  register_custom_kernel("square", [](double x) { return x * x; });
  const std::vector<double> a{1, 2};
  const std::vector<double> b{3, 4};
  CHECK(kernel_eval(Kernel::custom("square"), a, b) == 121.0);
  CHECK_THROWS_AS(kernel_eval(Kernel::custom("missing"), a, b), ArgumentError);
}

TEST_CASE("attention_scores single pair") {
  Rng rng = make_rng(41);
  const Matrix q = gaussian_matrix(1, 4, rng);
  const Matrix k = gaussian_matrix(1, 4, rng);
  const Matrix a = attention_scores(q, k, Kernel::scaled_exp(4), MaskPolicy::none());
  double dot = 0.0;
  for (std::size_t c = 0; c < 4; ++c) dot += q(0, c) * k(0, c);
  CHECK(a(0, 0) == doctest::Approx(std::exp(dot / 2.0)).epsilon(1e-14));
}

TEST_CASE("causal scores zero strictly above the diagonal") {
  Rng rng = make_rng(43);
  const Matrix q = gaussian_matrix(3, 4, rng);
  const Matrix k = gaussian_matrix(3, 4, rng);
  const Matrix a = attention_scores(q, k, Kernel::scaled_exp(4), MaskPolicy::causal());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (j > i) {
        CHECK(a(i, j) == 0.0);
      } else {
        CHECK(a(i, j) > 0.0);
      }
    }
  }
}

TEST_CASE("additive and multiplicative mask paths agree for the exponential kernel") {
  Rng rng = make_rng(47);
  const Matrix q = gaussian_matrix(3, 3, rng);
  const Matrix k = gaussian_matrix(3, 3, rng);
  const MaskPolicy mask = MaskPolicy::explicit_sets({{0, 2}, {1}, {0, 1, 2}});
  const Kernel kernel = Kernel::scaled_exp(3);
  const Matrix additive = attention_scores(q, k, kernel, mask, MaskFormulation::Additive);
  const Matrix mult =
      attention_scores(q, k, kernel, mask, MaskFormulation::Multiplicative);
  CHECK(max_abs_diff(additive, mult) < 1e-12);
}

TEST_CASE("additive masking is rejected for non-exponential kernels") {
  const Matrix q(2, 2), k(2, 2);
  CHECK_THROWS_AS(attention_scores(q, k, Kernel::linear(), MaskPolicy::causal(),
                                   MaskFormulation::Additive),
                  ArgumentError);
}

TEST_CASE("causal alignment error when queries outrun keys") {
  const Matrix q(3, 2), k(2, 2);
  CHECK_THROWS_AS(attention_scores(q, k, Kernel::linear(), MaskPolicy::causal()),
                  MaskAlignmentError);
}

TEST_CASE("normalizer sums rows and rejects degenerate ones") {
  const Matrix a{{1, 1}};
  CHECK(normalizer(a) == std::vector<double>{2.0});

  const Matrix id = Matrix::identity(3);
  CHECK(normalizer(id) == std::vector<double>(3, 1.0));

  Rng rng = make_rng(53);
  const Matrix random = uniform_matrix(4, 5, rng, 0.01, 2.0);
  const auto z = normalizer(random);
  for (std::size_t i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 5; ++j) sum += random(i, j);
    CHECK(std::abs(z[i] - sum) < 1e-12);
  }

  const Matrix zero(2, 2);
  CHECK_THROWS_AS(normalizer(zero), DegenerateRowError);
}

TEST_CASE("attend with one key returns that value row") {
  // Positive inputs keep the linear kernel's normalizer positive.
  Rng rng = make_rng(59);
  const HeadWeights w{uniform_matrix(4, 3, rng, 0.1, 1.0),
                      uniform_matrix(4, 3, rng, 0.1, 1.0),
                      uniform_matrix(4, 5, rng, 0.1, 1.0)};
  const Matrix xq = uniform_matrix(3, 4, rng, 0.1, 1.0);
  const Matrix xkv = uniform_matrix(1, 4, rng, 0.1, 1.0);
  const Matrix value_row = matmul(xkv, w.wv);
  for (const Kernel& kernel : {Kernel::scaled_exp(3), Kernel::linear()}) {
    const Matrix out = attend(xq, xkv, xkv, w, kernel, MaskPolicy::none());
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) {
        CHECK(out(i, j) == doctest::Approx(value_row(0, j)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("identical keys average the values uniformly") {
  Rng rng = make_rng(61);
  const HeadWeights w = random_head(4, 3, 4, rng);
  const Matrix xq = gaussian_matrix(2, 4, rng);
  const Matrix key_row = gaussian_matrix(1, 4, rng);
  Matrix xk(5, 4);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 4; ++j) xk(i, j) = key_row(0, j);
  }
  const Matrix xv = gaussian_matrix(5, 4, rng);
  const Matrix out = attend(xq, xk, xv, w, Kernel::scaled_exp(3), MaskPolicy::none());
  const Matrix v = matmul(xv, w.wv);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 5; ++i) mean += v(i, j) / 5.0;
    CHECK(std::abs(out(0, j) - mean) < 1e-12);
  }
}

TEST_CASE("attend matches the scalar brute-force oracle") {
  Rng rng = make_rng(67);
  const HeadWeights w = random_head(4, 3, 5, rng);
  const Matrix x = gaussian_matrix(4, 4, rng);
  const Matrix out = attend(x, x, x, w, Kernel::scaled_exp(3), MaskPolicy::none());
  const Matrix expected = oracle::attention_scalar(x, x, w.wq, w.wk, w.wv);
  CHECK(max_abs_diff(out, expected) < 1e-10);
}

TEST_CASE("softmax_attend agrees with attend") {
  Rng rng = make_rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d_in = 1 + rng() % 8;
    const std::size_t d_qk = 1 + rng() % 8;
    const std::size_t d_v = 1 + rng() % 8;
    const std::size_t n = 1 + rng() % 8;
    const HeadWeights w = random_head(d_in, d_qk, d_v, rng);
    const Matrix x = gaussian_matrix(n, d_in, rng);
    const MaskPolicy mask = trial % 2 == 0 ? MaskPolicy::none() : MaskPolicy::causal();
    const Matrix a = attend(x, x, x, w, Kernel::scaled_exp(d_qk), mask);
    const Matrix b = softmax_attend(x, x, x, w, mask);
    CHECK(max_abs_diff(a, b) < 1e-12);
  }
}

TEST_CASE("softmax shift invariance carries over to the output") {
  // Shifting all logits by a constant per row means scaling K rows is not
  // available directly, so shift through a rank-one query change instead:
  // adding c to every logit of a row leaves softmax unchanged.
  Rng rng = make_rng(73);
  const std::size_t n = 4;
  Matrix logits = gaussian_matrix(n, n, rng);
  Matrix shifted = logits;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) shifted(i, j) += 7.25;
  }
  CHECK(max_abs_diff(row_softmax(logits), row_softmax(shifted)) < 1e-13);
}

TEST_CASE("uniform weights for orthonormal equal-logit queries") {
  // Q rows scaled so every query-key logit is identical: weights must be
  // uniform and the output the value mean.
  const std::size_t n = 3;
  Matrix x = Matrix::identity(n);
  HeadWeights w;
  w.wq = Matrix(n, n);  // zero queries: all logits zero
  w.wk = Matrix::identity(n);
  w.wv = Matrix::identity(n);
  const Matrix out = attend(x, x, x, w, Kernel::scaled_exp(n), MaskPolicy::none());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(out(i, j) == doctest::Approx(1.0 / n).epsilon(1e-14));
    }
  }
}

TEST_CASE("linear kernel scores take the multiplicative mask route") {
  Rng rng = make_rng(77);
  const Matrix q = uniform_matrix(3, 2, rng, 0.1, 1.0);
  const Matrix k = uniform_matrix(3, 2, rng, 0.1, 1.0);
  const Matrix a = attention_scores(q, k, Kernel::linear(), MaskPolicy::causal());
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (j > i) {
        CHECK(a(i, j) == 0.0);
      } else {
        double dot = 0.0;
        for (std::size_t c = 0; c < 2; ++c) dot += q(i, c) * k(j, c);
        CHECK(a(i, j) == doctest::Approx(dot).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("fully masked query row fails loudly") {
  const Matrix x = Matrix::identity(2);
  HeadWeights w{Matrix::identity(2), Matrix::identity(2), Matrix::identity(2)};
  const MaskPolicy empty_row = MaskPolicy::explicit_sets({{}, {0}});
  CHECK_THROWS_AS(attend(x, x, x, w, Kernel::scaled_exp(2), empty_row),
                  DegenerateRowError);
}

TEST_CASE("kv permutation leaves unmasked attention invariant") {
  Rng rng = make_rng(79);
  const HeadWeights w = random_head(5, 4, 4, rng);
  const Matrix xq = gaussian_matrix(3, 5, rng);
  const Matrix xkv = gaussian_matrix(6, 5, rng);
  Matrix permuted(6, 5);
  const std::size_t perm[6] = {4, 2, 0, 5, 1, 3};
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 5; ++j) permuted(i, j) = xkv(perm[i], j);
  }
  const Matrix a = attend(xq, xkv, xkv, w, Kernel::scaled_exp(4), MaskPolicy::none());
  const Matrix b =
      attend(xq, permuted, permuted, w, Kernel::scaled_exp(4), MaskPolicy::none());
  CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("row-stochastic attention weights for the exponential kernel") {
  Rng rng = make_rng(83);
  const Matrix q = gaussian_matrix(5, 4, rng);
  const Matrix k = gaussian_matrix(7, 4, rng);
  const Matrix a =
      attention_scores(q, k, Kernel::scaled_exp(4), MaskPolicy::causal(2));
  const auto z = normalizer(a);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double weight = a(i, j) / z[i];
      CHECK(weight >= 0.0);
      CHECK(weight <= 1.0);
      sum += weight;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}
