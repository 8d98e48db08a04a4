#include <doctest.h>

#include <cmath>

#include "attnlab/accounting.hpp"
#include "attnlab/cache.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"
#include "oracles.hpp"

using namespace attnlab;

TEST_CASE("appending zero tokens leaves the cache untouched") {
  const MhaSpec spec(2, 2, 4, 2, 2, 4);
  const MhaWeights w = random_mha_weights(spec, 211);
  KvCache cache(spec);
  cache.append(Matrix(0, 4), w);
  CHECK(cache.length() == 0);
}

TEST_CASE("chunked appends are bit-identical to one append") {
  Rng rng = make_rng(223);
  const MhaSpec spec(2, 2, 4, 3, 3, 4);
  const MhaWeights w = random_mha_weights(spec, 227);
  const Matrix x = gaussian_matrix(4, 4, rng);

  KvCache chunked(spec);
  Matrix first(1, 4), second(1, 4), rest(2, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    first(0, j) = x(0, j);
    second(0, j) = x(1, j);
    rest(0, j) = x(2, j);
    rest(1, j) = x(3, j);
  }
  chunked.append(first, w);
  chunked.append(second, w);
  chunked.append(rest, w);

  KvCache whole(spec);
  whole.append(x, w);

  REQUIRE(chunked.length() == 4);
  REQUIRE(whole.length() == 4);
  for (std::size_t g = 0; g < 2; ++g) {
    CHECK(max_abs_diff(chunked.keys(g), whole.keys(g)) == 0.0);
    CHECK(max_abs_diff(chunked.values(g), whole.values(g)) == 0.0);
  }
}

TEST_CASE("cached keys equal a full recompute") {
  Rng rng = make_rng(229);
  const MhaSpec spec(4, 2, 5, 3, 2, 5);
  const MhaWeights w = random_mha_weights(spec, 233);
  const Matrix x = gaussian_matrix(6, 5, rng);
  KvCache cache(spec);
  for (std::size_t i = 0; i < 6; i += 2) {
    Matrix chunk(2, 5);
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 5; ++c) chunk(r, c) = x(i + r, c);
    }
    cache.append(chunk, w);
  }
  for (std::size_t g = 0; g < 2; ++g) {
    CHECK(max_abs_diff(cache.keys(g), oracle::matmul_naive(x, w.wk[g])) < 1e-12);
    CHECK(max_abs_diff(cache.values(g), oracle::matmul_naive(x, w.wv[g])) < 1e-12);
  }
}

TEST_CASE("one token into an empty cache equals single-token self-attention") {
  Rng rng = make_rng(239);
  const MhaSpec spec(2, 2, 4, 2, 2, 4);
  const MhaWeights w = random_mha_weights(spec, 241);
  const Matrix token = gaussian_matrix(1, 4, rng);
  KvCache cache(spec);
  const Matrix streamed = streaming_decode_step(cache, token, w, spec);
  const Matrix full = self_attention(token, w, spec, MaskPolicy::causal());
  CHECK(max_abs_diff(streamed, full) < 1e-13);
  CHECK(cache.length() == 1);
}

TEST_CASE("token-by-token decode reproduces full causal attention") {
  Rng rng = make_rng(251);
  for (const std::size_t n_kv_heads : {std::size_t{2}, std::size_t{1}}) {
    const MhaSpec spec(2, n_kv_heads, 6, 3, 3, 6);
    const MhaWeights w = random_mha_weights(spec, 257 + n_kv_heads);
    const Matrix x = gaussian_matrix(6, 6, rng);
    const Matrix full = self_attention(x, w, spec, MaskPolicy::causal());

    KvCache cache(spec);
    Matrix streamed(6, 6);
    for (std::size_t t = 0; t < 6; ++t) {
      Matrix token(1, 6);
      for (std::size_t j = 0; j < 6; ++j) token(0, j) = x(t, j);
      const Matrix y = streaming_decode_step(cache, token, w, spec);
      for (std::size_t j = 0; j < 6; ++j) streamed(t, j) = y(0, j);
    }
    CHECK(max_abs_diff(full, streamed) < 1e-10);
  }
}

TEST_CASE("multi-token chunks stream identically too") {
  Rng rng = make_rng(263);
  const MhaSpec spec(2, 2, 4, 2, 2, 4);
  const MhaWeights w = random_mha_weights(spec, 269);
  const Matrix x = gaussian_matrix(5, 4, rng);
  const Matrix full = self_attention(x, w, spec, MaskPolicy::causal());

  KvCache cache(spec);
  Matrix streamed(5, 4);
  std::size_t row = 0;
  for (const std::size_t chunk_size : {std::size_t{2}, std::size_t{1}, std::size_t{2}}) {
    Matrix chunk(chunk_size, 4);
    for (std::size_t r = 0; r < chunk_size; ++r) {
      for (std::size_t c = 0; c < 4; ++c) chunk(r, c) = x(row + r, c);
    }
    const Matrix y = streaming_decode_step(cache, chunk, w, spec);
    for (std::size_t r = 0; r < chunk_size; ++r) {
      for (std::size_t c = 0; c < 4; ++c) streamed(row + r, c) = y(r, c);
    }
    row += chunk_size;
  }
  CHECK(max_abs_diff(full, streamed) < 1e-10);
}

TEST_CASE("latent cache streaming equals the full latent forward") {
  Rng rng = make_rng(271);
  const MlaSpec spec(2, 6, 3, 3, 3, 6);
  const MergedMlaWeights w = merge_weights(random_mla_weights(spec, 277));
  const Matrix x = gaussian_matrix(6, 6, rng);
  const Matrix full = mla_forward(x, w, spec, MaskPolicy::causal());

  LatentCache cache(spec.d_l);
  Matrix streamed(6, 6);
  for (std::size_t t = 0; t < 6; ++t) {
    Matrix token(1, 6);
    for (std::size_t j = 0; j < 6; ++j) token(0, j) = x(t, j);
    const Matrix y = streaming_decode_step(cache, token, w, spec);
    for (std::size_t j = 0; j < 6; ++j) streamed(t, j) = y(0, j);
  }
  CHECK(max_abs_diff(full, streamed) < 1e-10);
  CHECK(cache.length() == 6);
}

TEST_CASE("decoupled rope streaming equals the full decoupled forward") {
  Rng rng = make_rng(281);
  const MlaSpec spec(2, 6, 4, 4, 4, 6);
  const MergedMlaWeights w = merge_weights(random_mla_weights(spec, 283));
  const DecoupledRopeWeights rope_w = random_decoupled_rope_weights(spec, 2, 293);
  const RopeParams params{2};
  const Matrix x = gaussian_matrix(5, 6, rng);
  const Matrix full =
      mla_forward_decoupled_rope(x, w, rope_w, params, spec, MaskPolicy::causal());

  LatentCache cache(spec.d_l, 2);
  Matrix streamed(5, 6);
  for (std::size_t t = 0; t < 5; ++t) {
    Matrix token(1, 6);
    for (std::size_t j = 0; j < 6; ++j) token(0, j) = x(t, j);
    const Matrix y = streaming_decode_step(cache, token, w, rope_w, params, spec);
    for (std::size_t j = 0; j < 6; ++j) streamed(t, j) = y(0, j);
  }
  CHECK(max_abs_diff(full, streamed) < 1e-10);
}

TEST_CASE("rotary streaming matches rotary full attention") {
  Rng rng = make_rng(307);
  const MhaSpec spec(2, 2, 6, 4, 4, 6);
  const MhaWeights w = random_mha_weights(spec, 311);
  const RopeParams rope{4};
  const Matrix x = gaussian_matrix(5, 6, rng);
  const Matrix full = self_attention(x, w, spec, MaskPolicy::causal(),
                                     RopeApplication{rope, 0, 0});
  KvCache cache(spec);
  Matrix streamed(5, 6);
  for (std::size_t t = 0; t < 5; ++t) {
    Matrix token(1, 6);
    for (std::size_t j = 0; j < 6; ++j) token(0, j) = x(t, j);
    const Matrix y = streaming_decode_step(cache, token, w, spec, rope);
    for (std::size_t j = 0; j < 6; ++j) streamed(t, j) = y(0, j);
  }
  CHECK(max_abs_diff(full, streamed) < 1e-10);
}

TEST_CASE("attention flop counts") {
  CHECK(attention_flops(1, 1, 1, 1) == 2);
  CHECK(attention_flops(2, 3, 4, 5) == 54);

  // Recompute-everything grows with the cube of the conversation; caching is
  // linear per step. Summation oracle at T = 10, unit widths.
  const std::uint64_t c = 2;  // d_qk + d_v
  std::uint64_t recompute = 0, cached = 0;
  for (std::uint64_t t = 1; t <= 10; ++t) {
    recompute += attention_flops(t, t, 1, 1);
    cached += attention_flops(1, t, 1, 1);
  }
  CHECK(recompute == c * 10 * 11 * 21 / 6);  // sum of squares
  CHECK(cached == c * 10 * 11 / 2);          // sum of integers
}

TEST_CASE("memory float formulas") {
  CHECK(mha_memory_floats(MhaSpec(1, 1, 1, 1, 1, 1), 1) == 6);
  CHECK(mha_memory_floats(MhaSpec(2, 2, 8, 4, 4, 8), 3) == 304);

  // Table-style GQA accounting for the llama3-70b shape.
  const MhaSpec llama(64, 8, 8192, 128, 128, 8192);
  CHECK(mha_memory_breakdown(llama, 8192).cache_floats == 16'777'216ULL);

  CHECK(mla_memory_floats(MlaSpec(1, 1, 1, 1, 1, 1), 1) == 4);
  const MlaSpec deepseek(128, 5120, 512, 512, 512, 5120);
  CHECK(mla_memory_breakdown(deepseek, 8192).cache_floats == 4'194'304ULL);
}

TEST_CASE("latent cache beats the kv cache when d_l is small enough") {
  const MhaSpec gqa(8, 8, 512, 64, 64, 512);
  const MlaSpec mla(8, 512, 96, 96, 64, 512);
  const std::uint64_t tokens = 4096;
  const double ratio =
      static_cast<double>(mla_memory_breakdown(mla, tokens).cache_floats) /
      static_cast<double>(mha_memory_breakdown(gqa, tokens).cache_floats);
  // d_l = 96 < 8 * (64 + 64): the latent cache must be smaller.
  CHECK(ratio < 1.0);
}

TEST_CASE("cache byte formula") {
  CHECK(kv_cache_bytes(1, 1, 1, 1, 8) == 2);
  CHECK(kv_cache_bytes(80, 8, 8192, 128, 16) == 2'684'354'560ULL);
  CHECK(kv_cache_bytes(80, 8, 2 * 8192, 128, 16) ==
        2 * kv_cache_bytes(80, 8, 8192, 128, 16));
}

TEST_CASE("memory counts increase in every argument") {
  const MhaSpec base(4, 2, 8, 4, 4, 8);
  const std::uint64_t tokens = 64;
  const std::uint64_t ref = mha_memory_floats(base, tokens);
  CHECK(mha_memory_floats(MhaSpec(8, 2, 8, 4, 4, 8), tokens) > ref);
  CHECK(mha_memory_floats(MhaSpec(4, 4, 8, 4, 4, 8), tokens) > ref);
  CHECK(mha_memory_floats(MhaSpec(4, 2, 9, 4, 4, 8), tokens) > ref);
  CHECK(mha_memory_floats(MhaSpec(4, 2, 8, 5, 4, 8), tokens) > ref);
  CHECK(mha_memory_floats(MhaSpec(4, 2, 8, 4, 5, 8), tokens) > ref);
  CHECK(mha_memory_floats(MhaSpec(4, 2, 8, 4, 4, 9), tokens) > ref);
  CHECK(mha_memory_floats(base, tokens + 1) > ref);

  const MlaSpec mla_base(4, 8, 4, 4, 4, 8);
  const std::uint64_t mla_ref = mla_memory_floats(mla_base, tokens);
  CHECK(mla_memory_floats(MlaSpec(5, 8, 4, 4, 4, 8), tokens) > mla_ref);
  CHECK(mla_memory_floats(MlaSpec(4, 9, 4, 4, 4, 9), tokens) > mla_ref);
  CHECK(mla_memory_floats(MlaSpec(4, 8, 5, 4, 4, 8), tokens) > mla_ref);
  CHECK(mla_memory_floats(mla_base, tokens + 1) > mla_ref);
}

TEST_CASE("builtin presets carry the published numbers") {
  const auto llama = find_preset("llama3-70b");
  REQUIRE(llama.has_value());
  CHECK(llama->n_layers == 80);
  CHECK(llama->n_heads == 64);
  CHECK(llama->n_kv_heads == std::optional<std::size_t>(8));
  CHECK(llama->d_model == 8192);
  CHECK(llama->d_head_or_dl == 128);
  CHECK(llama->kind == AttentionKind::Gqa);

  const auto gemma = find_preset("gemma3-27b");
  REQUIRE(gemma.has_value());
  CHECK(gemma->n_layers == 62);
  CHECK(gemma->n_heads == 32);
  CHECK(gemma->n_kv_heads == std::optional<std::size_t>(16));
  CHECK(gemma->d_model == 5376);
  CHECK(gemma->d_head_or_dl == 128);
  CHECK(gemma->kind == AttentionKind::Gqa);

  const auto deepseek = find_preset("deepseek-v2");
  REQUIRE(deepseek.has_value());
  CHECK(deepseek->n_layers == 60);
  CHECK(deepseek->n_heads == 128);
  CHECK_FALSE(deepseek->n_kv_heads.has_value());
  CHECK(deepseek->d_model == 5120);
  CHECK(deepseek->d_head_or_dl == 512);
  CHECK(deepseek->kind == AttentionKind::Mla);

  CHECK_FALSE(find_preset("unknown").has_value());
}
