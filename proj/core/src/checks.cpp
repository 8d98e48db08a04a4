#include "attnlab/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "attnlab/accounting.hpp"
#include "attnlab/blocks.hpp"
#include "attnlab/cache.hpp"
#include "attnlab/latent.hpp"
#include "attnlab/matrix.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/random.hpp"

namespace attnlab::checks {

namespace {

std::size_t rand_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::size_t capped(const CheckConfig& cfg, std::size_t fallback) {
  if (!cfg.sizes) return fallback;
  return std::max<std::size_t>(1, std::min(*cfg.sizes, fallback));
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

CheckResult make_result(std::string name, double max_dev, double tol,
                        std::string details = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.max_deviation = max_dev;
  r.tolerance = tol;
  r.pass = max_dev < tol;
  r.details = std::move(details);
  return r;
}

// Duplicates each key/value head across its query-head group, producing the
// plain MHA model a grouped model must agree with.
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

FfnParams random_ffn(std::size_t d, Rng& rng) {
  const std::size_t d_ff = 2 * d;
  FfnParams p;
  p.activation = Activation::Relu;
  p.w1 = gaussian_matrix(d, d_ff, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  p.b1.assign(d_ff, 0.0);
  for (double& b : p.b1) b = std::normal_distribution<double>(0.0, 0.1)(rng);
  p.w_out = gaussian_matrix(d_ff, d, rng, 1.0 / std::sqrt(static_cast<double>(d_ff)));
  return p;
}

LayerConfig random_layer(std::size_t d, std::size_t n_heads, NormPlacement placement,
                         bool with_rope, Rng& rng) {
  const std::size_t d_head = d / n_heads;
  MhaSpec spec(n_heads, n_heads, d, d_head, d_head, d);
  LayerConfig cfg(spec);
  cfg.placement = placement;
  cfg.attn_weights = random_mha_weights(spec, rng());
  cfg.norm_attn = NormParams::layer_norm(d);
  cfg.norm_ffn = NormParams::layer_norm(d);
  cfg.ffn = random_ffn(d, rng);
  if (with_rope) cfg.rope = RopeParams{d_head, 10000.0};
  return cfg;
}

GptModel random_gpt(std::size_t vocab, std::size_t d, std::size_t n_heads,
                    std::size_t n_layers, NormPlacement placement, bool with_rope,
                    Rng& rng) {
  GptModel model;
  model.embedding.table =
      gaussian_matrix(vocab, d, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  for (std::size_t l = 0; l < n_layers; ++l) {
    model.layers.push_back(random_layer(d, n_heads, placement, with_rope, rng));
  }
  return model;
}

std::vector<std::size_t> random_tokens(std::size_t count, std::size_t vocab,
                                       Rng& rng) {
  std::vector<std::size_t> out(count);
  for (auto& t : out) t = rand_size(rng, 0, vocab - 1);
  return out;
}

double prefix_deviation(const Matrix& prefix_out, const Matrix& full_out) {
  double dev = 0.0;
  for (std::size_t i = 0; i < prefix_out.rows(); ++i) {
    for (std::size_t j = 0; j < prefix_out.cols(); ++j) {
      dev = std::max(dev, std::abs(prefix_out(i, j) - full_out(i, j)));
    }
  }
  return dev;
}

}  // namespace

CheckResult check_softmax_identity(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce001);
  const std::size_t max_tokens = capped(cfg, 16);
  double max_dev = 0.0;
  for (int instance = 0; instance < 120; ++instance) {
    const std::size_t d_in = rand_size(rng, 1, 16);
    const std::size_t d_qk = rand_size(rng, 1, 16);
    const std::size_t d_v = rand_size(rng, 1, 16);
    const std::size_t n_kv = rand_size(rng, 1, max_tokens);
    const std::size_t n_q = rand_size(rng, 1, std::max<std::size_t>(1, n_kv));
    const double s = 1.0 / std::sqrt(static_cast<double>(d_in));
    HeadWeights w{gaussian_matrix(d_in, d_qk, rng, s),
                  gaussian_matrix(d_in, d_qk, rng, s),
                  gaussian_matrix(d_in, d_v, rng, s)};
    const Matrix xq = gaussian_matrix(n_q, d_in, rng);
    const Matrix xkv = gaussian_matrix(n_kv, d_in, rng);
    const MaskPolicy mask = instance % 2 == 0
                                ? MaskPolicy::none()
                                : MaskPolicy::causal(n_kv - n_q);
    const Matrix via_normalizer =
        attend(xq, xkv, xkv, w, Kernel::scaled_exp(d_qk), mask);
    const Matrix via_softmax = softmax_attend(xq, xkv, xkv, w, mask);
    max_dev = std::max(max_dev, max_abs_diff(via_normalizer, via_softmax));
  }
  return make_result("softmax-identity", max_dev, 1e-12, "120 instances");
}

CheckResult check_mask_formulations(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce002);
  const std::size_t max_tokens = capped(cfg, 12);
  double max_dev = 0.0;
  for (int instance = 0; instance < 60; ++instance) {
    const std::size_t d_qk = rand_size(rng, 1, 8);
    const std::size_t n_kv = rand_size(rng, 1, max_tokens);
    const std::size_t n_q = rand_size(rng, 1, n_kv);
    const Matrix q = gaussian_matrix(n_q, d_qk, rng);
    const Matrix k = gaussian_matrix(n_kv, d_qk, rng);

    MaskPolicy mask = MaskPolicy::none();
    if (instance % 2 == 0) {
      mask = MaskPolicy::causal(n_kv - n_q);
    } else {
      std::vector<std::vector<std::size_t>> allowed(n_q);
      for (std::size_t i = 0; i < n_q; ++i) {
        for (std::size_t j = 0; j < n_kv; ++j) {
          if (rand_size(rng, 0, 1) == 1) allowed[i].push_back(j);
        }
        if (allowed[i].empty()) allowed[i].push_back(rand_size(rng, 0, n_kv - 1));
      }
      mask = MaskPolicy::explicit_sets(std::move(allowed));
    }
    const Kernel kernel = Kernel::scaled_exp(d_qk);
    const Matrix additive =
        attention_scores(q, k, kernel, mask, MaskFormulation::Additive);
    const Matrix multiplicative =
        attention_scores(q, k, kernel, mask, MaskFormulation::Multiplicative);
    max_dev = std::max(max_dev, max_abs_diff(additive, multiplicative));
  }
  return make_result("mask-formulations", max_dev, 1e-12,
                     "causal and random-subset masks");
}

CheckResult check_causal_prefix_stability(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce003);
  const std::size_t base_tokens = capped(cfg, 10);
  double max_dev = 0.0;

  // Single layers, both norm placements.
  for (const NormPlacement placement : {NormPlacement::PostLn, NormPlacement::PreLn}) {
    for (int instance = 0; instance < 6; ++instance) {
      LayerConfig cfg_layer = random_layer(8, 2, placement, instance % 2 == 1, rng);
      const std::size_t t = rand_size(rng, 1, base_tokens);
      const std::size_t extra = rand_size(rng, 1, 3);
      const Matrix x_full = gaussian_matrix(t + extra, 8, rng);
      Matrix x_prefix(t, 8);
      for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < 8; ++j) x_prefix(i, j) = x_full(i, j);
      }
      const Matrix full = encoder_layer(x_full, cfg_layer, MaskPolicy::causal());
      const Matrix prefix = encoder_layer(x_prefix, cfg_layer, MaskPolicy::causal());
      max_dev = std::max(max_dev, prefix_deviation(prefix, full));
    }
  }

  // Full GPT stacks.
  for (const bool with_rope : {false, true}) {
    GptModel model = random_gpt(12, 8, 2, 3,
                                with_rope ? NormPlacement::PreLn : NormPlacement::PostLn,
                                with_rope, rng);
    const std::size_t t = std::max<std::size_t>(2, base_tokens / 2);
    std::vector<std::size_t> tokens = random_tokens(t + 3, 12, rng);
    std::vector<std::size_t> prefix_tokens(tokens.begin(), tokens.begin() + t);
    const Matrix full = gpt_forward(tokens, model);
    const Matrix prefix = gpt_forward(prefix_tokens, model);
    max_dev = std::max(max_dev, prefix_deviation(prefix, full));
  }
  return make_result("causal-prefix-stability", max_dev, 1e-10,
                     "layers and GPT stacks, with and without rotary");
}

CheckResult check_gqa_duplication(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce004);
  const std::size_t max_tokens = capped(cfg, 10);
  double max_dev = 0.0;
  const std::size_t head_pairs[3][2] = {{4, 4}, {4, 2}, {4, 1}};
  for (const auto& pair : head_pairs) {
    for (int instance = 0; instance < 8; ++instance) {
      const MhaSpec grouped(pair[0], pair[1], 8, 4, 4, 8);
      const MhaSpec expanded(pair[0], pair[0], 8, 4, 4, 8);
      const MhaWeights w = random_mha_weights(grouped, rng());
      const MhaWeights w_dup = duplicate_kv_heads(w, grouped);
      const std::size_t t = rand_size(rng, 1, max_tokens);
      const Matrix x = gaussian_matrix(t, 8, rng);
      const MaskPolicy mask =
          instance % 2 == 0 ? MaskPolicy::none() : MaskPolicy::causal();
      const Matrix grouped_out = self_attention(x, w, grouped, mask);
      const Matrix expanded_out = self_attention(x, w_dup, expanded, mask);
      max_dev = std::max(max_dev, max_abs_diff(grouped_out, expanded_out));
    }
  }
  return make_result("gqa-duplication", max_dev, 1e-12,
                     "(4,4), (4,2), (4,1) head layouts");
}

CheckResult check_streaming_equals_full(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce005);
  const std::size_t max_tokens = capped(cfg, 32);
  double max_dev = 0.0;

  // MHA and GQA paths over the key/value cache.
  for (const std::size_t n_kv_heads : {std::size_t{4}, std::size_t{2}}) {
    const MhaSpec spec(4, n_kv_heads, 8, 4, 4, 8);
    const MhaWeights w = random_mha_weights(spec, rng());
    const std::size_t t = std::max<std::size_t>(1, max_tokens);
    const Matrix x = gaussian_matrix(t, 8, rng);
    const Matrix full = self_attention(x, w, spec, MaskPolicy::causal());
    KvCache cache(spec);
    Matrix streamed(t, 8);
    for (std::size_t row = 0; row < t; ++row) {
      Matrix token(1, 8);
      for (std::size_t j = 0; j < 8; ++j) token(0, j) = x(row, j);
      const Matrix y = streaming_decode_step(cache, token, w, spec);
      for (std::size_t j = 0; j < 8; ++j) streamed(row, j) = y(0, j);
    }
    max_dev = std::max(max_dev, max_abs_diff(full, streamed));
  }

  // Latent path over the shared latent cache.
  {
    const MlaSpec spec(4, 8, 4, 4, 4, 8);
    const MergedMlaWeights w = merge_weights(random_mla_weights(spec, rng()));
    const std::size_t t = std::max<std::size_t>(1, max_tokens);
    const Matrix x = gaussian_matrix(t, 8, rng);
    const Matrix full = mla_forward(x, w, spec, MaskPolicy::causal());
    LatentCache cache(spec.d_l);
    Matrix streamed(t, 8);
    for (std::size_t row = 0; row < t; ++row) {
      Matrix token(1, 8);
      for (std::size_t j = 0; j < 8; ++j) token(0, j) = x(row, j);
      const Matrix y = streaming_decode_step(cache, token, w, spec);
      for (std::size_t j = 0; j < 8; ++j) streamed(row, j) = y(0, j);
    }
    max_dev = std::max(max_dev, max_abs_diff(full, streamed));
  }
  return make_result("streaming-vs-full", max_dev, 1e-10,
                     "token-by-token decode, MHA/GQA/MLA");
}

CheckResult check_mla_equals_mha(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce006);
  const std::size_t max_tokens = capped(cfg, 8);
  double max_dev = 0.0;

  // Random latent weights against their expanded MHA form.
  for (int instance = 0; instance < 8; ++instance) {
    const MlaSpec spec(4, 8, 4, 4, 4, 8);
    const MlaWeights w = random_mla_weights(spec, rng());
    const MergedMlaWeights merged = merge_weights(w);
    const MhaWeights expanded = expand_to_mha(w, spec);
    const MhaSpec mha_spec = expanded_mha_spec(spec);
    const std::size_t t = rand_size(rng, 1, max_tokens);
    const Matrix x = gaussian_matrix(t, 8, rng);
    const MaskPolicy mask =
        instance % 2 == 0 ? MaskPolicy::none() : MaskPolicy::causal();
    const Matrix via_mla = mla_forward(x, merged, spec, mask);
    const Matrix via_mha = self_attention(x, expanded, mha_spec, mask);
    max_dev = std::max(max_dev, max_abs_diff(via_mla, via_mha));
  }

  // Planted low-rank MHA weights convert exactly.
  double planted_dev = 0.0;
  {
    const std::size_t d_in = 8, d_l = 4, d_lq = 4, d_head = 4, n_heads = 4;
    const MhaSpec spec(n_heads, n_heads, d_in, d_head, d_head, d_in);
    const double s_in = 1.0 / std::sqrt(static_cast<double>(d_in));
    const double s_l = 1.0 / std::sqrt(static_cast<double>(d_l));
    const Matrix g_kv = gaussian_matrix(d_in, d_l, rng, s_in);
    const Matrix g_q = gaussian_matrix(d_in, d_lq, rng, s_in);
    MhaWeights w;
    for (std::size_t h = 0; h < n_heads; ++h) {
      w.wq.push_back(matmul(g_q, gaussian_matrix(d_lq, d_head, rng, s_l)));
      w.wk.push_back(matmul(g_kv, gaussian_matrix(d_l, d_head, rng, s_l)));
      w.wv.push_back(matmul(g_kv, gaussian_matrix(d_l, d_head, rng, s_l)));
    }
    w.wo = gaussian_matrix(n_heads * d_head, d_in, rng,
                           1.0 / std::sqrt(static_cast<double>(n_heads * d_head)));
    const MlaFactorization fact = factorize_mha_to_mla(w, spec, d_l, d_lq);
    planted_dev = fact.total_error;
    const MlaSpec mla_spec(n_heads, d_in, d_l, d_lq, d_head, d_in);
    const MergedMlaWeights merged = merge_weights(fact.weights);
    const Matrix x = gaussian_matrix(6, d_in, rng);
    const Matrix via_mla = mla_forward(x, merged, mla_spec, MaskPolicy::causal());
    const Matrix via_mha = self_attention(x, w, spec, MaskPolicy::causal());
    planted_dev = std::max(planted_dev, max_abs_diff(via_mla, via_mha));
  }

  const bool pass = max_dev < 1e-10 && planted_dev < 1e-8;
  CheckResult r = make_result("mla-vs-mha", max_dev, 1e-10,
                              "planted-factor conversion error " + sci(planted_dev) +
                                  " (tol 1e-08)");
  r.pass = pass;
  return r;
}

CheckResult check_merge_soundness(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce007);
  const std::size_t max_tokens = capped(cfg, 8);
  double max_dev = 0.0;
  for (int instance = 0; instance < 10; ++instance) {
    const std::size_t d_l = rand_size(rng, 2, 6);
    const std::size_t d_lq = rand_size(rng, 2, 6);
    const MlaSpec spec(rand_size(rng, 1, 4), 8, d_l, d_lq, rand_size(rng, 2, 5), 8);
    const MlaWeights w = random_mla_weights(spec, rng());
    const MergedMlaWeights merged = merge_weights(w);
    const std::size_t t = rand_size(rng, 1, max_tokens);
    const Matrix x = gaussian_matrix(t, 8, rng);
    const MaskPolicy mask =
        instance % 2 == 0 ? MaskPolicy::none() : MaskPolicy::causal();
    const Matrix via_merged = mla_forward(x, merged, spec, mask);
    const Matrix via_unmerged = mla_forward_unmerged(x, w, spec, mask);
    max_dev = std::max(max_dev, max_abs_diff(via_merged, via_unmerged));
  }
  return make_result("merge-soundness", max_dev, 1e-10,
                     "merged vs two-stage latent path");
}

RopeBreakReport rope_break_report(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce008);
  const std::size_t tokens = std::max<std::size_t>(3, capped(cfg, 6));
  const MlaSpec spec(2, 8, 4, 4, 4, 8);

  RopeBreakReport report;
  report.shift = 17;

  // Naive merged rotation must NOT reproduce the rotated reference.
  double min_disagreement = std::numeric_limits<double>::infinity();
  for (int instance = 0; instance < 4; ++instance) {
    const MlaWeights w = random_mla_weights(spec, rng());
    const MergedMlaWeights merged = merge_weights(w);
    const Matrix x = gaussian_matrix(tokens, 8, rng);
    const Matrix reference =
        mla_forward_rope_unmerged(x, w, spec, MaskPolicy::causal());
    const Matrix naive = mla_forward_rope_naive(x, merged, spec, MaskPolicy::causal());
    min_disagreement = std::min(min_disagreement, max_abs_diff(reference, naive));
  }
  report.naive_disagreement = min_disagreement;

  // The decoupled variant is a function of relative positions only.
  {
    const MlaWeights w = random_mla_weights(spec, rng());
    const MergedMlaWeights merged = merge_weights(w);
    const DecoupledRopeWeights rope_w = random_decoupled_rope_weights(spec, 2, rng());
    const RopeParams params{2, 10000.0};
    const Matrix x = gaussian_matrix(tokens, 8, rng);
    const Matrix at_zero = mla_forward_decoupled_rope(x, merged, rope_w, params, spec,
                                                      MaskPolicy::causal(), 0);
    const Matrix shifted = mla_forward_decoupled_rope(
        x, merged, rope_w, params, spec, MaskPolicy::causal(), report.shift);
    report.decoupled_shift_dev = max_abs_diff(at_zero, shifted);
  }
  return report;
}

CheckResult check_rope_noncommutativity(const CheckConfig& cfg) {
  const RopeBreakReport report = rope_break_report(cfg);
  CheckResult r = make_result("rope-noncommutativity", report.decoupled_shift_dev,
                              1e-10,
                              "naive-vs-reference disagreement " +
                                  sci(report.naive_disagreement) +
                                  " (must exceed 1e-06)");
  r.pass = report.demonstrated();
  return r;
}

CheckResult check_accounting_fidelity(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce009);
  std::size_t mismatches = 0;
  std::string detail;

  // Formula functions against independently written arithmetic.
  for (int instance = 0; instance < 20; ++instance) {
    const std::size_t kv_heads = rand_size(rng, 1, 8);
    const std::size_t heads = kv_heads * rand_size(rng, 1, 4);
    const std::size_t d_in = rand_size(rng, 1, 64);
    const std::size_t d_qk = rand_size(rng, 1, 32);
    const std::size_t d_head = rand_size(rng, 1, 32);
    const std::size_t d_out = rand_size(rng, 1, 64);
    const std::uint64_t n_kv = rand_size(rng, 0, 4096);

    const MhaSpec spec(heads, kv_heads, d_in, d_qk, d_head, d_out);
    const std::uint64_t expected_mha =
        static_cast<std::uint64_t>(kv_heads) * n_kv * (d_qk + d_head) +
        static_cast<std::uint64_t>(heads) * d_in * d_qk +
        static_cast<std::uint64_t>(kv_heads) * d_in * d_qk +
        static_cast<std::uint64_t>(kv_heads) * d_in * d_head +
        static_cast<std::uint64_t>(heads) * d_head * d_out;
    if (mha_memory_floats(spec, n_kv) != expected_mha) ++mismatches;

    const std::size_t d_l = rand_size(rng, 1, std::min<std::size_t>(d_in, 32));
    const MlaSpec mla_spec(heads, d_in, d_l, d_l, std::max<std::size_t>(1, d_head),
                           d_out);
    const std::uint64_t expected_mla =
        n_kv * d_l + static_cast<std::uint64_t>(d_in) * d_l +
        static_cast<std::uint64_t>(heads) * d_l * (d_in + d_out);
    if (mla_memory_floats(mla_spec, n_kv) != expected_mla) ++mismatches;
  }

  // Pinned published numbers.
  if (kv_cache_bytes(80, 8, 8192, 128, 16) != 2'684'354'560ULL) {
    ++mismatches;
    detail += "llama3-70b cache bytes off; ";
  }
  const auto llama = find_preset("llama3-70b");
  const auto gemma = find_preset("gemma3-27b");
  const auto deepseek = find_preset("deepseek-v2");
  const bool presets_ok =
      llama && llama->n_layers == 80 && llama->n_heads == 64 &&
      llama->n_kv_heads == std::optional<std::size_t>(8) && llama->d_model == 8192 &&
      llama->d_head_or_dl == 128 && llama->kind == AttentionKind::Gqa && gemma &&
      gemma->n_layers == 62 && gemma->n_heads == 32 &&
      gemma->n_kv_heads == std::optional<std::size_t>(16) && gemma->d_model == 5376 &&
      gemma->d_head_or_dl == 128 && gemma->kind == AttentionKind::Gqa && deepseek &&
      deepseek->n_layers == 60 && deepseek->n_heads == 128 &&
      !deepseek->n_kv_heads.has_value() && deepseek->d_model == 5120 &&
      deepseek->d_head_or_dl == 512 && deepseek->kind == AttentionKind::Mla;
  if (!presets_ok) {
    ++mismatches;
    detail += "preset table mismatch; ";
  }

  CheckResult r;
  r.name = "accounting-fidelity";
  r.pass = mismatches == 0;
  r.max_deviation = static_cast<double>(mismatches);
  r.tolerance = 1.0;  // integer equality: any mismatch fails
  r.details = detail.empty() ? "20 random tuples + preset table, integer equality"
                             : detail;
  return r;
}

CheckResult check_normalization_contracts(const CheckConfig& cfg) {
  Rng rng = make_rng(cfg.seed ^ 0xa11ce00a);
  double mean_dev = 0.0;
  double var_dev = 0.0;
  double scale_dev = 0.0;
  const std::size_t d = 16;
  const NormParams ln = NormParams::layer_norm(d);
  const NormParams rms = NormParams::rms_norm(d);
  for (int instance = 0; instance < 50; ++instance) {
    const Matrix row = gaussian_matrix(1, d, rng, 4.0);
    const std::vector<double> y = layer_norm(row.row(0), ln);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    mean_dev = std::max(mean_dev, std::abs(mean));
    var_dev = std::max(var_dev, std::abs(var - 1.0));

    // Scale invariance at comfortable magnitudes (the epsilon floor makes
    // tiny-norm rows drift more).
    const Matrix big = gaussian_matrix(1, d, rng, 20.0);
    const std::vector<double> a = rms_norm(big.row(0), rms);
    Matrix scaled = scale(big, 7.0);
    const std::vector<double> b = rms_norm(scaled.row(0), rms);
    for (std::size_t i = 0; i < d; ++i) {
      scale_dev = std::max(scale_dev, std::abs(a[i] - b[i]));
    }
  }
  CheckResult r = make_result(
      "normalization-contracts", mean_dev, 1e-12,
      "var dev " + sci(var_dev) + " (tol 1e-04), rms scale dev " + sci(scale_dev) +
          " (tol 1e-06)");
  r.pass = mean_dev < 1e-12 && var_dev < 1e-4 && scale_dev < 1e-6;
  return r;
}

std::vector<CheckResult> run_all_checks(const CheckConfig& cfg) {
  return {
      check_softmax_identity(cfg),
      check_mask_formulations(cfg),
      check_causal_prefix_stability(cfg),
      check_gqa_duplication(cfg),
      check_streaming_equals_full(cfg),
      check_mla_equals_mha(cfg),
      check_merge_soundness(cfg),
      check_rope_noncommutativity(cfg),
      check_accounting_fidelity(cfg),
      check_normalization_contracts(cfg),
  };
}

}  // namespace attnlab::checks
