#include "attnlab/accounting.hpp"

namespace attnlab {

std::uint64_t attention_flops(std::uint64_t n_q, std::uint64_t n_kv,
                              std::uint64_t d_qk, std::uint64_t d_v) {
  return n_q * n_kv * (d_qk + d_v);
}

MemoryFloats mha_memory_breakdown(const MhaSpec& spec, std::uint64_t n_kv_tokens) {
  const std::uint64_t heads = spec.n_heads;
  const std::uint64_t kv_heads = spec.n_kv_heads;
  const std::uint64_t d_in = spec.d_in;
  const std::uint64_t d_qk = spec.d_qk;
  const std::uint64_t d_head = spec.d_head;
  const std::uint64_t d_out = spec.d_out;

  MemoryFloats out;
  out.cache_floats = kv_heads * n_kv_tokens * (d_qk + d_head);
  out.weight_floats = heads * d_in * d_qk       // query projections
                      + kv_heads * d_in * d_qk  // key projections
                      + kv_heads * d_in * d_head  // value projections
                      + heads * d_head * d_out;   // output projection
  return out;
}

std::uint64_t mha_memory_floats(const MhaSpec& spec, std::uint64_t n_kv_tokens) {
  return mha_memory_breakdown(spec, n_kv_tokens).total();
}

MemoryFloats mla_memory_breakdown(const MlaSpec& spec, std::uint64_t n_kv_tokens) {
  const std::uint64_t heads = spec.n_heads;
  const std::uint64_t d_in = spec.d_in;
  const std::uint64_t d_l = spec.d_l;
  const std::uint64_t d_out = spec.d_out;

  MemoryFloats out;
  out.cache_floats = n_kv_tokens * d_l;
  out.weight_floats = d_in * d_l + heads * d_l * (d_in + d_out);
  return out;
}

std::uint64_t mla_memory_floats(const MlaSpec& spec, std::uint64_t n_kv_tokens) {
  return mla_memory_breakdown(spec, n_kv_tokens).total();
}

std::uint64_t kv_cache_bytes(std::uint64_t n_layers, std::uint64_t n_heads,
                             std::uint64_t n_kv_tokens, std::uint64_t d,
                             std::uint64_t bits_per_float) {
  return 2 * n_layers * n_heads * n_kv_tokens * d * bits_per_float / 8;
}

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::Mha:
      return "mha";
    case AttentionKind::Gqa:
      return "gqa";
    case AttentionKind::Mla:
      return "mla";
  }
  return "?";
}

const std::vector<ModelPreset>& builtin_presets() {
  static const std::vector<ModelPreset> presets = {
      {"llama3-70b", 80, 64, 8, 8192, 128, AttentionKind::Gqa},
      {"gemma3-27b", 62, 32, 16, 5376, 128, AttentionKind::Gqa},
      {"deepseek-v2", 60, 128, std::nullopt, 5120, 512, AttentionKind::Mla},
  };
  return presets;
}

std::optional<ModelPreset> find_preset(const std::string& name) {
  for (const ModelPreset& p : builtin_presets()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

}  // namespace attnlab
