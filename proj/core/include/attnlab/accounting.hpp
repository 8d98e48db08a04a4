#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "attnlab/latent.hpp"
#include "attnlab/multihead.hpp"

namespace attnlab {

// Multiply count of one attention call (scores plus combine), the asymptotic
// unit N_Q * N_KV * (d_QK + d_V). Not hardware FLOPs.
std::uint64_t attention_flops(std::uint64_t n_q, std::uint64_t n_kv,
                              std::uint64_t d_qk, std::uint64_t d_v);

// Float counts split into what grows with the context and what does not.
struct MemoryFloats {
  std::uint64_t cache_floats = 0;
  std::uint64_t weight_floats = 0;

  std::uint64_t total() const { return cache_floats + weight_floats; }
};

// Per-layer float count for MHA/GQA attention. Cache and key/value weight
// terms scale with the number of key-value heads; query and output terms with
// the number of query heads.
MemoryFloats mha_memory_breakdown(const MhaSpec& spec, std::uint64_t n_kv_tokens);
std::uint64_t mha_memory_floats(const MhaSpec& spec, std::uint64_t n_kv_tokens);

// Per-layer float count for merged latent attention: the latent cache, the
// shared latent weight, and the per-head d_in x d_l query maps plus the
// latent output projection. Follows the merged-weight table layout, which
// folds the query latent into the per-head query maps.
MemoryFloats mla_memory_breakdown(const MlaSpec& spec, std::uint64_t n_kv_tokens);
std::uint64_t mla_memory_floats(const MlaSpec& spec, std::uint64_t n_kv_tokens);

// Total cache bytes across layers: 2 * n_layers * n_heads * n_kv_tokens * d
// floats at bits_per_float bits. d is the per-head key/value width and
// n_heads counts the heads actually cached (key-value heads under GQA).
std::uint64_t kv_cache_bytes(std::uint64_t n_layers, std::uint64_t n_heads,
                             std::uint64_t n_kv_tokens, std::uint64_t d,
                             std::uint64_t bits_per_float);

enum class AttentionKind { Mha, Gqa, Mla };

std::string to_string(AttentionKind kind);

// Named model shape for the accountant. d_head_or_dl is the per-head
// key/value width for MHA/GQA models and the latent width for MLA models;
// n_kv_heads is absent for MLA (the latent cache is shared by every head).
struct ModelPreset {
  std::string name;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::optional<std::size_t> n_kv_heads;
  std::size_t d_model = 0;
  std::size_t d_head_or_dl = 0;
  AttentionKind kind = AttentionKind::Mha;
};

const std::vector<ModelPreset>& builtin_presets();
std::optional<ModelPreset> find_preset(const std::string& name);

}  // namespace attnlab
