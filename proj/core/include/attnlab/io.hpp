#pragma once

#include <filesystem>

#include "attnlab/accounting.hpp"
#include "attnlab/blocks.hpp"
#include "attnlab/latent.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/tokenizer.hpp"

namespace attnlab {

// Weight bundles serialize as JSON with a "version": 1 field, a "format" tag
// ("mha", "gqa", "mla" or "mla-merged"), the spec dimensions, and each matrix
// as {"rows": R, "cols": C, "data": [row-major floats]}.

struct MhaBundle {
  MhaSpec spec;
  MhaWeights weights;
};

struct MlaBundle {
  MlaSpec spec;
  MlaWeights weights;
};

struct MergedMlaBundle {
  MlaSpec spec;
  MergedMlaWeights weights;
};

void save_mha_bundle(const std::filesystem::path& path, const MhaSpec& spec,
                     const MhaWeights& weights);
MhaBundle load_mha_bundle(const std::filesystem::path& path);

void save_mla_bundle(const std::filesystem::path& path, const MlaSpec& spec,
                     const MlaWeights& weights);
MlaBundle load_mla_bundle(const std::filesystem::path& path);

void save_merged_mla_bundle(const std::filesystem::path& path, const MlaSpec& spec,
                            const MergedMlaWeights& weights);
MergedMlaBundle load_merged_mla_bundle(const std::filesystem::path& path);

// Vocabulary file: {"tokens": [...], "dim": d, "rows": [[...], ...]}. The
// rows are optional; without them a "seed" field drives deterministic
// generation (standard normal scaled by 1/sqrt(dim)).
struct VocabularyBundle {
  Vocabulary vocab;
  EmbeddingTable table;
};

VocabularyBundle load_vocabulary_bundle(const std::filesystem::path& path);

// Custom preset file: {"name":..., "layers":..., "heads":..., "kv_heads":...,
// "d_model":..., "d_head":..., "kind": "mha"|"gqa"|"mla"}. kv_heads may be
// null or absent for MLA models.
ModelPreset load_preset(const std::filesystem::path& path);

// Stack shape file for seeded demo models: {"depth":..., "d_model":...,
// "heads":..., "kv_heads":..., "d_ff":..., "norm_placement": "pre"|"post",
// "norm": "layer"|"rms", "activation": "relu"|"silu", "gated_ffn": bool,
// "rope": bool, "seed":...}. Everything except depth/d_model/heads is
// optional.
StackConfig load_stack_config(const std::filesystem::path& path);

}  // namespace attnlab
