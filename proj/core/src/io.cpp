#include "attnlab/io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "attnlab/errors.hpp"
#include "attnlab/random.hpp"

namespace attnlab {

namespace {

using nlohmann::ordered_json;

ordered_json matrix_to_json(const Matrix& m) {
  return ordered_json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const ordered_json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

ordered_json matrices_to_json(const std::vector<Matrix>& ms) {
  ordered_json arr = ordered_json::array();
  for (const Matrix& m : ms) arr.push_back(matrix_to_json(m));
  return arr;
}

std::vector<Matrix> matrices_from_json(const ordered_json& j) {
  std::vector<Matrix> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(matrix_from_json(item));
  return out;
}

ordered_json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  try {
    return ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw IoError("parse error in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

void check_version_and_format(const ordered_json& j, const std::filesystem::path& path,
                              std::initializer_list<const char*> formats) {
  if (j.value("version", 0) != 1) {
    throw IoError(path.string() + ": unsupported weight-file version");
  }
  const std::string format = j.value("format", "");
  for (const char* f : formats) {
    if (format == f) return;
  }
  throw IoError(path.string() + ": unexpected format tag \"" + format + "\"");
}

}  // namespace

void save_mha_bundle(const std::filesystem::path& path, const MhaSpec& spec,
                     const MhaWeights& weights) {
  validate_weights(weights, spec);
  ordered_json j{
      {"version", 1},
      {"format", spec.n_kv_heads < spec.n_heads ? "gqa" : "mha"},
      {"n_heads", spec.n_heads},
      {"n_kv_heads", spec.n_kv_heads},
      {"d_in", spec.d_in},
      {"d_qk", spec.d_qk},
      {"d_head", spec.d_head},
      {"d_out", spec.d_out},
      {"wq", matrices_to_json(weights.wq)},
      {"wk", matrices_to_json(weights.wk)},
      {"wv", matrices_to_json(weights.wv)},
      {"wo", matrix_to_json(weights.wo)},
  };
  write_json_file(path, j);
}

MhaBundle load_mha_bundle(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path);
  check_version_and_format(j, path, {"mha", "gqa"});
  try {
    MhaSpec spec(j.at("n_heads").get<std::size_t>(),
                 j.at("n_kv_heads").get<std::size_t>(),
                 j.at("d_in").get<std::size_t>(), j.at("d_qk").get<std::size_t>(),
                 j.at("d_head").get<std::size_t>(), j.at("d_out").get<std::size_t>());
    MhaWeights w;
    w.wq = matrices_from_json(j.at("wq"));
    w.wk = matrices_from_json(j.at("wk"));
    w.wv = matrices_from_json(j.at("wv"));
    w.wo = matrix_from_json(j.at("wo"));
    validate_weights(w, spec);
    return MhaBundle{spec, std::move(w)};
  } catch (const ordered_json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_mla_bundle(const std::filesystem::path& path, const MlaSpec& spec,
                     const MlaWeights& weights) {
  validate_weights(weights, spec);
  ordered_json j{
      {"version", 1},
      {"format", "mla"},
      {"n_heads", spec.n_heads},
      {"d_in", spec.d_in},
      {"d_l", spec.d_l},
      {"d_lq", spec.d_lq},
      {"d_head", spec.d_head},
      {"d_out", spec.d_out},
      {"w_l", matrix_to_json(weights.w_l)},
      {"w_lq", matrix_to_json(weights.w_lq)},
      {"w_lqq", matrices_to_json(weights.w_lqq)},
      {"w_lk", matrices_to_json(weights.w_lk)},
      {"w_lv", matrices_to_json(weights.w_lv)},
      {"wo", matrix_to_json(weights.wo)},
  };
  write_json_file(path, j);
}

MlaBundle load_mla_bundle(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path);
  check_version_and_format(j, path, {"mla"});
  try {
    MlaSpec spec(j.at("n_heads").get<std::size_t>(), j.at("d_in").get<std::size_t>(),
                 j.at("d_l").get<std::size_t>(), j.at("d_lq").get<std::size_t>(),
                 j.at("d_head").get<std::size_t>(), j.at("d_out").get<std::size_t>());
    MlaWeights w;
    w.w_l = matrix_from_json(j.at("w_l"));
    w.w_lq = matrix_from_json(j.at("w_lq"));
    w.w_lqq = matrices_from_json(j.at("w_lqq"));
    w.w_lk = matrices_from_json(j.at("w_lk"));
    w.w_lv = matrices_from_json(j.at("w_lv"));
    w.wo = matrix_from_json(j.at("wo"));
    validate_weights(w, spec);
    return MlaBundle{spec, std::move(w)};
  } catch (const ordered_json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_merged_mla_bundle(const std::filesystem::path& path, const MlaSpec& spec,
                            const MergedMlaWeights& weights) {
  validate_weights(weights, spec);
  ordered_json j{
      {"version", 1},
      {"format", "mla-merged"},
      {"n_heads", spec.n_heads},
      {"d_in", spec.d_in},
      {"d_l", spec.d_l},
      {"d_lq", spec.d_lq},
      {"d_head", spec.d_head},
      {"d_out", spec.d_out},
      {"w_l", matrix_to_json(weights.w_l)},
      {"w_lq", matrix_to_json(weights.w_lq)},
      {"w_lqk", matrices_to_json(weights.w_lqk)},
      {"w_lo", matrix_to_json(weights.w_lo)},
  };
  write_json_file(path, j);
}

MergedMlaBundle load_merged_mla_bundle(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path);
  check_version_and_format(j, path, {"mla-merged"});
  try {
    MlaSpec spec(j.at("n_heads").get<std::size_t>(), j.at("d_in").get<std::size_t>(),
                 j.at("d_l").get<std::size_t>(), j.at("d_lq").get<std::size_t>(),
                 j.at("d_head").get<std::size_t>(), j.at("d_out").get<std::size_t>());
    MergedMlaWeights w;
    w.w_l = matrix_from_json(j.at("w_l"));
    w.w_lq = matrix_from_json(j.at("w_lq"));
    w.w_lqk = matrices_from_json(j.at("w_lqk"));
    w.w_lo = matrix_from_json(j.at("w_lo"));
    validate_weights(w, spec);
    return MergedMlaBundle{spec, std::move(w)};
  } catch (const ordered_json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

VocabularyBundle load_vocabulary_bundle(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path);
  try {
    Vocabulary vocab(j.at("tokens").get<std::vector<std::string>>());
    const std::size_t dim = j.at("dim").get<std::size_t>();
    EmbeddingTable table;
    if (j.contains("rows")) {
      const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
      if (rows.size() != vocab.size()) {
        throw IoError(path.string() + ": " + std::to_string(rows.size()) +
                      " embedding rows for " + std::to_string(vocab.size()) +
                      " tokens");
      }
      Matrix m(vocab.size(), dim);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != dim) {
          throw IoError(path.string() + ": embedding row " + std::to_string(i) +
                        " has length " + std::to_string(rows[i].size()) +
                        ", expected " + std::to_string(dim));
        }
        for (std::size_t c = 0; c < dim; ++c) m(i, c) = rows[i][c];
      }
      table.table = std::move(m);
    } else if (j.contains("seed")) {
      Rng rng = make_rng(j.at("seed").get<std::uint64_t>());
      table.table = gaussian_matrix(vocab.size(), dim, rng,
                                    1.0 / std::sqrt(static_cast<double>(dim)));
    } else {
      throw IoError(path.string() + ": needs either \"rows\" or \"seed\"");
    }
    return VocabularyBundle{std::move(vocab), std::move(table)};
  } catch (const ordered_json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

ModelPreset load_preset(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path);
  try {
    ModelPreset p;
    p.name = j.at("name").get<std::string>();
    p.n_layers = j.at("layers").get<std::size_t>();
    p.n_heads = j.at("heads").get<std::size_t>();
    if (j.contains("kv_heads") && !j.at("kv_heads").is_null()) {
      p.n_kv_heads = j.at("kv_heads").get<std::size_t>();
    }
    p.d_model = j.at("d_model").get<std::size_t>();
    p.d_head_or_dl = j.at("d_head").get<std::size_t>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mha") {
      p.kind = AttentionKind::Mha;
    } else if (kind == "gqa") {
      p.kind = AttentionKind::Gqa;
    } else if (kind == "mla") {
      p.kind = AttentionKind::Mla;
    } else {
      throw IoError(path.string() + ": unknown attention kind \"" + kind + "\"");
    }
    if (p.kind != AttentionKind::Mla && !p.n_kv_heads) {
      p.n_kv_heads = p.n_heads;
    }
    return p;
  } catch (const ordered_json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

StackConfig load_stack_config(const std::filesystem::path& path) {
  const ordered_json j = read_json_file(path);
  try {
    StackConfig cfg;
    cfg.depth = j.at("depth").get<std::size_t>();
    cfg.d_model = j.at("d_model").get<std::size_t>();
    cfg.n_heads = j.at("heads").get<std::size_t>();
    cfg.n_kv_heads = j.value("kv_heads", std::size_t{0});
    cfg.d_ff = j.value("d_ff", std::size_t{0});

    const std::string placement = j.value("norm_placement", "post");
    if (placement == "pre") {
      cfg.placement = NormPlacement::PreLn;
    } else if (placement == "post") {
      cfg.placement = NormPlacement::PostLn;
    } else {
      throw IoError(path.string() + ": norm_placement must be \"pre\" or \"post\"");
    }

    const std::string norm = j.value("norm", "layer");
    if (norm == "layer") {
      cfg.norm_kind = NormKind::LayerNorm;
    } else if (norm == "rms") {
      cfg.norm_kind = NormKind::RmsNorm;
    } else {
      throw IoError(path.string() + ": norm must be \"layer\" or \"rms\"");
    }

    const std::string activation = j.value("activation", "relu");
    if (activation == "relu") {
      cfg.activation = Activation::Relu;
    } else if (activation == "silu") {
      cfg.activation = Activation::Silu;
    } else {
      throw IoError(path.string() + ": activation must be \"relu\" or \"silu\"");
    }

    cfg.gated_ffn = j.value("gated_ffn", false);
    cfg.rope = j.value("rope", false);
    cfg.seed = j.value("seed", std::uint64_t{42});
    return cfg;
  } catch (const ordered_json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace attnlab
