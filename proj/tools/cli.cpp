#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "attnlab/accounting.hpp"
#include "attnlab/attention.hpp"
#include "attnlab/checks.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/io.hpp"
#include "attnlab/latent.hpp"
#include "attnlab/random.hpp"
#include "attnlab/tokenizer.hpp"

namespace attnlab::cli {

namespace {

using nlohmann::ordered_json;

std::string matrix_rows_string(const Matrix& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << "  [";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      os << (j == 0 ? " " : "  ") << std::setw(9) << m(i, j);
    }
    os << " ]\n";
  }
  return os.str();
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows[i].assign(m.row(i).begin(), m.row(i).end());
  }
  return rows;
}

int emit(const std::string& text, const std::string& output_path, std::ostream& out,
         std::ostream& err) {
  if (output_path.empty()) {
    out << text;
    return kExitOk;
  }
  std::ofstream file(output_path);
  if (!file) {
    err << "error: cannot write " << output_path << "\n";
    return kExitUsage;
  }
  file << text;
  return kExitOk;
}

struct AccountReport {
  ModelPreset preset;
  std::uint64_t context = 0;
  std::uint64_t bits = 0;
  MemoryFloats per_layer;
  std::uint64_t per_layer_cache_bytes = 0;
  std::uint64_t per_layer_flops = 0;
  std::string note;
};

AccountReport build_account_report(const ModelPreset& preset, std::uint64_t context,
                                   std::uint64_t bits) {
  AccountReport report;
  report.preset = preset;
  report.context = context;
  report.bits = bits;
  if (preset.kind == AttentionKind::Mla) {
    const MlaSpec spec(preset.n_heads, preset.d_model, preset.d_head_or_dl,
                       preset.d_head_or_dl, preset.d_head_or_dl, preset.d_model);
    report.per_layer = mla_memory_breakdown(spec, context);
    report.per_layer_cache_bytes = report.per_layer.cache_floats * bits / 8;
    report.per_layer_flops =
        preset.n_heads * attention_flops(1, context, spec.d_l, spec.d_l);
    report.note =
        "latent cache holds context * d_l floats shared by all heads; decode-step "
        "flops count score+combine multiplies over the latent width";
  } else {
    const std::size_t kv_heads = preset.n_kv_heads.value_or(preset.n_heads);
    const MhaSpec spec(preset.n_heads, kv_heads, preset.d_model, preset.d_head_or_dl,
                       preset.d_head_or_dl, preset.d_model);
    report.per_layer = mha_memory_breakdown(spec, context);
    report.per_layer_cache_bytes = report.per_layer.cache_floats * bits / 8;
    report.per_layer_flops =
        preset.n_heads * attention_flops(1, context, spec.d_qk, spec.d_head);
    report.note =
        "cache bytes follow 2 * layers * kv_heads * context * d_head * bits/8 with d "
        "taken as the per-head width; decode-step flops count score+combine "
        "multiplies per query head";
  }
  return report;
}

std::string account_text(const AccountReport& r) {
  const std::uint64_t layers = r.preset.n_layers;
  std::ostringstream os;
  os << "attnlab account: " << r.preset.name << " (" << to_string(r.preset.kind)
     << ")\n";
  os << "  layers " << format_count(layers) << ", heads "
     << format_count(r.preset.n_heads);
  if (r.preset.n_kv_heads) {
    os << ", kv heads " << format_count(*r.preset.n_kv_heads);
  }
  os << ", d_model " << format_count(r.preset.d_model)
     << (r.preset.kind == AttentionKind::Mla ? ", d_l " : ", d_head ")
     << format_count(r.preset.d_head_or_dl) << "\n";
  os << "  context " << format_count(r.context) << " tokens at "
     << format_count(r.bits) << "-bit floats\n\n";

  const char* cache_label =
      r.preset.kind == AttentionKind::Mla ? "latent cache floats" : "kv cache floats";
  os << "  per layer:\n";
  os << "    " << std::left << std::setw(22) << cache_label
     << format_count(r.per_layer.cache_floats) << "\n";
  os << "    " << std::setw(22) << "cache bytes" << format_count(r.per_layer_cache_bytes)
     << "\n";
  os << "    " << std::setw(22) << "weight floats"
     << format_count(r.per_layer.weight_floats) << "\n";
  os << "    " << std::setw(22) << "decode-step flops"
     << format_count(r.per_layer_flops) << "\n";
  os << "  total over " << format_count(layers) << " layers:\n";
  os << "    " << std::setw(22) << cache_label
     << format_count(layers * r.per_layer.cache_floats) << "\n";
  os << "    " << std::setw(22) << "cache bytes"
     << format_count(layers * r.per_layer_cache_bytes) << "\n";
  os << "    " << std::setw(22) << "weight floats"
     << format_count(layers * r.per_layer.weight_floats) << "\n";
  os << "    " << std::setw(22) << "decode-step flops"
     << format_count(layers * r.per_layer_flops) << "\n\n";
  os << "  note: " << r.note << "\n";
  return os.str();
}

std::string account_json(const AccountReport& r) {
  const std::uint64_t layers = r.preset.n_layers;
  ordered_json j;
  j["command"] = "account";
  j["model"] = {
      {"name", r.preset.name},
      {"kind", to_string(r.preset.kind)},
      {"layers", r.preset.n_layers},
      {"heads", r.preset.n_heads},
      {"kv_heads",
       r.preset.n_kv_heads ? ordered_json(*r.preset.n_kv_heads) : ordered_json(nullptr)},
      {"d_model", r.preset.d_model},
      {r.preset.kind == AttentionKind::Mla ? "d_l" : "d_head", r.preset.d_head_or_dl},
  };
  j["context"] = r.context;
  j["bits_per_float"] = r.bits;
  j["per_layer"] = {
      {"cache_floats", r.per_layer.cache_floats},
      {"cache_bytes", r.per_layer_cache_bytes},
      {"weight_floats", r.per_layer.weight_floats},
      {"decode_step_flops", r.per_layer_flops},
  };
  j["total"] = {
      {"cache_floats", layers * r.per_layer.cache_floats},
      {"cache_bytes", layers * r.per_layer_cache_bytes},
      {"weight_floats", layers * r.per_layer.weight_floats},
      {"decode_step_flops", layers * r.per_layer_flops},
  };
  j["note"] = r.note;
  return j.dump(2) + "\n";
}

// Lowercase letters plus a handful of words, so any alphabetic text works and
// the sample phrase tokenizes into whole words.
VocabularyBundle demo_vocabulary(std::uint64_t seed) {
  std::vector<std::string> tokens;
  for (char c = 'a'; c <= 'z'; ++c) tokens.emplace_back(1, c);
  for (const char* word : {"the", "lazy", "dog", "quick", "brown", "fox", "jumps",
                           "over"}) {
    tokens.emplace_back(word);
  }
  Vocabulary vocab(std::move(tokens));
  Rng rng = make_rng(seed);
  // Positive entries keep the linear-kernel scores positive.
  EmbeddingTable table{uniform_matrix(vocab.size(), 4, rng, 0.05, 1.0)};
  return VocabularyBundle{std::move(vocab), std::move(table)};
}

}  // namespace

std::string format_count(std::uint64_t value) {
  const std::string digits = std::to_string(value);
  std::string out;
  out.reserve(digits.size() + digits.size() / 3);
  const std::size_t lead = digits.size() % 3 == 0 ? 3 : digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i + 3 - lead) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string format_sci(double value) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << value;
  return os.str();
}

int cmd_account(const AccountOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    ModelPreset preset;
    if (!opts.preset.empty()) {
      const auto found = find_preset(opts.preset);
      if (!found) {
        err << "error: unknown preset \"" << opts.preset << "\"; built-ins:";
        for (const ModelPreset& p : builtin_presets()) err << " " << p.name;
        err << "\n";
        return kExitUsage;
      }
      preset = *found;
    } else if (!opts.config_path.empty()) {
      preset = load_preset(opts.config_path);
    } else {
      err << "error: account needs --preset NAME or --config PATH\n";
      return kExitUsage;
    }
    const AccountReport report =
        build_account_report(preset, opts.context, opts.bits_per_float);
    const std::string text = opts.json ? account_json(report) : account_text(report);
    return emit(text, opts.output_path, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err) {
  checks::CheckConfig cfg;
  cfg.seed = opts.seed;
  cfg.sizes = opts.sizes;

  if (!opts.break_target.empty()) {
    if (opts.break_target != "mla-rope") {
      err << "error: unknown --break target \"" << opts.break_target
          << "\"; available: mla-rope\n";
      return kExitUsage;
    }
    const checks::RopeBreakReport report = checks::rope_break_report(cfg);
    if (opts.json) {
      ordered_json j;
      j["command"] = "check";
      j["break"] = "mla-rope";
      j["seed"] = opts.seed;
      j["naive_disagreement"] = report.naive_disagreement;
      j["decoupled_shift_deviation"] = report.decoupled_shift_dev;
      j["position_shift"] = report.shift;
      j["demonstrated"] = report.demonstrated();
      out << j.dump(2) << "\n";
    } else {
      out << "attnlab check --break mla-rope (seed " << opts.seed << ")\n";
      out << "  rotating the latents inside the merged path vs the rotated\n";
      out << "  unmerged reference: max deviation "
          << format_sci(report.naive_disagreement) << " (expected > 1.00e-06)\n";
      out << "  decoupled variant, all positions shifted by " << report.shift
          << ": max deviation " << format_sci(report.decoupled_shift_dev)
          << " (must stay < 1.00e-10)\n";
      out << (report.demonstrated() ? "demonstration holds\n"
                                    : "demonstration FAILED\n");
    }
    return report.demonstrated() ? kExitOk : kExitPropertyFailure;
  }

  const std::vector<checks::CheckResult> results = checks::run_all_checks(cfg);
  bool all_passed = true;
  for (const auto& r : results) all_passed = all_passed && r.pass;

  if (opts.json) {
    ordered_json j;
    j["command"] = "check";
    j["seed"] = opts.seed;
    if (opts.sizes) j["sizes"] = *opts.sizes;
    j["checks"] = ordered_json::array();
    for (const auto& r : results) {
      j["checks"].push_back({{"name", r.name},
                             {"pass", r.pass},
                             {"max_deviation", r.max_deviation},
                             {"tolerance", r.tolerance},
                             {"details", r.details}});
    }
    j["all_passed"] = all_passed;
    out << j.dump(2) << "\n";
  } else {
    out << "attnlab check (seed " << opts.seed;
    if (opts.sizes) out << ", sizes " << *opts.sizes;
    out << ")\n";
    std::size_t index = 1;
    for (const auto& r : results) {
      out << "  [" << std::setw(2) << index++ << "/" << results.size() << "] "
          << std::left << std::setw(26) << r.name << std::right
          << (r.pass ? "PASS" : "FAIL") << "  max dev " << format_sci(r.max_deviation)
          << " (tol " << format_sci(r.tolerance) << ")";
      if (!r.details.empty()) out << "  " << r.details;
      out << "\n";
    }
    out << (all_passed ? "all checks passed\n" : "CHECKS FAILED\n");
  }
  if (!all_passed) {
    for (const auto& r : results) {
      if (!r.pass) err << "failed property: " << r.name << "\n";
    }
  }
  return all_passed ? kExitOk : kExitPropertyFailure;
}

int cmd_demo(const DemoOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    Kernel kernel = Kernel::scaled_exp(4);
    if (opts.kernel == "linear") {
      kernel = Kernel::linear();
    } else if (opts.kernel != "scaled-exp") {
      err << "error: unknown kernel \"" << opts.kernel
          << "\"; available: scaled-exp, linear\n";
      return kExitUsage;
    }

    const VocabularyBundle bundle = demo_vocabulary(opts.seed);
    const std::vector<std::size_t> indices =
        tokenize_greedy(opts.text, bundle.vocab, bundle.vocab.max_token_length());
    const Matrix embeddings = embed(indices, bundle.table);

    Rng rng = make_rng(opts.seed + 1);
    const HeadWeights head{uniform_matrix(4, 4, rng, 0.05, 1.0),
                           uniform_matrix(4, 4, rng, 0.05, 1.0),
                           uniform_matrix(4, 4, rng, 0.05, 1.0)};

    Matrix scores(0, 0), weights(0, 0), output(0, 4);
    if (!indices.empty()) {
      const Matrix q = matmul(embeddings, head.wq);
      const Matrix k = matmul(embeddings, head.wk);
      const Matrix v = matmul(embeddings, head.wv);
      scores = attention_scores(q, k, kernel, MaskPolicy::none());
      const std::vector<double> z = normalizer(scores);
      weights = scores;
      for (std::size_t i = 0; i < weights.rows(); ++i) {
        for (std::size_t j = 0; j < weights.cols(); ++j) weights(i, j) /= z[i];
      }
      output = matmul(weights, v);
    }

    // Optional stack pass: run the same tokens through a seeded GPT stack
    // described by the config file.
    std::optional<Matrix> stack_output;
    std::optional<StackConfig> stack_cfg;
    if (!opts.config_path.empty()) {
      stack_cfg = load_stack_config(opts.config_path);
      const GptModel model = build_gpt_model(*stack_cfg, bundle.vocab.size());
      stack_output = gpt_forward(indices, model);
    }

    if (opts.json) {
      ordered_json j;
      j["command"] = "demo";
      j["seed"] = opts.seed;
      j["kernel"] = opts.kernel;
      j["text"] = opts.text;
      j["tokens"] = ordered_json::array();
      for (std::size_t t = 0; t < indices.size(); ++t) {
        j["tokens"].push_back(
            {{"text", bundle.vocab.tokens()[indices[t]]}, {"index", indices[t]}});
      }
      j["embeddings"] = matrix_to_rows(embeddings);
      j["scores"] = matrix_to_rows(scores);
      j["weights"] = matrix_to_rows(weights);
      j["output"] = matrix_to_rows(output);
      if (stack_output) {
        j["stack"] = {{"depth", stack_cfg->depth},
                      {"d_model", stack_cfg->d_model},
                      {"heads", stack_cfg->n_heads},
                      {"output", matrix_to_rows(*stack_output)}};
      }
      out << j.dump(2) << "\n";
    } else {
      out << "attnlab demo (seed " << opts.seed << ", " << opts.kernel
          << " kernel)\n";
      out << "text: \"" << opts.text << "\"\n";
      out << "tokens: " << indices.size() << "\n";
      for (std::size_t t = 0; t < indices.size(); ++t) {
        out << "  [" << t << "] \"" << bundle.vocab.tokens()[indices[t]]
            << "\" -> index " << indices[t] << "\n";
      }
      if (indices.empty()) {
        out << "empty trace\n";
        return kExitOk;
      }
      out << "embeddings (" << embeddings.rows() << " x " << embeddings.cols()
          << "):\n"
          << matrix_rows_string(embeddings);
      out << "attention scores A (" << scores.rows() << " x " << scores.cols()
          << "):\n"
          << matrix_rows_string(scores);
      out << "attention weights Z^-1 A (rows sum to 1):\n"
          << matrix_rows_string(weights);
      out << "output Y (" << output.rows() << " x " << output.cols() << "):\n"
          << matrix_rows_string(output);
      if (stack_output) {
        out << "gpt stack (" << stack_cfg->depth << " layers, d_model "
            << stack_cfg->d_model << ", " << stack_cfg->n_heads
            << " heads) final state:\n"
            << matrix_rows_string(*stack_output);
      }
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_convert(const ConvertOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const MhaBundle bundle = load_mha_bundle(opts.input_path);
    const std::size_t d_lq = opts.d_lq.value_or(opts.d_l);
    const MlaFactorization fact =
        factorize_mha_to_mla(bundle.weights, bundle.spec, opts.d_l, d_lq);
    const MlaSpec mla_spec(bundle.spec.n_heads, bundle.spec.d_in, opts.d_l, d_lq,
                           bundle.spec.d_head, bundle.spec.d_out);
    const MergedMlaWeights merged = merge_weights(fact.weights);
    save_merged_mla_bundle(opts.output_path, mla_spec, merged);

    // Forward deviation on a deterministic probe batch.
    Rng rng = make_rng(opts.seed);
    const Matrix probe = gaussian_matrix(8, bundle.spec.d_in, rng);
    const Matrix via_mha =
        mha_forward(probe, probe, bundle.weights, bundle.spec, MaskPolicy::causal());
    const Matrix via_mla = mla_forward(probe, merged, mla_spec, MaskPolicy::causal());
    const double forward_dev = max_abs_diff(via_mha, via_mla);

    if (opts.json) {
      ordered_json j;
      j["command"] = "convert";
      j["input"] = opts.input_path;
      j["output"] = opts.output_path;
      j["d_l"] = opts.d_l;
      j["d_lq"] = d_lq;
      j["kv_reconstruction_error"] = fact.kv_error;
      j["query_reconstruction_error"] = fact.query_error;
      j["total_reconstruction_error"] = fact.total_error;
      j["forward_max_deviation"] = forward_dev;
      j["probe_tokens"] = 8;
      j["seed"] = opts.seed;
      out << j.dump(2) << "\n";
    } else {
      out << "attnlab convert " << opts.input_path << " -> " << opts.output_path
          << "\n";
      out << "  heads " << bundle.spec.n_heads << ", d_in " << bundle.spec.d_in
          << ", d_head " << bundle.spec.d_head << ", latent widths d_l " << opts.d_l
          << ", d_lq " << d_lq << "\n";
      out << "  reconstruction error: kv " << format_sci(fact.kv_error) << ", query "
          << format_sci(fact.query_error) << ", total " << format_sci(fact.total_error)
          << "\n";
      out << "  forward max deviation on 8-token probe (seed " << opts.seed
          << "): " << format_sci(forward_dev) << "\n";
      out << "wrote merged latent bundle\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int run(int argc, char** argv) {
  std::uint64_t default_seed = 42;
  if (const char* env = std::getenv("ATTNLAB_SEED")) {
    try {
      default_seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: ATTNLAB_SEED is not a number: " << env << "\n";
      return kExitUsage;
    }
  }

  CLI::App app{"desk-scale attention engine: accounting, self-checks, demos and "
               "latent-weight conversion"};
  app.require_subcommand(1);

  AccountOptions account;
  CLI::App* account_cmd =
      app.add_subcommand("account", "memory and flop accounting for model presets");
  CLI::Option* preset_opt =
      account_cmd->add_option("--preset", account.preset, "built-in preset name");
  CLI::Option* config_opt = account_cmd->add_option("--config", account.config_path,
                                                    "custom preset JSON path");
  preset_opt->excludes(config_opt);
  account_cmd->add_option("--context", account.context, "context length in tokens");
  account_cmd->add_option("--bits", account.bits_per_float, "bits per stored float");
  account_cmd->add_flag("--json", account.json, "machine-readable output");
  account_cmd->add_option("-o,--output", account.output_path, "write report to file");

  CheckOptions check;
  check.seed = default_seed;
  CLI::App* check_cmd =
      app.add_subcommand("check", "run the equivalence property suite");
  check_cmd->add_option("--seed", check.seed, "randomness seed");
  check_cmd->add_option("--sizes", check.sizes, "cap on token counts");
  check_cmd->add_flag("--json", check.json, "machine-readable output");
  check_cmd->add_option("--break", check.break_target,
                        "demonstration mode (mla-rope)");

  DemoOptions demo;
  demo.seed = default_seed;
  CLI::App* demo_cmd =
      app.add_subcommand("demo", "tokenize-embed-attend walkthrough on a toy model");
  demo_cmd->add_option("--text", demo.text, "input text");
  demo_cmd->add_option("--seed", demo.seed, "randomness seed");
  demo_cmd->add_option("--kernel", demo.kernel, "scaled-exp or linear");
  demo_cmd->add_option("--config", demo.config_path,
                       "stack-config JSON: also run a seeded GPT stack");
  demo_cmd->add_flag("--json", demo.json, "machine-readable output");

  ConvertOptions convert;
  convert.seed = default_seed;
  CLI::App* convert_cmd = app.add_subcommand(
      "convert", "factorize an MHA weight bundle into merged latent weights");
  convert_cmd->add_option("--config", convert.input_path, "input MHA bundle path")
      ->required();
  convert_cmd->add_option("--d-l", convert.d_l, "shared key/value latent width")
      ->required();
  convert_cmd->add_option("--d-lq", convert.d_lq,
                          "query latent width (default: d_l)");
  convert_cmd->add_option("-o,--output", convert.output_path,
                          "output merged bundle path")
      ->required();
  convert_cmd->add_option("--seed", convert.seed, "probe batch seed");
  convert_cmd->add_flag("--json", convert.json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (account_cmd->parsed()) return cmd_account(account, std::cout, std::cerr);
  if (check_cmd->parsed()) return cmd_check(check, std::cout, std::cerr);
  if (demo_cmd->parsed()) return cmd_demo(demo, std::cout, std::cerr);
  if (convert_cmd->parsed()) return cmd_convert(convert, std::cout, std::cerr);
  return kExitUsage;
}

}  // namespace attnlab::cli
