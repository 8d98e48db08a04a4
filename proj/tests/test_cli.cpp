#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "attnlab/io.hpp"
#include "attnlab/multihead.hpp"
#include "attnlab/random.hpp"
#include "cli.hpp"

using namespace attnlab;
using nlohmann::json;

namespace {

struct TempFile {
  std::filesystem::path path;

  explicit TempFile(const std::string& name)
      : path(std::filesystem::temp_directory_path() /
             ("attnlab_cli_" + std::to_string(::getpid()) + "_" + name)) {}
  ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("count and deviation formatting") {
  CHECK(cli::format_count(0) == "0");
  CHECK(cli::format_count(999) == "999");
  CHECK(cli::format_count(1000) == "1,000");
  CHECK(cli::format_count(2684354560ULL) == "2,684,354,560");
  CHECK(cli::format_sci(0.342) == "3.42e-01");
}

TEST_CASE("account reproduces the pinned llama numbers") {
  cli::AccountOptions opts;
  opts.preset = "llama3-70b";
  opts.context = 8192;
  opts.bits_per_float = 16;
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_account(opts, out, err) == 0);
  const json j = json::parse(out.str());
  CHECK(j["total"]["cache_bytes"] == 2684354560ULL);
  CHECK(j["per_layer"]["cache_floats"] == 16777216ULL);
  CHECK(j["model"]["kv_heads"] == 8);

  // The text table carries the same number with separators.
  opts.json = false;
  std::ostringstream text_out;
  REQUIRE(cli::cmd_account(opts, text_out, err) == 0);
  CHECK(text_out.str().find("2,684,354,560") != std::string::npos);
}

TEST_CASE("account covers the latent preset") {
  cli::AccountOptions opts;
  opts.preset = "deepseek-v2";
  opts.context = 8192;
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_account(opts, out, err) == 0);
  const json j = json::parse(out.str());
  CHECK(j["per_layer"]["cache_floats"] == 4194304ULL);
  CHECK(j["model"]["kv_heads"].is_null());
  CHECK(j["model"]["d_l"] == 512);
}

TEST_CASE("zero context zeroes the cache but not the weights") {
  cli::AccountOptions opts;
  opts.preset = "llama3-70b";
  opts.context = 0;
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_account(opts, out, err) == 0);
  const json j = json::parse(out.str());
  CHECK(j["total"]["cache_bytes"] == 0);
  CHECK(j["total"]["weight_floats"].get<std::uint64_t>() > 0);
}

TEST_CASE("unknown preset is a usage error listing the built-ins") {
  cli::AccountOptions opts;
  opts.preset = "gpt-17";
  std::ostringstream out, err;
  CHECK(cli::cmd_account(opts, out, err) == cli::kExitUsage);
  CHECK(err.str().find("llama3-70b") != std::string::npos);
}

TEST_CASE("account json round-trips") {
  cli::AccountOptions opts;
  opts.preset = "gemma3-27b";
  opts.context = 1024;
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_account(opts, out, err) == 0);
  const json parsed = json::parse(out.str());
  CHECK(json::parse(parsed.dump()) == parsed);
}

TEST_CASE("check passes and is byte-deterministic") {
  cli::CheckOptions opts;
  opts.seed = 42;
  opts.sizes = 4;  // keep the unit-test run quick
  std::ostringstream first, second, err;
  CHECK(cli::cmd_check(opts, first, err) == 0);
  CHECK(cli::cmd_check(opts, second, err) == 0);
  CHECK(first.str() == second.str());
  CHECK(first.str().find("all checks passed") != std::string::npos);
}

TEST_CASE("check single-token sizes still pass") {
  cli::CheckOptions opts;
  opts.seed = 7;
  opts.sizes = 1;
  std::ostringstream out, err;
  CHECK(cli::cmd_check(opts, out, err) == 0);
}

TEST_CASE("check break demonstration reports the conflict") {
  cli::CheckOptions opts;
  opts.seed = 42;
  opts.break_target = "mla-rope";
  opts.json = true;
  std::ostringstream out, err;
  CHECK(cli::cmd_check(opts, out, err) == 0);
  const json j = json::parse(out.str());
  CHECK(j["naive_disagreement"].get<double>() > 1e-6);
  CHECK(j["decoupled_shift_deviation"].get<double>() < 1e-10);
  CHECK(j["demonstrated"] == true);

  opts.break_target = "softmax";
  std::ostringstream out2, err2;
  CHECK(cli::cmd_check(opts, out2, err2) == cli::kExitUsage);
}

TEST_CASE("demo walks the pipeline with row-stochastic weights") {
  cli::DemoOptions opts;
  opts.text = "the lazy dog";
  opts.json = true;
  for (const char* kernel : {"scaled-exp", "linear"}) {
    opts.kernel = kernel;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_demo(opts, out, err) == 0);
    const json j = json::parse(out.str());
    REQUIRE(j["tokens"].size() == 3);
    CHECK(j["tokens"][0]["text"] == "the");
    CHECK(j["tokens"][2]["text"] == "dog");
    REQUIRE(j["weights"].size() == 3);
    for (const auto& row : j["weights"]) {
      double sum = 0.0;
      for (const auto& v : row) sum += v.get<double>();
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("demo runs a configured gpt stack over the tokens") {
  TempFile config("demo_stack.json");
  {
    std::ofstream out(config.path);
    out << R"({"depth": 2, "d_model": 8, "heads": 2, "norm_placement": "pre",
               "rope": true, "seed": 11})";
  }
  cli::DemoOptions opts;
  opts.text = "the quick fox";
  opts.config_path = config.path.string();
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_demo(opts, out, err) == 0);
  const json j = json::parse(out.str());
  REQUIRE(j.contains("stack"));
  CHECK(j["stack"]["depth"] == 2);
  CHECK(j["stack"]["output"].size() == 3);   // one row per token
  CHECK(j["stack"]["output"][0].size() == 8);
}

TEST_CASE("demo of empty text is an empty trace") {
  cli::DemoOptions opts;
  opts.text = "";
  std::ostringstream out, err;
  CHECK(cli::cmd_demo(opts, out, err) == 0);
  CHECK(out.str().find("tokens: 0") != std::string::npos);
}

TEST_CASE("demo is byte-deterministic for a fixed seed") {
  cli::DemoOptions opts;
  opts.text = "quick brown fox";
  opts.seed = 123;
  std::ostringstream a, b, err;
  REQUIRE(cli::cmd_demo(opts, a, err) == 0);
  REQUIRE(cli::cmd_demo(opts, b, err) == 0);
  CHECK(a.str() == b.str());
}

TEST_CASE("demo rejects uncovered symbols") {
  cli::DemoOptions opts;
  opts.text = "hello, world";  // the comma is not in the vocabulary
  std::ostringstream out, err;
  CHECK(cli::cmd_demo(opts, out, err) == cli::kExitUsage);
  CHECK(err.str().find("error") != std::string::npos);
}

TEST_CASE("convert reports planted factors as exact") {
  const std::size_t d_in = 8, d_l = 3, d_head = 4, n_heads = 2;
  const MhaSpec spec(n_heads, n_heads, d_in, d_head, d_head, d_in);
  Rng rng = make_rng(977);
  const Matrix g = gaussian_matrix(d_in, d_l, rng, 0.4);
  MhaWeights w;
  for (std::size_t h = 0; h < n_heads; ++h) {
    w.wq.push_back(gaussian_matrix(d_in, d_head, rng, 0.4));
    w.wk.push_back(matmul(g, gaussian_matrix(d_l, d_head, rng, 0.4)));
    w.wv.push_back(matmul(g, gaussian_matrix(d_l, d_head, rng, 0.4)));
  }
  w.wo = gaussian_matrix(n_heads * d_head, d_in, rng, 0.3);

  TempFile input("convert_in.json");
  TempFile output("convert_out.json");
  save_mha_bundle(input.path, spec, w);

  cli::ConvertOptions opts;
  opts.input_path = input.path.string();
  opts.output_path = output.path.string();
  opts.d_l = d_l;
  opts.d_lq = d_in;  // full-width query latent: lossless
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_convert(opts, out, err) == 0);
  const json j = json::parse(out.str());
  CHECK(j["kv_reconstruction_error"].get<double>() < 1e-8);
  CHECK(j["total_reconstruction_error"].get<double>() < 1e-8);
  CHECK(j["forward_max_deviation"].get<double>() < 1e-8);

  // The written bundle is a loadable merged bundle.
  const MergedMlaBundle merged = load_merged_mla_bundle(output.path);
  CHECK(merged.spec.d_l == d_l);
}

TEST_CASE("convert of full-rank weights reports a real loss at half width") {
  const MhaSpec spec(2, 2, 8, 4, 4, 8);
  const MhaWeights w = random_mha_weights(spec, 983);
  TempFile input("convert_lossy_in.json");
  TempFile output("convert_lossy_out.json");
  save_mha_bundle(input.path, spec, w);

  cli::ConvertOptions opts;
  opts.input_path = input.path.string();
  opts.output_path = output.path.string();
  opts.d_l = 4;
  opts.d_lq = 8;
  opts.json = true;
  std::ostringstream out, err;
  REQUIRE(cli::cmd_convert(opts, out, err) == 0);
  const json j = json::parse(out.str());
  CHECK(j["kv_reconstruction_error"].get<double>() > 1e-3);
  CHECK(j["forward_max_deviation"].get<double>() > 1e-6);
}

TEST_CASE("convert with a bad rank or missing file is a usage error") {
  cli::ConvertOptions opts;
  opts.input_path = "/nonexistent/in.json";
  opts.output_path = "/tmp/attnlab_never_written.json";
  opts.d_l = 4;
  std::ostringstream out, err;
  CHECK(cli::cmd_convert(opts, out, err) == cli::kExitUsage);

  const MhaSpec spec(2, 2, 8, 4, 4, 8);
  const MhaWeights w = random_mha_weights(spec, 991);
  TempFile input("convert_bad_rank.json");
  save_mha_bundle(input.path, spec, w);
  opts.input_path = input.path.string();
  opts.d_l = 9;  // exceeds d_in
  std::ostringstream out2, err2;
  CHECK(cli::cmd_convert(opts, out2, err2) == cli::kExitUsage);
}
