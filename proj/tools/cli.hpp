#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace attnlab::cli {

// Exit-code contract: 0 success, 1 property failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPropertyFailure = 1;
inline constexpr int kExitUsage = 2;

struct AccountOptions {
  std::string preset;       // one of preset/config_path must be set
  std::string config_path;  // custom preset JSON
  std::uint64_t context = 8192;
  std::uint64_t bits_per_float = 16;
  bool json = false;
  std::string output_path;  // empty: stdout
};

struct CheckOptions {
  std::uint64_t seed = 42;
  std::optional<std::size_t> sizes;
  bool json = false;
  std::string break_target;  // "mla-rope" runs the demonstration mode
};

struct DemoOptions {
  std::string text = "the lazy dog";
  std::uint64_t seed = 42;
  std::string kernel = "scaled-exp";  // or "linear"
  std::string config_path;            // optional stack-config JSON
  bool json = false;
};

struct ConvertOptions {
  std::string input_path;
  std::size_t d_l = 0;
  std::optional<std::size_t> d_lq;  // defaults to d_l
  std::string output_path;
  std::uint64_t seed = 42;
  bool json = false;
};

int cmd_account(const AccountOptions& opts, std::ostream& out, std::ostream& err);
int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err);
int cmd_demo(const DemoOptions& opts, std::ostream& out, std::ostream& err);
int cmd_convert(const ConvertOptions& opts, std::ostream& out, std::ostream& err);

// Full argv dispatch used by main().
int run(int argc, char** argv);

// 2684354560 -> "2,684,354,560"
std::string format_count(std::uint64_t value);
// three significant digits, scientific
std::string format_sci(double value);

}  // namespace attnlab::cli
