#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "attnlab/matrix.hpp"

namespace attnlab {

// Ordered set of distinct, nonempty tokens with a reverse lookup.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  std::optional<std::size_t> index_of(std::string_view token) const;
  std::size_t max_token_length() const { return max_token_length_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
  std::size_t max_token_length_ = 0;
};

// One d-dimensional row per vocabulary entry.
struct EmbeddingTable {
  Matrix table;

  std::size_t vocab_size() const { return table.rows(); }
  std::size_t dim() const { return table.cols(); }
};

// Rotary positional embedding parameters. head_dim must be even: rotations
// act on coordinate pairs (2k, 2k+1) with angle pos * base^(-2k/head_dim).
struct RopeParams {
  std::size_t head_dim = 0;
  double base = 10000.0;
};

// Lowercases ASCII, collapses whitespace runs to single spaces, trims ends.
std::string normalize_text(std::string_view text);

// Left-to-right greedy longest match over the normalized text, candidate
// substrings capped at max_len characters. Whitespace that no vocabulary
// token covers acts as a separator and yields no token. A character the
// vocabulary cannot cover raises UnknownSymbolError with its position.
std::vector<std::size_t> tokenize_greedy(std::string_view text,
                                         const Vocabulary& vocab,
                                         std::size_t max_len);

// Row t of the result is table row indices[t]; LookupError past the table.
Matrix embed(const std::vector<std::size_t>& indices, const EmbeddingTable& table);

// Rotates row t by the position (start_pos + t) rotation; norm-preserving.
Matrix apply_rope(const Matrix& m, std::size_t start_pos, const RopeParams& params);

}  // namespace attnlab
