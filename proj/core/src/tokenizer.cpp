#include "attnlab/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "attnlab/errors.hpp"

namespace attnlab {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) {
      throw ArgumentError("vocabulary token " + std::to_string(i) + " is empty");
    }
    if (!index_.emplace(t, i).second) {
      throw ArgumentError("duplicate vocabulary token \"" + t + "\"");
    }
    max_token_length_ = std::max(max_token_length_, t.size());
  }
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

std::vector<std::size_t> tokenize_greedy(std::string_view text,
                                         const Vocabulary& vocab,
                                         std::size_t max_len) {
  if (max_len == 0) {
    throw ArgumentError("tokenize_greedy: max_len must be positive");
  }
  const std::string norm = normalize_text(text);
  std::vector<std::size_t> out;
  std::size_t i = 0;
  while (i < norm.size()) {
    const std::size_t cap = std::min(max_len, norm.size() - i);
    std::size_t matched = 0;
    std::size_t matched_index = 0;
    for (std::size_t len = cap; len >= 1; --len) {
      if (auto idx = vocab.index_of(std::string_view(norm).substr(i, len))) {
        matched = len;
        matched_index = *idx;
        break;
      }
    }
    if (matched > 0) {
      out.push_back(matched_index);
      i += matched;
    } else if (norm[i] == ' ') {
      ++i;  // separator between vocabulary-covered segments
    } else {
      throw UnknownSymbolError("tokenize_greedy: symbol \"" + std::string(1, norm[i]) +
                                   "\" at position " + std::to_string(i) +
                                   " is not covered by the vocabulary",
                               i);
    }
  }
  return out;
}

Matrix embed(const std::vector<std::size_t>& indices, const EmbeddingTable& table) {
  Matrix out(indices.size(), table.dim());
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const std::size_t idx = indices[t];
    if (idx >= table.vocab_size()) {
      throw LookupError("embed: token index " + std::to_string(idx) +
                        " outside table with " + std::to_string(table.vocab_size()) +
                        " rows");
    }
    for (std::size_t j = 0; j < table.dim(); ++j) {
      out(t, j) = table.table(idx, j);
    }
  }
  return out;
}

Matrix apply_rope(const Matrix& m, std::size_t start_pos, const RopeParams& params) {
  if (params.head_dim % 2 != 0) {
    throw ShapeError("apply_rope: head_dim " + std::to_string(params.head_dim) +
                     " must be even");
  }
  if (m.cols() != params.head_dim) {
    throw ShapeError("apply_rope: matrix " + m.shape_string() +
                     " does not match head_dim " + std::to_string(params.head_dim));
  }
  Matrix out(m.rows(), m.cols());
  const std::size_t pairs = params.head_dim / 2;
  for (std::size_t t = 0; t < m.rows(); ++t) {
    const double pos = static_cast<double>(start_pos + t);
    for (std::size_t k = 0; k < pairs; ++k) {
      const double theta =
          std::pow(params.base, -2.0 * static_cast<double>(k) /
                                    static_cast<double>(params.head_dim));
      const double angle = pos * theta;
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double x = m(t, 2 * k);
      const double y = m(t, 2 * k + 1);
      out(t, 2 * k) = x * c - y * s;
      out(t, 2 * k + 1) = x * s + y * c;
    }
  }
  return out;
}

}  // namespace attnlab
