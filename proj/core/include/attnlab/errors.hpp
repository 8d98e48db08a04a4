#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace attnlab {

// Incompatible dimensions; the message names both shapes involved.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid argument values: ranks out of range, empty lists, bad configs.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A query row with no unmasked keys, or a non-positive normalizer sum.
class DegenerateRowError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Iterative method hit its sweep cap; carries the remaining residual.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Token index outside the embedding table.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Input character or substring not covered by the vocabulary.
class UnknownSymbolError : public std::runtime_error {
 public:
  UnknownSymbolError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Causal mask cannot align the query rows with the key positions.
class MaskAlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File or parse failure in the JSON interfaces.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace attnlab
