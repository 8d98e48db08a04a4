#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attnlab/matrix.hpp"

namespace attnlab {

// Similarity kernel of the form f(<v,w>). ScaledExp is exp(<v,w>/sqrt(d_qk));
// Linear is the raw dot product; Custom looks up a registered scalar function
// by name and applies it to the dot product.
class Kernel {
 public:
  enum class Kind { ScaledExp, Linear, Custom };

  static Kernel scaled_exp(std::size_t d_qk);
  static Kernel linear();
  static Kernel custom(std::string name);

  Kind kind() const { return kind_; }
  std::size_t d_qk() const { return d_qk_; }
  const std::string& custom_name() const { return custom_name_; }

  // f applied to the query-key dot product.
  double apply(double dot) const;

  // Strictly positive output for finite input (only the exponential kernel).
  bool positive() const { return kind_ == Kind::ScaledExp; }

 private:
  Kernel(Kind kind, std::size_t d_qk, std::string name)
      : kind_(kind), d_qk_(d_qk), custom_name_(std::move(name)) {}

  Kind kind_;
  std::size_t d_qk_;
  std::string custom_name_;
};

// Registers a named scalar function for Kernel::custom. Registration is a
// setup-time operation; evaluation is read-only and thread-safe afterwards.
void register_custom_kernel(const std::string& name, std::function<double(double)> fn);

// Which key-value tokens each query row may see.
class MaskPolicy {
 public:
  enum class Kind { None, Causal, Explicit };

  static MaskPolicy none();
  // Query row i sees key positions j <= offset + i. offset is the number of
  // key rows that precede query row 0 (nonzero for streaming decode).
  static MaskPolicy causal(std::size_t offset = 0);
  static MaskPolicy explicit_sets(std::vector<std::vector<std::size_t>> allowed);

  Kind kind() const { return kind_; }
  std::size_t causal_offset() const { return offset_; }
  const std::vector<std::vector<std::size_t>>& allowed_sets() const { return allowed_; }

  // Validates against the score shape; throws MaskAlignmentError when a
  // causal query row would sit past the last key.
  void validate(std::size_t n_q, std::size_t n_kv) const;

  bool allows(std::size_t query, std::size_t key) const;

 private:
  explicit MaskPolicy(Kind kind) : kind_(kind) {}

  Kind kind_;
  std::size_t offset_ = 0;
  std::vector<std::vector<std::size_t>> allowed_;
};

// Per-head projection weights; wq and wk share the query-key width d_qk.
struct HeadWeights {
  Matrix wq;  // d_in x d_qk
  Matrix wk;  // d_in x d_qk
  Matrix wv;  // d_in x d_v
};

// How masked cells are realized: Additive adds -inf to the logits before the
// exponential kernel; Multiplicative zeros the scores after any kernel. Auto
// picks Additive for ScaledExp and Multiplicative otherwise. Both paths give
// identical scores for ScaledExp.
enum class MaskFormulation { Auto, Additive, Multiplicative };

double kernel_eval(const Kernel& kernel, std::span<const double> v,
                   std::span<const double> w);

// Score matrix A[i,j] = kernel(q_i, k_j) where the mask allows, exactly 0
// elsewhere.
Matrix attention_scores(const Matrix& q, const Matrix& k, const Kernel& kernel,
                        const MaskPolicy& mask,
                        MaskFormulation form = MaskFormulation::Auto);

// Row sums of the score matrix; a non-positive sum is a degenerate query.
std::vector<double> normalizer(const Matrix& a);

// Full single-head attention: Y = Z^-1 A V with Q = xq wq, K = xk wk, V = xv wv.
Matrix attend(const Matrix& xq, const Matrix& xk, const Matrix& xv,
              const HeadWeights& w, const Kernel& kernel, const MaskPolicy& mask);

// Same result as attend with the ScaledExp kernel, computed through
// row_softmax of QK^T/sqrt(d_qk) instead of explicit normalization.
Matrix softmax_attend(const Matrix& xq, const Matrix& xk, const Matrix& xv,
                      const HeadWeights& w, const MaskPolicy& mask = MaskPolicy::none());

}  // namespace attnlab
