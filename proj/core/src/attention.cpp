#include "attnlab/attention.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "attnlab/errors.hpp"

namespace attnlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::map<std::string, std::function<double(double)>>& custom_registry() {
  static std::map<std::string, std::function<double(double)>> registry;
  return registry;
}

double dot(std::span<const double> v, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
  return s;
}

}  // namespace

Kernel Kernel::scaled_exp(std::size_t d_qk) {
  if (d_qk < 1) {
    throw ArgumentError("Kernel::scaled_exp: d_qk must be >= 1");
  }
  return Kernel(Kind::ScaledExp, d_qk, {});
}

Kernel Kernel::linear() { return Kernel(Kind::Linear, 0, {}); }

Kernel Kernel::custom(std::string name) {
  return Kernel(Kind::Custom, 0, std::move(name));
}

double Kernel::apply(double x) const {
  switch (kind_) {
    case Kind::ScaledExp:
      return std::exp(x / std::sqrt(static_cast<double>(d_qk_)));
    case Kind::Linear:
      return x;
    case Kind::Custom: {
      auto it = custom_registry().find(custom_name_);
      if (it == custom_registry().end()) {
        throw ArgumentError("unregistered custom kernel \"" + custom_name_ + "\"");
      }
      return it->second(x);
    }
  }
  return x;  // unreachable
}

void register_custom_kernel(const std::string& name, std::function<double(double)> fn) {
  custom_registry()[name] = std::move(fn);
}

MaskPolicy MaskPolicy::none() { return MaskPolicy(Kind::None); }

MaskPolicy MaskPolicy::causal(std::size_t offset) {
  MaskPolicy m(Kind::Causal);
  m.offset_ = offset;
  return m;
}

MaskPolicy MaskPolicy::explicit_sets(std::vector<std::vector<std::size_t>> allowed) {
  MaskPolicy m(Kind::Explicit);
  m.allowed_ = std::move(allowed);
  return m;
}

void MaskPolicy::validate(std::size_t n_q, std::size_t n_kv) const {
  switch (kind_) {
    case Kind::None:
      return;
    case Kind::Causal:
      if (n_q > 0 && offset_ + n_q > n_kv) {
        throw MaskAlignmentError(
            "causal mask: query row " + std::to_string(n_q - 1) + " aligned to key " +
            std::to_string(offset_ + n_q - 1) + " but only " + std::to_string(n_kv) +
            " keys exist");
      }
      return;
    case Kind::Explicit:
      if (allowed_.size() != n_q) {
        throw ArgumentError("explicit mask has " + std::to_string(allowed_.size()) +
                            " row sets for " + std::to_string(n_q) + " query rows");
      }
      for (const auto& set : allowed_) {
        for (std::size_t j : set) {
          if (j >= n_kv) {
            throw ArgumentError("explicit mask references key " + std::to_string(j) +
                                " with only " + std::to_string(n_kv) + " keys");
          }
        }
      }
      return;
  }
}

bool MaskPolicy::allows(std::size_t query, std::size_t key) const {
  switch (kind_) {
    case Kind::None:
      return true;
    case Kind::Causal:
      return key <= offset_ + query;
    case Kind::Explicit: {
      const auto& set = allowed_[query];
      for (std::size_t j : set) {
        if (j == key) return true;
      }
      return false;
    }
  }
  return true;
}

double kernel_eval(const Kernel& kernel, std::span<const double> v,
                   std::span<const double> w) {
  if (v.size() != w.size()) {
    throw ShapeError("kernel_eval: vector lengths " + std::to_string(v.size()) +
                     " vs " + std::to_string(w.size()));
  }
  if (kernel.kind() == Kernel::Kind::ScaledExp && v.size() != kernel.d_qk()) {
    throw ShapeError("kernel_eval: ScaledExp expects length " +
                     std::to_string(kernel.d_qk()) + ", got " +
                     std::to_string(v.size()));
  }
  return kernel.apply(dot(v, w));
}

Matrix attention_scores(const Matrix& q, const Matrix& k, const Kernel& kernel,
                        const MaskPolicy& mask, MaskFormulation form) {
  if (q.cols() != k.cols()) {
    throw ShapeError("attention_scores: query " + q.shape_string() + " vs key " +
                     k.shape_string());
  }
  if (kernel.kind() == Kernel::Kind::ScaledExp && q.cols() != kernel.d_qk()) {
    throw ShapeError("attention_scores: embeddings of width " +
                     std::to_string(q.cols()) + " with ScaledExp d_qk " +
                     std::to_string(kernel.d_qk()));
  }
  mask.validate(q.rows(), k.rows());

  if (form == MaskFormulation::Auto) {
    form = kernel.kind() == Kernel::Kind::ScaledExp ? MaskFormulation::Additive
                                                    : MaskFormulation::Multiplicative;
  }
  if (form == MaskFormulation::Additive && kernel.kind() != Kernel::Kind::ScaledExp) {
    throw ArgumentError(
        "additive (-inf) masking is only defined for the exponential kernel; "
        "use the multiplicative formulation");
  }

  const Matrix g = matmul(q, transpose(k));
  Matrix a(g.rows(), g.cols());
  if (form == MaskFormulation::Additive) {
    // Kernel applied to QK^T + M with -inf in the masked cells: allowed cells
    // see the exact same arithmetic as the multiplicative path, masked cells
    // come out as exp(-inf) == 0.
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        a(i, j) = kernel.apply(mask.allows(i, j) ? g(i, j) : kNegInf);
      }
    }
  } else {
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < g.cols(); ++j) {
        a(i, j) = mask.allows(i, j) ? kernel.apply(g(i, j)) : 0.0;
      }
    }
  }
  return a;
}

std::vector<double> normalizer(const Matrix& a) {
  std::vector<double> z(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) sum += a(i, j);
    if (!(sum > 0.0)) {
      throw DegenerateRowError("normalizer: query row " + std::to_string(i) +
                               " has non-positive score sum " + std::to_string(sum));
    }
    z[i] = sum;
  }
  return z;
}

namespace {

// (Z^-1 A) V without materializing the diagonal.
Matrix normalize_and_combine(const Matrix& a, const Matrix& v) {
  const std::vector<double> z = normalizer(a);
  Matrix out(a.rows(), v.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double w = a(i, j) / z[i];
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < v.cols(); ++c) {
        out(i, c) += w * v(j, c);
      }
    }
  }
  return out;
}

void check_attend_inputs(const Matrix& xq, const Matrix& xk, const Matrix& xv,
                         const HeadWeights& w) {
  if (xq.cols() != xk.cols() || xq.cols() != xv.cols()) {
    throw ShapeError("attend: query/key/value inputs must share d_in, got " +
                     xq.shape_string() + ", " + xk.shape_string() + ", " +
                     xv.shape_string());
  }
  if (xk.rows() != xv.rows()) {
    throw ShapeError("attend: key rows " + xk.shape_string() + " vs value rows " +
                     xv.shape_string());
  }
  if (w.wq.cols() != w.wk.cols()) {
    throw ShapeError("attend: wq " + w.wq.shape_string() + " and wk " +
                     w.wk.shape_string() + " must share d_qk");
  }
}

}  // namespace

Matrix attend(const Matrix& xq, const Matrix& xk, const Matrix& xv,
              const HeadWeights& w, const Kernel& kernel, const MaskPolicy& mask) {
  check_attend_inputs(xq, xk, xv, w);
  const Matrix q = matmul(xq, w.wq);
  const Matrix k = matmul(xk, w.wk);
  const Matrix v = matmul(xv, w.wv);
  const Matrix a = attention_scores(q, k, kernel, mask);
  return normalize_and_combine(a, v);
}

Matrix softmax_attend(const Matrix& xq, const Matrix& xk, const Matrix& xv,
                      const HeadWeights& w, const MaskPolicy& mask) {
  check_attend_inputs(xq, xk, xv, w);
  const Matrix q = matmul(xq, w.wq);
  const Matrix k = matmul(xk, w.wk);
  const Matrix v = matmul(xv, w.wv);
  mask.validate(q.rows(), k.rows());

  Matrix logits = matmul(q, transpose(k));
  const double denom = std::sqrt(static_cast<double>(w.wq.cols()));
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      logits(i, j) = mask.allows(i, j) ? logits(i, j) / denom : kNegInf;
    }
  }
  return matmul(row_softmax(logits), v);
}

}  // namespace attnlab
