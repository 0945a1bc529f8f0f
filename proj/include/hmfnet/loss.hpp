#pragma once

// Chemically-informed loss: class-weighted BCE, class-energy hinge with
// co-occurrence-adjusted targets, sample-level energy constraint, and a
// label-correlation Frobenius term, combined by a weighted sum.
//
// The class-energy hinge ships in two modes. `Literal` follows the stated
// orientation, under which the positive-class hinge is identically zero for
// any nonnegative co-occurrence coefficient (the class energy never exceeds
// the in-target); it is kept for conformance checks. `Corrected` measures
// subset energies (mean prediction over positives/negatives per class) with
// the hinges flipped so the term is trainable; it is the default.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmfnet/tensor.hpp"

namespace hmfnet::cil {

struct UnknownMode : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kWeightFloor = 0.1;
inline constexpr double kWeightCeil = 10.0;

struct ClassWeights {
  Tensor w;                 // [M], each in [0.1, 10]
  std::vector<long> positive;
  std::vector<long> negative;
};

// w_j = clamp(W_neg,j / W_pos,j, 0.1, 10); classes with no positives get
// the ceiling weight.
inline ClassWeights class_weights(const Tensor &labels) {
  std::size_t n = labels.rows(), m = labels.cols();
  ClassWeights out;
  out.w = Tensor({m});
  out.positive.assign(m, 0);
  out.negative.assign(m, 0);
  for (std::size_t j = 0; j < m; ++j) {
    long pos = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (labels.at(i, j) != 0.0)
        ++pos;
    long neg = static_cast<long>(n) - pos;
    out.positive[j] = pos;
    out.negative[j] = neg;
    double w = pos == 0 ? kWeightCeil
                        : static_cast<double>(neg) / static_cast<double>(pos);
    out.w.data[j] = std::clamp(w, kWeightFloor, kWeightCeil);
  }
  return out;
}

struct EnergyTargets {
  Tensor m_in;   // [M], >= 1 for c >= 0
  Tensor m_out;  // [M], in [0, c]
  double c = 0.2;
};

// m_in = 1 + c*diag(Y^T Y / N); m_out = c*diag((1-Y)^T (1-Y) / N).
inline EnergyTargets energy_targets(const Tensor &labels, double c) {
  std::size_t n = labels.rows(), m = labels.cols();
  EnergyTargets t;
  t.c = c;
  t.m_in = Tensor({m});
  t.m_out = Tensor({m});
  for (std::size_t j = 0; j < m; ++j) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double y = labels.at(i, j);
      pos += y * y;
      neg += (1.0 - y) * (1.0 - y);
    }
    t.m_in.data[j] = 1.0 + c * pos / static_cast<double>(n);
    t.m_out.data[j] = c * neg / static_cast<double>(n);
  }
  return t;
}

// Raw co-occurrence counts C = Y^T Y; the diagonal holds per-label counts.
inline Tensor co_occurrence_matrix(const Tensor &labels) {
  std::size_t n = labels.rows(), m = labels.cols();
  Tensor c({m, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (labels.at(i, j) == 0.0)
        continue;
      for (std::size_t k = 0; k < m; ++k)
        if (labels.at(i, k) != 0.0)
          c.at(j, k) += 1.0;
    }
  return c;
}

enum class ClassMode { Literal, Corrected };

inline ClassMode class_mode_from_string(const std::string &s) {
  if (s == "literal")
    return ClassMode::Literal;
  if (s == "corrected")
    return ClassMode::Corrected;
  throw UnknownMode("unknown class-energy mode: " + s);
}

namespace detail {

inline Var square(Var x) { return ops::mul(x, x); }

inline Tensor negate(const Tensor &t) {
  Tensor out = t;
  for (double &v : out.data)
    v = -v;
  return out;
}

inline Tensor broadcast_rows(const Tensor &row, std::size_t n) {
  std::size_t m = row.numel();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out.at(i, j) = row.data[j];
  return out;
}

} // namespace detail

// L_basis = -(1/N) sum_ij w_j [Y log p + (1-Y) log(1-p)], probabilities
// clamped to [1e-7, 1-1e-7] before the logs.
inline Var weighted_bce(Var probs, const Tensor &labels,
                        const Tensor &class_w) {
  const Tensor &p = probs.val();
  require_same_shape(p, labels, "weighted_bce");
  std::size_t n = p.rows(), m = p.cols();
  if (class_w.numel() != m)
    throw ShapeMismatch("weighted_bce: weight width mismatch");

  Tensor w_pos({n, m}), w_neg({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double w = class_w.data[j];
      w_pos.at(i, j) = w * labels.at(i, j);
      w_neg.at(i, j) = w * (1.0 - labels.at(i, j));
    }

  Var clamped = ops::clamp_op(probs, kProbClamp, 1.0 - kProbClamp);
  Var log_p = ops::log_op(clamped);
  Var log_q = ops::log_op(ops::affine(clamped, -1.0, 1.0));
  Var terms = ops::add(ops::cmul(log_p, w_pos), ops::cmul(log_q, w_neg));
  return ops::affine(ops::sum_all(terms), -1.0 / static_cast<double>(n), 0.0);
}

// E_j = column mean of the prediction matrix.
inline Var class_energy(Var probs) {
  std::size_t n = probs.val().rows();
  if (n == 0)
    throw EmptySegment("class_energy: empty batch");
  return ops::affine(ops::col_sums(probs), 1.0 / static_cast<double>(n), 0.0);
}

inline Var class_energy_loss(Var probs, const Tensor &labels,
                             const EnergyTargets &targets, ClassMode mode) {
  const Tensor &p = probs.val();
  require_same_shape(p, labels, "class_energy_loss");
  std::size_t n = p.rows(), m = p.cols();

  Tensor pos_count({m}), neg_count({m});
  for (std::size_t j = 0; j < m; ++j) {
    double pos = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      pos += labels.at(i, j);
    pos_count.data[j] = pos;
    neg_count.data[j] = static_cast<double>(n) - pos;
  }

  if (mode == ClassMode::Literal) {
    // sum_j [ n_pos(j) max(0, E_j - m_in_j)^2 + n_neg(j) max(0, m_out_j - E_j)^2 ]
    Var e = class_energy(probs);
    Var over = ops::relu(ops::cadd(e, detail::negate(targets.m_in)));
    Var under = ops::relu(ops::cadd(ops::affine(e, -1.0, 0.0), targets.m_out));
    Var pos_term = ops::cmul(detail::square(over), pos_count);
    Var neg_term = ops::cmul(detail::square(under), neg_count);
    return ops::add(ops::sum_all(pos_term), ops::sum_all(neg_term));
  }

  // Corrected: per-class subset energies with flipped hinges; empty subsets
  // contribute exactly zero.
  Tensor inv_pos({m}), inv_neg({m}), has_pos({m}), has_neg({m});
  for (std::size_t j = 0; j < m; ++j) {
    inv_pos.data[j] = pos_count.data[j] > 0 ? 1.0 / pos_count.data[j] : 0.0;
    inv_neg.data[j] = neg_count.data[j] > 0 ? 1.0 / neg_count.data[j] : 0.0;
    has_pos.data[j] = pos_count.data[j] > 0 ? 1.0 : 0.0;
    has_neg.data[j] = neg_count.data[j] > 0 ? 1.0 : 0.0;
  }
  Tensor pos_mask = labels;
  Tensor neg_mask = labels;
  for (double &v : neg_mask.data)
    v = 1.0 - v;

  Var e_pos = ops::cmul(ops::col_sums(ops::cmul(probs, pos_mask)), inv_pos);
  Var e_neg = ops::cmul(ops::col_sums(ops::cmul(probs, neg_mask)), inv_neg);
  // max(0, m_in - E+)^2 on classes with positives
  Var under_in =
      ops::relu(ops::cadd(ops::affine(e_pos, -1.0, 0.0), targets.m_in));
  // max(0, E- - m_out)^2 on classes with negatives
  Var over_out = ops::relu(ops::cadd(e_neg, detail::negate(targets.m_out)));
  Var pos_term = ops::cmul(detail::square(under_in), has_pos);
  Var neg_term = ops::cmul(detail::square(over_out), has_neg);
  return ops::add(ops::sum_all(pos_term), ops::sum_all(neg_term));
}

// E_expected(i) = e1 + e2 * |labels of sample i|.
inline Tensor expected_sample_energy(const Tensor &labels, double e1,
                                     double e2) {
  std::size_t n = labels.rows(), m = labels.cols();
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    double cnt = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      cnt += labels.at(i, j);
    out.data[i] = e1 + e2 * cnt;
  }
  return out;
}

// L_sample = (1/N) sum_i max(0, E_expected(i) - sum_j p_ij)^2.
inline Var sample_loss(Var probs, const Tensor &labels, double e1,
                       double e2) {
  const Tensor &p = probs.val();
  require_same_shape(p, labels, "sample_loss");
  std::size_t n = p.rows();
  Tensor expected = expected_sample_energy(labels, e1, e2);
  Var deficit = ops::relu(
      ops::cadd(ops::affine(ops::row_sums(probs), -1.0, 0.0), expected));
  return ops::affine(ops::sum_all(detail::square(deficit)),
                     1.0 / static_cast<double>(n), 0.0);
}

// L_col = || P^T P / N - Y^T Y / N ||_F^2.
inline Var label_correlation_loss(Var probs, const Tensor &labels) {
  const Tensor &p = probs.val();
  require_same_shape(p, labels, "label_correlation_loss");
  std::size_t n = p.rows(), m = p.cols();
  Tensor target({m, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < m; ++k)
        target.at(j, k) += labels.at(i, j) * labels.at(i, k);
  for (double &v : target.data)
    v /= static_cast<double>(n);

  Var pred_corr = ops::affine(ops::matmul(ops::transpose(probs), probs),
                              1.0 / static_cast<double>(n), 0.0);
  Var diff = ops::cadd(pred_corr, detail::negate(target));
  return ops::sum_all(detail::square(diff));
}

struct CilParams {
  double c = 0.2;
  double e1 = 0.5;
  double e2 = 0.5;
  std::array<double, 4> lambda{1.0, 0.2, 0.1, 0.2};
  ClassMode mode = ClassMode::Corrected;
};

struct LossTerms {
  Var basis;
  Var cls;
  Var sample;
  Var col;
  Var total;
};

struct LossBreakdown {
  double basis = 0;
  double cls = 0;
  double sample = 0;
  double col = 0;
  double total = 0;
};

inline LossTerms total_loss(Var probs, const Tensor &labels,
                            const ClassWeights &weights,
                            const EnergyTargets &targets,
                            const CilParams &params) {
  LossTerms t;
  t.basis = weighted_bce(probs, labels, weights.w);
  t.cls = class_energy_loss(probs, labels, targets, params.mode);
  t.sample = sample_loss(probs, labels, params.e1, params.e2);
  t.col = label_correlation_loss(probs, labels);
  t.total = ops::add(
      ops::add(ops::affine(t.basis, params.lambda[0], 0.0),
               ops::affine(t.cls, params.lambda[1], 0.0)),
      ops::add(ops::affine(t.sample, params.lambda[2], 0.0),
               ops::affine(t.col, params.lambda[3], 0.0)));
  return t;
}

inline LossBreakdown breakdown(const LossTerms &terms) {
  LossBreakdown b;
  b.basis = terms.basis.val().item();
  b.cls = terms.cls.val().item();
  b.sample = terms.sample.val().item();
  b.col = terms.col.val().item();
  b.total = terms.total.val().item();
  return b;
}

// Plain unweighted BCE, the loss used when the chemically-informed terms
// are switched off entirely.
inline Var plain_bce(Var probs, const Tensor &labels) {
  Tensor unit({labels.cols()}, 1.0);
  return weighted_bce(probs, labels, unit);
}

} // namespace hmfnet::cil
