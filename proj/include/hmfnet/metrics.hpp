#pragma once

// Multi-label evaluation: macro-averaged F1 at a decision threshold and
// rank-based AUROC with ties credited one half.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmfnet/tensor.hpp"

namespace hmfnet {

struct NoEvaluableClasses : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PerClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auroc = std::numeric_limits<double>::quiet_NaN();
  long support = 0;
  bool auroc_evaluable = false;
};

struct EvalReport {
  double macro_f1 = 0.0;
  double auroc = 0.0;
  std::vector<PerClassMetrics> per_class;
};

// Mann-Whitney AUROC over one score column: the fraction of
// (positive, negative) pairs ranked correctly, ties counted 0.5. Computed
// from average ranks, which matches the all-pairs count exactly.
inline double auroc_binary(const std::vector<double> &scores,
                           const std::vector<int> &labels) {
  std::size_t n = scores.size();
  long n_pos = 0;
  for (int y : labels)
    if (y)
      ++n_pos;
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw NoEvaluableClasses("auroc: need both positives and negatives");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]])
      ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]])
        rank_sum_pos += avg_rank;
    i = j;
  }
  double u = rank_sum_pos -
             static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Per-class F1 at `threshold`, macro-averaged over classes with at least one
// ground-truth positive; 0/0 ratios resolve to zero.
inline double macro_f1(const Tensor &probs, const Tensor &labels,
                       double threshold = 0.5) {
  require_same_shape(probs, labels, "macro_f1");
  std::size_t n = probs.rows(), m = probs.cols();
  double sum = 0.0;
  int evaluable = 0;
  for (std::size_t j = 0; j < m; ++j) {
    long tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool pred = probs.at(i, j) >= threshold;
      bool truth = labels.at(i, j) != 0.0;
      if (truth)
        ++support;
      if (pred && truth)
        ++tp;
      else if (pred && !truth)
        ++fp;
      else if (!pred && truth)
        ++fn;
    }
    if (support == 0)
      continue;
    double precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    double recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    double f1 = (precision + recall) == 0.0
                    ? 0.0
                    : 2.0 * precision * recall / (precision + recall);
    sum += f1;
    ++evaluable;
  }
  if (evaluable == 0)
    throw NoEvaluableClasses("macro_f1: no class has a positive sample");
  return sum / evaluable;
}

// Macro AUROC, skipping classes without both positives and negatives.
inline double auroc_macro(const Tensor &probs, const Tensor &labels) {
  require_same_shape(probs, labels, "auroc_macro");
  std::size_t n = probs.rows(), m = probs.cols();
  double sum = 0.0;
  int evaluable = 0;
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> scores(n);
    std::vector<int> truth(n);
    long pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs.at(i, j);
      truth[i] = labels.at(i, j) != 0.0 ? 1 : 0;
      pos += truth[i];
    }
    if (pos == 0 || pos == static_cast<long>(n))
      continue;
    sum += auroc_binary(scores, truth);
    ++evaluable;
  }
  if (evaluable == 0)
    throw NoEvaluableClasses("auroc: no class has both positives and negatives");
  return sum / evaluable;
}

inline EvalReport evaluate(const Tensor &probs, const Tensor &labels,
                           const std::vector<std::string> &label_names,
                           double threshold = 0.5) {
  require_same_shape(probs, labels, "evaluate");
  std::size_t n = probs.rows(), m = probs.cols();
  EvalReport report;
  double f1_sum = 0.0, auc_sum = 0.0;
  int f1_classes = 0, auc_classes = 0;
  for (std::size_t j = 0; j < m; ++j) {
    PerClassMetrics pc;
    pc.label = j < label_names.size() ? label_names[j]
                                      : "label_" + std::to_string(j);
    long tp = 0, fp = 0, fn = 0;
    std::vector<double> scores(n);
    std::vector<int> truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs.at(i, j);
      truth[i] = labels.at(i, j) != 0.0 ? 1 : 0;
      bool pred = probs.at(i, j) >= threshold;
      if (truth[i])
        ++pc.support;
      if (pred && truth[i])
        ++tp;
      else if (pred && !truth[i])
        ++fp;
      else if (!pred && truth[i])
        ++fn;
    }
    pc.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    pc.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    pc.f1 = (pc.precision + pc.recall) == 0.0
                ? 0.0
                : 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall);
    if (pc.support > 0) {
      f1_sum += pc.f1;
      ++f1_classes;
    }
    if (pc.support > 0 && pc.support < static_cast<long>(n)) {
      pc.auroc = auroc_binary(scores, truth);
      pc.auroc_evaluable = true;
      auc_sum += pc.auroc;
      ++auc_classes;
    }
    report.per_class.push_back(pc);
  }
  if (f1_classes == 0)
    throw NoEvaluableClasses("evaluate: no class has a positive sample");
  report.macro_f1 = f1_sum / f1_classes;
  report.auroc = auc_classes > 0 ? auc_sum / auc_classes
                                 : std::numeric_limits<double>::quiet_NaN();
  return report;
}

} // namespace hmfnet
