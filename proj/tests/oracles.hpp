#pragma once

// Slow, obviously-correct reference versions of the metric and distance
// code.

#include <algorithm>
#include <string>
#include <vector>

#include "deontic/evaluation.hpp"

namespace deontic::testing {

/// tp / fp / fn for one class by scanning every example.
inline eval::ClassCounts naive_counts(const std::vector<int>& gold, const std::vector<int>& pred, int cls) {
  eval::ClassCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (pred[i] == cls && gold[i] == cls) ++c.tp;
    if (pred[i] == cls && gold[i] != cls) ++c.fp;
    if (pred[i] != cls && gold[i] == cls) ++c.fn;
  }
  return c;
}

/// F1 written as 2tp / (2tp + fp + fn).
inline eval::Prf naive_prf(const eval::ClassCounts& c) {
  eval::Prf p;
  if (c.tp + c.fp > 0) p.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) p.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tp > 0) p.f1 = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  return p;
}

/// Average precision by enumerating thresholds: for each positive, the
/// precision over everything ranked at or above it (earlier index wins a tie).
/// Returns -1 when there are no positives.
inline double average_precision_oracle(const std::vector<double>& scores, const std::vector<int>& gold) {
  double total = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (gold[i] != 1) continue;
    ++positives;
    int above = 0, hits = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const bool ranked = scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
      if (!ranked) continue;
      ++above;
      hits += gold[j] == 1;
    }
    total += static_cast<double>(hits) / above;
  }
  return positives == 0 ? -1.0 : total / positives;
}

/// Full-table edit distance.
inline std::size_t levenshtein_dp(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

}  // namespace deontic::testing
