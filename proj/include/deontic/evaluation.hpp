#pragma once

// Per-class precision / recall / F1 / PR-AUC with micro and macro averages.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deontic/tensor.hpp"

namespace deontic::eval {

struct ClassCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  bool operator==(const ClassCounts&) const = default;
};

struct ConfusionCounts {
  std::vector<ClassCounts> per_class;

  /// Single-label counts from gold and predicted class indices.
  static ConfusionCounts from_labels(const std::vector<int>& gold, const std::vector<int>& predicted,
                                     int classes);
  ClassCounts pooled(bool include_first_class = true) const;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 0/0 yields 0 for every ratio.
Prf prf(const ClassCounts& c);
std::vector<Prf> prf(const ConfusionCounts& counts);

/// Average precision: mean over positives, taken in descending score
/// order, of the precision at each positive's rank. Equal scores keep
/// their input order. Empty when there are no positives.
std::optional<double> pr_auc(std::span<const double> scores, std::span<const int> gold);

/// Index of the largest entry; ties go to the lowest index.
int argmax(const tensor::RowVector& row);
std::vector<int> argmax_rows(const tensor::Matrix& probs);

struct ClassMetrics {
  std::string name;
  Prf prf;
  std::optional<double> auc;
  long long support = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;
  ClassMetrics macro;
  ClassMetrics micro;
  bool micro_includes_none = true;
};

struct EvalOptions {
  /// Whether class 0 (None) takes part in the micro average.
  bool micro_includes_none = true;
};

/// Assembles the report. Macro averages are unweighted means over every
/// class (AUC over classes where it is defined); micro P/R/F1 come from
/// pooled counts and micro AUC from the flattened one-vs-rest scores.
MetricsReport micro_macro(const ConfusionCounts& counts, const std::vector<std::optional<double>>& aucs,
                          std::optional<double> micro_auc, const std::vector<std::string>& names,
                          const EvalOptions& options = {});

/// probs is N x k; gold holds class indices.
MetricsReport evaluate(const tensor::Matrix& probs, const std::vector<int>& gold,
                       const std::vector<std::string>& names, const EvalOptions& options = {});

/// Aligned text table: one row per class plus macro and micro rows, columns P R F1 AUC.
std::string format_table(const MetricsReport& report, const std::string& title);
std::string report_json(const MetricsReport& report);

}  // namespace deontic::eval
