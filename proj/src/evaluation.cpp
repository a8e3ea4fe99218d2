#include "deontic/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace deontic::eval {

namespace {

double ratio(long long num, long long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string cell(std::optional<double> v) {
  if (!v) return "   -";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

}  // namespace

ConfusionCounts ConfusionCounts::from_labels(const std::vector<int>& gold,
                                             const std::vector<int>& predicted, int classes) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("gold and predicted lists differ in length");
  ConfusionCounts out;
  out.per_class.resize(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i], p = predicted[i];
    if (g < 0 || g >= classes || p < 0 || p >= classes)
      throw std::out_of_range("class index outside [0, " + std::to_string(classes) + ")");
    if (g == p) {
      ++out.per_class[static_cast<std::size_t>(g)].tp;
    } else {
      ++out.per_class[static_cast<std::size_t>(p)].fp;
      ++out.per_class[static_cast<std::size_t>(g)].fn;
    }
  }
  return out;
}

ClassCounts ConfusionCounts::pooled(bool include_first_class) const {
  ClassCounts total;
  for (std::size_t c = include_first_class ? 0 : 1; c < per_class.size(); ++c) {
    total.tp += per_class[c].tp;
    total.fp += per_class[c].fp;
    total.fn += per_class[c].fn;
  }
  return total;
}

Prf prf(const ClassCounts& c) {
  Prf out;
  out.precision = ratio(c.tp, c.tp + c.fp);
  out.recall = ratio(c.tp, c.tp + c.fn);
  const double s = out.precision + out.recall;
  out.f1 = s == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / s;
  return out;
}

std::vector<Prf> prf(const ConfusionCounts& counts) {
  std::vector<Prf> out;
  for (const auto& c : counts.per_class) out.push_back(prf(c));
  return out;
}

std::optional<double> pr_auc(std::span<const double> scores, std::span<const int> gold) {
  if (scores.size() != gold.size()) throw std::invalid_argument("scores and gold differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  long long positives = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (gold[order[rank]] == 0) continue;
    ++positives;
    sum += static_cast<double>(positives) / static_cast<double>(rank + 1);
  }
  if (positives == 0) return std::nullopt;
  return sum / static_cast<double>(positives);
}

int argmax(const tensor::RowVector& row) {
  int best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = static_cast<int>(i);
  return best;
}

std::vector<int> argmax_rows(const tensor::Matrix& probs) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) out.push_back(argmax(probs.row(r)));
  return out;
}

MetricsReport micro_macro(const ConfusionCounts& counts,
                          const std::vector<std::optional<double>>& aucs,
                          std::optional<double> micro_auc, const std::vector<std::string>& names,
                          const EvalOptions& options) {
  const std::size_t k = counts.per_class.size();
  if (aucs.size() != k || names.size() != k)
    throw std::invalid_argument("micro_macro: per-class inputs differ in length");
  MetricsReport report;
  report.micro_includes_none = options.micro_includes_none;
  double sum_p = 0, sum_r = 0, sum_f = 0, sum_auc = 0;
  int auc_n = 0;
  long long support = 0;
  for (std::size_t c = 0; c < k; ++c) {
    ClassMetrics m;
    m.name = names[c];
    m.prf = prf(counts.per_class[c]);
    m.auc = aucs[c];
    m.support = counts.per_class[c].tp + counts.per_class[c].fn;
    sum_p += m.prf.precision;
    sum_r += m.prf.recall;
    sum_f += m.prf.f1;
    if (m.auc) {
      sum_auc += *m.auc;
      ++auc_n;
    }
    support += m.support;
    report.classes.push_back(std::move(m));
  }
  report.macro.name = "Macro-average";
  if (k > 0) {
    report.macro.prf = Prf{sum_p / static_cast<double>(k), sum_r / static_cast<double>(k),
                           sum_f / static_cast<double>(k)};
  }
  if (auc_n > 0) report.macro.auc = sum_auc / auc_n;
  report.macro.support = support;
  report.micro.name = "Micro-average";
  report.micro.prf = prf(counts.pooled(options.micro_includes_none));
  report.micro.auc = micro_auc;
  report.micro.support = support;
  return report;
}

MetricsReport evaluate(const tensor::Matrix& probs, const std::vector<int>& gold,
                       const std::vector<std::string>& names, const EvalOptions& options) {
  const auto k = static_cast<int>(probs.cols());
  if (static_cast<Eigen::Index>(gold.size()) != probs.rows())
    throw std::invalid_argument("evaluate: gold count differs from prediction rows");
  const std::vector<int> predicted = argmax_rows(probs);
  const ConfusionCounts counts = ConfusionCounts::from_labels(gold, predicted, k);
  std::vector<std::optional<double>> aucs;
  std::vector<double> scores(gold.size());
  std::vector<int> binary(gold.size());
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < gold.size(); ++i) {
      scores[i] = probs(static_cast<Eigen::Index>(i), c);
      binary[i] = gold[i] == c ? 1 : 0;
    }
    aucs.push_back(pr_auc(scores, binary));
  }
  std::vector<double> flat_scores;
  std::vector<int> flat_gold;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (int c = options.micro_includes_none ? 0 : 1; c < k; ++c) {
      flat_scores.push_back(probs(static_cast<Eigen::Index>(i), c));
      flat_gold.push_back(gold[i] == c ? 1 : 0);
    }
  }
  return micro_macro(counts, aucs, pr_auc(flat_scores, flat_gold), names, options);
}

std::string format_table(const MetricsReport& report, const std::string& title) {
  std::ostringstream os;
  std::size_t width = 13;
  for (const auto& c : report.classes) width = std::max(width, c.name.size());
  auto row = [&](const ClassMetrics& m) {
    os << m.name << std::string(width - m.name.size() + 2, ' ') << cell(m.prf.precision) << "  "
       << cell(m.prf.recall) << "  " << cell(m.prf.f1) << "  " << cell(m.auc) << "\n";
  };
  os << title << "\n";
  os << "Gold Class" << std::string(width - 10 + 2, ' ') << "   P     R    F1   AUC\n";
  for (const auto& c : report.classes) row(c);
  row(report.macro);
  row(report.micro);
  return os.str();
}

std::string report_json(const MetricsReport& report) {
  using nlohmann::json;
  auto entry = [](const ClassMetrics& m) {
    json j = {{"name", m.name},
              {"precision", m.prf.precision},
              {"recall", m.prf.recall},
              {"f1", m.prf.f1},
              {"support", m.support}};
    j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
    return j;
  };
  json classes = json::array();
  for (const auto& c : report.classes) classes.push_back(entry(c));
  json doc = {{"classes", std::move(classes)},
              {"macro", entry(report.macro)},
              {"micro", entry(report.micro)},
              {"micro_includes_none", report.micro_includes_none}};
  return doc.dump(2);
}

}  // namespace deontic::eval
