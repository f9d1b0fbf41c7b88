#include "crm/metrics.hpp"

#include <nlohmann/json.hpp>

#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace crm {

std::vector<double> fuse_predictions(const std::vector<double>& a,
                                     const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("fuse_predictions: length mismatch");
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = (a[i] + b[i]) / 2.0;
  }
  return out;
}

ClassMerge ClassMerge::identity(int n_classes) {
  ClassMerge merge;
  merge.mapping.resize(static_cast<std::size_t>(n_classes));
  for (int i = 0; i < n_classes; ++i) {
    merge.mapping[static_cast<std::size_t>(i)] = i;
  }
  merge.merged_count = n_classes;
  return merge;
}

ClassMerge ClassMerge::parse(const std::string& spec, int n_classes) {
  // Rules look like "4,5->4"; multiple rules separated by ';'. 1-based.
  std::vector<int> target(static_cast<std::size_t>(n_classes));
  for (int i = 0; i < n_classes; ++i) {
    target[static_cast<std::size_t>(i)] = i;
  }

  auto parse_class = [&](const std::string& token) {
    std::size_t pos = 0;
    int value = 0;
    try {
      value = std::stoi(token, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("merge spec: '" + token + "' is not a class");
    }
    if (pos != token.size() || value < 1 || value > n_classes) {
      throw std::invalid_argument("merge spec: class " + token +
                                  " outside 1.." + std::to_string(n_classes));
    }
    return value - 1;
  };

  std::istringstream rules(spec);
  std::string rule;
  while (std::getline(rules, rule, ';')) {
    const auto arrow = rule.find("->");
    if (arrow == std::string::npos) {
      throw std::invalid_argument("merge spec: rule '" + rule +
                                  "' is missing '->'");
    }
    const int to = parse_class(rule.substr(arrow + 2));
    std::istringstream sources(rule.substr(0, arrow));
    std::string token;
    bool any = false;
    while (std::getline(sources, token, ',')) {
      const int from = parse_class(token);
      target[static_cast<std::size_t>(from)] = to;
      any = true;
    }
    if (!any) {
      throw std::invalid_argument("merge spec: rule '" + rule +
                                  "' has no source classes");
    }
  }
  for (int i = 0; i < n_classes; ++i) {
    const int t = target[static_cast<std::size_t>(i)];
    if (target[static_cast<std::size_t>(t)] != t) {
      throw std::invalid_argument("merge spec: chained rules are not allowed");
    }
  }

  // Compact the surviving representatives in ascending order.
  ClassMerge merge;
  merge.mapping.resize(static_cast<std::size_t>(n_classes));
  std::vector<int> compact(static_cast<std::size_t>(n_classes), -1);
  int next = 0;
  for (int i = 0; i < n_classes; ++i) {
    if (target[static_cast<std::size_t>(i)] == i) {
      compact[static_cast<std::size_t>(i)] = next++;
    }
  }
  for (int i = 0; i < n_classes; ++i) {
    merge.mapping[static_cast<std::size_t>(i)] =
        compact[static_cast<std::size_t>(target[static_cast<std::size_t>(i)])];
  }
  merge.merged_count = next;
  return merge;
}

EvalReport score_predictions(const std::vector<int>& truth,
                             const std::vector<int>& predicted, int n_classes,
                             const ClassMerge* merge) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("score_predictions: label count mismatch");
  }
  const ClassMerge identity = ClassMerge::identity(n_classes);
  const ClassMerge& m = merge != nullptr ? *merge : identity;
  if (static_cast<int>(m.mapping.size()) != n_classes) {
    throw std::invalid_argument("score_predictions: merge size mismatch");
  }

  EvalReport report;
  const int k = m.merged_count;
  report.confusion.assign(static_cast<std::size_t>(k),
                          std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
      throw std::invalid_argument("score_predictions: label out of range");
    }
    report.confusion[static_cast<std::size_t>(m.mapping[static_cast<std::size_t>(t)])]
                    [static_cast<std::size_t>(m.mapping[static_cast<std::size_t>(p)])] += 1;
  }

  report.class_counts.assign(static_cast<std::size_t>(k), 0);
  report.per_class_recall.assign(static_cast<std::size_t>(k), 0.0);
  std::int64_t diag = 0;
  int nonempty = 0;
  double recall_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    std::int64_t row = 0;
    for (int p = 0; p < k; ++p) {
      row += report.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)];
    }
    report.class_counts[static_cast<std::size_t>(c)] = row;
    diag += report.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    if (row > 0) {
      const double recall =
          static_cast<double>(
              report.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
          static_cast<double>(row);
      report.per_class_recall[static_cast<std::size_t>(c)] = recall;
      recall_sum += recall;
      nonempty += 1;
    }
  }
  report.total = static_cast<std::int64_t>(truth.size());
  report.mca = report.total > 0 ? static_cast<double>(diag) / static_cast<double>(report.total) : 0.0;
  report.mpca = nonempty > 0 ? recall_sum / nonempty : 0.0;
  return report;
}

std::string EvalReport::to_json_string() const {
  nlohmann::json j;
  j["confusion"] = confusion;
  j["class_counts"] = class_counts;
  j["per_class_recall"] = per_class_recall;
  j["mca"] = mca;
  j["mpca"] = mpca;
  j["total"] = total;
  return j.dump(2);
}

void print_report(std::ostream& out, const EvalReport& report) {
  const int k = static_cast<int>(report.confusion.size());
  out << "confusion (rows = truth, cols = predicted):\n";
  for (int t = 0; t < k; ++t) {
    out << "  class " << std::setw(2) << (t + 1) << " |";
    for (int p = 0; p < k; ++p) {
      out << std::setw(6)
          << report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    out << "  recall "
        << std::fixed << std::setprecision(4)
        << report.per_class_recall[static_cast<std::size_t>(t)] << "\n";
  }
  out << "samples: " << report.total << "\n";
  out << std::fixed << std::setprecision(4);
  out << "MCA:  " << report.mca << "\n";
  out << "MPCA: " << report.mpca << "\n";
  out.unsetf(std::ios::floatfield);
}

}  // namespace crm
