#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace crm {

/// Elementwise mean of two probability vectors (two-model fusion).
std::vector<double> fuse_predictions(const std::vector<double>& a,
                                     const std::vector<double>& b);

/// Maps original class indices onto merged ones. mapping[i] is the merged
/// index of original class i; merged indices must cover 0..merged_count-1.
struct ClassMerge {
  std::vector<int> mapping;
  int merged_count = 0;

  static ClassMerge identity(int n_classes);
  /// Parses a 1-based CLI spec like "4,5->4" against n_classes original
  /// classes: classes 4 and 5 fold into class 4, the rest keep their order.
  static ClassMerge parse(const std::string& spec, int n_classes);
};

struct EvalReport {
  /// confusion[truth][predicted], counts after any class merge.
  std::vector<std::vector<std::int64_t>> confusion;
  std::vector<std::int64_t> class_counts;   // row sums
  std::vector<double> per_class_recall;     // 0 for classes with no samples
  double mca = 0.0;   // trace / total
  double mpca = 0.0;  // mean recall over classes with >= 1 sample
  std::int64_t total = 0;

  std::string to_json_string() const;
};

void print_report(std::ostream& out, const EvalReport& report);

/// Scores predicted labels against the truth; both are mapped through the
/// merge (when given) before counting.
EvalReport score_predictions(const std::vector<int>& truth,
                             const std::vector<int>& predicted, int n_classes,
                             const ClassMerge* merge = nullptr);

}  // namespace crm
