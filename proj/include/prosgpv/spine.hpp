#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prosgpv/model.hpp"
#include "prosgpv/sgpv.hpp"

namespace prosgpv {

/// Repeated 70/30 train/test splits of a binary-response dataset comparing
/// ProSGPV with the cross-validated lasso at lambda_min.
struct SplitStudyConfig {
  int splits = 1000;
  std::uint64_t seed = 1;
  int parallelism = 1;
  int cv_folds = 10;
  NullBound bound = NullBound::Constant;

  void validate() const;
};

/// Training fraction of every split.
inline constexpr double kTrainFraction = 0.7;

struct SplitOutcome {
  int split = 0;
  std::uint64_t seed = 0;
  std::string method;
  bool failed = false;
  std::string error;
  std::vector<int> model;
  double auc = 0.0;
};

struct SplitMethodSummary {
  std::string method;
  int completed = 0;
  int failures = 0;
  double median_size = 0.0;
  double mean_size = 0.0;
  double median_auc = 0.0;
  double mean_auc = 0.0;
  /// size_counts[k] = completed splits selecting k variables.
  std::vector<int> size_counts;
  /// Most frequent selected model; ties go to the smaller model, then the
  /// lexicographically smaller index list.
  std::vector<int> most_frequent_model;
  int most_frequent_count = 0;
  /// Fraction of completed splits selecting each variable.
  std::vector<double> inclusion;
};

struct SplitStudyResult {
  std::vector<std::string> names;
  /// Ordered by split, then method (prosgpv, lasso-min).
  std::vector<SplitOutcome> outcomes;
  std::vector<SplitMethodSummary> summaries;
};

SplitStudyResult run_split_study(const Dataset& data, const SplitStudyConfig& config = {});

}  // namespace prosgpv
