#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prosgpv/fitting.hpp"
#include "prosgpv/lasso_path.hpp"
#include "prosgpv/model.hpp"

namespace prosgpv {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
};

/// Interval null hypothesis [-delta, delta].
class IntervalNull {
 public:
  explicit IntervalNull(double delta);

  double delta() const { return delta_; }
  double lower() const { return -delta_; }
  double upper() const { return delta_; }
  double width() const { return 2.0 * delta_; }

 private:
  double delta_;
};

/// Second-generation p-value: the fraction of `estimate` inside the null,
/// scaled by max(|I| / (2|H0|), 1) so very wide intervals report at most 1/2.
/// A point interval scores 1 inside the null and 0 outside.
double sgpv(const Interval& estimate, const IntervalNull& null);

enum class NullBound { Constant, Gvif };

std::string_view to_string(NullBound bound);
NullBound parse_null_bound(std::string_view name);

/// delta = mean standard error over the candidate variables.
IntervalNull null_bound_se(const FitResult& stage2, std::span<const int> candidate_set);

/// delta = mean of SE_k / GVIF_k over the candidate variables.
IntervalNull null_bound_gvif(const FitResult& stage2, const Dataset& data,
                             std::span<const int> candidate_set);

struct SelectionConfig {
  NullBound bound = NullBound::Constant;
  bool jeffreys = false;
  PathOptions path;
};

struct SelectionResult {
  Family family = Family::Logistic;
  std::vector<int> candidate_set;
  std::vector<int> final_set;
  /// Unshrunken refit on final_set; zero elsewhere.
  Coefficients coef;
  /// Per candidate, in candidate_set order.
  Eigen::VectorXd sgpvs;
  Eigen::VectorXd cutoffs;
  std::optional<IntervalNull> null_bound;
  LassoPath stage1;
  GicSelection gic;
  /// Refit on the candidate set (absent when the candidate set is empty).
  std::optional<FitResult> stage2_fit;
  FitResult final_fit;
  bool converged = true;
};

/// Screens `candidate_set` of a fitted model: keeps k with SGPV_k = 0 where
/// I_k = estimate +/- 1.96 SE. Writes the per-candidate SGPVs when requested.
std::vector<int> sgpv_screen(const FitResult& fit, std::span<const int> candidate_set,
                             const IntervalNull& null, Eigen::VectorXd* sgpvs = nullptr);

/// Two-stage selection: lasso at lambda_gic for the candidate set, then an
/// unpenalized refit screened by SGPV, then a refit on the survivors.
SelectionResult run_prosgpv(Family family, const Dataset& data, const SelectionConfig& config = {});

/// Same, reusing an already solved stage-one path for `data`. The information
/// criterion is computed on it when missing.
SelectionResult run_prosgpv(Family family, const Dataset& data, LassoPath stage1,
                            const SelectionConfig& config = {});

}  // namespace prosgpv
