#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "prosgpv/model.hpp"

namespace prosgpv {

struct PathOptions {
  int grid_size = 100;
  /// Smallest lambda as a fraction of lambda_max. Unset: 1e-4 when n > p,
  /// else 1e-2.
  std::optional<double> lambda_ratio;
  /// Max coefficient change per coordinate sweep on the standardized scale,
  /// weighted by the square root of the quadratic model's curvature.
  double tol = 1e-7;
  /// Coordinate sweeps allowed per lambda across all outer iterations.
  int max_sweeps = 100000;
  int max_outer = 100;
  /// Stop the path once this fraction of the null deviance is explained.
  double saturation = 0.999;
  /// Evaluate the information criterion at every lambda after solving.
  bool compute_gic = true;

  void validate() const;
};

/// Lasso solutions over a decreasing lambda grid. Lambdas refer to the
/// internally standardized problem (columns centered, unit population
/// variance); coefficients are reported on the original predictor scale.
struct LassoPath {
  Family family = Family::Logistic;
  int n = 0;
  int p = 0;
  std::vector<double> lambdas;
  std::vector<Coefficients> coefs;
  std::vector<Eigen::VectorXd> standardized_beta;
  std::vector<std::vector<int>> active_sets;
  std::vector<int> df;
  /// Empty unless computed; +inf where the relaxed refit is not estimable.
  std::vector<double> gic;
  std::optional<double> lambda_gic;
  std::optional<double> lambda_min;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  std::size_t size() const { return lambdas.size(); }
};

/// Smallest lambda whose solution is all-zero: max_j |d loss / d beta_j| at
/// the null fit, on the standardized scale.
double lambda_max(Family family, const Dataset& data);

LassoPath solve_path(Family family, const Dataset& data, const PathOptions& options = {});

/// Path over a caller-supplied decreasing grid (used for cross-validation).
LassoPath solve_path(Family family, const Dataset& data, std::span<const double> lambdas,
                     const PathOptions& options = {});

/// Per-variable penalty a_n = log(log n) * log p.
double gic_penalty(int n, int p);

/// deviance + a_n * df, with deviance = 2n * loss of the unpenalized refit on
/// `active_set`. Returns +inf when the refit is not estimable (too many
/// columns or singular design).
double gic(Family family, const Dataset& data, std::span<const int> active_set);

/// Fills path.gic, reusing refits for repeated active sets.
void compute_gic(LassoPath& path, const Dataset& data);

struct GicSelection {
  std::size_t index = 0;
  double lambda = 0.0;
  std::vector<int> candidate_set;
  bool truncated = false;
};

/// Argmin of the criterion (smallest lambda on ties). Candidate sets larger
/// than n - 2 keep the n - 2 largest standardized magnitudes.
GicSelection select_lambda_gic(LassoPath& path);

struct CvResult {
  std::size_t index = 0;
  double lambda_min = 0.0;
  std::vector<double> lambdas;
  std::vector<double> cv_mean;
  std::vector<double> cv_se;
};

/// K-fold cross-validated deviance; out-of-fold partial likelihood via the
/// Verweij-van Houwelingen difference for Cox. Sets path.lambda_min.
CvResult select_lambda_cv(Family family, const Dataset& data, LassoPath& path, int folds,
                          std::uint64_t seed, const PathOptions& options = {});

}  // namespace prosgpv
