#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prosgpv/model.hpp"

namespace prosgpv {

/// Normal quantile used for every 95% Wald interval in the library.
inline constexpr double kWaldZ = 1.96;

struct FitOptions {
  int max_iter = 100;
  double tol = 1e-8;
  /// Logistic only: maximize the Jeffreys-prior penalized likelihood (Firth).
  bool jeffreys = false;

  void validate() const;
};

/// Unpenalized fit restricted to a predictor subset. Vectors indexed by
/// predictor are full length p; entries outside `subset` hold a structural
/// zero coefficient and NaN for se/ci.
struct FitResult {
  Family family = Family::Logistic;
  std::vector<int> subset;
  Coefficients coef;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  std::optional<double> intercept_se;
  /// Inverse observed information over (intercept, subset...) in packed order.
  Eigen::MatrixXd covariance;
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  bool jeffreys = false;
  std::vector<std::string> warnings;

  /// Subset-ordered view of the standard errors.
  Eigen::VectorXd subset_se() const;
  Eigen::VectorXd subset_coef() const;
};

/// Maximum likelihood on the columns in `subset` (Newton with step-halving;
/// identical to IRLS for the canonical GLM links). Throws RankDeficient if
/// the subset design is singular. Routes to fit_firth_logistic when
/// options.jeffreys is set for a logistic family.
FitResult fit_mle(Family family, const Dataset& data, std::span<const int> subset,
                  const FitOptions& options = {});

/// Firth bias-reduced logistic regression: maximizes
/// loglik + 0.5 log det(Fisher information). Finite under separation.
FitResult fit_firth_logistic(const Dataset& data, std::span<const int> subset,
                             const FitOptions& options = {});

/// Variance inflation per subset column: diagonal of the inverse correlation
/// matrix of the subset columns (the GVIF for one-degree-of-freedom terms).
Eigen::VectorXd gvif(const Dataset& data, std::span<const int> subset);

}  // namespace prosgpv
