#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prosgpv/errors.hpp"

namespace prosgpv {

enum class Family { Logistic, Poisson, Cox };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

/// True when the family fits an intercept (GLM); Cox absorbs it in the baseline hazard.
constexpr bool has_intercept(Family family) { return family != Family::Cox; }

// Cumulant b(theta) and its first two derivatives for the canonical GLM
// families. Not defined for Cox.
double cumulant(Family family, double theta);
double inverse_link(Family family, double eta);
double variance_function(Family family, double eta);

/// Linear predictors are clamped to this magnitude before computing logistic
/// probabilities.
inline constexpr double kLogisticEtaClamp = 30.0;

/// Observations plus response. Built through the named constructors, which
/// validate every invariant.
struct Dataset {
  Family kind = Family::Logistic;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;       // 0/1 (logistic) or counts (Poisson); empty for Cox
  Eigen::VectorXd time;    // Cox only
  Eigen::VectorXi status;  // Cox only; 1 = event
  std::vector<std::string> names;

  bool standardized = false;
  Eigen::VectorXd column_means;
  Eigen::VectorXd column_sds;

  static Dataset binary(Eigen::MatrixXd x, Eigen::VectorXd y,
                        std::vector<std::string> names = {});
  static Dataset counts(Eigen::MatrixXd x, Eigen::VectorXd y,
                        std::vector<std::string> names = {});
  static Dataset survival(Eigen::MatrixXd x, Eigen::VectorXd time,
                          Eigen::VectorXi status,
                          std::vector<std::string> names = {});

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }

  /// Observation subset, re-validated.
  Dataset rows(std::span<const int> index) const;
  /// Predictor subset in the given order.
  Dataset columns(std::span<const int> index) const;

  /// Throws InvalidInput if an invariant does not hold.
  void validate() const;
};

/// Centers every column and scales it to unit sample standard deviation,
/// recording the transform.
Dataset standardize(const Dataset& data);

/// Default predictor names V1..Vp.
std::vector<std::string> default_names(int p);

struct Coefficients {
  std::optional<double> intercept;
  Eigen::VectorXd beta;

  static Coefficients zeros(Family family, int p);

  /// Packs as (intercept, beta...) or beta for Cox.
  Eigen::VectorXd packed() const;
  static Coefficients unpack(Family family, const Eigen::VectorXd& packed);
};

/// Z = [1, X] for GLM families, X for Cox. `subset` restricts the predictor
/// columns; an empty optional means all columns.
Eigen::MatrixXd design_matrix(const Dataset& data,
                              std::optional<std::span<const int>> subset = std::nullopt);

Eigen::VectorXd linear_predictor(const Dataset& data, const Coefficients& coef);

/// Evaluates the normalized negative log-likelihood as a function of the
/// linear predictor. Holds the Cox risk-set ordering, so construct once per
/// dataset and reuse.
class Likelihood {
 public:
  Likelihood(Family family, const Dataset& data);

  Family family() const { return family_; }
  int n() const { return n_; }

  /// -(1/n) log-likelihood (GLM) or -(1/n) log partial likelihood (Cox, Breslow).
  double loss(const Eigen::VectorXd& eta) const;

  /// residual = -n dL/deta; weight = n d2L/deta2 (diagonal only).
  void working(const Eigen::VectorXd& eta, Eigen::VectorXd& residual,
               Eigen::VectorXd& weight) const;

  Eigen::VectorXd gradient(const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& eta) const;
  Eigen::MatrixXd hessian(const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& eta) const;

 private:
  void check_eta(const Eigen::VectorXd& eta) const;

  struct RiskSets {
    std::vector<int> order;        // ascending time
    std::vector<int> group_start;  // position in `order` where each tie group begins
    std::vector<int> group_events;
    std::vector<int> group_of;     // per observation
  };

  Family family_;
  int n_;
  Eigen::VectorXd y_;       // response, or event indicator for Cox
  RiskSets risk_;
};

double loss(Family family, const Dataset& data, const Coefficients& coef);
/// Gradient in packed order (intercept first for GLM).
Eigen::VectorXd gradient(Family family, const Dataset& data, const Coefficients& coef);
Eigen::MatrixXd hessian(Family family, const Dataset& data, const Coefficients& coef);

}  // namespace prosgpv
