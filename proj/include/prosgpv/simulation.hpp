#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "prosgpv/model.hpp"

namespace prosgpv {

struct Scenario {
  std::string name = "custom";
  Family family = Family::Logistic;
  int n = 200;
  int p = 20;
  int s = 4;
  double beta_l = 0.5;
  double beta_u = 1.5;
  double intercept = 0.0;
  double rho = 0.35;
  double sigma = 2.0;
  double weibull_scale = 2.0;
  double weibull_shape = 1.0;
  double censor_rate = 0.2;
  int replications = 100;
  std::uint64_t seed = 1;
  /// When set, every replication uses this coefficient vector instead of
  /// drawing one with make_true_beta.
  std::optional<Eigen::VectorXd> fixed_beta;

  void validate() const;
  /// Identifier used in output tables, e.g. "logistic-low-s:n=800:p=20".
  std::string id() const;
};

struct Preset {
  Scenario scenario;
  int n_min, n_max;
  int p_min, p_max;
};

/// The nine simulation presets: {logistic, poisson, cox} x {low-s, low-d, high-s}.
const std::vector<Preset>& presets();
std::vector<std::string> preset_names();
/// Throws ParameterError listing the valid names.
Scenario preset(std::string_view name);

/// Poisson example with one weak signal: n = 100, p = 5, rho = 0.5, sigma = 1,
/// beta = (0, 0, 0.25, 0, 0).
Scenario illustration_scenario();

/// s magnitudes equally spaced on [beta_l, beta_u] at random positions,
/// ceil(s/2) positive and floor(s/2) negative. A single signal has magnitude
/// beta_u.
Eigen::VectorXd make_true_beta(int p, int s, double beta_l, double beta_u, std::mt19937_64& rng);

/// Rows i.i.d. N(0, Sigma) with Sigma_ij = sigma^2 rho^|i-j|, via the AR(1) recursion.
Eigen::MatrixXd draw_design(int n, int p, double rho, double sigma, std::mt19937_64& rng);

/// Draws a response for linear predictor intercept + X beta and returns the dataset.
Dataset draw_response(Family family, Eigen::MatrixXd x, const Eigen::VectorXd& beta,
                      const Scenario& scenario, std::mt19937_64& rng);

struct MetricsRecord {
  double exact_capture = 0.0;
  double power = 0.0;
  double type1 = 0.0;
  double pfdr = 0.0;
  double pfndr = 0.0;
  double mae = 0.0;
  /// Test-set AUC (logistic) or RMSE (Poisson); NaN for Cox.
  double score = std::numeric_limits<double>::quiet_NaN();
  double runtime = 0.0;
};

/// Mann-Whitney AUC with ties counted one half; NaN if only one class is present.
double auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

/// Support and estimation metrics of a selection against the truth, plus the
/// prediction score on `test` when given (ignored for Cox).
MetricsRecord compute_metrics(const Eigen::VectorXd& true_beta, const std::vector<int>& selected,
                              const Coefficients& estimate, Family family,
                              const Dataset* test = nullptr);

enum class Method { ProSgpv, ProSgpvGvif, ProSgpvJeffreys, LassoMin, LassoGic, Oracle };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

struct ReplicationRecord {
  std::string scenario;
  std::string method;
  Family family = Family::Logistic;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsRecord metrics;
};

struct AggregateRow {
  std::string scenario;
  std::string method;
  int replications = 0;
  int failures = 0;
  double capture_rate = 0.0;
  double capture_ci_lower = 0.0;
  double capture_ci_upper = 0.0;
  double power = 0.0;
  double type1 = 0.0;
  double pfdr = 0.0;
  double pfndr = 0.0;
  double mae_median = 0.0;
  double mae_q1 = 0.0;
  double mae_q3 = 0.0;
  /// Prediction score summaries; RMSE values are capped at their 99th
  /// percentile before summarizing.
  double score_mean = 0.0;
  double score_median = 0.0;
  double score_q1 = 0.0;
  double score_q3 = 0.0;
  double runtime_mean = 0.0;
};

struct GridResult {
  std::vector<ReplicationRecord> records;
  std::vector<AggregateRow> aggregates;
};

struct GridOptions {
  std::vector<Method> methods{Method::ProSgpv, Method::LassoMin};
  int parallelism = 1;
  int cv_folds = 10;
};

/// Seed of replication `rep` of a scenario seeded with `seed`.
std::uint64_t replication_seed(std::uint64_t seed, int rep);

/// Runs every scenario for its replication count with each method on shared
/// data. Results do not depend on `parallelism`; failed method runs are kept
/// as failed records and excluded from the aggregates.
GridResult run_grid(const std::vector<Scenario>& scenarios, const GridOptions& options = {});

/// Logistic null-bound comparison: SE-bar, SE-bar*sqrt(log(n/p)),
/// SE-bar/sqrt(log(n/p)), SE-bar*sqrt(n/p)/2 and zero, all screening the same
/// candidate fit in each replication.
GridResult run_bound_comparison(const std::vector<Scenario>& scenarios, int parallelism = 1);

/// Per-group summary of replication records in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<ReplicationRecord>& records);

double quantile(std::vector<double> values, double q);

}  // namespace prosgpv
