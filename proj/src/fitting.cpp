#include "prosgpv/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace prosgpv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxHalvings = 30;
constexpr double kScoreTol = 1e-8;
// Coefficient magnitude on the standardized scale that suggests separation.
constexpr double kSeparationThreshold = 15.0;

void check_subset(const Dataset& data, std::span<const int> subset) {
  std::set<int> seen;
  for (int j : subset) {
    if (j < 0 || j >= data.p())
      throw DimensionError("subset index " + std::to_string(j) + " out of range");
    if (!seen.insert(j).second)
      throw ParameterError("subset index " + std::to_string(j) + " repeated");
  }
  if (static_cast<int>(subset.size()) > data.n() - 2)
    throw ParameterError("subset of size " + std::to_string(subset.size()) +
                         " exceeds n - 2 = " + std::to_string(data.n() - 2));
}

// Rank-revealing QR of the design; names the predictors that are linearly
// dependent on the others.
void check_rank(const Dataset& data, const Eigen::MatrixXd& design,
                std::span<const int> subset) {
  if (design.cols() == 0) return;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank == design.cols()) return;
  const int offset = has_intercept(data.kind) ? 1 : 0;
  std::vector<int> offending;
  std::string names;
  for (int k = rank; k < design.cols(); ++k) {
    const int col = qr.colsPermutation().indices()[k];
    if (col < offset) continue;
    const int j = subset[col - offset];
    offending.push_back(j);
    if (!names.empty()) names += ", ";
    names += data.names[j];
  }
  std::sort(offending.begin(), offending.end());
  throw RankDeficient("singular information matrix; linearly dependent columns: " +
                          (names.empty() ? std::string("intercept") : names),
                      offending);
}

Eigen::VectorXd initial_coef(const Dataset& data, int columns) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(columns);
  if (!has_intercept(data.kind)) return b;
  const double ybar = data.y.mean();
  if (data.kind == Family::Logistic) {
    if (ybar > 0.0 && ybar < 1.0) b[0] = std::log(ybar / (1.0 - ybar));
  } else if (ybar > 0.0) {
    b[0] = std::log(ybar);
  }
  return b;
}

bool relative_change_small(double previous, double current, double tol) {
  return std::abs(previous - current) / (std::abs(current) + 0.1) < tol;
}

FitResult assemble(Family family, const Dataset& data, std::span<const int> subset,
                   const Eigen::VectorXd& packed, const Eigen::MatrixXd& covariance) {
  FitResult r;
  r.family = family;
  r.subset.assign(subset.begin(), subset.end());
  r.coef = Coefficients::zeros(family, data.p());
  r.se = Eigen::VectorXd::Constant(data.p(), kNaN);
  r.ci_lower = Eigen::VectorXd::Constant(data.p(), kNaN);
  r.ci_upper = Eigen::VectorXd::Constant(data.p(), kNaN);
  r.covariance = covariance;
  const int offset = has_intercept(family) ? 1 : 0;
  if (offset) {
    r.coef.intercept = packed[0];
    r.intercept_se = std::sqrt(covariance(0, 0));
  }
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const int j = subset[k];
    const int idx = static_cast<int>(k) + offset;
    const double est = packed[idx];
    const double se = std::sqrt(covariance(idx, idx));
    r.coef.beta[j] = est;
    r.se[j] = se;
    r.ci_lower[j] = est - kWaldZ * se;
    r.ci_upper[j] = est + kWaldZ * se;
  }
  return r;
}

Eigen::MatrixXd invert_information(const Eigen::MatrixXd& hessian, int n) {
  Eigen::MatrixXd info = hessian * static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success)
    throw NumericalError("information matrix is not positive definite at the estimate");
  return llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
}

void flag_separation(FitResult& r, const Dataset& data) {
  if (r.family != Family::Logistic) return;
  double largest = 0.0;
  for (int j : r.subset) {
    double sd = std::sqrt((data.x.col(j).array() - data.x.col(j).mean()).square().sum() /
                          (data.n() - 1));
    largest = std::max(largest, std::abs(r.coef.beta[j]) * sd);
  }
  // The score vanishes along a separating direction, so convergence says nothing here.
  if (largest > kSeparationThreshold)
    r.warnings.push_back("possible separation: standardized coefficient magnitude " +
                         std::to_string(largest));
}

}  // namespace

void FitOptions::validate() const {
  if (max_iter < 1) throw ParameterError("max_iter must be at least 1");
  if (!(tol > 0.0)) throw ParameterError("tol must be positive");
}

Eigen::VectorXd FitResult::subset_se() const {
  Eigen::VectorXd out(subset.size());
  for (std::size_t k = 0; k < subset.size(); ++k) out[k] = se[subset[k]];
  return out;
}

Eigen::VectorXd FitResult::subset_coef() const {
  Eigen::VectorXd out(subset.size());
  for (std::size_t k = 0; k < subset.size(); ++k) out[k] = coef.beta[subset[k]];
  return out;
}

FitResult fit_mle(Family family, const Dataset& data, std::span<const int> subset,
                  const FitOptions& options) {
  options.validate();
  if (family != data.kind)
    throw InvalidInput("family does not match the dataset's response type");
  if (options.jeffreys && family == Family::Logistic)
    return fit_firth_logistic(data, subset, options);
  check_subset(data, subset);
  const Eigen::MatrixXd z = design_matrix(data, subset);
  check_rank(data, z, subset);

  const Likelihood lik(family, data);
  Eigen::VectorXd b = initial_coef(data, static_cast<int>(z.cols()));
  Eigen::VectorXd eta = z * b;
  double current = lik.loss(eta);
  Eigen::VectorXd grad = lik.gradient(z, eta);
  bool converged = z.cols() == 0 || grad.lpNorm<Eigen::Infinity>() < kScoreTol;
  int iter = 0;

  while (!converged && iter < options.max_iter) {
    ++iter;
    const Eigen::MatrixXd h = lik.hessian(z, eta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("Hessian is not positive definite during Newton iteration");
    const Eigen::VectorXd step = ldlt.solve(-grad);
    if (!step.allFinite()) throw NumericalError("Newton step is not finite");

    double t = 1.0;
    Eigen::VectorXd candidate;
    Eigen::VectorXd candidate_eta;
    double next = std::numeric_limits<double>::infinity();
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      candidate = b + t * step;
      candidate_eta = z * candidate;
      try {
        next = lik.loss(candidate_eta);
      } catch (const EvaluationOverflow&) {
        next = std::numeric_limits<double>::infinity();
      }
      if (next <= current + 1e-12 * std::abs(current)) break;
      t *= 0.5;
    }
    if (!std::isfinite(next)) throw EvaluationOverflow("Newton step left the representable range");
    if (next > current + 1e-12 * std::abs(current)) {
      // No descent left: accept if already stationary to working precision.
      converged = grad.lpNorm<Eigen::Infinity>() < 10.0 * options.tol;
      break;
    }

    const double previous = current;
    b = candidate;
    eta = candidate_eta;
    current = next;
    grad = lik.gradient(z, eta);
    const double gmax = grad.lpNorm<Eigen::Infinity>();
    converged = gmax < kScoreTol ||
                (relative_change_small(previous, current, options.tol) && gmax < 10.0 * options.tol);
  }

  const Eigen::MatrixXd cov =
      z.cols() ? invert_information(lik.hessian(z, eta), data.n()) : Eigen::MatrixXd(0, 0);
  FitResult r = assemble(family, data, subset, b, cov);
  r.converged = converged;
  r.iterations = iter;
  r.final_loss = current;
  flag_separation(r, data);
  return r;
}

namespace {

struct FirthState {
  Eigen::VectorXd mu;
  Eigen::VectorXd w;
  Eigen::MatrixXd info;  // Z' W Z (unnormalized)
  double objective = 0;  // -(loglik + 0.5 log det info) / n
  bool ok = false;
};

FirthState firth_state(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& b) {
  FirthState s;
  const int n = static_cast<int>(z.rows());
  const Eigen::VectorXd eta = z * b;
  if (!eta.allFinite()) return s;
  s.mu.resize(n);
  s.w.resize(n);
  double loglik = 0.0;
  for (int i = 0; i < n; ++i) {
    s.mu[i] = inverse_link(Family::Logistic, eta[i]);
    s.w[i] = s.mu[i] * (1.0 - s.mu[i]);
    loglik += y[i] * eta[i] - cumulant(Family::Logistic, eta[i]);
  }
  s.info = z.transpose() * s.w.asDiagonal() * z;
  Eigen::LLT<Eigen::MatrixXd> llt(s.info);
  if (llt.info() != Eigen::Success) return s;
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  s.objective = -(loglik + 0.5 * logdet) / n;
  s.ok = std::isfinite(s.objective);
  return s;
}

}  // namespace

FitResult fit_firth_logistic(const Dataset& data, std::span<const int> subset,
                             const FitOptions& options) {
  options.validate();
  if (data.kind != Family::Logistic)
    throw InvalidInput("Jeffreys-prior fitting requires a binary response");
  check_subset(data, subset);
  const Eigen::MatrixXd z = design_matrix(data, subset);
  check_rank(data, z, subset);
  const int n = data.n();

  Eigen::VectorXd b = initial_coef(data, static_cast<int>(z.cols()));
  FirthState state = firth_state(z, data.y, b);
  if (!state.ok) throw NumericalError("Fisher information is singular at the starting value");

  auto modified_score = [&](const FirthState& s) {
    Eigen::LLT<Eigen::MatrixXd> llt(s.info);
    const Eigen::MatrixXd solved = llt.solve(z.transpose());  // q x n
    Eigen::VectorXd adj(n);
    for (int i = 0; i < n; ++i) {
      const double hat = s.w[i] * z.row(i).dot(solved.col(i));
      adj[i] = data.y[i] - s.mu[i] + hat * (0.5 - s.mu[i]);
    }
    return Eigen::VectorXd(z.transpose() * adj);
  };

  Eigen::VectorXd score = modified_score(state);
  bool converged = score.lpNorm<Eigen::Infinity>() / n < kScoreTol;
  int iter = 0;
  while (!converged && iter < options.max_iter) {
    ++iter;
    const Eigen::VectorXd step = Eigen::LLT<Eigen::MatrixXd>(state.info).solve(score);
    double t = 1.0;
    FirthState next;
    Eigen::VectorXd candidate;
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      candidate = b + t * step;
      next = firth_state(z, data.y, candidate);
      if (next.ok && next.objective <= state.objective + 1e-12 * std::abs(state.objective)) break;
      t *= 0.5;
    }
    if (!next.ok || next.objective > state.objective + 1e-12 * std::abs(state.objective)) {
      converged = score.lpNorm<Eigen::Infinity>() / n < 10.0 * options.tol;
      break;
    }
    const double previous = state.objective;
    b = candidate;
    state = std::move(next);
    score = modified_score(state);
    const double gmax = score.lpNorm<Eigen::Infinity>() / n;
    converged = gmax < kScoreTol ||
                (relative_change_small(previous, state.objective, options.tol) &&
                 gmax < 10.0 * options.tol);
  }

  Eigen::LLT<Eigen::MatrixXd> llt(state.info);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(z.cols(), z.cols()));
  FitResult r = assemble(Family::Logistic, data, subset, b, cov);
  r.converged = converged;
  r.iterations = iter;
  r.final_loss = state.objective;
  r.jeffreys = true;
  return r;
}

Eigen::VectorXd gvif(const Dataset& data, std::span<const int> subset) {
  check_subset(data, subset);
  const int q = static_cast<int>(subset.size());
  if (q <= 1) return Eigen::VectorXd::Ones(q);
  Eigen::MatrixXd cols(data.n(), q);
  for (int k = 0; k < q; ++k) {
    const auto c = data.x.col(subset[k]);
    cols.col(k) = c.array() - c.mean();
    cols.col(k) /= cols.col(k).norm();
  }
  const Eigen::MatrixXd corr = cols.transpose() * cols;
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                  corr, Eigen::EigenvaluesOnly).eigenvalues();
  if (llt.info() != Eigen::Success || eig.minCoeff() < 1e-12 * eig.maxCoeff())
    throw CollinearityError("correlation matrix of the candidate columns is singular");
  return llt.solve(Eigen::MatrixXd::Identity(q, q)).diagonal();
}

}  // namespace prosgpv
