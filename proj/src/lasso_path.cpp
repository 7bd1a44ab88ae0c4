#include "prosgpv/lasso_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "prosgpv/fitting.hpp"

namespace prosgpv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

// Loss of the saturated model; deviance = 2n (loss - saturated).
double saturated_loss(const Dataset& data) {
  if (data.kind != Family::Poisson) return 0.0;
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const double y = data.y[i];
    total += y > 0.0 ? y - y * std::log(y) : 0.0;
  }
  return total / data.n();
}

void check_response(Family family, const Dataset& data) {
  if (family != data.kind)
    throw InvalidInput("family does not match the dataset's response type");
  if (family == Family::Logistic) {
    const double s = data.y.sum();
    if (s == 0.0 || s == data.n())
      throw DegenerateResponse("binary response has a single class");
  } else if (family == Family::Poisson) {
    if (data.y.maxCoeff() == 0.0) throw DegenerateResponse("count response is all zero");
  } else if (data.status.sum() == 0) {
    throw DegenerateResponse("survival data contain no events");
  }
}

// Proximal Newton on the standardized problem: each outer step minimizes the
// penalized quadratic model over a working set by coordinate descent.
class PathSolver {
 public:
  PathSolver(Family family, const Dataset& data, const PathOptions& options)
      : family_(family),
        options_(options),
        lik_(family, data),
        n_(data.n()),
        p_(data.p()),
        intercept_(has_intercept(family)) {
    center_ = data.x.colwise().mean().transpose();
    scale_.resize(p_);
    xs_.resize(n_, p_);
    for (int j = 0; j < p_; ++j) {
      const Eigen::VectorXd c = data.x.col(j).array() - center_[j];
      scale_[j] = std::sqrt(c.squaredNorm() / n_);
      xs_.col(j) = c / scale_[j];
    }
    beta_ = Eigen::VectorXd::Zero(p_);
    in_set_.assign(p_, 0);
    b0_ = 0.0;
    if (intercept_) {
      const double ybar = data.y.mean();
      b0_ = family == Family::Logistic ? std::log(ybar / (1.0 - ybar)) : std::log(ybar);
    }
    eta_ = Eigen::VectorXd::Constant(n_, b0_);
    null_loss_ = lik_.loss(eta_);
    saturated_ = saturated_loss(data);
  }

  double lambda_max() const {
    Eigen::VectorXd r, w;
    lik_.working(eta_, r, w);
    return (xs_.transpose() * r).cwiseAbs().maxCoeff() / n_;
  }

  void solve(double lambda) {
    Eigen::VectorXd r(n_), w(n_);
    const int off = intercept_ ? 1 : 0;
    int sweeps = 0;
    bool settled = false;
    for (int outer = 0; outer < options_.max_outer; ++outer) {
      lik_.working(eta_, r, w);
      const Eigen::VectorXd grad = -(xs_.transpose() * r) / static_cast<double>(n_);
      bool grew = false;
      for (int j = 0; j < p_; ++j) {
        if (in_set_[j] || std::abs(grad[j]) <= lambda) continue;
        in_set_[j] = 1;
        working_.push_back(j);
        grew = true;
      }
      if (settled && !grew) return;

      // Quadratic model of the loss in (intercept, working-set coefficients).
      const int q = off + static_cast<int>(working_.size());
      if (q == 0) return;
      Eigen::MatrixXd z(n_, q);
      if (intercept_) z.col(0).setOnes();
      Eigen::VectorXd current(q), g(q);
      if (intercept_) {
        current[0] = b0_;
        g[0] = -r.sum() / static_cast<double>(n_);
      }
      for (std::size_t k = 0; k < working_.size(); ++k) {
        z.col(off + k) = xs_.col(working_[k]);
        current[off + k] = beta_[working_[k]];
        g[off + k] = grad[working_[k]];
      }
      const Eigen::MatrixXd h = lik_.hessian(z, eta_);
      Eigen::VectorXd diag(q);
      for (int k = 0; k < q; ++k) diag[k] = std::max(h(k, k), 1e-10);

      // Coordinate descent on the penalized quadratic.
      Eigen::VectorXd step = Eigen::VectorXd::Zero(q);
      Eigen::VectorXd h_step = Eigen::VectorXd::Zero(q);
      while (true) {
        double change = 0.0;
        for (int k = 0; k < q; ++k) {
          const double c = g[k] + h_step[k] - h(k, k) * step[k];
          const double before = current[k] + step[k];
          const double after = k < off ? current[k] - c / diag[k]
                                       : soft_threshold(diag[k] * current[k] - c, lambda) / diag[k];
          const double d = after - before;
          if (d == 0.0) continue;
          step[k] += d;
          h_step.noalias() += d * h.col(k);
          change = std::max(change, std::abs(d) * std::sqrt(diag[k]));
        }
        if (++sweeps > options_.max_sweeps) throw PathError(failure(lambda), lambda);
        if (change < options_.tol) break;
      }

      // Step-halving on the penalized objective.
      const double old_obj = objective(eta_, beta_, lambda);
      const Eigen::VectorXd z_step = z * step;
      double t = 1.0;
      Eigen::VectorXd next = current + step;
      Eigen::VectorXd next_eta = eta_ + z_step;
      double obj = objective(next_eta, apply(next), lambda);
      int halving = 0;
      for (; halving < 30 && !(obj <= old_obj + 1e-12 * std::abs(old_obj)); ++halving) {
        t *= 0.5;
        next = current + t * step;
        next_eta = eta_ + t * z_step;
        obj = objective(next_eta, apply(next), lambda);
      }
      if (!(obj <= old_obj + 1e-12 * std::abs(old_obj))) {
        // No descent left at working precision.
        settled = true;
        continue;
      }
      if (intercept_) b0_ = next[0];
      for (std::size_t k = 0; k < working_.size(); ++k) beta_[working_[k]] = next[off + k];
      eta_ = next_eta;
      double moved = 0.0;
      for (int k = 0; k < q; ++k) moved = std::max(moved, t * std::abs(step[k]) * std::sqrt(diag[k]));
      settled = moved < options_.tol;
    }
    throw PathError(failure(lambda), lambda);
  }

  double deviance_ratio() const {
    const double null_dev = null_loss_ - saturated_;
    if (null_dev <= 0.0) return 0.0;
    return 1.0 - (lik_.loss(eta_) - saturated_) / null_dev;
  }

  Coefficients original_scale() const {
    Coefficients c;
    c.beta = beta_.cwiseQuotient(scale_);
    if (intercept_) c.intercept = b0_ - c.beta.dot(center_);
    return c;
  }

  const Eigen::VectorXd& beta() const { return beta_; }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::VectorXd& scale() const { return scale_; }

 private:
  double objective(const Eigen::VectorXd& eta, const Eigen::VectorXd& beta,
                   double lambda) const {
    try {
      return lik_.loss(eta) + lambda * beta.lpNorm<1>();
    } catch (const EvaluationOverflow&) {
      return kInf;
    }
  }

  // Full coefficient vector with the working-set entries taken from `packed`.
  Eigen::VectorXd apply(const Eigen::VectorXd& packed) const {
    Eigen::VectorXd b = beta_;
    const int off = intercept_ ? 1 : 0;
    for (std::size_t k = 0; k < working_.size(); ++k) b[working_[k]] = packed[off + k];
    return b;
  }

  std::string failure(double lambda) const {
    return "coordinate descent did not converge at lambda = " + std::to_string(lambda);
  }

  Family family_;
  PathOptions options_;
  Likelihood lik_;
  int n_;
  int p_;
  bool intercept_;
  Eigen::MatrixXd xs_;
  Eigen::VectorXd center_;
  Eigen::VectorXd scale_;
  Eigen::VectorXd beta_;
  double b0_;
  Eigen::VectorXd eta_;
  double null_loss_;
  double saturated_;
  // Coordinates ever allowed to move; grows when a coordinate violates its
  // optimality condition.
  std::vector<int> working_;
  std::vector<char> in_set_;
};

LassoPath run_path(Family family, const Dataset& data, std::span<const double> lambdas,
                   const PathOptions& options) {
  PathSolver solver(family, data, options);
  LassoPath path;
  path.family = family;
  path.n = data.n();
  path.p = data.p();
  path.center = solver.center();
  path.scale = solver.scale();
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (k > 0 && !(lambdas[k] < lambdas[k - 1]))
      throw ParameterError("lambda grid must be strictly decreasing");
    if (!(lambdas[k] > 0.0)) throw ParameterError("lambda values must be positive");
    solver.solve(lambdas[k]);
    path.lambdas.push_back(lambdas[k]);
    path.coefs.push_back(solver.original_scale());
    path.standardized_beta.push_back(solver.beta());
    std::vector<int> active;
    for (int j = 0; j < data.p(); ++j)
      if (path.coefs.back().beta[j] != 0.0) active.push_back(j);
    path.df.push_back(static_cast<int>(active.size()));
    path.active_sets.push_back(std::move(active));
    if (solver.deviance_ratio() > options.saturation || path.df.back() >= data.n() - 1) break;
  }
  if (options.compute_gic) compute_gic(path, data);
  return path;
}

}  // namespace

void PathOptions::validate() const {
  if (grid_size < 1) throw ParameterError("grid_size must be at least 1");
  if (lambda_ratio && !(*lambda_ratio > 0.0 && *lambda_ratio < 1.0))
    throw ParameterError("lambda_ratio must lie in (0, 1)");
  if (!(tol > 0.0)) throw ParameterError("tol must be positive");
  if (max_sweeps < 1 || max_outer < 1) throw ParameterError("iteration limits must be positive");
}

double lambda_max(Family family, const Dataset& data) {
  check_response(family, data);
  return PathSolver(family, data, PathOptions{}).lambda_max();
}

LassoPath solve_path(Family family, const Dataset& data, const PathOptions& options) {
  options.validate();
  check_response(family, data);
  const double top = lambda_max(family, data);
  if (!(top > 0.0)) throw DegenerateResponse("response is unrelated to every predictor");
  const double ratio = options.lambda_ratio.value_or(data.n() > data.p() ? 1e-4 : 1e-2);
  std::vector<double> grid(options.grid_size);
  for (int k = 0; k < options.grid_size; ++k) {
    const double frac = options.grid_size == 1 ? 0.0 : double(k) / (options.grid_size - 1);
    grid[k] = top * std::pow(ratio, frac);
  }
  // Guard the all-zero solution at the top of the grid against summation-order
  // rounding in the coordinate updates.
  grid[0] *= 1.0 + 1e-12;
  return run_path(family, data, grid, options);
}

LassoPath solve_path(Family family, const Dataset& data, std::span<const double> lambdas,
                     const PathOptions& options) {
  options.validate();
  check_response(family, data);
  if (lambdas.empty()) throw ParameterError("lambda grid is empty");
  return run_path(family, data, lambdas, options);
}

double gic_penalty(int n, int p) {
  if (n <= 2) throw ParameterError("information criterion needs n > e (log log n > 0)");
  if (p < 1) throw ParameterError("information criterion needs at least one predictor");
  return std::log(std::log(static_cast<double>(n))) * std::log(static_cast<double>(p));
}

double gic(Family family, const Dataset& data, std::span<const int> active_set) {
  const double penalty = gic_penalty(data.n(), data.p());
  if (static_cast<int>(active_set.size()) > data.n() - 2) return kInf;
  try {
    const FitResult fit = fit_mle(family, data, active_set);
    return 2.0 * data.n() * fit.final_loss + penalty * static_cast<double>(active_set.size());
  } catch (const NumericalError&) {
    return kInf;
  }
}

void compute_gic(LassoPath& path, const Dataset& data) {
  std::map<std::vector<int>, double> cache;
  path.gic.assign(path.size(), kInf);
  for (std::size_t k = 0; k < path.size(); ++k) {
    const auto& active = path.active_sets[k];
    auto it = cache.find(active);
    if (it == cache.end()) it = cache.emplace(active, gic(path.family, data, active)).first;
    path.gic[k] = it->second;
  }
}

GicSelection select_lambda_gic(LassoPath& path) {
  if (path.size() == 0) throw ParameterError("lasso path is empty");
  if (path.gic.size() != path.size())
    throw ParameterError("information criterion has not been computed for this path");
  GicSelection sel;
  double best = kInf;
  for (std::size_t k = 0; k < path.size(); ++k) {
    if (path.gic[k] <= best) {
      best = path.gic[k];
      sel.index = k;
    }
  }
  sel.lambda = path.lambdas[sel.index];
  sel.candidate_set = path.active_sets[sel.index];
  const int cap = path.n - 2;
  if (static_cast<int>(sel.candidate_set.size()) > cap) {
    const Eigen::VectorXd& b = path.standardized_beta[sel.index];
    auto& c = sel.candidate_set;
    std::stable_sort(c.begin(), c.end(),
                     [&](int a, int z) { return std::abs(b[a]) > std::abs(b[z]); });
    c.resize(std::max(cap, 0));
    std::sort(c.begin(), c.end());
    sel.truncated = true;
  }
  path.lambda_gic = sel.lambda;
  return sel;
}

namespace {

bool degenerate_training(Family family, const Dataset& data, const std::vector<int>& train) {
  double total = 0.0;
  for (int i : train) total += family == Family::Cox ? data.status[i] : data.y[i];
  if (family == Family::Logistic) return total == 0.0 || total == static_cast<double>(train.size());
  return total == 0.0;
}

std::vector<int> assign_folds(int n, int folds, std::mt19937_64& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(n);
  for (int pos = 0; pos < n; ++pos) fold[order[pos]] = pos % folds;
  return fold;
}

}  // namespace

CvResult select_lambda_cv(Family family, const Dataset& data, LassoPath& path, int folds,
                          std::uint64_t seed, const PathOptions& options) {
  if (folds < 2 || folds > data.n()) throw ParameterError("folds must lie in [2, n]");
  if (path.size() == 0) throw ParameterError("lasso path is empty");
  check_response(family, data);
  std::mt19937_64 rng(seed);

  std::vector<int> fold;
  bool ok = false;
  for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
    fold = assign_folds(data.n(), folds, rng);
    ok = true;
    for (int k = 0; k < folds && ok; ++k) {
      std::vector<int> train;
      for (int i = 0; i < data.n(); ++i)
        if (fold[i] != k) train.push_back(i);
      ok = !degenerate_training(family, data, train);
    }
  }
  if (!ok) throw DegenerateResponse("a cross-validation fold has a degenerate training response");

  PathOptions fold_options = options;
  fold_options.compute_gic = false;
  const Likelihood full(family, data);
  std::size_t common = path.size();
  std::vector<std::vector<double>> per_fold(folds);  // deviance per lambda, summed over fold
  std::vector<int> fold_size(folds, 0);

  for (int k = 0; k < folds; ++k) {
    std::vector<int> train, test;
    for (int i = 0; i < data.n(); ++i) (fold[i] == k ? test : train).push_back(i);
    fold_size[k] = static_cast<int>(test.size());
    const Dataset training = data.rows(train);
    const LassoPath fp = solve_path(family, training, std::span<const double>(path.lambdas),
                                    fold_options);
    common = std::min(common, fp.size());
    const Likelihood train_lik(family, training);
    per_fold[k].resize(fp.size());
    for (std::size_t l = 0; l < fp.size(); ++l) {
      const Coefficients& c = fp.coefs[l];
      if (family == Family::Cox) {
        const double full_nll = data.n() * full.loss(linear_predictor(data, c));
        const double train_nll = training.n() * train_lik.loss(linear_predictor(training, c));
        per_fold[k][l] = 2.0 * (full_nll - train_nll);
      } else {
        double dev = 0.0;
        for (int i : test) {
          const double eta = c.intercept.value_or(0.0) + data.x.row(i).dot(c.beta);
          const double y = data.y[i];
          double sat_i = 0.0;
          if (family == Family::Poisson && y > 0.0) sat_i = y - y * std::log(y);
          dev += 2.0 * (cumulant(family, eta) - y * eta - sat_i);
        }
        per_fold[k][l] = dev;
      }
    }
  }

  CvResult out;
  double best = kInf;
  for (std::size_t l = 0; l < common; ++l) {
    double total = 0.0;
    std::vector<double> per_obs(folds);
    for (int k = 0; k < folds; ++k) {
      total += per_fold[k][l];
      per_obs[k] = per_fold[k][l] / fold_size[k];
    }
    const double mean = total / data.n();
    double var = 0.0;
    for (double v : per_obs) var += (v - mean) * (v - mean);
    var /= std::max(folds - 1, 1);
    out.lambdas.push_back(path.lambdas[l]);
    out.cv_mean.push_back(mean);
    out.cv_se.push_back(std::sqrt(var / folds));
    if (mean < best) {
      best = mean;
      out.index = l;
    }
  }
  out.lambda_min = path.lambdas[out.index];
  path.lambda_min = out.lambda_min;
  return out;
}

}  // namespace prosgpv
