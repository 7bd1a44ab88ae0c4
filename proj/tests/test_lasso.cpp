#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "prosgpv/fitting.hpp"
#include "prosgpv/lasso_path.hpp"
#include "test_support.hpp"

using namespace prosgpv;
using namespace prosgpv::testing;

namespace {

constexpr Family kFamilies[] = {Family::Logistic, Family::Poisson, Family::Cox};

/// Packs (intercept, standardized beta) for the path at index k.
Eigen::VectorXd path_point(const LassoPath& path, std::size_t k) {
  const Eigen::VectorXd& b = path.standardized_beta[k];
  if (!has_intercept(path.family)) return b;
  Eigen::VectorXd out(b.size() + 1);
  const Eigen::VectorXd orig = path.coefs[k].beta;
  out[0] = *path.coefs[k].intercept + orig.dot(path.center);
  out.tail(b.size()) = b;
  return out;
}

}  // namespace

TEST_CASE("lambda_max yields the empty model and the path starts there") {
  std::mt19937_64 rng(1);
  for (Family family : kFamilies) {
    const Dataset d = random_dataset(family, 60, random_beta(5, rng), rng);
    const LassoPath path = solve_path(family, d);
    REQUIRE(path.size() > 1);
    CHECK(path.active_sets.front().empty());
    CHECK(path.coefs.front().beta.isZero(0.0));
    CHECK(path.lambdas.front() == doctest::Approx(lambda_max(family, d)).epsilon(1e-10));
    for (std::size_t k = 1; k < path.size(); ++k) CHECK(path.lambdas[k] < path.lambdas[k - 1]);
    for (std::size_t k = 0; k < path.size(); ++k) {
      std::vector<int> nz;
      for (int j = 0; j < d.p(); ++j)
        if (path.coefs[k].beta[j] != 0.0) nz.push_back(j);
      CHECK(nz == path.active_sets[k]);
      CHECK(path.df[k] == static_cast<int>(nz.size()));
    }
    // Just below lambda_max something enters.
    CHECK(path.df.back() > 0);
  }
}

TEST_CASE("default grid: 100 values down to 1e-4 (n > p) or 1e-2 (p >= n) of lambda_max") {
  std::mt19937_64 rng(2);
  const Dataset d = random_dataset(Family::Poisson, 80, random_beta(4, rng, 0.3), rng);
  const LassoPath path = solve_path(Family::Poisson, d);
  REQUIRE(path.size() == 100);
  CHECK(path.lambdas.back() / path.lambdas.front() == doctest::Approx(1e-4).epsilon(1e-6));
  const Dataset wide = random_dataset(Family::Poisson, 20, random_beta(25, rng, 0.05), rng);
  PathOptions opts;
  opts.compute_gic = false;
  opts.saturation = 1.1;
  const LassoPath wp = solve_path(Family::Poisson, wide, opts);
  const double ratio = wp.lambdas.back() / wp.lambdas.front();
  CHECK(ratio >= 1e-2 * (1 - 1e-9));
}

TEST_CASE("path solutions match a proximal-gradient oracle") {
  std::mt19937_64 rng(3);
  for (Family family : kFamilies) {
    CAPTURE(to_string(family));
    const Dataset d = random_dataset(family, 50, random_beta(3, rng, 0.8), rng);
    PathOptions opts;
    opts.grid_size = 12;
    opts.lambda_ratio = 1e-2;
    const LassoPath path = solve_path(family, d, opts);
    const Dataset sd = with_predictors(d, population_standardize(d.x));
    const int first = has_intercept(family) ? 1 : 0;
    auto f = [&](const Eigen::VectorXd& b) {
      return loss(family, sd, Coefficients::unpack(family, b));
    };
    auto g = [&](const Eigen::VectorXd& b) {
      return gradient(family, sd, Coefficients::unpack(family, b));
    };
    for (std::size_t k = 0; k < path.size(); ++k) {
      const Eigen::VectorXd mine = path_point(path, k);
      const Eigen::VectorXd oracle =
          proximal_gradient(f, g, Eigen::VectorXd::Zero(mine.size()), path.lambdas[k], first);
      CHECK((mine - oracle).lpNorm<Eigen::Infinity>() < 1e-4);
    }
  }
}

TEST_CASE("KKT conditions hold at every lambda") {
  std::mt19937_64 rng(4);
  for (Family family : kFamilies) {
    CAPTURE(to_string(family));
    for (int rep = 0; rep < 5; ++rep) {
      const Dataset d = random_dataset(family, 80, random_beta(8, rng, 0.4), rng);
      const LassoPath path = solve_path(family, d);
      const Dataset sd = with_predictors(d, population_standardize(d.x));
      const int off = has_intercept(family) ? 1 : 0;
      for (std::size_t k = 0; k < path.size(); ++k) {
        const Eigen::VectorXd grad =
            gradient(family, sd, Coefficients::unpack(family, path_point(path, k)));
        const double lam = path.lambdas[k];
        if (off) CHECK(std::abs(grad[0]) < 1e-4);
        for (int j = 0; j < d.p(); ++j) {
          const double b = path.standardized_beta[k][j];
          if (b != 0.0)
            CHECK(std::abs(grad[j + off] + lam * (b > 0 ? 1.0 : -1.0)) < 1e-4);
          else
            CHECK(std::abs(grad[j + off]) <= lam + 1e-4);
        }
      }
    }
  }
}

TEST_CASE("warm-started path equals cold starts") {
  std::mt19937_64 rng(5);
  for (Family family : kFamilies) {
    const Dataset d = random_dataset(family, 70, random_beta(4, rng, 0.6), rng);
    PathOptions opts;
    opts.grid_size = 15;
    opts.compute_gic = false;
    const LassoPath path = solve_path(family, d, opts);
    for (std::size_t k = 1; k < path.size(); k += 3) {
      const std::vector<double> single{path.lambdas[k]};
      const LassoPath cold = solve_path(family, d, single, opts);
      CHECK((cold.standardized_beta[0] - path.standardized_beta[k]).lpNorm<Eigen::Infinity>() <
            1e-6);
    }
  }
}

TEST_CASE("active coefficients shrink monotonically on an orthonormal logistic design") {
  // Balanced +/-1 factorial design: standardized columns are exactly orthogonal.
  const int n = 64;
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = ((i >> j) & 1) ? 1.0 : -1.0;
  std::mt19937_64 rng(6);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double eta = 1.2 * x(i, 0) - 0.6 * x(i, 1);
    y[i] = std::uniform_real_distribution<double>(0, 1)(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0;
  }
  const Dataset d = Dataset::binary(x, y);
  PathOptions opts;
  opts.lambda_ratio = 0.05;
  const LassoPath path = solve_path(Family::Logistic, d, opts);
  for (int j = 0; j < 3; ++j)
    for (std::size_t k = 1; k < path.size(); ++k)
      CHECK(std::abs(path.standardized_beta[k][j]) >=
            std::abs(path.standardized_beta[k - 1][j]) - 1e-9);
}

TEST_CASE("information criterion") {
  std::mt19937_64 rng(7);
  const Dataset d = random_dataset(Family::Logistic, 100, random_beta(5, rng), rng);
  const double an = std::log(std::log(100.0)) * std::log(5.0);
  CHECK(gic_penalty(100, 5) == doctest::Approx(an));
  SUBCASE("df = 0 is the null deviance") {
    const FitResult null = fit_mle(Family::Logistic, d, std::vector<int>{});
    CHECK(gic(Family::Logistic, d, std::vector<int>{}) ==
          doctest::Approx(2.0 * d.n() * null.final_loss));
  }
  SUBCASE("relaxed refit deviance plus a_n per variable") {
    const std::vector<int> s{1, 3};
    const FitResult fit = fit_mle(Family::Logistic, d, s);
    CHECK(gic(Family::Logistic, d, s) == doctest::Approx(2.0 * d.n() * fit.final_loss + 2 * an));
  }
  SUBCASE("needs log log n > 0") {
    CHECK_THROWS_AS(gic_penalty(2, 5), ParameterError);
  }
  SUBCASE("oversized sets are not estimable") {
    const Dataset small = random_dataset(Family::Poisson, 5, random_beta(4, rng), rng);
    CHECK(std::isinf(gic(Family::Poisson, small, std::vector<int>{0, 1, 2, 3})));
  }
}

TEST_CASE("selection by information criterion") {
  LassoPath path;
  path.family = Family::Poisson;
  path.n = 50;
  path.p = 3;
  path.lambdas = {1.0, 0.5, 0.25};
  path.active_sets = {{}, {1}, {0, 1}};
  path.standardized_beta = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0, 0.2, 0),
                            Eigen::Vector3d(0.1, 0.3, 0)};
  path.df = {0, 1, 2};
  SUBCASE("ties go to the smallest lambda") {
    path.gic = {10.0, 9.0, 9.0};
    const GicSelection s = select_lambda_gic(path);
    CHECK(s.index == 2);
    CHECK(s.candidate_set == std::vector<int>{0, 1});
    CHECK(*path.lambda_gic == 0.25);
  }
  SUBCASE("increasing criterion selects lambda_max and the empty set") {
    path.gic = {1.0, 2.0, 3.0};
    const GicSelection s = select_lambda_gic(path);
    CHECK(s.index == 0);
    CHECK(s.candidate_set.empty());
  }
  SUBCASE("single lambda") {
    path.lambdas.resize(1);
    path.active_sets.resize(1);
    path.standardized_beta.resize(1);
    path.df.resize(1);
    path.gic = {4.0};
    CHECK(select_lambda_gic(path).lambda == 1.0);
  }
  SUBCASE("candidate sets above n - 2 keep the largest standardized magnitudes") {
    path.n = 3;
    path.gic = {3.0, 2.0, 1.0};
    const GicSelection s = select_lambda_gic(path);
    CHECK(s.truncated);
    CHECK(s.candidate_set == std::vector<int>{1});
  }
  SUBCASE("missing criterion is an error") {
    path.gic.clear();
    CHECK_THROWS_AS(select_lambda_gic(path), ParameterError);
  }
}

TEST_CASE("candidate set is invariant to column permutation") {
  std::mt19937_64 rng(8);
  for (Family family : kFamilies) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);
    beta[1] = 0.9;
    beta[4] = -0.7;
    const Dataset d = random_dataset(family, 120, beta, rng);
    LassoPath path = solve_path(family, d);
    const auto base = select_lambda_gic(path).candidate_set;
    std::vector<int> perm{5, 3, 1, 0, 4, 2};
    const Dataset pd = d.columns(perm);
    LassoPath ppath = solve_path(family, pd);
    std::vector<int> mapped;
    for (int k : select_lambda_gic(ppath).candidate_set) mapped.push_back(perm[k]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == base);
  }
}

TEST_CASE("cross-validation") {
  std::mt19937_64 rng(9);
  SUBCASE("leave-one-out on a tiny instance is deterministic") {
    Eigen::VectorXd beta(2);
    beta << 1.0, 0.0;
    const Dataset d = random_dataset(Family::Logistic, 12, beta, rng);
    PathOptions opts;
    opts.grid_size = 20;
    opts.lambda_ratio = 0.05;
    LassoPath path = solve_path(Family::Logistic, d, opts);
    const CvResult a = select_lambda_cv(Family::Logistic, d, path, 12, 42, opts);
    const CvResult b = select_lambda_cv(Family::Logistic, d, path, 12, 42, opts);
    CHECK(a.lambda_min == b.lambda_min);
    CHECK(a.cv_mean == b.cv_mean);
    CHECK(*path.lambda_min == a.lambda_min);
  }
  SUBCASE("every family produces a finite curve") {
    for (Family family : kFamilies) {
      const Dataset d = random_dataset(family, 100, random_beta(4, rng), rng);
      LassoPath path = solve_path(family, d);
      const CvResult cv = select_lambda_cv(family, d, path, 10, 7);
      CHECK(cv.cv_mean.size() > 1);
      for (double v : cv.cv_mean) CHECK(std::isfinite(v));
      CHECK(cv.lambda_min == path.lambdas[cv.index]);
    }
  }
  SUBCASE("bad fold counts") {
    const Dataset d = random_dataset(Family::Poisson, 20, random_beta(2, rng), rng);
    LassoPath path = solve_path(Family::Poisson, d);
    CHECK_THROWS_AS(select_lambda_cv(Family::Poisson, d, path, 1, 1), ParameterError);
    CHECK_THROWS_AS(select_lambda_cv(Family::Poisson, d, path, 21, 1), ParameterError);
  }
  SUBCASE("degenerate folds are an error after one resample") {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
    y[0] = 1;
    const Dataset d = Dataset::binary(random_matrix(10, 2, rng), y);
    PathOptions opts;
    opts.grid_size = 5;
    LassoPath path = solve_path(Family::Logistic, d, opts);
    CHECK_THROWS_AS(select_lambda_cv(Family::Logistic, d, path, 10, 3, opts), DegenerateResponse);
  }
}

TEST_CASE("degenerate responses are rejected") {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd x = random_matrix(10, 2, rng);
  CHECK_THROWS_AS(solve_path(Family::Logistic, Dataset::binary(x, Eigen::VectorXd::Ones(10))),
                  DegenerateResponse);
  CHECK_THROWS_AS(solve_path(Family::Poisson, Dataset::counts(x, Eigen::VectorXd::Zero(10))),
                  DegenerateResponse);
}

TEST_CASE("non-convergence reports the offending lambda") {
  std::mt19937_64 rng(11);
  const Dataset d = random_dataset(Family::Logistic, 60, random_beta(5, rng, 1.0), rng);
  PathOptions opts;
  opts.max_sweeps = 1;
  try {
    solve_path(Family::Logistic, d, opts);
    FAIL("expected PathError");
  } catch (const PathError& e) {
    CHECK(e.lambda() > 0.0);
  }
}
