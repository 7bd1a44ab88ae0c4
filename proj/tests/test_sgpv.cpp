#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "prosgpv/sgpv.hpp"
#include "test_support.hpp"

using namespace prosgpv;
using namespace prosgpv::testing;

TEST_CASE("sgpv on worked intervals") {
  const IntervalNull h(0.2);
  CHECK(sgpv({0.5, 1.5}, h) == 0.0);
  CHECK(sgpv({-0.1, 0.1}, h) == 1.0);
  // Overlap 0.4 of width 2, correction 2 / 0.8.
  CHECK(sgpv({-1.0, 1.0}, h) == doctest::Approx(0.5).epsilon(1e-14));
  // Overlap 0.1 of width 0.8, correction max(0.8 / 0.8, 1) = 1.
  CHECK(sgpv({0.1, 0.9}, h) == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(sgpv({0.1, 0.3}, h) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("point intervals score 1 inside the null and 0 outside") {
  const IntervalNull h(0.5);
  CHECK(sgpv({0.3, 0.3}, h) == 1.0);
  CHECK(sgpv({0.5, 0.5}, h) == 1.0);
  CHECK(sgpv({0.7, 0.7}, h) == 0.0);
}

TEST_CASE("malformed intervals and nulls are rejected") {
  CHECK_THROWS_AS(sgpv({1.0, 0.0}, IntervalNull(0.1)), MalformedInterval);
  CHECK_THROWS_AS(sgpv({0.0, INFINITY}, IntervalNull(0.1)), MalformedInterval);
  CHECK_THROWS_AS(IntervalNull(0.0), ParameterError);
  CHECK_THROWS_AS(IntervalNull(-1.0), ParameterError);
  CHECK_THROWS_AS(IntervalNull(NAN), ParameterError);
}

TEST_CASE("sgpv properties on random intervals") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> centre(-3.0, 3.0), half(0.0, 2.0), dist(0.01, 1.5),
      scale(0.01, 100.0);
  for (int rep = 0; rep < 5000; ++rep) {
    const double c = centre(rng), w = half(rng), d = dist(rng);
    const Interval iv{c - w, c + w};
    const IntervalNull h(d);
    const double v = sgpv(iv, h);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    const bool disjoint = iv.lower > d || iv.upper < -d;
    const bool inside = iv.lower >= -d && iv.upper <= d;
    CHECK((v == 0.0) == disjoint);
    CHECK((v == 1.0) == inside);
    CHECK(sgpv({-iv.upper, -iv.lower}, h) == doctest::Approx(v).epsilon(1e-12));
    const double k = scale(rng);
    CHECK(sgpv({k * iv.lower, k * iv.upper}, IntervalNull(k * d)) ==
          doctest::Approx(v).epsilon(1e-9));
  }
}

TEST_CASE("null bound names") {
  CHECK(parse_null_bound("constant") == NullBound::Constant);
  CHECK(parse_null_bound("gvif") == NullBound::Gvif);
  CHECK(to_string(NullBound::Gvif) == "gvif");
  CHECK_THROWS_AS(parse_null_bound("median"), ParameterError);
}

TEST_CASE("null bounds from a stage-two fit") {
  std::mt19937_64 rng(2);
  Eigen::VectorXd beta(5);
  beta << 0.8, 0.0, -0.5, 0.3, 0.0;
  Dataset d = random_dataset(Family::Logistic, 150, beta, rng);
  d.x.col(1) = 0.7 * d.x.col(0) + 0.3 * d.x.col(1);
  const std::vector<int> c{0, 1, 2, 3};
  const FitResult fit = fit_mle(Family::Logistic, d, c);
  const IntervalNull se = null_bound_se(fit, c);
  double mean = 0.0;
  for (int j : c) mean += fit.se[j];
  CHECK(se.delta() == doctest::Approx(mean / 4).epsilon(1e-14));

  const Eigen::VectorXd inflation = gvif(d, c);
  double adjusted = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) adjusted += fit.se[c[k]] / inflation[k];
  const IntervalNull gv = null_bound_gvif(fit, d, c);
  CHECK(gv.delta() == doctest::Approx(adjusted / 4).epsilon(1e-14));
  CHECK(gv.delta() < se.delta());

  const std::vector<int> one{2};
  const FitResult single = fit_mle(Family::Logistic, d, one);
  CHECK(null_bound_gvif(single, d, one).delta() == null_bound_se(single, one).delta());
  CHECK_THROWS_AS(null_bound_se(fit, std::vector<int>{}), ParameterError);
}

TEST_CASE("screening keeps exactly the variables clearing the cutoff") {
  std::mt19937_64 rng(3);
  for (Family family : {Family::Logistic, Family::Poisson, Family::Cox}) {
    for (int rep = 0; rep < 30; ++rep) {
      const Dataset d = random_dataset(family, 100, random_beta(6, rng, 0.6), rng);
      const std::vector<int> c{0, 1, 2, 3, 4, 5};
      const FitResult fit = fit_mle(family, d, c);
      const IntervalNull h = null_bound_se(fit, c);
      Eigen::VectorXd values;
      const std::vector<int> kept = sgpv_screen(fit, c, h, &values);
      std::vector<int> by_cutoff;
      for (int j : c)
        if (std::abs(fit.coef.beta[j]) - kWaldZ * fit.se[j] > h.delta()) by_cutoff.push_back(j);
      CHECK(kept == by_cutoff);
      for (std::size_t k = 0; k < c.size(); ++k)
        CHECK((values[k] == 0.0) ==
              (std::find(kept.begin(), kept.end(), c[k]) != kept.end()));
    }
  }
}

namespace {

Eigen::VectorXd sparse_beta(int p, std::initializer_list<std::pair<int, double>> entries) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  for (const auto& [j, v] : entries) b[j] = v;
  return b;
}

}  // namespace

TEST_CASE("selection result is internally consistent") {
  std::mt19937_64 rng(4);
  for (Family family : {Family::Logistic, Family::Poisson, Family::Cox}) {
    CAPTURE(to_string(family));
    for (NullBound bound : {NullBound::Constant, NullBound::Gvif}) {
      const Dataset d =
          random_dataset(family, 150, sparse_beta(10, {{0, 0.9}, {3, -0.6}, {7, 0.5}}), rng);
      SelectionConfig config;
      config.bound = bound;
      const SelectionResult r = run_prosgpv(family, d, config);
      for (int j : r.final_set)
        CHECK(std::find(r.candidate_set.begin(), r.candidate_set.end(), j) !=
              r.candidate_set.end());
      REQUIRE(r.sgpvs.size() == static_cast<int>(r.candidate_set.size()));
      std::vector<int> zero;
      for (std::size_t k = 0; k < r.candidate_set.size(); ++k) {
        CHECK(r.sgpvs[k] >= 0.0);
        CHECK(r.sgpvs[k] <= 1.0);
        if (r.sgpvs[k] == 0.0) zero.push_back(r.candidate_set[k]);
        CHECK(r.cutoffs[k] == doctest::Approx(kWaldZ * r.stage2_fit->se[r.candidate_set[k]] +
                                              r.null_bound->delta()));
      }
      CHECK(zero == r.final_set);
      for (int j = 0; j < d.p(); ++j)
        if (std::find(r.final_set.begin(), r.final_set.end(), j) == r.final_set.end())
          CHECK(r.coef.beta[j] == 0.0);
      // Unshrunken: a fresh refit on S reproduces the coefficients.
      const FitResult refit = fit_mle(family, d, r.final_set);
      CHECK((refit.coef.beta - r.coef.beta).lpNorm<Eigen::Infinity>() < 1e-10);
      if (refit.coef.intercept) CHECK(std::abs(*refit.coef.intercept - *r.coef.intercept) < 1e-10);
      CHECK(r.converged);
    }
  }
}

TEST_CASE("selection is invariant to column permutation and sign flips") {
  std::mt19937_64 rng(5);
  for (Family family : {Family::Logistic, Family::Poisson, Family::Cox}) {
    CAPTURE(to_string(family));
    const Dataset d =
        random_dataset(family, 200, sparse_beta(8, {{1, 0.8}, {4, -0.7}, {6, 0.4}}), rng);
    const SelectionResult base = run_prosgpv(family, d);

    const std::vector<int> perm{7, 2, 4, 0, 6, 1, 5, 3};
    const SelectionResult permuted = run_prosgpv(family, d.columns(perm));
    std::vector<int> mapped;
    for (int k : permuted.final_set) mapped.push_back(perm[k]);
    std::sort(mapped.begin(), mapped.end());
    CHECK(mapped == base.final_set);

    Dataset flipped = d;
    flipped.x.col(1) *= -1.0;
    flipped.x.col(6) *= -1.0;
    const SelectionResult fr = run_prosgpv(family, flipped);
    CHECK(fr.final_set == base.final_set);
    for (int j : base.final_set) {
      const double sign = (j == 1 || j == 6) ? -1.0 : 1.0;
      CHECK(fr.coef.beta[j] == doctest::Approx(sign * base.coef.beta[j]).epsilon(1e-6));
    }
  }
}

TEST_CASE("empty candidate set yields the null model") {
  std::mt19937_64 rng(6);
  // Pure-noise Poisson data with a tiny sample: the criterion typically keeps nothing.
  for (int rep = 0; rep < 50; ++rep) {
    const Dataset d = random_dataset(Family::Poisson, 30, Eigen::VectorXd::Zero(4), rng);
    const SelectionResult r = run_prosgpv(Family::Poisson, d);
    if (!r.candidate_set.empty()) continue;
    CHECK(r.final_set.empty());
    CHECK(!r.stage2_fit);
    CHECK(!r.null_bound);
    CHECK(r.coef.beta.isZero(0.0));
    CHECK(*r.coef.intercept == doctest::Approx(std::log(d.y.mean())).epsilon(1e-8));
    return;
  }
  FAIL("no replication produced an empty candidate set");
}

TEST_CASE("Jeffreys refit applies to logistic models only") {
  std::mt19937_64 rng(7);
  const Dataset d = random_dataset(Family::Poisson, 40, random_beta(3, rng), rng);
  SelectionConfig config;
  config.jeffreys = true;
  CHECK_THROWS_AS(run_prosgpv(Family::Poisson, d, config), ParameterError);

  const Dataset b = random_dataset(Family::Logistic, 80, sparse_beta(4, {{0, 1.2}}), rng);
  const SelectionResult r = run_prosgpv(Family::Logistic, b, config);
  CHECK(r.final_fit.jeffreys);
  if (r.stage2_fit) CHECK(r.stage2_fit->jeffreys);
}

TEST_CASE("pure noise rarely survives screening") {
  std::mt19937_64 rng(8);
  int empty = 0;
  const int reps = 40;
  for (int rep = 0; rep < reps; ++rep) {
    const Dataset d = random_dataset(Family::Logistic, 400, Eigen::VectorXd::Zero(10), rng);
    if (run_prosgpv(Family::Logistic, d).final_set.empty()) ++empty;
  }
  CHECK(empty >= reps * 3 / 4);
}
