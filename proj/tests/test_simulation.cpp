#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "prosgpv/simulation.hpp"

using namespace prosgpv;

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same_metrics(const MetricsRecord& a, const MetricsRecord& b) {
  return same(a.exact_capture, b.exact_capture) && same(a.power, b.power) &&
         same(a.type1, b.type1) && same(a.pfdr, b.pfdr) && same(a.pfndr, b.pfndr) &&
         same(a.mae, b.mae) && same(a.score, b.score);
}

}  // namespace

TEST_CASE("true coefficients: equally spaced magnitudes with balanced signs") {
  std::mt19937_64 rng(1);
  SUBCASE("s = 4 on [0.5, 1.5]") {
    const Eigen::VectorXd b = make_true_beta(20, 4, 0.5, 1.5, rng);
    std::vector<double> mags;
    int positive = 0;
    for (int j = 0; j < 20; ++j)
      if (b[j] != 0.0) {
        mags.push_back(std::abs(b[j]));
        positive += b[j] > 0;
      }
    std::sort(mags.begin(), mags.end());
    REQUIRE(mags.size() == 4);
    CHECK(mags[0] == doctest::Approx(0.5));
    CHECK(mags[1] == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(mags[2] == doctest::Approx(1.1667).epsilon(1e-4));
    CHECK(mags[3] == doctest::Approx(1.5));
    CHECK(positive == 2);
  }
  SUBCASE("a single signal takes the upper magnitude") {
    const Eigen::VectorXd b = make_true_beta(10, 1, 0.5, 1.5, rng);
    CHECK(b.cwiseAbs().sum() == 1.5);
    CHECK(b.maxCoeff() == 1.5);
  }
  SUBCASE("s = p leaves no zeros and splits signs 7/7") {
    const Eigen::VectorXd b = make_true_beta(14, 14, 0.1, 0.4, rng);
    CHECK((b.array() != 0.0).all());
    CHECK((b.array() > 0.0).count() == 7);
  }
  SUBCASE("odd s gives the extra sign to the positives") {
    const Eigen::VectorXd b = make_true_beta(10, 5, 0.2, 0.8, rng);
    CHECK((b.array() > 0.0).count() == 3);
    CHECK((b.array() < 0.0).count() == 2);
  }
  SUBCASE("positions vary across draws") {
    std::vector<int> first_positions;
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd b = make_true_beta(20, 1, 1.0, 1.0, rng);
      int pos;
      b.cwiseAbs().maxCoeff(&pos);
      first_positions.push_back(pos);
    }
    std::sort(first_positions.begin(), first_positions.end());
    CHECK(std::unique(first_positions.begin(), first_positions.end()) - first_positions.begin() > 5);
  }
  CHECK_THROWS_AS(make_true_beta(3, 4, 0.5, 1.5, rng), ParameterError);
}

TEST_CASE("design covariance matches the autoregressive structure") {
  std::mt19937_64 rng(2);
  const int n = 50000, p = 5;
  const Eigen::MatrixXd x = draw_design(n, p, 0.35, 2.0, rng);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      CHECK(std::abs(cov(i, j) - 4.0 * std::pow(0.35, std::abs(i - j))) < 0.05 * 4.0);
  CHECK(std::abs(cov(0, 0) - 4.0) < 0.1);
  CHECK(std::abs(cov(0, 1) - 1.4) < 0.1);

  const Eigen::MatrixXd ind = draw_design(20000, 3, 0.0, 1.0, rng);
  const double r = (ind.col(0).array() * ind.col(1).array()).mean();
  CHECK(std::abs(r) < 0.03);
}

TEST_CASE("response generators") {
  std::mt19937_64 rng(3);
  Scenario sc;
  SUBCASE("logistic at z = 0 is a fair coin") {
    const Dataset d =
        draw_response(Family::Logistic, draw_design(1000, 2, 0.35, 2.0, rng),
                      Eigen::VectorXd::Zero(2), sc, rng);
    CHECK(d.y.mean() >= 0.45);
    CHECK(d.y.mean() <= 0.55);
  }
  SUBCASE("Cox event times at z = 0 are exponential with rate 2") {
    Scenario no_censor = sc;
    no_censor.censor_rate = 1e-12;
    const Dataset d = draw_response(Family::Cox, draw_design(10000, 1, 0.35, 2.0, rng),
                                    Eigen::VectorXd::Zero(1), no_censor, rng);
    CHECK(std::abs(d.time.mean() - 0.5) < 0.02);
  }
  SUBCASE("censoring fraction at z = 0 is tau / (lambda + tau)") {
    const Dataset d = draw_response(Family::Cox, draw_design(10000, 1, 0.35, 2.0, rng),
                                    Eigen::VectorXd::Zero(1), sc, rng);
    const double censored = 1.0 - d.status.cast<double>().mean();
    CHECK(std::abs(censored - 0.2 / 2.2) < 0.02);
  }
  SUBCASE("Poisson means follow exp(z)") {
    Scenario shifted = sc;
    shifted.intercept = 2.0;
    const Dataset d = draw_response(Family::Poisson, draw_design(20000, 1, 0.35, 2.0, rng),
                                    Eigen::VectorXd::Zero(1), shifted, rng);
    CHECK(std::abs(d.y.mean() - std::exp(2.0)) < 0.1);
  }
  SUBCASE("Poisson overflow is a parameterization error") {
    Scenario huge = sc;
    huge.intercept = 30.0;
    CHECK_THROWS_AS(draw_response(Family::Poisson, draw_design(5, 1, 0.35, 2.0, rng),
                                  Eigen::VectorXd::Zero(1), huge, rng),
                    ParameterError);
  }
}

TEST_CASE("metrics on hand-built selections") {
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(20);
  truth[1] = 1.0;
  truth[5] = -0.5;
  truth[9] = 0.8;
  truth[13] = -1.2;
  Coefficients exact;
  exact.intercept = 0.0;
  exact.beta = truth;
  SUBCASE("exact selection") {
    const MetricsRecord m = compute_metrics(truth, {1, 5, 9, 13}, exact, Family::Logistic);
    CHECK(m.power == 1.0);
    CHECK(m.type1 == 0.0);
    CHECK(m.pfdr == 0.0);
    CHECK(m.pfndr == 0.0);
    CHECK(m.exact_capture == 1.0);
    CHECK(m.mae == 0.0);
  }
  SUBCASE("empty selection") {
    Coefficients zero = Coefficients::zeros(Family::Logistic, 20);
    const MetricsRecord m = compute_metrics(truth, {}, zero, Family::Logistic);
    CHECK(m.power == 0.0);
    CHECK(m.pfdr == 0.0);
    CHECK(m.pfndr == doctest::Approx(0.2));
    CHECK(m.exact_capture == 0.0);
    CHECK(m.mae == doctest::Approx(3.5 / 20));
  }
  SUBCASE("one false discovery and one miss") {
    const MetricsRecord m = compute_metrics(truth, {1, 5, 9, 2}, exact, Family::Logistic);
    CHECK(m.power == 0.75);
    CHECK(m.type1 == doctest::Approx(1.0 / 16));
    CHECK(m.pfdr == 0.25);
    CHECK(m.pfndr == doctest::Approx(1.0 / 16));
    CHECK(m.exact_capture == 0.0);
  }
  SUBCASE("exact capture iff full power and no type I error") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 500; ++rep) {
      std::vector<int> s;
      for (int j = 0; j < 20; ++j)
        if (std::bernoulli_distribution(0.2)(rng) || (truth[j] != 0.0 && rep % 3 == 0))
          s.push_back(j);
      const MetricsRecord m = compute_metrics(truth, s, exact, Family::Poisson);
      CHECK((m.exact_capture == 1.0) == (m.power == 1.0 && m.type1 == 0.0));
      for (double v : {m.power, m.type1, m.pfdr, m.pfndr}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("AUC by rank statistic") {
  Eigen::VectorXd labels(6);
  labels << 0, 0, 0, 1, 1, 1;
  Eigen::VectorXd separated(6);
  separated << 0.1, 0.2, 0.3, 0.7, 0.8, 0.9;
  CHECK(auc(separated, labels) == 1.0);
  CHECK(auc(-separated, labels) == 0.0);
  CHECK(auc(Eigen::VectorXd::Constant(6, 0.4), labels) == 0.5);
  Eigen::VectorXd mixed(6);
  mixed << 0.1, 0.5, 0.3, 0.2, 0.8, 0.9;
  // Positive-negative pairs ordered correctly: 7 of 9.
  CHECK(auc(mixed, labels) == doctest::Approx(7.0 / 9.0));
  CHECK(std::isnan(auc(separated, Eigen::VectorXd::Ones(6))));
}

TEST_CASE("presets") {
  const auto names = preset_names();
  REQUIRE(names.size() == 9);
  CHECK(names.front() == "logistic-low-s");
  const Scenario pl = preset("poisson-low-d");
  CHECK(pl.family == Family::Poisson);
  CHECK(pl.s == 14);
  CHECK(pl.beta_l == 0.1);
  CHECK(pl.beta_u == 0.4);
  CHECK(pl.intercept == 2.0);
  const Scenario ch = preset("cox-high-s");
  CHECK(ch.n == 80);
  CHECK(ch.beta_l == 0.2);
  CHECK(ch.beta_u == 0.8);
  CHECK(preset("logistic-high-s").n == 200);
  for (const auto& p : presets()) {
    CHECK(p.scenario.rho == 0.35);
    CHECK(p.scenario.sigma == 2.0);
    p.scenario.validate();
  }
  try {
    preset("gaussian-low-s");
    FAIL("expected rejection");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("cox-high-s") != std::string::npos);
  }
  const Scenario il = illustration_scenario();
  CHECK(il.fixed_beta->size() == 5);
  CHECK((*il.fixed_beta)[2] == 0.25);
}

TEST_CASE("scenario validation") {
  Scenario sc;
  sc.s = 30;
  CHECK_THROWS_AS(sc.validate(), ParameterError);
  sc = Scenario{};
  sc.rho = 1.0;
  CHECK_THROWS_AS(sc.validate(), ParameterError);
  sc = Scenario{};
  sc.beta_l = 2.0;
  CHECK_THROWS_AS(sc.validate(), ParameterError);
}

TEST_CASE("quantiles interpolate linearly") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({4, 1, 3, 2}, 0.25) == 1.75);
  CHECK(quantile({7}, 0.9) == 7);
  CHECK(std::isnan(quantile({}, 0.5)));
}

TEST_CASE("grid bookkeeping and determinism across thread counts") {
  Scenario a = preset("logistic-low-s");
  a.n = 100;
  a.replications = 10;
  a.seed = 11;
  Scenario b = preset("poisson-low-s");
  b.n = 100;
  b.replications = 10;
  b.seed = 12;
  GridOptions serial;
  serial.methods = {Method::ProSgpv, Method::LassoMin};
  const GridResult one = run_grid({a, b}, serial);
  CHECK(one.records.size() == 40);
  CHECK(one.aggregates.size() == 4);
  CHECK(one.aggregates[0].scenario == a.id());
  CHECK(one.aggregates[0].method == "prosgpv");
  CHECK(one.aggregates[1].method == "lasso-min");
  CHECK(one.aggregates[2].scenario == b.id());

  GridOptions threaded = serial;
  threaded.parallelism = 8;
  const GridResult eight = run_grid({a, b}, threaded);
  REQUIRE(eight.records.size() == one.records.size());
  for (std::size_t k = 0; k < one.records.size(); ++k) {
    CHECK(eight.records[k].seed == one.records[k].seed);
    CHECK(eight.records[k].method == one.records[k].method);
    CHECK(same_metrics(eight.records[k].metrics, one.records[k].metrics));
  }
  for (const AggregateRow& row : one.aggregates) {
    CHECK(row.capture_ci_lower >= 0.0);
    CHECK(row.capture_ci_upper <= 1.0);
    CHECK(row.capture_ci_lower <= row.capture_rate);
    CHECK(row.capture_rate <= row.capture_ci_upper);
  }

  Scenario c = a;
  c.seed = 99;
  const GridResult other = run_grid({c}, serial);
  bool differs = false;
  for (std::size_t k = 0; k < other.records.size(); ++k)
    differs = differs || !same_metrics(other.records[k].metrics, one.records[k].metrics);
  CHECK(differs);
}

TEST_CASE("oracle method scores perfectly on support") {
  for (const char* name : {"logistic-low-s", "poisson-low-s", "cox-low-s"}) {
    Scenario sc = preset(name);
    sc.n = 150;
    sc.replications = 5;
    GridOptions options;
    options.methods = {Method::Oracle};
    const GridResult r = run_grid({sc}, options);
    for (const ReplicationRecord& rec : r.records) {
      REQUIRE_FALSE(rec.failed);
      CHECK(rec.metrics.exact_capture == 1.0);
      CHECK(rec.metrics.power == 1.0);
      CHECK(rec.metrics.type1 == 0.0);
      CHECK(rec.metrics.pfdr == 0.0);
      CHECK(rec.metrics.pfndr == 0.0);
    }
    CHECK(r.aggregates[0].capture_rate == 1.0);
    CHECK(r.aggregates[0].capture_ci_upper == 1.0);
  }
}

TEST_CASE("failed replications are counted, not fatal") {
  Scenario sc = preset("poisson-low-s");
  sc.intercept = 30.0;
  sc.replications = 3;
  const GridResult r = run_grid({sc});
  CHECK(r.records.size() == 6);
  for (const auto& rec : r.records) {
    CHECK(rec.failed);
    CHECK(rec.error.find("1e12") != std::string::npos);
  }
  CHECK(r.aggregates[0].failures == 3);
  CHECK(std::isnan(r.aggregates[0].capture_rate));
}

TEST_CASE("Jeffreys method is restricted to logistic scenarios") {
  GridOptions options;
  options.methods = {Method::ProSgpvJeffreys};
  CHECK_THROWS_AS(run_grid({preset("cox-low-s")}, options), ParameterError);
  CHECK(parse_method("lasso-gic") == Method::LassoGic);
  CHECK_THROWS_AS(parse_method("bess"), ParameterError);
}

TEST_CASE("null-bound comparison screens one candidate fit five ways") {
  Scenario sc = preset("logistic-low-s");
  sc.n = 200;
  sc.replications = 4;
  const GridResult r = run_bound_comparison({sc});
  CHECK(r.records.size() == 20);
  CHECK(r.aggregates.size() == 5);
  for (const auto& rec : r.records) CHECK_FALSE(rec.failed);
  // Larger bounds can only drop variables: power is ordered by bound size.
  double power_zero = 0, power_se = 0, power_wide = 0;
  for (const auto& row : r.aggregates) {
    if (row.method == "bound-zero") power_zero = row.power;
    if (row.method == "bound-se") power_se = row.power;
    if (row.method == "bound-se-x-sqrt-n-p-half") power_wide = row.power;
  }
  CHECK(power_zero >= power_se);
  CHECK(power_se >= power_wide);
  CHECK_THROWS_AS(run_bound_comparison({preset("cox-low-s")}), ParameterError);
}
