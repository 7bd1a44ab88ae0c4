#include "prosgpv/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "parallel.hpp"
#include "prosgpv/fitting.hpp"
#include "prosgpv/lasso_path.hpp"
#include "prosgpv/sgpv.hpp"

namespace prosgpv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPoissonMeanLimit = 1e12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Scenario make_preset(std::string name, Family family, int n, int p, int s, double lo, double hi,
                     double intercept) {
  Scenario sc;
  sc.name = std::move(name);
  sc.family = family;
  sc.n = n;
  sc.p = p;
  sc.s = s;
  sc.beta_l = lo;
  sc.beta_u = hi;
  sc.intercept = intercept;
  return sc;
}

}  // namespace

void Scenario::validate() const {
  if (n < 2) throw ParameterError("scenario n must be at least 2");
  if (p < 1) throw ParameterError("scenario p must be at least 1");
  if (fixed_beta) {
    if (fixed_beta->size() != p) throw ParameterError("fixed coefficient vector must have length p");
  } else {
    if (s < 0 || s > p) throw ParameterError("scenario needs 0 <= s <= p");
    if (!(beta_l > 0.0) || !(beta_l <= beta_u))
      throw ParameterError("scenario needs 0 < beta_l <= beta_u");
  }
  if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("scenario rho must lie in [0, 1)");
  if (!(sigma > 0.0)) throw ParameterError("scenario sigma must be positive");
  if (!(weibull_scale > 0.0) || !(weibull_shape > 0.0))
    throw ParameterError("Weibull scale and shape must be positive");
  if (!(censor_rate > 0.0)) throw ParameterError("censoring rate must be positive");
  if (!std::isfinite(intercept)) throw ParameterError("scenario intercept must be finite");
  if (replications < 1) throw ParameterError("replications must be at least 1");
}

std::string Scenario::id() const {
  return name + ":n=" + std::to_string(n) + ":p=" + std::to_string(p);
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = [] {
    std::vector<Preset> t;
    const struct {
      const char* family;
      Family kind;
      double lo, hi, intercept;
      int high_n, high_p_min, high_p_max;
    } rows[] = {
        {"logistic", Family::Logistic, 0.5, 1.5, 0.0, 200, 200, 800},
        {"poisson", Family::Poisson, 0.1, 0.4, 2.0, 120, 120, 480},
        {"cox", Family::Cox, 0.2, 0.8, 0.0, 80, 80, 320},
    };
    for (const auto& r : rows) {
      const std::string f = r.family;
      t.push_back({make_preset(f + "-low-s", r.kind, 400, 20, 4, r.lo, r.hi, r.intercept), 40,
                   800, 20, 20});
      t.push_back({make_preset(f + "-low-d", r.kind, 400, 20, 14, r.lo, r.hi, r.intercept), 40,
                   800, 20, 20});
      t.push_back({make_preset(f + "-high-s", r.kind, r.high_n, r.high_p_min, 4, r.lo, r.hi,
                               r.intercept),
                   r.high_n, r.high_n, r.high_p_min, r.high_p_max});
    }
    return t;
  }();
  return table;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : presets()) names.push_back(p.scenario.name);
  return names;
}

Scenario preset(std::string_view name) {
  for (const auto& p : presets())
    if (p.scenario.name == name) return p.scenario;
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ParameterError("unknown preset '" + std::string(name) + "'; valid presets: " + valid);
}

Scenario illustration_scenario() {
  Scenario sc;
  sc.name = "poisson-illustration";
  sc.family = Family::Poisson;
  sc.n = 100;
  sc.p = 5;
  sc.s = 1;
  sc.rho = 0.5;
  sc.sigma = 1.0;
  sc.intercept = 0.0;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
  beta[2] = 0.25;
  sc.fixed_beta = beta;
  sc.beta_l = sc.beta_u = 0.25;
  return sc;
}

Eigen::VectorXd make_true_beta(int p, int s, double beta_l, double beta_u,
                               std::mt19937_64& rng) {
  if (s < 0 || s > p) throw ParameterError("make_true_beta needs 0 <= s <= p");
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (s == 0) return beta;
  std::vector<int> positions(p);
  std::iota(positions.begin(), positions.end(), 0);
  std::shuffle(positions.begin(), positions.end(), rng);
  std::vector<double> signs(s, -1.0);
  std::fill(signs.begin(), signs.begin() + (s + 1) / 2, 1.0);
  std::shuffle(signs.begin(), signs.end(), rng);
  for (int k = 0; k < s; ++k) {
    const double magnitude = s == 1 ? beta_u : beta_l + (beta_u - beta_l) * k / (s - 1);
    beta[positions[k]] = signs[k] * magnitude;
  }
  return beta;
}

Eigen::MatrixXd draw_design(int n, int p, double rho, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double innovation = sigma * std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = sigma * z(rng);
    for (int j = 1; j < p; ++j) x(i, j) = rho * x(i, j - 1) + innovation * z(rng);
  }
  return x;
}

Dataset draw_response(Family family, Eigen::MatrixXd x, const Eigen::VectorXd& beta,
                      const Scenario& scenario, std::mt19937_64& rng) {
  if (x.cols() != beta.size()) throw DimensionError("design and coefficient sizes differ");
  const int n = static_cast<int>(x.rows());
  const Eigen::VectorXd z = (x * beta).array() + scenario.intercept;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (family == Family::Logistic) {
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = unif(rng) < 1.0 / (1.0 + std::exp(-z[i])) ? 1.0 : 0.0;
    return Dataset::binary(std::move(x), std::move(y));
  }
  if (family == Family::Poisson) {
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      const double mean = std::exp(z[i]);
      if (!(mean <= kPoissonMeanLimit))
        throw ParameterError("Poisson mean exceeds 1e12; signals are too large for a count model");
      y[i] = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
    }
    return Dataset::counts(std::move(x), std::move(y));
  }
  Eigen::VectorXd time(n);
  Eigen::VectorXi status(n);
  std::exponential_distribution<double> censor(scenario.censor_rate);
  for (int i = 0; i < n; ++i) {
    double u = unif(rng);
    while (u == 0.0) u = unif(rng);
    const double t = std::pow(-std::log(u) / (scenario.weibull_scale * std::exp(z[i])),
                              1.0 / scenario.weibull_shape);
    const double c = censor(rng);
    time[i] = std::min(t, c);
    status[i] = t <= c ? 1 : 0;
  }
  return Dataset::survival(std::move(x), std::move(time), std::move(status));
}

double auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  const int n = static_cast<int>(scores.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] < scores[b]; });
  // Midranks over tied scores.
  std::vector<double> rank(n);
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * (i + j) + 1.0;
    for (int k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double positives = 0.0, rank_sum = 0.0;
  for (int i = 0; i < n; ++i)
    if (labels[i] == 1.0) {
      positives += 1.0;
      rank_sum += rank[i];
    }
  const double negatives = n - positives;
  if (positives == 0.0 || negatives == 0.0) return kNaN;
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

MetricsRecord compute_metrics(const Eigen::VectorXd& true_beta, const std::vector<int>& selected,
                              const Coefficients& estimate, Family family, const Dataset* test) {
  const int p = static_cast<int>(true_beta.size());
  if (estimate.beta.size() != p) throw DimensionError("estimate and truth sizes differ");
  std::vector<char> chosen(p, 0);
  for (int j : selected) {
    if (j < 0 || j >= p) throw DimensionError("selected index out of range");
    chosen[j] = 1;
  }
  int truth = 0, hits = 0, false_hits = 0, size = 0;
  for (int j = 0; j < p; ++j) {
    const bool signal = true_beta[j] != 0.0;
    truth += signal;
    size += chosen[j];
    if (chosen[j] && signal) ++hits;
    if (chosen[j] && !signal) ++false_hits;
  }
  const int missed = truth - hits;
  MetricsRecord m;
  m.power = truth > 0 ? static_cast<double>(hits) / truth : 1.0;
  m.type1 = p - truth > 0 ? static_cast<double>(false_hits) / (p - truth) : 0.0;
  m.pfdr = static_cast<double>(false_hits) / std::max(size, 1);
  m.pfndr = static_cast<double>(missed) / std::max(p - size, 1);
  m.exact_capture = (missed == 0 && false_hits == 0) ? 1.0 : 0.0;
  m.mae = (estimate.beta - true_beta).cwiseAbs().sum() / p;
  if (test && family != Family::Cox) {
    const Eigen::VectorXd eta = linear_predictor(*test, estimate);
    if (family == Family::Logistic) {
      m.score = auc(eta, test->y);
    } else {
      const Eigen::VectorXd mean = eta.array().exp();
      m.score = std::sqrt((mean - test->y).squaredNorm() / test->n());
    }
  }
  return m;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ProSgpv: return "prosgpv";
    case Method::ProSgpvGvif: return "prosgpv-gvif";
    case Method::ProSgpvJeffreys: return "prosgpv-jeffreys";
    case Method::LassoMin: return "lasso-min";
    case Method::LassoGic: return "lasso-gic";
    case Method::Oracle: return "oracle";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::ProSgpv, Method::ProSgpvGvif, Method::ProSgpvJeffreys, Method::LassoMin,
                   Method::LassoGic, Method::Oracle})
    if (to_string(m) == name) return m;
  throw ParameterError("unknown method '" + std::string(name) +
                       "' (expected prosgpv, prosgpv-gvif, prosgpv-jeffreys, lasso-min, "
                       "lasso-gic or oracle)");
}

std::uint64_t replication_seed(std::uint64_t seed, int rep) {
  return splitmix64(splitmix64(seed) ^ splitmix64(0x5eedULL + static_cast<std::uint64_t>(rep)));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Replicate {
  Eigen::VectorXd beta;
  std::optional<Dataset> train;
  std::optional<Dataset> test;
};

Replicate draw_replicate(const Scenario& sc, std::mt19937_64& rng) {
  Replicate r;
  r.beta = sc.fixed_beta ? *sc.fixed_beta : make_true_beta(sc.p, sc.s, sc.beta_l, sc.beta_u, rng);
  r.train = draw_response(sc.family, draw_design(sc.n, sc.p, sc.rho, sc.sigma, rng), r.beta, sc,
                          rng);
  if (sc.family != Family::Cox)
    r.test = draw_response(sc.family, draw_design(sc.n, sc.p, sc.rho, sc.sigma, rng), r.beta, sc,
                           rng);
  return r;
}

std::vector<int> support(const Eigen::VectorXd& beta) {
  std::vector<int> s;
  for (int j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) s.push_back(j);
  return s;
}

ReplicationRecord failed_record(const Scenario& sc, std::string method, std::uint64_t seed,
                                std::string error) {
  ReplicationRecord rec;
  rec.scenario = sc.id();
  rec.method = std::move(method);
  rec.family = sc.family;
  rec.seed = seed;
  rec.failed = true;
  rec.error = std::move(error);
  rec.metrics.exact_capture = rec.metrics.power = rec.metrics.type1 = kNaN;
  rec.metrics.pfdr = rec.metrics.pfndr = rec.metrics.mae = rec.metrics.score = kNaN;
  rec.metrics.runtime = kNaN;
  return rec;
}

// Runs every method on one replication. The lasso path on the training data is
// solved once and shared; its cost is charged to each method that uses it.
std::vector<ReplicationRecord> run_replication(const Scenario& sc, int rep,
                                               const GridOptions& options) {
  const std::uint64_t seed = replication_seed(sc.seed, rep);
  std::vector<ReplicationRecord> out;
  std::mt19937_64 rng(seed);
  Replicate data;
  try {
    data = draw_replicate(sc, rng);
  } catch (const std::exception& e) {
    for (Method m : options.methods)
      out.push_back(failed_record(sc, std::string(to_string(m)), seed, e.what()));
    return out;
  }
  const Dataset& train = *data.train;
  const Dataset* test = data.test ? &*data.test : nullptr;

  std::optional<LassoPath> path;
  std::string path_error;
  double path_seconds = 0.0;
  auto shared_path = [&]() -> const LassoPath& {
    if (!path && path_error.empty()) {
      const auto start = Clock::now();
      try {
        path = solve_path(sc.family, train);
      } catch (const std::exception& e) {
        path_error = e.what();
      }
      path_seconds = seconds_since(start);
    }
    if (!path) throw NumericalError("lasso path failed: " + path_error);
    return *path;
  };

  for (Method m : options.methods) {
    const std::string name(to_string(m));
    const auto start = Clock::now();
    try {
      std::vector<int> selected;
      Coefficients estimate;
      double extra = 0.0;
      switch (m) {
        case Method::ProSgpv:
        case Method::ProSgpvGvif:
        case Method::ProSgpvJeffreys: {
          SelectionConfig config;
          config.bound = m == Method::ProSgpvGvif ? NullBound::Gvif : NullBound::Constant;
          config.jeffreys = m == Method::ProSgpvJeffreys;
          const LassoPath& stage1 = shared_path();
          extra = path_seconds;
          const SelectionResult r = run_prosgpv(sc.family, train, stage1, config);
          selected = r.final_set;
          estimate = r.coef;
          break;
        }
        case Method::LassoGic: {
          LassoPath stage1 = shared_path();
          extra = path_seconds;
          const GicSelection g = select_lambda_gic(stage1);
          selected = stage1.active_sets[g.index];
          estimate = stage1.coefs[g.index];
          break;
        }
        case Method::LassoMin: {
          LassoPath stage1 = shared_path();
          extra = path_seconds;
          const CvResult cv =
              select_lambda_cv(sc.family, train, stage1, options.cv_folds, splitmix64(seed + 1));
          selected = stage1.active_sets[cv.index];
          estimate = stage1.coefs[cv.index];
          break;
        }
        case Method::Oracle: {
          selected = support(data.beta);
          estimate = fit_mle(sc.family, train, selected).coef;
          break;
        }
      }
      ReplicationRecord rec;
      rec.scenario = sc.id();
      rec.method = name;
      rec.family = sc.family;
      rec.seed = seed;
      rec.metrics = compute_metrics(data.beta, selected, estimate, sc.family, test);
      rec.metrics.runtime = seconds_since(start) + extra;
      out.push_back(std::move(rec));
    } catch (const std::exception& e) {
      out.push_back(failed_record(sc, name, seed, e.what()));
    }
  }
  return out;
}

struct BoundRule {
  const char* name;
  double (*scale)(int n, int p);
};

const BoundRule kBoundRules[] = {
    {"bound-se", [](int, int) { return 1.0; }},
    {"bound-se-x-sqrt-log-n-p",
     [](int n, int p) { return std::sqrt(std::log(static_cast<double>(n) / p)); }},
    {"bound-se-div-sqrt-log-n-p",
     [](int n, int p) { return 1.0 / std::sqrt(std::log(static_cast<double>(n) / p)); }},
    {"bound-se-x-sqrt-n-p-half",
     [](int n, int p) { return std::sqrt(static_cast<double>(n) / p) / 2.0; }},
    {"bound-zero", [](int, int) { return 0.0; }},
};

std::vector<ReplicationRecord> run_bound_replication(const Scenario& sc, int rep) {
  const std::uint64_t seed = replication_seed(sc.seed, rep);
  std::vector<ReplicationRecord> out;
  std::mt19937_64 rng(seed);
  try {
    const auto start = Clock::now();
    const Replicate data = draw_replicate(sc, rng);
    const Dataset& train = *data.train;
    LassoPath path = solve_path(sc.family, train);
    const std::vector<int> candidate = select_lambda_gic(path).candidate_set;
    std::optional<FitResult> fit;
    double se_bar = 0.0;
    if (!candidate.empty()) {
      fit = fit_mle(sc.family, train, candidate);
      for (int j : candidate) se_bar += fit->se[j];
      se_bar /= static_cast<double>(candidate.size());
    }
    const double shared = seconds_since(start);
    for (const BoundRule& rule : kBoundRules) {
      const auto rule_start = Clock::now();
      try {
        std::vector<int> selected;
        if (fit) {
          const double delta = se_bar * rule.scale(sc.n, sc.p);
          if (!std::isfinite(delta) || delta < 0.0)
            throw ParameterError("null bound is undefined for n <= p");
          for (int j : candidate)
            if (std::abs(fit->coef.beta[j]) - kWaldZ * fit->se[j] > delta) selected.push_back(j);
        }
        const FitResult refit = fit_mle(sc.family, train, selected);
        ReplicationRecord rec;
        rec.scenario = sc.id();
        rec.method = rule.name;
        rec.family = sc.family;
        rec.seed = seed;
        rec.metrics = compute_metrics(data.beta, selected, refit.coef, sc.family,
                                      data.test ? &*data.test : nullptr);
        rec.metrics.runtime = shared + seconds_since(rule_start);
        out.push_back(std::move(rec));
      } catch (const std::exception& e) {
        out.push_back(failed_record(sc, rule.name, seed, e.what()));
      }
    }
  } catch (const std::exception& e) {
    for (const BoundRule& rule : kBoundRules)
      out.push_back(failed_record(sc, rule.name, seed, e.what()));
  }
  return out;
}

template <typename RunOne>
GridResult run_all(const std::vector<Scenario>& scenarios, int parallelism, RunOne&& run_one) {
  if (parallelism < 1) throw ParameterError("parallelism must be at least 1");
  std::vector<std::pair<int, int>> tasks;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    scenarios[s].validate();
    for (int r = 0; r < scenarios[s].replications; ++r) tasks.emplace_back(int(s), r);
  }
  std::vector<std::vector<ReplicationRecord>> results(tasks.size());
  detail::parallel_for(static_cast<int>(tasks.size()), parallelism, [&](int t) {
    results[t] = run_one(scenarios[tasks[t].first], tasks[t].second);
  });
  GridResult out;
  for (auto& batch : results)
    for (auto& rec : batch) out.records.push_back(std::move(rec));
  out.aggregates = aggregate(out.records);
  return out;
}

}  // namespace

GridResult run_grid(const std::vector<Scenario>& scenarios, const GridOptions& options) {
  if (options.methods.empty()) throw ParameterError("at least one method is required");
  if (options.cv_folds < 2) throw ParameterError("cv_folds must be at least 2");
  for (const Scenario& sc : scenarios)
    for (Method m : options.methods)
      if (m == Method::ProSgpvJeffreys && sc.family != Family::Logistic)
        throw ParameterError("the Jeffreys-prior method applies to logistic scenarios only");
  return run_all(scenarios, options.parallelism,
                 [&](const Scenario& sc, int rep) { return run_replication(sc, rep, options); });
}

GridResult run_bound_comparison(const std::vector<Scenario>& scenarios, int parallelism) {
  for (const Scenario& sc : scenarios)
    if (sc.family != Family::Logistic)
      throw ParameterError("the null-bound comparison uses logistic scenarios");
  return run_all(scenarios, parallelism,
                 [](const Scenario& sc, int rep) { return run_bound_replication(sc, rep); });
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

std::vector<AggregateRow> aggregate(const std::vector<ReplicationRecord>& records) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const ReplicationRecord*>> groups;
  for (const auto& rec : records) {
    const auto key = std::make_pair(rec.scenario, rec.method);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&rec);
  }
  std::vector<AggregateRow> rows;
  for (const auto& key : order) {
    const auto& group = groups[key];
    AggregateRow row;
    row.scenario = key.first;
    row.method = key.second;
    row.replications = static_cast<int>(group.size());
    std::vector<double> capture, power, type1, pfdr, pfndr, mae, score, runtime;
    for (const ReplicationRecord* rec : group) {
      if (rec->failed) {
        ++row.failures;
        continue;
      }
      const MetricsRecord& m = rec->metrics;
      capture.push_back(m.exact_capture);
      power.push_back(m.power);
      type1.push_back(m.type1);
      pfdr.push_back(m.pfdr);
      pfndr.push_back(m.pfndr);
      mae.push_back(m.mae);
      if (std::isfinite(m.score)) score.push_back(m.score);
      runtime.push_back(m.runtime);
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    };
    row.capture_rate = mean(capture);
    if (!capture.empty()) {
      const double half =
          kWaldZ * std::sqrt(row.capture_rate * (1.0 - row.capture_rate) / capture.size());
      row.capture_ci_lower = std::max(0.0, row.capture_rate - half);
      row.capture_ci_upper = std::min(1.0, row.capture_rate + half);
    } else {
      row.capture_ci_lower = row.capture_ci_upper = kNaN;
    }
    row.power = mean(power);
    row.type1 = mean(type1);
    row.pfdr = mean(pfdr);
    row.pfndr = mean(pfndr);
    row.mae_median = quantile(mae, 0.5);
    row.mae_q1 = quantile(mae, 0.25);
    row.mae_q3 = quantile(mae, 0.75);
    if (!group.empty() && group.front()->family == Family::Poisson && !score.empty()) {
      const double cap = quantile(score, 0.99);
      for (double& v : score) v = std::min(v, cap);
    }
    row.score_mean = mean(score);
    row.score_median = quantile(score, 0.5);
    row.score_q1 = quantile(score, 0.25);
    row.score_q3 = quantile(score, 0.75);
    row.runtime_mean = mean(runtime);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace prosgpv
