#include "prosgpv/spine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "parallel.hpp"
#include "prosgpv/lasso_path.hpp"
#include "prosgpv/simulation.hpp"

namespace prosgpv {

void SplitStudyConfig::validate() const {
  if (splits < 1) throw ParameterError("splits must be positive");
  if (parallelism < 1) throw ParameterError("parallelism must be positive");
  if (cv_folds < 2) throw ParameterError("cv_folds must be at least 2");
}

namespace {

const char* const kMethods[] = {"prosgpv", "lasso-min"};

std::vector<SplitOutcome> run_split(const Dataset& data, const SplitStudyConfig& config,
                                    int split) {
  const std::uint64_t seed = replication_seed(config.seed, split);
  std::vector<SplitOutcome> out(2);
  for (int m = 0; m < 2; ++m) {
    out[m].split = split;
    out[m].seed = seed;
    out[m].method = kMethods[m];
  }
  auto fail_all = [&](const std::string& what) {
    for (auto& o : out) {
      o.failed = true;
      o.error = what;
      o.auc = std::nan("");
    }
  };

  std::mt19937_64 rng(seed);
  std::vector<int> order(data.n());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(std::lround(kTrainFraction * data.n()));
  std::vector<int> train_rows(order.begin(), order.begin() + n_train);
  std::vector<int> test_rows(order.begin() + n_train, order.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  std::optional<Dataset> train, test;
  std::optional<LassoPath> path;
  try {
    train = data.rows(train_rows);
    test = data.rows(test_rows);
    path = solve_path(Family::Logistic, *train);
  } catch (const std::exception& e) {
    fail_all(e.what());
    return out;
  }

  auto record = [&](SplitOutcome& o, std::vector<int> model, const Coefficients& coef) {
    o.model = std::move(model);
    o.auc = auc(linear_predictor(*test, coef), test->y);
  };
  try {
    SelectionConfig selection;
    selection.bound = config.bound;
    const SelectionResult r = run_prosgpv(Family::Logistic, *train, *path, selection);
    record(out[0], r.final_set, r.coef);
  } catch (const std::exception& e) {
    out[0].failed = true;
    out[0].error = e.what();
    out[0].auc = std::nan("");
  }
  try {
    const CvResult cv = select_lambda_cv(Family::Logistic, *train, *path, config.cv_folds,
                                         replication_seed(seed, 1));
    record(out[1], path->active_sets[cv.index], path->coefs[cv.index]);
  } catch (const std::exception& e) {
    out[1].failed = true;
    out[1].error = e.what();
    out[1].auc = std::nan("");
  }
  return out;
}

SplitMethodSummary summarize(const std::string& method, const std::vector<SplitOutcome>& all,
                             int p) {
  SplitMethodSummary s;
  s.method = method;
  s.size_counts.assign(p + 1, 0);
  s.inclusion.assign(p, 0.0);
  std::vector<double> sizes, aucs;
  std::map<std::vector<int>, int> models;
  for (const auto& o : all) {
    if (o.method != method) continue;
    if (o.failed) {
      ++s.failures;
      continue;
    }
    ++s.completed;
    sizes.push_back(static_cast<double>(o.model.size()));
    if (std::isfinite(o.auc)) aucs.push_back(o.auc);
    ++s.size_counts[o.model.size()];
    for (int j : o.model) s.inclusion[j] += 1.0;
    ++models[o.model];
  }
  const double nan = std::nan("");
  s.median_size = quantile(sizes, 0.5);
  s.mean_size = sizes.empty() ? nan : std::accumulate(sizes.begin(), sizes.end(), 0.0) / sizes.size();
  s.median_auc = quantile(aucs, 0.5);
  s.mean_auc = aucs.empty() ? nan : std::accumulate(aucs.begin(), aucs.end(), 0.0) / aucs.size();
  if (s.completed > 0)
    for (double& v : s.inclusion) v /= s.completed;
  for (const auto& [model, count] : models) {
    const bool better =
        count > s.most_frequent_count ||
        (count == s.most_frequent_count && model.size() < s.most_frequent_model.size());
    if (better) {
      s.most_frequent_model = model;
      s.most_frequent_count = count;
    }
  }
  return s;
}

}  // namespace

SplitStudyResult run_split_study(const Dataset& data, const SplitStudyConfig& config) {
  config.validate();
  if (data.kind != Family::Logistic)
    throw ParameterError("split study needs a binary response");
  std::vector<std::vector<SplitOutcome>> per_split(config.splits);
  detail::parallel_for(config.splits, config.parallelism,
                       [&](int split) { per_split[split] = run_split(data, config, split); });
  SplitStudyResult result;
  result.names = data.names;
  for (auto& block : per_split)
    for (auto& o : block) result.outcomes.push_back(std::move(o));
  for (const char* method : kMethods)
    result.summaries.push_back(summarize(method, result.outcomes, data.p()));
  return result;
}

}  // namespace prosgpv
