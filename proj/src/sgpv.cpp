#include "prosgpv/sgpv.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace prosgpv {

IntervalNull::IntervalNull(double delta) : delta_(delta) {
  if (!(delta > 0.0) || !std::isfinite(delta))
    throw ParameterError("null bound half-width must be positive and finite");
}

double sgpv(const Interval& estimate, const IntervalNull& null) {
  const double lo = estimate.lower;
  const double hi = estimate.upper;
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw MalformedInterval("interval bounds must be finite");
  if (lo > hi)
    throw MalformedInterval("interval lower bound " + std::to_string(lo) +
                            " exceeds upper bound " + std::to_string(hi));
  const double width = hi - lo;
  if (width == 0.0) return (lo >= null.lower() && lo <= null.upper()) ? 1.0 : 0.0;
  const double overlap = std::max(0.0, std::min(hi, null.upper()) - std::max(lo, null.lower()));
  return overlap / width * std::max(width / (2.0 * null.width()), 1.0);
}

std::string_view to_string(NullBound bound) {
  return bound == NullBound::Constant ? "constant" : "gvif";
}

NullBound parse_null_bound(std::string_view name) {
  if (name == "constant") return NullBound::Constant;
  if (name == "gvif") return NullBound::Gvif;
  throw ParameterError("unknown null bound '" + std::string(name) +
                       "' (expected constant or gvif)");
}

IntervalNull null_bound_se(const FitResult& stage2, std::span<const int> candidate_set) {
  if (candidate_set.empty()) throw ParameterError("null bound needs a nonempty candidate set");
  double total = 0.0;
  for (int j : candidate_set) total += stage2.se[j];
  return IntervalNull(total / static_cast<double>(candidate_set.size()));
}

IntervalNull null_bound_gvif(const FitResult& stage2, const Dataset& data,
                             std::span<const int> candidate_set) {
  if (candidate_set.empty()) throw ParameterError("null bound needs a nonempty candidate set");
  const Eigen::VectorXd inflation = gvif(data, candidate_set);
  double total = 0.0;
  for (std::size_t k = 0; k < candidate_set.size(); ++k)
    total += stage2.se[candidate_set[k]] / inflation[k];
  return IntervalNull(total / static_cast<double>(candidate_set.size()));
}

std::vector<int> sgpv_screen(const FitResult& fit, std::span<const int> candidate_set,
                             const IntervalNull& null, Eigen::VectorXd* sgpvs) {
  std::vector<int> kept;
  if (sgpvs) sgpvs->resize(candidate_set.size());
  for (std::size_t k = 0; k < candidate_set.size(); ++k) {
    const int j = candidate_set[k];
    const double value = sgpv({fit.ci_lower[j], fit.ci_upper[j]}, null);
    if (sgpvs) (*sgpvs)[k] = value;
    if (value == 0.0) kept.push_back(j);
  }
  return kept;
}

SelectionResult run_prosgpv(Family family, const Dataset& data, const SelectionConfig& config) {
  if (config.jeffreys && family != Family::Logistic)
    throw ParameterError("the Jeffreys-prior refit applies to logistic models only");
  return run_prosgpv(family, data, solve_path(family, data, config.path), config);
}

SelectionResult run_prosgpv(Family family, const Dataset& data, LassoPath stage1,
                            const SelectionConfig& config) {
  if (config.jeffreys && family != Family::Logistic)
    throw ParameterError("the Jeffreys-prior refit applies to logistic models only");
  if (stage1.family != family || stage1.n != data.n() || stage1.p != data.p())
    throw InvalidInput("stage-one path does not belong to this dataset");
  SelectionResult out;
  out.family = family;

  out.stage1 = std::move(stage1);
  if (out.stage1.gic.size() != out.stage1.size()) compute_gic(out.stage1, data);
  out.gic = select_lambda_gic(out.stage1);
  out.candidate_set = out.gic.candidate_set;

  FitOptions options;
  options.jeffreys = config.jeffreys;
  const std::vector<int> none;
  if (out.candidate_set.empty()) {
    out.final_fit = fit_mle(family, data, none, options);
    out.coef = out.final_fit.coef;
    out.converged = out.final_fit.converged;
    return out;
  }

  try {
    out.stage2_fit = fit_mle(family, data, out.candidate_set, options);
  } catch (const NumericalError& e) {
    throw SelectionError(e.what(), 2, out.candidate_set);
  }
  const FitResult& fit = *out.stage2_fit;
  out.null_bound = config.bound == NullBound::Gvif
                       ? null_bound_gvif(fit, data, out.candidate_set)
                       : null_bound_se(fit, out.candidate_set);
  out.cutoffs.resize(out.candidate_set.size());
  for (std::size_t k = 0; k < out.candidate_set.size(); ++k)
    out.cutoffs[k] = kWaldZ * fit.se[out.candidate_set[k]] + out.null_bound->delta();
  out.final_set = sgpv_screen(fit, out.candidate_set, *out.null_bound, &out.sgpvs);

  try {
    out.final_fit = fit_mle(family, data, out.final_set, options);
  } catch (const NumericalError& e) {
    throw SelectionError(e.what(), 2, out.candidate_set);
  }
  out.coef = out.final_fit.coef;
  out.converged = fit.converged && out.final_fit.converged;
  return out;
}

}  // namespace prosgpv
