#include "prosgpv/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prosgpv {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Logistic:
      return "logistic";
    case Family::Poisson:
      return "poisson";
    case Family::Cox:
      return "cox";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "logistic" || name == "binomial") return Family::Logistic;
  if (name == "poisson") return Family::Poisson;
  if (name == "cox") return Family::Cox;
  throw ParameterError("unknown family '" + std::string(name) +
                       "' (expected logistic, poisson or cox)");
}

double cumulant(Family family, double theta) {
  switch (family) {
    case Family::Logistic:
      // log(1 + e^theta) without overflow
      return std::max(theta, 0.0) + std::log1p(std::exp(-std::abs(theta)));
    case Family::Poisson:
      return std::exp(theta);
    case Family::Cox:
      break;
  }
  throw ParameterError("cumulant is not defined for the Cox family");
}

double inverse_link(Family family, double eta) {
  switch (family) {
    case Family::Logistic: {
      const double e = std::clamp(eta, -kLogisticEtaClamp, kLogisticEtaClamp);
      return 1.0 / (1.0 + std::exp(-e));
    }
    case Family::Poisson:
      return std::exp(eta);
    case Family::Cox:
      break;
  }
  throw ParameterError("inverse link is not defined for the Cox family");
}

double variance_function(Family family, double eta) {
  const double mu = inverse_link(family, eta);
  return family == Family::Logistic ? mu * (1.0 - mu) : mu;
}

std::vector<std::string> default_names(int p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (int j = 0; j < p; ++j) names.push_back("V" + std::to_string(j + 1));
  return names;
}

namespace {

Dataset make_dataset(Family kind, Eigen::MatrixXd x, std::vector<std::string> names) {
  Dataset d;
  d.kind = kind;
  if (names.empty()) names = default_names(static_cast<int>(x.cols()));
  d.x = std::move(x);
  d.names = std::move(names);
  return d;
}

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

Dataset Dataset::binary(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<std::string> names) {
  Dataset d = make_dataset(Family::Logistic, std::move(x), std::move(names));
  d.y = std::move(y);
  d.validate();
  return d;
}

Dataset Dataset::counts(Eigen::MatrixXd x, Eigen::VectorXd y, std::vector<std::string> names) {
  Dataset d = make_dataset(Family::Poisson, std::move(x), std::move(names));
  d.y = std::move(y);
  d.validate();
  return d;
}

Dataset Dataset::survival(Eigen::MatrixXd x, Eigen::VectorXd time, Eigen::VectorXi status,
                          std::vector<std::string> names) {
  Dataset d = make_dataset(Family::Cox, std::move(x), std::move(names));
  d.time = std::move(time);
  d.status = std::move(status);
  d.validate();
  return d;
}

void Dataset::validate() const {
  const int rows = n();
  if (rows < 2) throw InvalidInput("dataset needs at least 2 observations");
  if (static_cast<int>(names.size()) != p())
    throw DimensionError("expected " + std::to_string(p()) + " column names, got " +
                         std::to_string(names.size()));
  if (!x.allFinite()) throw InvalidInput("predictor matrix contains missing or non-finite values");
  for (int j = 0; j < p(); ++j) {
    if (!(sample_sd(x.col(j)) > 0.0))
      throw InvalidInput("column '" + names[j] + "' is constant");
  }
  switch (kind) {
    case Family::Logistic:
      if (y.size() != rows) throw DimensionError("response length does not match rows");
      for (int i = 0; i < rows; ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
          throw InvalidInput("binary response must be 0/1 (row " + std::to_string(i + 1) + ")");
      break;
    case Family::Poisson:
      if (y.size() != rows) throw DimensionError("response length does not match rows");
      for (int i = 0; i < rows; ++i)
        if (!(y[i] >= 0.0) || y[i] != std::floor(y[i]) || !std::isfinite(y[i]))
          throw InvalidInput("count response must be a nonnegative integer (row " +
                             std::to_string(i + 1) + ")");
      break;
    case Family::Cox: {
      if (time.size() != rows || status.size() != rows)
        throw DimensionError("time/status length does not match rows");
      for (int i = 0; i < rows; ++i) {
        if (!(time[i] > 0.0) || !std::isfinite(time[i]))
          throw InvalidInput("survival time must be positive (row " + std::to_string(i + 1) + ")");
        if (status[i] != 0 && status[i] != 1)
          throw InvalidInput("status must be 0/1 (row " + std::to_string(i + 1) + ")");
      }
      if (status.sum() == 0) throw DegenerateResponse("survival data contain no events");
      break;
    }
  }
}

Dataset Dataset::rows(std::span<const int> index) const {
  Dataset d;
  d.kind = kind;
  d.names = names;
  d.standardized = standardized;
  d.column_means = column_means;
  d.column_sds = column_sds;
  const int m = static_cast<int>(index.size());
  d.x.resize(m, p());
  if (kind == Family::Cox) {
    d.time.resize(m);
    d.status.resize(m);
  } else {
    d.y.resize(m);
  }
  for (int r = 0; r < m; ++r) {
    const int i = index[r];
    if (i < 0 || i >= n()) throw DimensionError("row index out of range");
    d.x.row(r) = x.row(i);
    if (kind == Family::Cox) {
      d.time[r] = time[i];
      d.status[r] = status[i];
    } else {
      d.y[r] = y[i];
    }
  }
  d.validate();
  return d;
}

Dataset Dataset::columns(std::span<const int> index) const {
  Dataset d = *this;
  const int q = static_cast<int>(index.size());
  d.x.resize(n(), q);
  d.names.clear();
  if (standardized) {
    d.column_means.resize(q);
    d.column_sds.resize(q);
  }
  for (int k = 0; k < q; ++k) {
    const int j = index[k];
    if (j < 0 || j >= p()) throw DimensionError("column index out of range");
    d.x.col(k) = x.col(j);
    d.names.push_back(names[j]);
    if (standardized) {
      d.column_means[k] = column_means[j];
      d.column_sds[k] = column_sds[j];
    }
  }
  return d;
}

Dataset standardize(const Dataset& data) {
  Dataset d = data;
  d.column_means = data.x.colwise().mean().transpose();
  d.column_sds.resize(data.p());
  for (int j = 0; j < data.p(); ++j) {
    d.column_sds[j] = sample_sd(data.x.col(j));
    d.x.col(j) = (data.x.col(j).array() - d.column_means[j]) / d.column_sds[j];
  }
  d.standardized = true;
  return d;
}

Coefficients Coefficients::zeros(Family family, int p) {
  Coefficients c;
  if (has_intercept(family)) c.intercept = 0.0;
  c.beta = Eigen::VectorXd::Zero(p);
  return c;
}

Eigen::VectorXd Coefficients::packed() const {
  if (!intercept) return beta;
  Eigen::VectorXd out(beta.size() + 1);
  out[0] = *intercept;
  out.tail(beta.size()) = beta;
  return out;
}

Coefficients Coefficients::unpack(Family family, const Eigen::VectorXd& packed) {
  Coefficients c;
  if (has_intercept(family)) {
    c.intercept = packed[0];
    c.beta = packed.tail(packed.size() - 1);
  } else {
    c.beta = packed;
  }
  return c;
}

Eigen::MatrixXd design_matrix(const Dataset& data, std::optional<std::span<const int>> subset) {
  const int offset = has_intercept(data.kind) ? 1 : 0;
  const int q = subset ? static_cast<int>(subset->size()) : data.p();
  Eigen::MatrixXd z(data.n(), q + offset);
  if (offset) z.col(0).setOnes();
  for (int k = 0; k < q; ++k) {
    const int j = subset ? (*subset)[k] : k;
    if (j < 0 || j >= data.p()) throw DimensionError("subset index out of range");
    z.col(k + offset) = data.x.col(j);
  }
  return z;
}

namespace {

void check_dims(Family family, const Dataset& data, const Coefficients& coef) {
  if (family != data.kind)
    throw InvalidInput("family " + std::string(to_string(family)) +
                       " does not match the dataset's response type " +
                       std::string(to_string(data.kind)));
  if (coef.beta.size() != data.p())
    throw DimensionError("coefficient length " + std::to_string(coef.beta.size()) +
                         " does not match " + std::to_string(data.p()) + " predictors");
  if (has_intercept(family) != coef.intercept.has_value())
    throw DimensionError(has_intercept(family) ? "GLM coefficients need an intercept"
                                               : "Cox coefficients carry no intercept");
  if (!coef.beta.allFinite() || (coef.intercept && !std::isfinite(*coef.intercept)))
    throw InvalidInput("coefficients must be finite");
}

}  // namespace

Eigen::VectorXd linear_predictor(const Dataset& data, const Coefficients& coef) {
  Eigen::VectorXd eta = data.x * coef.beta;
  if (coef.intercept) eta.array() += *coef.intercept;
  return eta;
}

Likelihood::Likelihood(Family family, const Dataset& data) : family_(family), n_(data.n()) {
  if (family != data.kind)
    throw InvalidInput("family " + std::string(to_string(family)) +
                       " does not match the dataset's response type " +
                       std::string(to_string(data.kind)));
  if (family != Family::Cox) {
    y_ = data.y;
    return;
  }
  y_ = data.status.cast<double>();
  auto& rs = risk_;
  rs.order.resize(n_);
  std::iota(rs.order.begin(), rs.order.end(), 0);
  std::stable_sort(rs.order.begin(), rs.order.end(),
                   [&](int a, int b) { return data.time[a] < data.time[b]; });
  rs.group_of.assign(n_, 0);
  for (int pos = 0; pos < n_; ++pos) {
    const int i = rs.order[pos];
    if (pos == 0 || data.time[i] != data.time[rs.order[pos - 1]]) {
      rs.group_start.push_back(pos);
      rs.group_events.push_back(0);
    }
    rs.group_of[i] = static_cast<int>(rs.group_start.size()) - 1;
    rs.group_events.back() += data.status[i];
  }
}

void Likelihood::check_eta(const Eigen::VectorXd& eta) const {
  if (eta.size() != n_) throw DimensionError("linear predictor length does not match rows");
  if (!eta.allFinite()) throw EvaluationOverflow("linear predictor is not finite");
  if (family_ == Family::Poisson && eta.maxCoeff() > 700.0)
    throw EvaluationOverflow("Poisson mean exp(eta) overflows");
}

double Likelihood::loss(const Eigen::VectorXd& eta) const {
  check_eta(eta);
  if (family_ == Family::Logistic) {
    double total = 0.0;
    for (int i = 0; i < n_; ++i) total += cumulant(Family::Logistic, eta[i]) - y_[i] * eta[i];
    return total / n_;
  }
  if (family_ == Family::Poisson) {
    return (eta.array().exp() - y_.array() * eta.array()).sum() / n_;
  }
  const auto& rs = risk_;
  const double shift = eta.maxCoeff();
  const int groups = static_cast<int>(rs.group_start.size());
  double acc = 0.0;
  double total = 0.0;
  int end = n_;
  for (int g = groups - 1; g >= 0; --g) {
    for (int pos = rs.group_start[g]; pos < end; ++pos) {
      const int i = rs.order[pos];
      acc += std::exp(eta[i] - shift);
      if (y_[i] != 0.0) total += eta[i];
    }
    end = rs.group_start[g];
    if (rs.group_events[g] > 0) total -= rs.group_events[g] * (shift + std::log(acc));
  }
  return -total / n_;
}

void Likelihood::working(const Eigen::VectorXd& eta, Eigen::VectorXd& residual,
                         Eigen::VectorXd& weight) const {
  check_eta(eta);
  residual.resize(n_);
  weight.resize(n_);
  if (family_ != Family::Cox) {
    for (int i = 0; i < n_; ++i) {
      const double mu = inverse_link(family_, eta[i]);
      residual[i] = y_[i] - mu;
      weight[i] = family_ == Family::Logistic ? mu * (1.0 - mu) : mu;
    }
    return;
  }
  const auto& rs = risk_;
  const double shift = eta.maxCoeff();
  const int groups = static_cast<int>(rs.group_start.size());
  Eigen::VectorXd w = (eta.array() - shift).exp();
  std::vector<double> s(groups);
  double acc = 0.0;
  int end = n_;
  for (int g = groups - 1; g >= 0; --g) {
    for (int pos = rs.group_start[g]; pos < end; ++pos) acc += w[rs.order[pos]];
    end = rs.group_start[g];
    s[g] = acc;
  }
  std::vector<double> a(groups), b(groups);
  double ca = 0.0, cb = 0.0;
  for (int g = 0; g < groups; ++g) {
    ca += rs.group_events[g] / s[g];
    cb += rs.group_events[g] / (s[g] * s[g]);
    a[g] = ca;
    b[g] = cb;
  }
  for (int i = 0; i < n_; ++i) {
    const int g = rs.group_of[i];
    residual[i] = y_[i] - w[i] * a[g];
    weight[i] = w[i] * a[g] - w[i] * w[i] * b[g];
  }
}

Eigen::VectorXd Likelihood::gradient(const Eigen::MatrixXd& design,
                                     const Eigen::VectorXd& eta) const {
  Eigen::VectorXd r, w;
  working(eta, r, w);
  return -(design.transpose() * r) / static_cast<double>(n_);
}

Eigen::MatrixXd Likelihood::hessian(const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& eta) const {
  const int q = static_cast<int>(design.cols());
  if (family_ != Family::Cox) {
    Eigen::VectorXd r, w;
    working(eta, r, w);
    Eigen::MatrixXd h = design.transpose() * w.asDiagonal() * design;
    h /= static_cast<double>(n_);
    return h.selfadjointView<Eigen::Lower>();
  }
  check_eta(eta);
  // H = sum_g d_g (M2_g / S_g - m_g m_g') with risk-set sums S_g, M1_g, M2_g and
  // m_g = M1_g / S_g. The first term equals X' diag(w_i c_i) X where c_i sums
  // d_g / S_g over the risk sets containing i.
  const auto& rs = risk_;
  const double shift = eta.maxCoeff();
  const int groups = static_cast<int>(rs.group_start.size());
  Eigen::VectorXd w(n_);
  for (int i = 0; i < n_; ++i) w[i] = std::exp(eta[i] - shift);
  std::vector<double> ratio(groups, 0.0);
  int event_groups = 0;
  for (int g = 0; g < groups; ++g) event_groups += rs.group_events[g] > 0;
  Eigen::MatrixXd means(event_groups, q);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(q);
  double s = 0.0;
  int end = n_;
  int row = event_groups;
  for (int g = groups - 1; g >= 0; --g) {
    for (int pos = rs.group_start[g]; pos < end; ++pos) {
      const int i = rs.order[pos];
      s += w[i];
      m1.noalias() += w[i] * design.row(i).transpose();
    }
    end = rs.group_start[g];
    const int d = rs.group_events[g];
    if (d == 0) continue;
    ratio[g] = d / s;
    means.row(--row) = std::sqrt(static_cast<double>(d)) * m1.transpose() / s;
  }
  Eigen::VectorXd scaled(n_);
  double cumulative = 0.0;
  for (int g = 0; g < groups; ++g) {
    cumulative += ratio[g];
    const int stop = g + 1 < groups ? rs.group_start[g + 1] : n_;
    for (int pos = rs.group_start[g]; pos < stop; ++pos) {
      const int i = rs.order[pos];
      scaled[i] = w[i] * cumulative;
    }
  }
  Eigen::MatrixXd h = design.transpose() * scaled.asDiagonal() * design;
  h.noalias() -= means.transpose() * means;
  h /= static_cast<double>(n_);
  Eigen::MatrixXd full = h.selfadjointView<Eigen::Lower>();
  return full;
}

double loss(Family family, const Dataset& data, const Coefficients& coef) {
  check_dims(family, data, coef);
  return Likelihood(family, data).loss(linear_predictor(data, coef));
}

Eigen::VectorXd gradient(Family family, const Dataset& data, const Coefficients& coef) {
  check_dims(family, data, coef);
  return Likelihood(family, data).gradient(design_matrix(data), linear_predictor(data, coef));
}

Eigen::MatrixXd hessian(Family family, const Dataset& data, const Coefficients& coef) {
  check_dims(family, data, coef);
  return Likelihood(family, data).hessian(design_matrix(data), linear_predictor(data, coef));
}

}  // namespace prosgpv
