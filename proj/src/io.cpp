#include "prosgpv/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace prosgpv {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

bool is_missing(const std::string& field) {
  const std::string t = trim(field);
  return t.empty() || t == "NA" || t == "NaN" || t == "nan";
}

bool parse_number(const std::string& field, double& value) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  errno = 0;
  char* end = nullptr;
  value = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno != ERANGE && std::isfinite(value);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_with(double value, int digits) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*g", digits, value);
  return buffer;
}

nlohmann::ordered_json number_or_null(double value) {
  if (!std::isfinite(value)) return nullptr;
  return value;
}

std::string join_names(const std::vector<int>& index, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (k) out += ", ";
    out += names[index[k]];
  }
  return out.empty() ? "(none)" : out;
}

// Fixed-width text table with right-aligned numeric columns.
std::string text_table(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c == 0)
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      else
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
    }
    out << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out.str();
}

int index_of(const std::vector<int>& set, int j) {
  const auto it = std::find(set.begin(), set.end(), j);
  return it == set.end() ? -1 : static_cast<int>(it - set.begin());
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return static_cast<int>(c);
  std::string available;
  for (const auto& h : header) available += (available.empty() ? "" : ", ") + h;
  throw InvalidInput("column '" + name + "' not found; available: " + available);
}

CsvTable parse_csv(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_lines;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1, record_line = 1;
  bool in_quotes = false, quoted = false, any = false;
  std::size_t quote_line = 0;

  auto end_field = [&]() {
    record.push_back(quoted ? field : trim(field));
    field.clear();
    quoted = false;
  };
  auto end_record = [&]() {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty() && !any;
    if (!blank) {
      records.push_back(std::move(record));
      record_lines.push_back(record_line);
    }
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
          const char next = i + 1 < text.size() ? text[i + 1] : '\n';
          if (next != ',' && next != '\n' && next != '\r')
            throw ParseError("unexpected character after closing quote", line, record.size() + 1);
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!trim(field).empty())
          throw ParseError("quote inside an unquoted field", line, record.size() + 1);
        field.clear();
        in_quotes = quoted = any = true;
        quote_line = line;
        break;
      case ',':
        end_field();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", quote_line, record.size() + 1);
  if (any || !field.empty()) end_record();

  if (records.empty()) throw ParseError("empty input: expected a header row", 1, 1);
  CsvTable table;
  table.header = std::move(records[0]);
  const std::size_t width = table.header.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(records[r].size()),
                       record_lines[r], std::min(records[r].size(), width) + 1);
    table.rows.push_back(std::move(records[r]));
    table.lines.push_back(record_lines[r]);
  }
  std::set<std::string> seen;
  for (std::size_t c = 0; c < width; ++c)
    if (!table.header[c].empty() && !seen.insert(table.header[c]).second)
      throw ParseError("duplicate column name '" + table.header[c] + "'", record_lines[0], c + 1);
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  return parse_csv(in);
}

Dataset dataset_from_table(const CsvTable& table, Family family, const CsvSchema& schema) {
  std::vector<int> response_columns;
  if (family == Family::Cox) {
    response_columns = {table.column(schema.time), table.column(schema.status)};
  } else {
    response_columns = {table.column(schema.response)};
  }
  std::vector<int> predictors;
  for (int c = 0; c < static_cast<int>(table.header.size()); ++c) {
    if (std::find(response_columns.begin(), response_columns.end(), c) != response_columns.end())
      continue;
    if (std::find(schema.ignore.begin(), schema.ignore.end(), table.header[c]) !=
        schema.ignore.end())
      continue;
    if (table.header[c].empty())
      throw ParseError("predictor column without a name", 1, static_cast<std::size_t>(c) + 1);
    predictors.push_back(c);
  }
  if (predictors.empty()) throw InvalidInput("no predictor columns");
  if (table.rows.empty()) throw InvalidInput("no data rows");

  std::vector<int> used = predictors;
  used.insert(used.end(), response_columns.begin(), response_columns.end());
  std::vector<std::size_t> missing;
  for (std::size_t r = 0; r < table.rows.size(); ++r)
    for (int c : used)
      if (is_missing(table.rows[r][c])) {
        missing.push_back(table.lines[r]);
        break;
      }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k)
      list += (k ? ", " : "") + std::to_string(missing[k]);
    if (missing.size() > 20) list += ", ...";
    throw InvalidInput(std::to_string(missing.size()) + " row(s) with missing values at line(s) " +
                       list);
  }

  const int n = static_cast<int>(table.rows.size());
  const int p = static_cast<int>(predictors.size());
  auto number_at = [&](int r, int c) {
    double v;
    if (!parse_number(table.rows[r][c], v))
      throw ParseError("column '" + table.header[c] + "': cannot parse '" + table.rows[r][c] +
                           "' as a number",
                       table.lines[r], static_cast<std::size_t>(c) + 1);
    return v;
  };

  Eigen::MatrixXd x(n, p);
  std::vector<std::string> names;
  for (int k = 0; k < p; ++k) {
    names.push_back(table.header[predictors[k]]);
    for (int r = 0; r < n; ++r) x(r, k) = number_at(r, predictors[k]);
  }

  switch (family) {
    case Family::Logistic: {
      const int c = response_columns[0];
      std::set<std::string> levels;
      for (const auto& row : table.rows) levels.insert(trim(row[c]));
      Eigen::VectorXd y(n);
      const bool zero_one = std::all_of(levels.begin(), levels.end(), [](const std::string& s) {
        double v;
        return parse_number(s, v) && (v == 0.0 || v == 1.0);
      });
      if (zero_one) {
        for (int r = 0; r < n; ++r) y[r] = number_at(r, c);
      } else if (levels.size() == 2) {
        const std::string& low = *levels.begin();
        for (int r = 0; r < n; ++r) y[r] = trim(table.rows[r][c]) == low ? 0.0 : 1.0;
      } else {
        throw InvalidInput("binary response '" + table.header[c] + "' has " +
                           std::to_string(levels.size()) + " levels; expected 0/1 or two labels");
      }
      if (y.minCoeff() == y.maxCoeff())
        throw DegenerateResponse("binary response '" + table.header[c] + "' has a single class");
      return Dataset::binary(std::move(x), std::move(y), std::move(names));
    }
    case Family::Poisson: {
      Eigen::VectorXd y(n);
      for (int r = 0; r < n; ++r) y[r] = number_at(r, response_columns[0]);
      return Dataset::counts(std::move(x), std::move(y), std::move(names));
    }
    case Family::Cox: {
      Eigen::VectorXd time(n);
      Eigen::VectorXi status(n);
      for (int r = 0; r < n; ++r) {
        time[r] = number_at(r, response_columns[0]);
        const double s = number_at(r, response_columns[1]);
        if (s != 0.0 && s != 1.0)
          throw ParseError("status must be 0 or 1, found '" + table.rows[r][response_columns[1]] +
                               "'",
                           table.lines[r], static_cast<std::size_t>(response_columns[1]) + 1);
        status[r] = static_cast<int>(s);
      }
      return Dataset::survival(std::move(x), std::move(time), std::move(status),
                               std::move(names));
    }
  }
  throw ParameterError("unknown family");
}

Dataset load_csv(const std::filesystem::path& path, Family family, const CsvSchema& schema) {
  return dataset_from_table(read_csv(path), family, schema);
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema) {
  std::vector<std::string> header;
  for (const auto& name : data.names) header.push_back(quote_if_needed(name));
  if (data.kind == Family::Cox) {
    header.push_back(quote_if_needed(schema.time));
    header.push_back(quote_if_needed(schema.status));
  } else {
    header.push_back(quote_if_needed(schema.response));
  }
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.p(); ++j) out << (j ? "," : "") << format_exact(data.x(i, j));
    if (data.kind == Family::Cox)
      out << ',' << format_exact(data.time[i]) << ',' << data.status[i];
    else
      out << ',' << format_exact(data.y[i]);
    out << '\n';
  }
}

const std::vector<std::string>& spine_attribute_names() {
  static const std::vector<std::string> names{
      "pelvic_incidence", "pelvic_tilt",        "lumbar_lordosis_angle", "sacral_slope",
      "pelvic_radius",    "degree_spondylolisthesis", "pelvic_slope", "direct_tilt",
      "thoracic_slope",   "cervical_tilt",      "sacrum_angle",          "scoliosis_slope"};
  return names;
}

Dataset load_spine(const std::filesystem::path& path) {
  CsvTable raw = read_csv(path);
  CsvTable table;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < raw.header.size(); ++c)
    if (!trim(raw.header[c]).empty()) keep.push_back(c);
  for (std::size_t c : keep) table.header.push_back(trim(raw.header[c]));
  for (const auto& row : raw.rows) {
    std::vector<std::string> kept;
    for (std::size_t c : keep) kept.push_back(row[c]);
    table.rows.push_back(std::move(kept));
  }
  table.lines = raw.lines;

  const auto& attributes = spine_attribute_names();
  for (auto& h : table.header) {
    if (h.size() > 3 && h.compare(0, 3, "Col") == 0) {
      const int k = std::atoi(h.c_str() + 3);
      if (k >= 1 && k <= static_cast<int>(attributes.size()) && h == "Col" + std::to_string(k))
        h = attributes[k - 1];
    }
  }
  CsvSchema schema;
  schema.response.clear();
  for (const auto& h : table.header) {
    std::string lower = h;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "class_att" || lower == "class") schema.response = h;
  }
  if (schema.response.empty())
    throw InvalidInput("spine file has no class column (expected Class_att or class)");
  return dataset_from_table(table, Family::Logistic, schema);
}

std::string format_exact(double value) { return format_with(value, 17); }
std::string format_short(double value) { return format_with(value, 4); }

nlohmann::ordered_json select_report_json(const SelectionResult& r, const Dataset& data, bool jeffreys) {
  using json = nlohmann::ordered_json;
  const auto& names = data.names;
  json out;
  out["schema_version"] = 1;
  out["command"] = "select";
  out["family"] = std::string(to_string(r.family));
  out["n"] = data.n();
  out["p"] = data.p();
  out["jeffreys"] = jeffreys;
  json candidates = json::array(), final_set = json::array();
  for (int j : r.candidate_set) candidates.push_back(names[j]);
  for (int j : r.final_set) final_set.push_back(names[j]);
  out["candidate_set"] = candidates;
  out["final_set"] = final_set;

  json coefficients = json::array();
  const FitResult& fit = r.final_fit;
  if (fit.coef.intercept) {
    const double se = fit.intercept_se.value_or(std::nan(""));
    coefficients.push_back({{"name", "(Intercept)"},
                            {"estimate", number_or_null(*fit.coef.intercept)},
                            {"se", number_or_null(se)},
                            {"ci_lower", number_or_null(*fit.coef.intercept - kWaldZ * se)},
                            {"ci_upper", number_or_null(*fit.coef.intercept + kWaldZ * se)},
                            {"sgpv", nullptr}});
  }
  for (int j : r.final_set) {
    const int k = index_of(r.candidate_set, j);
    coefficients.push_back({{"name", names[j]},
                            {"estimate", number_or_null(fit.coef.beta[j])},
                            {"se", number_or_null(fit.se[j])},
                            {"ci_lower", number_or_null(fit.ci_lower[j])},
                            {"ci_upper", number_or_null(fit.ci_upper[j])},
                            {"sgpv", k >= 0 ? number_or_null(r.sgpvs[k]) : json(nullptr)}});
  }
  out["coefficients"] = coefficients;

  json screening = json::array();
  for (std::size_t k = 0; k < r.candidate_set.size(); ++k) {
    const int j = r.candidate_set[k];
    const FitResult& s2 = *r.stage2_fit;
    screening.push_back({{"name", names[j]},
                         {"estimate", number_or_null(s2.coef.beta[j])},
                         {"se", number_or_null(s2.se[j])},
                         {"ci_lower", number_or_null(s2.ci_lower[j])},
                         {"ci_upper", number_or_null(s2.ci_upper[j])},
                         {"sgpv", number_or_null(r.sgpvs[k])},
                         {"cutoff", number_or_null(r.cutoffs[k])},
                         {"selected", index_of(r.final_set, j) >= 0}});
  }
  out["screening"] = screening;
  out["null_bound"] = r.null_bound ? json(r.null_bound->delta()) : json(nullptr);
  out["lambda_gic"] = number_or_null(r.gic.lambda);

  const LassoPath& path = r.stage1;
  json summary;
  summary["n_lambda"] = path.size();
  summary["lambda_max"] = path.size() ? number_or_null(path.lambdas.front()) : json(nullptr);
  summary["lambda_last"] = path.size() ? number_or_null(path.lambdas.back()) : json(nullptr);
  summary["gic_index"] = r.gic.index;
  summary["df_at_gic"] = path.size() ? path.df[r.gic.index] : 0;
  summary["candidates_truncated"] = r.gic.truncated;
  out["stage1_path"] = summary;
  out["converged"] = r.converged;
  out["warnings"] = fit.warnings;
  return out;
}

std::string select_report_csv(const SelectionResult& r, const Dataset& data) {
  std::ostringstream out;
  out << "name,candidate,selected,sgpv,cutoff,stage2_estimate,stage2_se,estimate,se,ci_lower,"
         "ci_upper\n";
  const FitResult& fit = r.final_fit;
  if (fit.coef.intercept) {
    const double se = fit.intercept_se.value_or(std::nan(""));
    out << "(Intercept),0,1,NA,NA,NA,NA," << format_exact(*fit.coef.intercept) << ','
        << format_exact(se) << ',' << format_exact(*fit.coef.intercept - kWaldZ * se) << ','
        << format_exact(*fit.coef.intercept + kWaldZ * se) << '\n';
  }
  for (int j = 0; j < data.p(); ++j) {
    const int k = index_of(r.candidate_set, j);
    const bool selected = index_of(r.final_set, j) >= 0;
    out << quote_if_needed(data.names[j]) << ',' << (k >= 0) << ',' << selected << ','
        << (k >= 0 ? format_exact(r.sgpvs[k]) : "NA") << ','
        << (k >= 0 ? format_exact(r.cutoffs[k]) : "NA") << ','
        << (k >= 0 ? format_exact(r.stage2_fit->coef.beta[j]) : "NA") << ','
        << (k >= 0 ? format_exact(r.stage2_fit->se[j]) : "NA") << ','
        << format_exact(fit.coef.beta[j]) << ','
        << (selected ? format_exact(fit.se[j]) : "NA") << ','
        << (selected ? format_exact(fit.ci_lower[j]) : "NA") << ','
        << (selected ? format_exact(fit.ci_upper[j]) : "NA") << '\n';
  }
  return out.str();
}

std::string select_report_text(const SelectionResult& r, const Dataset& data) {
  std::ostringstream out;
  out << "family: " << to_string(r.family) << "  n = " << data.n() << "  p = " << data.p()
      << '\n';
  out << "lambda (GIC): " << format_short(r.gic.lambda) << "\n";
  out << "candidate set: " << join_names(r.candidate_set, data.names) << '\n';
  if (r.null_bound) out << "null bound: +/- " << format_short(r.null_bound->delta()) << '\n';
  out << "final set: " << join_names(r.final_set, data.names) << "\n\n";

  std::vector<std::vector<std::string>> rows;
  const FitResult& fit = r.final_fit;
  if (fit.coef.intercept) {
    const double se = fit.intercept_se.value_or(std::nan(""));
    rows.push_back({"(Intercept)", format_short(*fit.coef.intercept), format_short(se),
                    format_short(*fit.coef.intercept - kWaldZ * se),
                    format_short(*fit.coef.intercept + kWaldZ * se), ""});
  }
  for (int j : r.final_set) {
    const int k = index_of(r.candidate_set, j);
    rows.push_back({data.names[j], format_short(fit.coef.beta[j]), format_short(fit.se[j]),
                    format_short(fit.ci_lower[j]), format_short(fit.ci_upper[j]),
                    format_short(r.sgpvs[k])});
  }
  out << text_table({"term", "estimate", "se", "ci_lower", "ci_upper", "sgpv"}, rows);
  for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
  return out.str();
}

nlohmann::ordered_json fit_report_json(const FitResult& fit, const Dataset& data) {
  using json = nlohmann::ordered_json;
  json out;
  out["schema_version"] = 1;
  out["command"] = "fit";
  out["family"] = std::string(to_string(fit.family));
  out["n"] = data.n();
  out["p"] = data.p();
  out["jeffreys"] = fit.jeffreys;
  out["converged"] = fit.converged;
  out["iterations"] = fit.iterations;
  out["loss"] = number_or_null(fit.final_loss);
  json coefficients = json::array();
  if (fit.coef.intercept) {
    const double se = fit.intercept_se.value_or(std::nan(""));
    coefficients.push_back({{"name", "(Intercept)"},
                            {"estimate", number_or_null(*fit.coef.intercept)},
                            {"se", number_or_null(se)},
                            {"ci_lower", number_or_null(*fit.coef.intercept - kWaldZ * se)},
                            {"ci_upper", number_or_null(*fit.coef.intercept + kWaldZ * se)}});
  }
  for (int j : fit.subset)
    coefficients.push_back({{"name", data.names[j]},
                            {"estimate", number_or_null(fit.coef.beta[j])},
                            {"se", number_or_null(fit.se[j])},
                            {"ci_lower", number_or_null(fit.ci_lower[j])},
                            {"ci_upper", number_or_null(fit.ci_upper[j])}});
  out["coefficients"] = coefficients;
  out["warnings"] = fit.warnings;
  return out;
}

std::string fit_report_csv(const FitResult& fit, const Dataset& data) {
  std::ostringstream out;
  out << "name,estimate,se,ci_lower,ci_upper\n";
  if (fit.coef.intercept) {
    const double se = fit.intercept_se.value_or(std::nan(""));
    out << "(Intercept)," << format_exact(*fit.coef.intercept) << ',' << format_exact(se) << ','
        << format_exact(*fit.coef.intercept - kWaldZ * se) << ','
        << format_exact(*fit.coef.intercept + kWaldZ * se) << '\n';
  }
  for (int j : fit.subset)
    out << quote_if_needed(data.names[j]) << ',' << format_exact(fit.coef.beta[j]) << ','
        << format_exact(fit.se[j]) << ',' << format_exact(fit.ci_lower[j]) << ','
        << format_exact(fit.ci_upper[j]) << '\n';
  return out.str();
}

std::string fit_report_text(const FitResult& fit, const Dataset& data) {
  std::ostringstream out;
  out << "family: " << to_string(fit.family) << "  n = " << data.n() << "  p = " << data.p()
      << (fit.jeffreys ? "  (Jeffreys prior)" : "") << '\n';
  out << "converged: " << (fit.converged ? "yes" : "no") << " after " << fit.iterations
      << " iterations\n\n";
  std::vector<std::vector<std::string>> rows;
  if (fit.coef.intercept) {
    const double se = fit.intercept_se.value_or(std::nan(""));
    rows.push_back({"(Intercept)", format_short(*fit.coef.intercept), format_short(se),
                    format_short(*fit.coef.intercept - kWaldZ * se),
                    format_short(*fit.coef.intercept + kWaldZ * se)});
  }
  for (int j : fit.subset)
    rows.push_back({data.names[j], format_short(fit.coef.beta[j]), format_short(fit.se[j]),
                    format_short(fit.ci_lower[j]), format_short(fit.ci_upper[j])});
  out << text_table({"term", "estimate", "se", "ci_lower", "ci_upper"}, rows);
  for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
  return out.str();
}

std::string replications_csv(const std::vector<ReplicationRecord>& records, bool timing) {
  std::ostringstream out;
  out << "scenario,method,seed,exact_capture,power,type1,pfdr,pfndr,mae,score,runtime_s\n";
  for (const auto& rec : records) {
    const MetricsRecord& m = rec.metrics;
    out << quote_if_needed(rec.scenario) << ',' << rec.method << ',' << rec.seed << ','
        << format_exact(m.exact_capture) << ',' << format_exact(m.power) << ','
        << format_exact(m.type1) << ',' << format_exact(m.pfdr) << ','
        << format_exact(m.pfndr) << ',' << format_exact(m.mae) << ','
        << format_exact(m.score) << ',' << (timing ? format_exact(m.runtime) : "NA") << '\n';
  }
  return out.str();
}

std::string aggregates_csv(const std::vector<AggregateRow>& rows, bool timing) {
  std::ostringstream out;
  out << "scenario,method,replications,failures,capture_rate,capture_ci_lower,capture_ci_upper,"
         "power,type1,pfdr,pfndr,mae_median,mae_q1,mae_q3,score_mean,score_median,score_q1,"
         "score_q3,runtime_mean_s\n";
  for (const auto& a : rows) {
    out << quote_if_needed(a.scenario) << ',' << a.method << ',' << a.replications << ','
        << a.failures;
    for (double v : {a.capture_rate, a.capture_ci_lower, a.capture_ci_upper, a.power, a.type1,
                     a.pfdr, a.pfndr, a.mae_median, a.mae_q1, a.mae_q3, a.score_mean,
                     a.score_median, a.score_q1, a.score_q3})
      out << ',' << format_exact(v);
    out << ',' << (timing ? format_exact(a.runtime_mean) : "NA") << '\n';
  }
  return out.str();
}

std::string presets_table() {
  std::vector<std::vector<std::string>> rows;
  for (const Preset& p : presets()) {
    const Scenario& s = p.scenario;
    auto range = [](int lo, int hi) {
      return lo == hi ? std::to_string(lo) : std::to_string(lo) + ":" + std::to_string(hi);
    };
    rows.push_back({s.name, std::string(to_string(s.family)), range(p.n_min, p.n_max),
                    range(p.p_min, p.p_max), std::to_string(s.s),
                    "[" + format_short(s.beta_l) + ", " + format_short(s.beta_u) + "]",
                    format_short(s.intercept), format_short(s.rho), format_short(s.sigma)});
  }
  return text_table({"preset", "family", "n", "p", "s", "beta", "intercept", "rho", "sigma"},
                    rows);
}

namespace {

std::string model_names(const std::vector<int>& model, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t k = 0; k < model.size(); ++k) out += (k ? ";" : "") + names[model[k]];
  return out;
}

}  // namespace

std::string split_outcomes_csv(const SplitStudyResult& result) {
  std::ostringstream out;
  out << "split,seed,method,model_size,auc,model\n";
  for (const SplitOutcome& o : result.outcomes) {
    out << o.split << ',' << o.seed << ',' << o.method << ',';
    if (o.failed)
      out << "NA,NA,NA\n";
    else
      out << o.model.size() << ',' << format_exact(o.auc) << ','
          << quote_if_needed(model_names(o.model, result.names)) << '\n';
  }
  return out.str();
}

nlohmann::ordered_json split_summary_json(const SplitStudyResult& result) {
  using json = nlohmann::ordered_json;
  json out;
  out["schema_version"] = 1;
  out["command"] = "spine";
  out["train_fraction"] = kTrainFraction;
  out["variables"] = result.names;
  json methods = json::array();
  for (const SplitMethodSummary& s : result.summaries) {
    json inclusion = json::object();
    for (std::size_t j = 0; j < result.names.size(); ++j)
      inclusion[result.names[j]] = s.inclusion[j];
    json model = json::array();
    for (int j : s.most_frequent_model) model.push_back(result.names[j]);
    methods.push_back({{"method", s.method},
                       {"completed", s.completed},
                       {"failures", s.failures},
                       {"median_model_size", number_or_null(s.median_size)},
                       {"mean_model_size", number_or_null(s.mean_size)},
                       {"model_size_counts", s.size_counts},
                       {"median_auc", number_or_null(s.median_auc)},
                       {"mean_auc", number_or_null(s.mean_auc)},
                       {"most_frequent_model", model},
                       {"most_frequent_model_count", s.most_frequent_count},
                       {"inclusion_frequency", inclusion}});
  }
  out["methods"] = methods;
  return out;
}

std::string split_summary_text(const SplitStudyResult& result) {
  std::vector<std::vector<std::string>> rows;
  for (const SplitMethodSummary& s : result.summaries)
    rows.push_back({s.method, std::to_string(s.completed), std::to_string(s.failures),
                    format_short(s.median_size), format_short(s.median_auc),
                    format_short(s.mean_auc),
                    model_names(s.most_frequent_model, result.names) + " (" +
                        std::to_string(s.most_frequent_count) + ")"});
  return text_table({"method", "splits", "failed", "median_size", "median_auc", "mean_auc",
                     "most_frequent_model"},
                    rows);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << contents;
    if (!out.flush()) throw InvalidInput("cannot write '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InvalidInput("cannot write '" + path.string() + "'");
  }
}

}  // namespace prosgpv
