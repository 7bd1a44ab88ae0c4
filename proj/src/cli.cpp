#include "prosgpv/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "prosgpv/fitting.hpp"
#include "prosgpv/io.hpp"
#include "prosgpv/sgpv.hpp"
#include "prosgpv/simulation.hpp"
#include "prosgpv/spine.hpp"

#ifndef PROSGPV_DATA_DIR
#define PROSGPV_DATA_DIR "data"
#endif

namespace prosgpv {

std::string default_spine_path() { return std::string(PROSGPV_DATA_DIR) + "/spine.csv"; }

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string family;
  std::string input;
  std::optional<std::string> response, time, status;
  std::string bound = "constant";
  bool jeffreys = false;
  std::vector<std::string> presets;
  std::vector<int> n;
  std::optional<int> p, s;
  int reps = 100;
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
  std::string methods = "prosgpv,lasso-min";
  bool list_presets = false;
  bool compare_bounds = false;
  int parallelism = 1;
  bool timing = false;
  int splits = 1000;
  int folds = 10;
};

using Files = std::vector<std::pair<fs::path, std::string>>;

void write_all(const Files& files) {
  for (const auto& [path, contents] : files) {
    if (path.has_parent_path() && !fs::exists(path.parent_path()))
      fs::create_directories(path.parent_path());
    write_file_atomic(path, contents);
  }
}

Dataset load_input(const Options& o, Family family) {
  if (o.input.empty()) throw ParameterError("--input is required");
  if (!fs::exists(o.input)) throw InvalidInput("input file '" + o.input + "' does not exist");
  CsvSchema schema;
  if (family == Family::Cox) {
    if (o.response) throw ParameterError("Cox models take --time and --status, not --response");
    if (o.time) schema.time = *o.time;
    if (o.status) schema.status = *o.status;
  } else {
    if (o.time || o.status)
      throw ParameterError("--time and --status apply to the Cox family only");
    if (o.response) schema.response = *o.response;
  }
  return load_csv(o.input, family, schema);
}

int cmd_fit(const Options& o, std::ostream& out) {
  const Family family = parse_family(o.family);
  const Dataset data = load_input(o, family);
  if (o.jeffreys && family != Family::Logistic)
    throw ParameterError("--jeffreys applies to the logistic family only");
  std::vector<int> all(data.p());
  for (int j = 0; j < data.p(); ++j) all[j] = j;
  FitOptions options;
  options.jeffreys = o.jeffreys;
  FitResult fit;
  try {
    fit = fit_mle(family, data, all, options);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("fit: ") + e.what());
  }
  out << fit_report_text(fit, data);
  if (!o.out.empty()) {
    const std::string body =
        o.format == "json" ? fit_report_json(fit, data).dump(2) + "\n" : fit_report_csv(fit, data);
    write_all({{o.out, body}});
  }
  return kExitOk;
}

int cmd_select(const Options& o, std::ostream& out) {
  const Family family = parse_family(o.family);
  const Dataset data = load_input(o, family);
  SelectionConfig config;
  config.bound = parse_null_bound(o.bound);
  config.jeffreys = o.jeffreys;
  if (o.jeffreys && family != Family::Logistic)
    throw ParameterError("--jeffreys applies to the logistic family only");
  SelectionResult result;
  try {
    result = run_prosgpv(family, data, config);
  } catch (const SelectionError&) {
    throw;
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("stage 1: ") + e.what());
  }
  out << select_report_text(result, data);
  if (!o.out.empty()) {
    const std::string body = o.format == "json"
                                 ? select_report_json(result, data, o.jeffreys).dump(2) + "\n"
                                 : select_report_csv(result, data);
    write_all({{o.out, body}});
  }
  return kExitOk;
}

std::vector<Scenario> scenarios_from(const Options& o) {
  std::vector<Scenario> base;
  if (!o.presets.empty()) {
    for (const auto& name : o.presets) base.push_back(preset(name));
  } else {
    if (o.family.empty()) throw ParameterError("simulate needs --preset or --family");
    Scenario sc;
    sc.family = parse_family(o.family);
    sc.name = "custom-" + o.family;
    if (sc.family == Family::Poisson) {
      sc.beta_l = 0.1;
      sc.beta_u = 0.4;
      sc.intercept = 2.0;
    } else if (sc.family == Family::Cox) {
      sc.beta_l = 0.2;
      sc.beta_u = 0.8;
    }
    base.push_back(sc);
  }
  std::vector<Scenario> out;
  for (Scenario sc : base) {
    if (o.p) sc.p = *o.p;
    if (o.s) sc.s = *o.s;
    sc.replications = o.reps;
    sc.seed = o.seed;
    if (o.n.empty()) {
      out.push_back(sc);
    } else {
      for (int n : o.n) {
        sc.n = n;
        out.push_back(sc);
      }
    }
  }
  for (const auto& sc : out) sc.validate();
  return out;
}

std::vector<Method> methods_from(const std::string& list) {
  std::vector<Method> methods;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) methods.push_back(parse_method(item));
  if (methods.empty()) throw ParameterError("--methods lists no method");
  return methods;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  if (o.list_presets) {
    out << presets_table();
    return kExitOk;
  }
  const std::vector<Scenario> scenarios = scenarios_from(o);
  GridResult result;
  if (o.compare_bounds) {
    result = run_bound_comparison(scenarios, o.parallelism);
  } else {
    GridOptions options;
    options.methods = methods_from(o.methods);
    options.parallelism = o.parallelism;
    options.cv_folds = o.folds;
    result = run_grid(scenarios, options);
  }
  for (const AggregateRow& a : result.aggregates) {
    out << a.scenario << "  " << a.method << "  capture " << format_short(a.capture_rate) << " ["
        << format_short(a.capture_ci_lower) << ", " << format_short(a.capture_ci_upper)
        << "]  mae median " << format_short(a.mae_median) << "  score "
        << format_short(a.score_median);
    if (a.failures > 0) out << "  failed " << a.failures << "/" << a.replications;
    out << '\n';
  }
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    write_all({{dir / "replications.csv", replications_csv(result.records, o.timing)},
               {dir / "aggregate.csv", aggregates_csv(result.aggregates, o.timing)}});
  }
  return kExitOk;
}

int cmd_spine(const Options& o, std::ostream& out) {
  const std::string path = o.input.empty() ? default_spine_path() : o.input;
  if (!fs::exists(path))
    throw InvalidInput("spine data file '" + path +
                       "' not found; pass --input with the vertebral column CSV");
  const Dataset data = o.response ? load_input(o, Family::Logistic) : load_spine(path);
  SplitStudyConfig config;
  config.splits = o.splits;
  config.seed = o.seed;
  config.parallelism = o.parallelism;
  config.cv_folds = o.folds;
  config.bound = parse_null_bound(o.bound);
  const SplitStudyResult result = run_split_study(data, config);
  out << split_summary_text(result);
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    write_all({{dir / "spine_splits.csv", split_outcomes_csv(result)},
               {dir / "spine_summary.json", split_summary_json(result).dump(2) + "\n"}});
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Penalized regression with second-generation p-value screening"};
  app.require_subcommand(1);
  Options o;

  const std::vector<std::string> families{"logistic", "poisson", "cox"};
  const std::vector<std::string> bounds{"constant", "gvif"};
  auto add_data = [&](CLI::App* cmd, bool family_required) {
    auto* f = cmd->add_option("--family", o.family, "logistic, poisson or cox")
                  ->check(CLI::IsMember(families));
    if (family_required) f->required();
    cmd->add_option("--input", o.input, "CSV file with a header row");
    cmd->add_option("--response", o.response, "Response column (default y)");
    cmd->add_option("--time", o.time, "Cox time column (default time)");
    cmd->add_option("--status", o.status, "Cox event column (default status)");
    cmd->add_option("--out", o.out, "Report file");
    cmd->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_flag("--jeffreys", o.jeffreys, "Jeffreys-prior (Firth) logistic fits");
    cmd->add_option("--seed", o.seed, "Random seed");
  };

  auto* fit = app.add_subcommand("fit", "Maximum likelihood fit on all predictors");
  add_data(fit, true);
  auto* select = app.add_subcommand("select", "Two-stage variable selection");
  add_data(select, true);
  select->add_option("--bound", o.bound, "Null bound")->check(CLI::IsMember(bounds));

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of methods");
  simulate->add_option("--preset", o.presets, "Scenario preset (repeatable)");
  simulate->add_option("--family", o.family, "Family of a custom scenario")
      ->check(CLI::IsMember(families));
  simulate->add_option("--n", o.n, "Sample size (repeatable)")->check(CLI::PositiveNumber);
  simulate->add_option("--p", o.p, "Number of predictors")->check(CLI::PositiveNumber);
  simulate->add_option("--s", o.s, "Number of true signals")->check(CLI::NonNegativeNumber);
  simulate->add_option("--reps", o.reps, "Replications per scenario")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", o.seed, "Random seed");
  simulate->add_option("--methods", o.methods,
                       "Comma-separated: prosgpv, prosgpv-gvif, prosgpv-jeffreys, lasso-min, "
                       "lasso-gic, oracle");
  simulate->add_option("--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  simulate->add_option("--out", o.out, "Output directory");
  simulate->add_flag("--list-presets", o.list_presets, "Print the preset table and exit");
  simulate->add_flag("--compare-bounds", o.compare_bounds,
                     "Compare null-bound variants (logistic presets)");
  simulate->add_option("--parallelism", o.parallelism, "Worker threads")
      ->check(CLI::PositiveNumber);
  simulate->add_flag("--timing", o.timing, "Record runtimes in the output files");

  auto* spine = app.add_subcommand("spine", "Repeated train/test splits of the spine data");
  spine->add_option("--input", o.input, "Data file (default: bundled spine data)");
  spine->add_option("--response", o.response, "Binary response column of a generic --input");
  spine->add_option("--splits", o.splits, "Number of 70/30 splits")->check(CLI::PositiveNumber);
  spine->add_option("--seed", o.seed, "Random seed");
  spine->add_option("--bound", o.bound, "Null bound")->check(CLI::IsMember(bounds));
  spine->add_option("--folds", o.folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  spine->add_option("--out", o.out, "Output directory");
  spine->add_option("--parallelism", o.parallelism, "Worker threads")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit) return cmd_fit(o, out);
    if (*select) return cmd_select(o, out);
    if (*simulate) return cmd_simulate(o, out);
    return cmd_spine(o, out);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace prosgpv
