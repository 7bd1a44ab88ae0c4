#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosgpv/fitting.hpp"
#include "prosgpv/model.hpp"
#include "prosgpv/sgpv.hpp"
#include "prosgpv/simulation.hpp"
#include "prosgpv/spine.hpp"

namespace prosgpv {

/// Raw comma-separated table. `lines[i]` is the 1-based file line of row i.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  /// Index of a header column; throws InvalidInput naming the column.
  int column(const std::string& name) const;
};

/// Parses RFC 4180 style CSV (double-quoted fields may contain commas and
/// quotes). Throws ParseError on ragged rows, stray quotes or an empty input.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Which columns carry the response. Every other column is a predictor
/// unless listed in `ignore`.
struct CsvSchema {
  std::string response = "y";
  std::string time = "time";
  std::string status = "status";
  std::vector<std::string> ignore;
};

/// Builds a validated dataset. Binary responses may be 0/1 or any two
/// distinct strings (the lexicographically smaller maps to 0). Empty, "NA"
/// and "NaN" fields are missing; rows holding them are rejected together.
Dataset dataset_from_table(const CsvTable& table, Family family, const CsvSchema& schema = {});
Dataset load_csv(const std::filesystem::path& path, Family family, const CsvSchema& schema = {});

/// Writes predictors then response columns named as in `schema`, with
/// values that re-load exactly.
void write_dataset_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema = {});

/// Vertebral column data (310 patients, 12 attributes). Accepts the
/// Col1..Col12 + Class_att layout, renaming the columns, or already named
/// attributes with a class column. Unnamed trailing columns are ignored.
Dataset load_spine(const std::filesystem::path& path);
const std::vector<std::string>& spine_attribute_names();

/// Number formatting: 17 significant digits for machine outputs, 4 for
/// human tables. Non-finite values print as NA, Inf or -Inf.
std::string format_exact(double value);
std::string format_short(double value);

nlohmann::ordered_json select_report_json(const SelectionResult& result, const Dataset& data,
                                  bool jeffreys);
std::string select_report_csv(const SelectionResult& result, const Dataset& data);
std::string select_report_text(const SelectionResult& result, const Dataset& data);

nlohmann::ordered_json fit_report_json(const FitResult& fit, const Dataset& data);
std::string fit_report_csv(const FitResult& fit, const Dataset& data);
std::string fit_report_text(const FitResult& fit, const Dataset& data);

/// One row per replication and method; runtime_s is NA unless `timing`.
std::string replications_csv(const std::vector<ReplicationRecord>& records, bool timing);
std::string aggregates_csv(const std::vector<AggregateRow>& rows, bool timing);
std::string presets_table();

/// Per-split rows: split,seed,method,model_size,auc,model (names joined by ';').
std::string split_outcomes_csv(const SplitStudyResult& result);
/// Model-size distribution, AUC summaries (mean and median), inclusion
/// frequencies and the most frequent model per method.
nlohmann::ordered_json split_summary_json(const SplitStudyResult& result);
std::string split_summary_text(const SplitStudyResult& result);

/// Writes `contents` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace prosgpv
