#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "defglm/simlab.hpp"
#include "defglm/tuning.hpp"
#include "defglm_cli/csv.hpp"
#include "defglm_cli/manifest.hpp"

namespace defglm::cli {

/// A fully described command: what the argument parser produced, or what a
/// manifest recorded. Option values are kept as text so that a manifest can
/// replay them verbatim.
struct Invocation {
  std::string command;  ///< simulate | scenario | cv | fit | traffic
  std::map<std::string, std::string> options;
  std::string config_text;    ///< empty: built-in defaults
  std::string config_source;  ///< for error messages
};

struct ExecutionReport {
  std::string manifest_path;
  std::vector<std::string> outputs;  ///< absolute paths
  RunManifest manifest;
};

ExecutionReport execute(const Invocation& invocation);

/// Runs the command recorded in a manifest again. With `out` set, outputs go
/// there instead of the recorded location. With `verify`, every regenerated
/// output must match the recorded digest (NumericError otherwise).
ExecutionReport rerun(const std::string& manifest_path, const std::optional<std::string>& out,
                      bool verify);

/// Maps library exceptions to the documented exit codes:
/// 0 success, 2 configuration, 3 data, 4 numeric failure.
int exit_code_for(const std::exception& e);

// Table builders, exposed for tests.
CsvTable dataset_table(const Dataset& data);
Dataset read_dataset(const std::string& path);
CsvTable results_table(const std::vector<ScenarioRow>& rows);
CsvTable summary_table(const std::vector<SummaryRow>& rows, bool truncate_disp);
CsvTable cv_table(const CvResult& cv);
CsvTable truth_table(const ScenarioConfig& config);

}  // namespace defglm::cli
