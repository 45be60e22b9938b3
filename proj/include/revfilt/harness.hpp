#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "revfilt/filters.hpp"
#include "revfilt/methods.hpp"
#include "revfilt/reversal.hpp"
#include "revfilt/trace.hpp"

namespace revfilt {

// ---------------------------------------------------------------------------
// Improvement metrics.

/// (p_k − p_0) / p_0 × 100 for every record of the trace.
std::vector<double> improvement_series(const IterationTrace& trace);

struct ImprovementSummary {
  std::string filter;
  std::string method;
  std::string accel;
  std::vector<std::string> image_ids;
  /// max_k of the improvement series, one per image.
  std::vector<double> per_image_max;
  /// Arithmetic mean of per_image_max.
  double p_max = 0.0;
  std::size_t image_count = 0;
  std::size_t diverged_count = 0;
};

/// Mean over images of each trace's maximum improvement. All traces must
/// share filter, method and accel labels.
ImprovementSummary aggregate_pmax(const std::vector<IterationTrace>& traces);

// ---------------------------------------------------------------------------
// Experiment configuration.

struct NamedFilter {
  std::string name;
  FilterSpec spec;
  std::optional<int> budget;
};

struct RunConfig {
  std::vector<std::filesystem::path> images;
  std::vector<NamedFilter> filters;
  std::vector<MethodKind> methods;
  std::vector<AccelSpec> accels;
  /// Applies to filters without their own budget; unset means 100, or 200
  /// for motion-blur filters.
  std::optional<int> budget;
  std::filesystem::path out_dir = "results";
  int jobs = 1;
  /// Timing makes traces run-dependent; sweeps leave it off by default.
  bool record_timing = false;
  double residual_tol = 0.0;

  int budget_for(const NamedFilter& f) const;
  void validate() const;
};

/// Parses the sectioned `key = value` experiment format (see README).
/// Relative image paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Jobs from the REVFILT_JOBS environment variable, if set and valid.
std::optional<int> jobs_from_env();

/// Filename token for a method; lowercase p gets "p2" so traces never
/// collide on case-insensitive filesystems.
std::string method_token(Method m);

struct CellResult {
  std::string filter_name;
  MethodKind method;
  AccelSpec accel;
  std::string image_id;
  IterationTrace trace;
  std::filesystem::path trace_path;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<ImprovementSummary> summaries;
};

/// Sweeps every (image, filter, method, accel) cell: synthesises b = g(x),
/// runs the driver from x0 = b, writes one trace CSV per cell under
/// out_dir/traces, then writes per-method summary tables and a best-of
/// table. Individual cell failures are recorded, not fatal.
ExperimentResult run_experiment(const RunConfig& cfg);

/// Per-method p_max table as CSV: rows are filters, columns accelerations.
/// Cells with any diverged run carry an "(nc)" suffix.
std::string summary_table_csv(const RunConfig& cfg, const ExperimentResult& res, Method method);
/// Best acceleration per (filter, method) with the unaccelerated baseline.
std::string best_table_csv(const RunConfig& cfg, const ExperimentResult& res);
/// All tables rendered as aligned plain text.
std::string summary_text(const RunConfig& cfg, const ExperimentResult& res);

// ---------------------------------------------------------------------------

struct DoctorReport {
  bool deterministic = false;
  bool shape_preserved = false;
  double max_abs_diff = 0.0;
  std::string message;

  bool ok() const { return deterministic && shape_preserved; }
};

/// Applies the filter twice to the probe image and compares the outputs.
DoctorReport doctor_filter(BlackBoxFilter& filter, const Image& probe);

/// Deterministic 64x64 probe: smooth gradient plus a checker pattern.
Image doctor_probe_image();

}  // namespace revfilt
