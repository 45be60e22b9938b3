#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace revfilt {

struct IterationRecord {
  int k = 0;
  std::optional<double> psnr_db;
  /// Frobenius norm of e(x_k); absent when the driver never evaluated e at
  /// x_k (the final iterate, or NAG whose probe point is the lookahead).
  std::optional<double> residual;
  /// Cumulative filter calls spent producing x_k.
  std::uint64_t filter_calls = 0;
  std::optional<double> elapsed_ms;
  /// ω_k or λ_k used by the step that starts from this record.
  std::optional<double> step_param;
  std::vector<std::string> flags;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  std::string method;
  std::string accel;
  std::string filter;
  std::string image_id;
  bool diverged = false;
  /// Set when the run stopped on an error other than divergence.
  std::optional<std::string> error;

  /// "k:flag" markers collected from the records.
  std::vector<std::string> flag_list() const;
  std::optional<double> initial_psnr() const;
  std::optional<double> final_psnr() const;
};

inline constexpr const char* kTraceCsvHeader =
    "k,psnr_db,residual,filter_calls,elapsed_ms,omega_or_lambda,flags";

/// Writes the fixed CSV schema (header + one row per record). Numbers use
/// the shortest form that round-trips; missing values are empty fields;
/// flags are joined with ';'.
void write_trace_csv(const IterationTrace& trace, std::ostream& os);
void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path);

IterationTrace read_trace_csv(const std::filesystem::path& path);

/// Two-column "k psnr_db" text for plotting; rows without PSNR are skipped.
void write_plot_data(const IterationTrace& trace, std::ostream& os);

}  // namespace revfilt
