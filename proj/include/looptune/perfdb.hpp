#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "looptune/space.hpp"
#include "looptune/trial.hpp"

namespace looptune {

class DbError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Appended row whose index is not last index + 1.
class SequenceError : public DbError {
 public:
  using DbError::DbError;
};

struct ResultRow {
  std::size_t index = 0;  // 1-based evaluation number
  Configuration configuration;
  double metric = 0.0;
  double elapsed = 0.0;
  TrialStatus status = TrialStatus::ok;
  std::string timestamp;  // ISO-8601 UTC

  bool ok() const { return status == TrialStatus::ok; }
  bool operator==(const ResultRow&) const = default;
};

ResultRow make_row(std::size_t index, const TrialRecord& trial, std::string timestamp);
TrialRecord to_trial(const ResultRow& row);

// Current time as "YYYY-MM-DDThh:mm:ssZ".
std::string utc_timestamp();

// Shortest round-trip decimal form.
std::string format_double(double value);

// Parameter columns of a space, in declaration order.
std::vector<std::string> column_names(const ParamSpace& space);

// CSV: index, one column per parameter, metric, elapsed, status, timestamp.
// Inactive parameters are empty unquoted fields; fields with commas, quotes,
// line breaks, outer spaces, or empty values are double-quoted.
std::string csv_header(const std::vector<std::string>& columns);
std::string csv_line(const ResultRow& row, const std::vector<std::string>& columns);
// One JSON object per line; inactive parameters are null.
std::string json_line(const ResultRow& row, const std::vector<std::string>& columns);

std::vector<ResultRow> read_csv(std::string_view text, const std::vector<std::string>& columns);
std::vector<ResultRow> read_json_lines(std::string_view text,
                                       const std::vector<std::string>& columns);

// results.csv and results.json of one run directory. Every append reaches
// both files and is flushed to disk before returning.
class PerfDb {
 public:
  static constexpr const char* kCsvName = "results.csv";
  static constexpr const char* kJsonName = "results.json";

  // Starts empty files; throws DbError if either file already holds rows.
  static PerfDb create(const std::filesystem::path& dir,
                       const std::vector<std::string>& columns);
  // Loads existing rows and truncates both files to their common prefix.
  static PerfDb open(const std::filesystem::path& dir, const std::vector<std::string>& columns);

  PerfDb(PerfDb&& other) noexcept;
  PerfDb& operator=(PerfDb&&) = delete;
  ~PerfDb();

  void append(const ResultRow& row);

  const std::vector<ResultRow>& rows() const { return rows_; }
  std::size_t last_index() const { return rows_.empty() ? 0 : rows_.back().index; }

 private:
  PerfDb(const std::filesystem::path& dir, const std::vector<std::string>& columns,
         std::vector<ResultRow> rows);

  std::vector<std::string> columns_;
  std::filesystem::path dir_;
  std::vector<ResultRow> rows_;
  std::FILE* csv_ = nullptr;
  std::FILE* json_ = nullptr;
};

// Reads a run directory without modifying it (CSV preferred, JSON lines as
// fallback).
std::vector<ResultRow> load_rows(const std::filesystem::path& dir,
                                 const std::vector<std::string>& columns);

// Earliest row with the minimum ok metric.
std::optional<ResultRow> find_min(std::span<const ResultRow> rows);

struct SeriesPoint {
  std::size_t index = 0;
  double metric = 0.0;
  std::optional<double> best_so_far;  // running minimum over ok rows
};

std::vector<SeriesPoint> convergence_series(std::span<const ResultRow> rows);

// "index\tmetric\tbest_so_far" header plus one line per point.
void write_series_tsv(std::ostream& out, std::span<const SeriesPoint> series);

}  // namespace looptune
