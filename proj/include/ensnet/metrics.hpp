#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace ensnet {

inline constexpr const char* kMetricsCsvSchema = "ensnet-metrics/1";

struct EpochRecord {
  std::uint32_t epoch = 0;  // 1-based
  double train_loss_base = 0.0;
  std::vector<double> train_loss_subnets;
  double test_err_base = 0.0;
  std::vector<double> test_err_subnets;
  double test_err_ensemble = 0.0;
  double alpha = 0.0;
  double wall_seconds = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

class MetricsLog {
 public:
  // The record's epoch must be one past the last row (1 for an empty log)
  // and its error rates must lie in [0,1].
  void append_epoch(EpochRecord record);

  const std::vector<EpochRecord>& rows() const noexcept { return rows_; }
  bool empty() const noexcept { return rows_.empty(); }
  std::uint32_t last_epoch() const noexcept { return rows_.empty() ? 0 : rows_.back().epoch; }

  // Row with the lowest ensemble error (earliest on ties).
  std::optional<EpochRecord> best_ensemble() const;

  bool operator==(const MetricsLog&) const = default;

 private:
  std::vector<EpochRecord> rows_;
};

// Header row plus one row per epoch:
//   epoch,train_loss_base,train_loss_subnet_<i>...,test_err_base,
//   test_err_subnet_<i>...,test_err_ensemble,alpha
// Numbers use '.' and 9 significant digits regardless of locale. Wall-clock
// time is excluded so the file is byte-identical across identical runs.
std::string metrics_csv(const MetricsLog& log);
void export_csv(const MetricsLog& log, const std::filesystem::path& path);
// Inverse of metrics_csv (wall_seconds is not recovered).
MetricsLog parse_metrics_csv(const std::string& text);

// epoch,wall_seconds
void export_timing_csv(const MetricsLog& log, const std::filesystem::path& path);

// Final and best-epoch error rates per voter and for the ensemble.
nlohmann::json summary_json(const MetricsLog& log);
// Two-column "Model | Error rate" table of the final epoch plus the best ensemble epoch.
std::string summary_table(const MetricsLog& log);

nlohmann::json to_json(const MetricsLog& log);
MetricsLog metrics_from_json(const nlohmann::json& j);

// Locale-independent shortest-round-trip-to-9-digits formatting.
std::string format_number(double value);

// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace ensnet
