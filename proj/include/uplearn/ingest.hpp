#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uplearn/core.hpp"

namespace uplearn {

enum class Normalization { ZScorePerChannel, None };

/// Loader for daily per-unit telemetry CSVs: UTF-8, comma-separated, header
/// row required, no quoting, ISO-8601 dates, label column 0/1, missing
/// values as empty strings.
struct IngestConfig {
  std::filesystem::path path;
  std::vector<std::string> feature_columns;  // ordered; becomes channel order
  std::string id_column = "id";
  std::string date_column = "date";
  std::string label_column = "label";
  int window_length = 14;  // rows per record
  int phases = 5;          // equal contiguous date ranges
  Normalization normalization = Normalization::ZScorePerChannel;
  /// A record is positive when its unit has a label-1 day inside the window
  /// or within this many days after the window ends.
  int label_horizon_days = 7;
  /// Default: one record per (unit, phase), the window ending at the unit's
  /// last day in that phase. Dense mode instead emits one record per row
  /// with enough history.
  bool dense_stride = false;

  void validate() const;
};

struct SkipReport {
  std::uint64_t rows_dropped_unparseable = 0;  // bad date/label/feature text
  std::uint64_t rows_dropped_missing = 0;      // empty feature cell
  std::uint64_t rows_dropped_duplicate = 0;    // same unit and date seen again
  std::uint64_t records_skipped_short_history = 0;
};

struct ChannelStats {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Per-channel location/scale computed from one phase. stddev is the
/// population standard deviation, floored at 1e-8.
struct NormalizationStats {
  std::vector<ChannelStats> channels;

  nlohmann::json to_json() const;
  static NormalizationStats from_json(const nlohmann::json& j);
};

/// Stats over every window cell of the given dataset (normally phase 1, so
/// later phases never leak into the scaling).
NormalizationStats normalize_stats(const PhaseDataset& phase);

/// (value - mean) / stddev per channel; returns rebuilt records.
std::vector<LabeledRecord> apply_normalization(const std::vector<LabeledRecord>& records,
                                               const NormalizationStats& stats);

struct LoadResult {
  std::vector<PhaseDataset> phases;
  SkipReport skipped;
  /// Present when normalization was applied.
  std::optional<NormalizationStats> stats;
};

/// Load, window, label and phase-split a telemetry CSV. Records are windows
/// of the window_length most recent daily rows per unit; each record belongs
/// to the phase containing its final day; phases partition the file's date
/// range into equal contiguous spans. Output is sorted by unit id within
/// each phase. Throws on missing file, missing configured columns, or when
/// no usable rows remain.
LoadResult load_csv(const IngestConfig& cfg);

}  // namespace uplearn
