#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace uplearn {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  std::uint64_t predicted_positives() const { return tp + fp; }
  std::uint64_t actual_positives() const { return tp + fn; }
  bool operator==(const Confusion&) const = default;
};

/// Metric values; nullopt marks an undefined (0/0) ratio. Never NaN.
struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2PR/(P+R); every 0/0
/// becomes nullopt rather than a number.
Metrics metrics(const Confusion& c);

/// F1 from precision and recall directly; undefined when either input is
/// undefined or when P + R == 0.
std::optional<double> f1_score(std::optional<double> precision,
                               std::optional<double> recall);

/// F1 in its 2tp / (2tp + fp + fn) form: identical to 2PR/(P+R) whenever that
/// is defined, and 0 (not undefined) when tp = 0 but errors exist. Undefined
/// only for an all-true-negative confusion. Preferred for averaging curves,
/// where a collapsed all-negative predictor should count as zero.
std::optional<double> f1_from_confusion(const Confusion& c);

/// Deployment quality of one phase: the model trained at the preceding
/// boundary scored against ground truth on that phase's records.
struct PhaseReport {
  int phase = 0;
  std::string strategy;
  std::string arch;
  Metrics scores;
  Confusion confusion;
  /// Mean wall-clock seconds per epoch of the fit that produced the deployed
  /// model. Measured, so excluded from canonical serialization.
  double seconds_per_epoch = 0.0;
};

}  // namespace uplearn
