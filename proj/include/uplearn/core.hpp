#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uplearn {

/// Fixed-shape block of telemetry: `timestamps` rows of `channels` readings,
/// row-major, oldest row first. Immutable after construction; all entries
/// must be finite.
class FeatureWindow {
 public:
  FeatureWindow(std::size_t timestamps, std::size_t channels,
                std::vector<double> values);

  std::size_t timestamps() const { return timestamps_; }
  std::size_t channels() const { return channels_; }
  double at(std::size_t t, std::size_t c) const {
    return values_[t * channels_ + c];
  }
  const std::vector<double>& values() const { return values_; }
  bool same_shape(const FeatureWindow& other) const {
    return timestamps_ == other.timestamps_ && channels_ == other.channels_;
  }

 private:
  std::size_t timestamps_;
  std::size_t channels_;
  std::vector<double> values_;
};

/// Ground-truth outcome of a record. Confidential during simulation: reads go
/// through LabeledRecord::oracle(), which requires an audit entry.
enum class OracleLabel { Negative = 0, Positive = 1 };

/// Label as visible to an updating strategy after deployment. A record whose
/// predicted-positive outcome was mitigated away is UncertainPositive.
enum class ObservedLabel { CertainPositive, CertainNegative, UncertainPositive };

/// Who is reading a ground-truth label. Strategy pool construction must never
/// read the oracle for deployment phases; the audit makes that checkable.
enum class OracleReader { Setup, Environment, Evaluator, OfflineStrategy, StrategyPool };

const char* oracle_reader_name(OracleReader reader);

/// Tally of ground-truth label reads, keyed by (reader, phase). Every oracle
/// access is recorded here; tests assert that strategy code paths stay at
/// zero for phases after the first.
class OracleAudit {
 public:
  void record(OracleReader reader, int phase);
  std::uint64_t count(OracleReader reader, int phase) const;
  std::uint64_t total() const;
  /// Reads by Setup or StrategyPool at phases >= 2. Must be zero for every
  /// run of a strategy other than Offline.
  std::uint64_t strategy_reads_after_phase1() const;
  const std::map<std::pair<int, int>, std::uint64_t>& entries() const {
    return counts_;
  }

 private:
  std::map<std::pair<int, int>, std::uint64_t> counts_;  // (reader, phase) -> n
};

/// One unit-phase observation: feature window plus ground truth and the label
/// the deployment actually exposed. Immutable; the observed label is assigned
/// exactly once via with_observed().
class LabeledRecord {
 public:
  LabeledRecord(std::string id, int phase, FeatureWindow window,
                OracleLabel oracle,
                std::optional<ObservedLabel> observed = std::nullopt);

  const std::string& id() const { return id_; }
  int phase() const { return phase_; }
  const FeatureWindow& window() const { return window_; }
  const std::optional<ObservedLabel>& observed() const { return observed_; }

  /// Audited ground-truth access.
  OracleLabel oracle(OracleAudit& audit, OracleReader reader) const;

  /// Copy of this record with the observed label filled in. Throws
  /// std::logic_error if the label was already assigned.
  LabeledRecord with_observed(ObservedLabel label) const;

 private:
  std::string id_;
  int phase_;
  FeatureWindow window_;
  OracleLabel oracle_;
  std::optional<ObservedLabel> observed_;
};

using RecordRefs = std::vector<const LabeledRecord*>;

RecordRefs as_refs(std::span<const LabeledRecord> records);

/// All records of one monitoring phase. Validates shape consistency and
/// caches the positive:negative ground-truth ratio.
class PhaseDataset {
 public:
  static PhaseDataset make(int phase, std::vector<LabeledRecord> records,
                           OracleAudit& audit, OracleReader reader);

  int phase() const { return phase_; }
  const std::vector<LabeledRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t positives() const { return positives_; }
  std::size_t negatives() const { return negatives_; }
  /// #Positive : #Negative ratio of ground-truth labels.
  double imbalance_rate() const;

 private:
  PhaseDataset(int phase, std::vector<LabeledRecord> records,
               std::size_t positives, std::size_t negatives);

  int phase_;
  std::vector<LabeledRecord> records_;
  std::size_t positives_;
  std::size_t negatives_;
};

/// Mixture weight of real positives among uncertain-positive records.
/// pi_n is always derived, so the pair sums to one exactly.
class ClassPrior {
 public:
  explicit ClassPrior(double pi_p);
  double pi_p() const { return pi_p_; }
  double pi_n() const { return 1.0 - pi_p_; }

 private:
  double pi_p_;
};

struct Partition {
  RecordRefs positives;   // ObservedLabel::CertainPositive
  RecordRefs negatives;   // ObservedLabel::CertainNegative
  RecordRefs uncertains;  // ObservedLabel::UncertainPositive
};

/// Split records into (X_p, X_n, X_u) by observed label, preserving order.
/// Throws std::invalid_argument if any record has no observed label yet.
Partition partition_by_observed(const RecordRefs& records);

}  // namespace uplearn
