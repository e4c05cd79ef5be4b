#include "uplearn/core.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "uplearn/util.hpp"

namespace uplearn {

std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

FeatureWindow::FeatureWindow(std::size_t timestamps, std::size_t channels,
                             std::vector<double> values)
    : timestamps_(timestamps), channels_(channels), values_(std::move(values)) {
  if (timestamps_ == 0 || channels_ == 0) {
    throw std::invalid_argument("FeatureWindow: timestamps and channels must be >= 1");
  }
  if (values_.size() != timestamps_ * channels_) {
    throw std::invalid_argument("FeatureWindow: value count does not match shape");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("FeatureWindow: non-finite entry");
    }
  }
}

const char* oracle_reader_name(OracleReader reader) {
  switch (reader) {
    case OracleReader::Setup: return "setup";
    case OracleReader::Environment: return "environment";
    case OracleReader::Evaluator: return "evaluator";
    case OracleReader::OfflineStrategy: return "offline_strategy";
    case OracleReader::StrategyPool: return "strategy_pool";
  }
  return "unknown";
}

void OracleAudit::record(OracleReader reader, int phase) {
  ++counts_[{static_cast<int>(reader), phase}];
}

std::uint64_t OracleAudit::count(OracleReader reader, int phase) const {
  auto it = counts_.find({static_cast<int>(reader), phase});
  return it == counts_.end() ? 0 : it->second;
}

std::uint64_t OracleAudit::total() const {
  std::uint64_t sum = 0;
  for (const auto& [key, n] : counts_) sum += n;
  return sum;
}

std::uint64_t OracleAudit::strategy_reads_after_phase1() const {
  std::uint64_t sum = 0;
  for (const auto& [key, n] : counts_) {
    const auto reader = static_cast<OracleReader>(key.first);
    if (key.second >= 2 &&
        (reader == OracleReader::StrategyPool || reader == OracleReader::Setup)) {
      sum += n;
    }
  }
  return sum;
}

LabeledRecord::LabeledRecord(std::string id, int phase, FeatureWindow window,
                             OracleLabel oracle,
                             std::optional<ObservedLabel> observed)
    : id_(std::move(id)),
      phase_(phase),
      window_(std::move(window)),
      oracle_(oracle),
      observed_(observed) {
  if (id_.empty()) throw std::invalid_argument("LabeledRecord: empty id");
  if (phase_ < 1) throw std::invalid_argument("LabeledRecord: phase must be >= 1");
}

OracleLabel LabeledRecord::oracle(OracleAudit& audit, OracleReader reader) const {
  audit.record(reader, phase_);
  return oracle_;
}

LabeledRecord LabeledRecord::with_observed(ObservedLabel label) const {
  if (observed_.has_value()) {
    throw std::logic_error("LabeledRecord: observed label already assigned for id " + id_);
  }
  LabeledRecord copy = *this;
  copy.observed_ = label;
  return copy;
}

RecordRefs as_refs(std::span<const LabeledRecord> records) {
  RecordRefs refs;
  refs.reserve(records.size());
  for (const auto& r : records) refs.push_back(&r);
  return refs;
}

PhaseDataset PhaseDataset::make(int phase, std::vector<LabeledRecord> records,
                                OracleAudit& audit, OracleReader reader) {
  if (phase < 1) throw std::invalid_argument("PhaseDataset: phase must be >= 1");
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (const auto& r : records) {
    if (r.phase() != phase) {
      throw std::invalid_argument("PhaseDataset: record " + r.id() +
                                  " belongs to a different phase");
    }
    if (!r.window().same_shape(records.front().window())) {
      throw std::invalid_argument("PhaseDataset: inconsistent window shapes");
    }
    if (r.oracle(audit, reader) == OracleLabel::Positive) {
      ++pos;
    } else {
      ++neg;
    }
  }
  return PhaseDataset(phase, std::move(records), pos, neg);
}

PhaseDataset::PhaseDataset(int phase, std::vector<LabeledRecord> records,
                           std::size_t positives, std::size_t negatives)
    : phase_(phase),
      records_(std::move(records)),
      positives_(positives),
      negatives_(negatives) {}

double PhaseDataset::imbalance_rate() const {
  if (negatives_ == 0) {
    return positives_ == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(positives_) / static_cast<double>(negatives_);
}

ClassPrior::ClassPrior(double pi_p) : pi_p_(pi_p) {
  if (!(pi_p >= 0.0 && pi_p <= 1.0)) {
    throw std::invalid_argument("ClassPrior: pi_p must lie in [0, 1]");
  }
}

Partition partition_by_observed(const RecordRefs& records) {
  Partition out;
  for (const LabeledRecord* r : records) {
    if (!r->observed().has_value()) {
      throw std::invalid_argument("partition_by_observed: unassigned label on record " +
                                  r->id());
    }
    switch (*r->observed()) {
      case ObservedLabel::CertainPositive: out.positives.push_back(r); break;
      case ObservedLabel::CertainNegative: out.negatives.push_back(r); break;
      case ObservedLabel::UncertainPositive: out.uncertains.push_back(r); break;
    }
  }
  return out;
}

}  // namespace uplearn
