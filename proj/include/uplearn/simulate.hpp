#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "uplearn/core.hpp"
#include "uplearn/metrics.hpp"
#include "uplearn/model.hpp"
#include "uplearn/train.hpp"

namespace uplearn {

/// Label-handling policy used when refitting the model at a phase boundary.
///
///  - Offline: audited ground-truth labels for every pooled record; the
///    reference upper bound, impossible in production.
///  - Certain: keep only certainly-labeled records (mitigated units are
///    dropped), pooled over every phase seen so far.
///  - Naive:   treat every mitigated unit as a true positive.
///  - Uptake:  risk estimate that spreads each uncertain record over both
///    classes, weighted by the estimated precision of the deployed model.
enum class StrategyKind { Offline, Certain, Naive, Uptake };

struct Strategy {
  StrategyKind kind = StrategyKind::Uptake;
  /// Uptake only: give certainly-labeled records full per-side weight instead
  /// of sharing the side mass with uncertain records.
  bool certain_full_weight = false;

  static Strategy make(StrategyKind kind, bool certain_full_weight = false);
};

/// Accepts "offline", "certain", "naive", "uptake", "uptake-full".
Strategy parse_strategy(std::string_view name);
std::string strategy_name(const Strategy& s);

struct SimOptions {
  TrainConfig train;
  double validation_fraction = 0.2;
  /// Fixed class prior; skips estimation entirely when set.
  std::optional<double> pi_p_override;
  /// Used when the initial fit predicts no validation positives.
  double pi_p_fallback = 0.5;
  /// Re-estimate the prior from each boundary fit instead of freezing the
  /// initial estimate.
  bool reestimate_pi_p = false;
  /// How many recent deployment phases feed the boundary pool (Certain pools
  /// everything regardless).
  int history_window = 1;

  void validate() const;
};

/// One deployment phase as observed by the strategy: predicted positives are
/// mitigated (true outcome suppressed), predicted negatives run to ground
/// truth.
struct DeployOutcome {
  Confusion confusion;
  std::vector<LabeledRecord> labeled;
};

/// Scores every record of `phase`, mitigating predicted positives. Evaluator
/// reads feed the confusion matrix; a separate Environment read reveals the
/// outcome of each unmitigated record.
DeployOutcome deploy_phase(const ModelState& model, const PhaseDataset& phase,
                           double threshold, OracleAudit& audit);

/// Validation precision of the selected epoch. Throws std::runtime_error when
/// the fit predicted no positives (precision undefined).
double estimate_pi_p(const Confusion& validation_confusion);

struct ObservedCounts {
  int phase = 0;
  std::uint64_t uncertain = 0;
  std::uint64_t certain_positive = 0;
  std::uint64_t certain_negative = 0;
};

struct BoundaryInfo {
  int trains_model_for_phase = 0;
  std::uint64_t pool_records = 0;   // labeled records available to the refit
  std::uint64_t batch_items = 0;    // weighted items after risk construction
  bool refit = false;               // false when the previous model was kept
  int best_epoch = 0;
};

struct AuditEntry {
  std::string reader;
  int phase = 0;
  std::uint64_t count = 0;
};

struct SimulationRun {
  std::string strategy;
  std::string arch;
  int phases = 0;
  SimOptions options;
  double pi_p_estimate = 0.0;
  double pi_p_used = 0.0;
  std::vector<PhaseReport> phase_reports;    // deployment phases 2..K
  std::vector<ObservedCounts> observed;      // same phases
  std::vector<BoundaryInfo> boundaries;      // fits for phases 2..K
  std::vector<AuditEntry> audit;
  std::uint64_t strategy_oracle_reads_after_t1 = 0;
  std::vector<std::string> log;
};

/// Runs the full phased protocol: fit on phase 1, then alternate deployment
/// and boundary refits. `phases` must hold datasets for phases 1..K in order,
/// all with the same window shape.
SimulationRun run(const std::vector<PhaseDataset>& phases, const Strategy& strategy,
                  const Arch& arch, const SimOptions& opts);

/// Canonical serialization. Wall-clock timings are excluded unless
/// `include_timings` is set, so equal-seed runs serialize byte-identically.
nlohmann::json run_to_json(const SimulationRun& run, bool include_timings = false);
SimulationRun run_from_json(const nlohmann::json& j);

}  // namespace uplearn
