#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uplearn/metrics.hpp"
#include "uplearn/simulate.hpp"

namespace uplearn {

/// Which deployment phases the average-F1 column covers. FromT2 includes the
/// first deployment phase, which every strategy shares (the initial model is
/// common); FromT3 restricts to phases where strategies have diverged.
enum class AvgConvention { FromT2, FromT3 };

int first_averaged_phase(AvgConvention convention);

/// Mean metrics over the runs of one (arch, strategy) cell at one phase.
/// Undefined values are excluded from each mean independently; the *_defined
/// counters say how many runs contributed.
struct PhaseCell {
  int phase = 0;
  std::size_t runs = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::size_t precision_defined = 0;
  std::size_t recall_defined = 0;
  std::size_t f1_defined = 0;
  Confusion confusion_total;  // summed over runs
};

struct CellSummary {
  std::string arch;
  std::string strategy;
  std::size_t runs = 0;
  std::vector<PhaseCell> phases;  // deployment phases 2..K in order
  /// Arithmetic mean of the phase-cell F1 means over the convention window,
  /// skipping phases whose mean is undefined.
  std::optional<double> avg_f1;
  std::size_t avg_phases_defined = 0;
  std::size_t avg_phases_total = 0;
};

/// One strategy's average F1 pooled across architectures.
struct StrategyAverage {
  std::string strategy;
  std::optional<double> avg_f1;
  std::size_t cells_defined = 0;
  std::size_t cells_total = 0;
};

struct Aggregate {
  int phases = 0;  // K
  AvgConvention convention = AvgConvention::FromT2;
  std::vector<CellSummary> cells;            // sorted by arch, then strategy
  std::vector<StrategyAverage> cross_model;  // one row per strategy
};

/// Groups runs by (arch, strategy) and averages per phase across seeds.
/// Throws std::invalid_argument when runs disagree on phase count or the same
/// (arch, strategy, seed) appears twice.
Aggregate aggregate(const std::vector<SimulationRun>& runs,
                    AvgConvention convention = AvgConvention::FromT2);

/// Aligned plain-text tables: one block per arch (rows = strategies, columns
/// = per-phase P/R/F1 plus average F1), then the cross-model block. Every
/// header line is prefixed with "# ". Percentages with two decimals;
/// undefined prints as "n/a".
std::string render_text(const Aggregate& agg, std::string_view header = "");

/// One row per run and phase:
/// arch,strategy,seed,phase,tp,fp,tn,fn,precision,recall,f1
/// (metric fields empty when undefined).
std::string phase_metrics_csv(const std::vector<SimulationRun>& runs);

/// Plot-ready series, one row per (arch, strategy, phase):
/// arch,strategy,phase,mean_f1,defined_runs,total_runs
std::string f1_series_csv(const Aggregate& agg);

/// Mean per-phase F1 of one run over the convention window, with F1 taken in
/// the 2tp/(2tp+fp+fn) form so an all-negative phase counts as zero instead
/// of dropping out. Undefined only when every phase in the window is
/// all-true-negative.
std::optional<double> avg_f1_of_run(const SimulationRun& run,
                                    AvgConvention convention);

struct SweepPoint {
  double pi_p = 0.0;
  std::optional<double> mean_f1;
};

struct SweepResult {
  std::string arch;
  std::vector<SweepPoint> points;
  double auto_pi_p = 0.0;  // the estimate an unconstrained run selects
  std::optional<double> auto_mean_f1;
};

/// Runs the uptake strategy once per grid value with the class prior
/// overridden, plus one run with the auto-estimated prior. Grid values must
/// lie in [0, 1]; the grid must be non-empty.
SweepResult sweep_pi_p(const std::vector<PhaseDataset>& phases, const Arch& arch,
                       const SimOptions& base, std::span<const double> grid,
                       AvgConvention convention = AvgConvention::FromT2);

/// Two-column CSV of the grid points: pi_p,mean_f1 (mean_f1 empty when
/// undefined). The auto point is not included; callers emit it separately.
std::string sweep_csv(const SweepResult& s);

}  // namespace uplearn
