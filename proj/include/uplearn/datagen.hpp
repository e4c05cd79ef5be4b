#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uplearn/core.hpp"

namespace uplearn {

/// Role a synthetic telemetry channel plays; assigned cyclically by index.
/// ErrorCounter channels additionally ramp up over the window on failing
/// units (degradation_slope).
enum class ChannelTag { Timer, Counter, Physical, ErrorCounter };

ChannelTag channel_tag(std::size_t channel);

/// Stable CSV column name, e.g. "timer_0", "errcnt_3".
std::string channel_column_name(std::size_t channel);

/// Synthetic fleet generator. Negatives are stationary per-channel Gaussians;
/// positives carry a mean-shift signature whose direction drifts a fixed step
/// per phase. Everything is a pure function of the config.
struct GeneratorConfig {
  std::uint64_t seed = 1;
  int phases = 5;
  int records_per_phase = 4000;
  int window_length = 8;  // rows per record
  int channels = 8;
  double imbalance_rate = 0.01;  // target positive fraction per phase
  /// Per-channel mean shift applied to the positive class each phase.
  /// Empty selects the built-in default: a drift of window-level magnitude
  /// drift_scale * noise_sigma, mostly orthogonal to the signature with a
  /// fixed component toward the negative class.
  std::vector<double> drift_per_phase;
  double noise_sigma = 1.0;
  double degradation_slope = 0.02;  // per-row ramp on ErrorCounter channels
  /// Window-level signal-to-noise of the positive signature: the norm of the
  /// flattened mean difference between classes at phase 1, in noise_sigma
  /// units.
  double positive_separation = 2.7;
  /// Channel noise multiplier for failing units. Degradation modes are
  /// stereotyped: once a unit is failing, its telemetry follows the
  /// signature closely, so within-class scatter is much smaller than the
  /// healthy fleet's ambient noise.
  double positive_noise_scale = 0.25;
  /// Window-level magnitude of the default drift per phase (ignored when
  /// drift_per_phase is set explicitly).
  double drift_scale = 0.55;
  bool drift_both_classes = false;
  std::uint64_t max_cells = 200'000'000;  // phases*records*rows*channels bound

  void validate() const;
};

/// Deterministic per-seed geometry of the generator: channel baselines plus
/// the failure-signature track. By default the class centre moves along a
/// slowly tightening arc (true rotation, so stale training pools become
/// misleading rather than merely distant); an explicit drift_per_phase
/// override falls back to straight additive drift.
struct GeneratorStructure {
  std::vector<double> baseline;       // negative-class channel means
  std::vector<double> signature_row;  // positive row shift at lifecycle age 0
  std::vector<double> orth_row;       // unit-sigma row direction orthogonal to it
  std::vector<double> drift_row;      // explicit per-step shift when configured
  double omega = 0.0;        // arc angle per phase of the default drift
  double radial_step = 0.0;  // per-phase erosion of the separation (sigma units)
};

GeneratorStructure generator_structure(const GeneratorConfig& cfg);

/// Generate one dataset per phase. Same config (including seed) always yields
/// bit-identical output. Each phase draws from its own RNG stream derived
/// from (seed, phase index). If rounding the target positive count yields
/// zero, ceil(imbalance_rate * records_per_phase) positives are forced.
std::vector<PhaseDataset> generate_fleet(const GeneratorConfig& cfg);

/// First calendar day used for generated telemetry rows (2024-01-01).
int fleet_base_day();

/// Calendar day of row t of a phase-k record; phase k occupies its own
/// window_length-day block so ingestion phase cuts align with generation.
int fleet_row_day(int phase, int window_length, int row);

/// Write one phase of a fleet in the ingestion CSV format (columns id, date,
/// label, then channel_column_name(c) for every channel). A positive record
/// carries label 1 on its final row. Ground-truth reads are audited.
void write_phase_csv(const PhaseDataset& phase, int window_length,
                     const std::filesystem::path& file, OracleAudit& audit);

/// Write a whole fleet as a single CSV (same row format, phases in order) so
/// it can be read back with load_csv.
void write_fleet_csv(const std::vector<PhaseDataset>& fleet, int window_length,
                     const std::filesystem::path& file, OracleAudit& audit);

}  // namespace uplearn
