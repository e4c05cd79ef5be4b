#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uplearn/datagen.hpp"
#include "uplearn/ingest.hpp"
#include "uplearn/report.hpp"
#include "uplearn/simulate.hpp"

namespace uplearn {

/// Invalid configuration (file, flag, or grid spec). The CLI maps this to
/// exit code 1; every message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full experiment description, read from a flat key=value config file.
/// Strategies and archs stay as the strings the user wrote; resolve_* turns
/// them into typed values.
struct ExperimentConfig {
  std::string data_source = "generate";  // "generate" or "csv"
  GeneratorConfig generate;              // generate.seed drives cmd_generate;
                                         // cmd_run re-seeds per run
  IngestConfig csv;
  std::vector<std::string> strategies = {"offline", "certain", "naive", "uptake"};
  std::vector<std::string> archs = {"linear", "mlp:8"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  /// Training and simulation options shared by every grid cell; the per-cell
  /// seed overwrites sim.train.seed.
  SimOptions sim;
  /// Give certain records full per-side weight in the uptake risk.
  bool certain_full_weight = false;
  AvgConvention convention = AvgConvention::FromT2;
  std::string output_dir = "out";

  /// Cross-field validation; throws ConfigError naming the field.
  void validate() const;
};

/// Parses the documented key=value format ('#' comment lines, blank lines
/// ignored). Unknown or duplicate keys and malformed values throw
/// ConfigError with the line number and key.
ExperimentConfig parse_config_text(std::string_view text);

ExperimentConfig load_config_file(const std::string& path);

/// Applies a single key=value assignment (same grammar and checks as the
/// config file); `context` names the source in error messages, e.g. a flag.
void set_config_value(ExperimentConfig& cfg, std::string_view key,
                      std::string_view value, std::string_view context);

/// Every configuration key in fixed order with its final value. Excludes
/// output_dir and parallelism, which affect where and how fast results are
/// written but not the results themselves.
std::string canonical_config_text(const ExperimentConfig& cfg);

/// FNV-1a hash of canonical_config_text; embedded in every artifact.
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::vector<Strategy> resolve_strategies(const ExperimentConfig& cfg);
std::vector<Arch> resolve_archs(const ExperimentConfig& cfg);

/// "a:b:step" (inclusive ends) or a comma list of values.
std::vector<double> parse_grid_spec(const std::string& spec);

/// Worker count: explicit flag, else UPLEARN_THREADS, else hardware threads.
unsigned resolve_threads(std::optional<unsigned> flag);

/// Runs fn(0..count-1) on up to `threads` workers. Exceptions inside fn must
/// be handled by fn itself.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

/// Write-temp-then-rename; creates parent directories.
void write_file_atomic(const std::string& path, std::string_view content);

/// Artifact file name for one grid cell, e.g. "uptake_mlp8_s3.json".
std::string run_file_name(const Strategy& strategy, const Arch& arch,
                          std::uint64_t seed);

// Commands return the process exit code: 0 success, 2 runtime failure.
// Configuration problems throw ConfigError (exit 1 in the CLI).

/// Writes one CSV per phase plus manifest.json under <output_dir>/data.
/// Refuses to overwrite existing files unless force is set.
int cmd_generate(const ExperimentConfig& cfg, bool force, std::ostream& out,
                 std::ostream& err);

/// Executes the strategy x arch x seed grid, writes runs/, timings/ and
/// reports/ under output_dir, and prints the summary table. Partial failures
/// keep successful artifacts and name every failed cell.
int cmd_run(const ExperimentConfig& cfg, unsigned threads, std::ostream& out,
            std::ostream& err);

/// Class-prior sweep per arch (mean F1 across seeds for every grid value,
/// plus the auto-estimated point); writes CSVs under <output_dir>/sweep.
int cmd_sweep(const ExperimentConfig& cfg, const std::string& grid_spec,
              unsigned threads, std::ostream& out, std::ostream& err);

/// Re-renders reports/ from the run files already under output_dir.
int cmd_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace uplearn
