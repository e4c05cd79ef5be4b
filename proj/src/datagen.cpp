#include "uplearn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "uplearn/dates.hpp"
#include "uplearn/util.hpp"

namespace uplearn {

namespace {

constexpr int kBaseDay = 19723;  // 2024-01-01

// Split of the default drift between erosion and rotation. The tilted
// fraction shrinks the class separation a little each phase; the rest turns
// the signature direction along an arc, so training pools from earlier
// phases point models at where failures used to live, not where they are.
constexpr double kDriftTowardNegative = 0.3;

/// Healthy units that went through mitigation carry an attenuated copy of the
/// failure signature. Most have largely recovered and sit in a band below the
/// failing cluster; a thin slice was repaired moments ago and still shows the
/// full signature. Both put real negatives near (or on) the failing cluster,
/// so no detector reaches perfect precision, and pushing the decision surface
/// down into the recovering band costs real false alarms.
constexpr double kRecoveringRate = 0.015;
constexpr double kRecoveringFloor = 0.55;
constexpr double kRecoveringSpread = 0.25;
constexpr double kShadowRate = 0.006;
constexpr double kShadowFloor = 0.95;
constexpr double kShadowSpread = 0.1;

/// Units move through their degradation lifecycle asynchronously: a failing
/// unit's telemetry reflects its own age, not the fleet clock, so each record
/// sits at a jittered point along the drift path rather than exactly at the
/// phase marker.
constexpr double kLifecycleJitter = 0.75;

// Per-record severity of the failure signature, amplitude in
// [1 - spread, 1 + spread] with mild failures the common case (cubed
// uniform draw). The spread is narrow: failure signatures are stereotyped,
// differing more in which direction the fleet has drifted than in how hard
// an individual unit fails.
constexpr double kAmplitudeSpread = 0.05;

double draw_severity(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  return 1.0 - kAmplitudeSpread + 2.0 * kAmplitudeSpread * u * u * u;
}

std::vector<double> unit_gaussian(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& x : v) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

ChannelTag channel_tag(std::size_t channel) {
  switch (channel % 4) {
    case 0: return ChannelTag::Timer;
    case 1: return ChannelTag::Counter;
    case 2: return ChannelTag::Physical;
    default: return ChannelTag::ErrorCounter;
  }
}

std::string channel_column_name(std::size_t channel) {
  const char* prefix = "";
  switch (channel_tag(channel)) {
    case ChannelTag::Timer: prefix = "timer"; break;
    case ChannelTag::Counter: prefix = "counter"; break;
    case ChannelTag::Physical: prefix = "physical"; break;
    case ChannelTag::ErrorCounter: prefix = "errcnt"; break;
  }
  return std::string(prefix) + "_" + std::to_string(channel);
}

void GeneratorConfig::validate() const {
  if (phases < 2) throw std::invalid_argument("generator: phases must be >= 2");
  if (records_per_phase < 1) {
    throw std::invalid_argument("generator: records_per_phase must be >= 1");
  }
  if (window_length < 1) throw std::invalid_argument("generator: window_length must be >= 1");
  if (channels < 1) throw std::invalid_argument("generator: channels must be >= 1");
  if (!(imbalance_rate > 0.0 && imbalance_rate < 1.0)) {
    throw std::invalid_argument("generator: imbalance_rate must lie in (0, 1)");
  }
  if (!drift_per_phase.empty() &&
      drift_per_phase.size() != static_cast<std::size_t>(channels)) {
    throw std::invalid_argument(
        "generator: drift_per_phase must be empty or have one entry per channel");
  }
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("generator: noise_sigma must be > 0");
  if (!(positive_separation >= 0.0)) {
    throw std::invalid_argument("generator: positive_separation must be >= 0");
  }
  if (!(drift_scale >= 0.0)) throw std::invalid_argument("generator: drift_scale must be >= 0");
  if (!(positive_noise_scale > 0.0)) {
    throw std::invalid_argument("generator: positive_noise_scale must be > 0");
  }
  const std::uint64_t cells = static_cast<std::uint64_t>(phases) *
                              static_cast<std::uint64_t>(records_per_phase) *
                              static_cast<std::uint64_t>(window_length) *
                              static_cast<std::uint64_t>(channels);
  if (cells > max_cells) {
    throw std::invalid_argument("generator: phases*records*rows*channels = " +
                                std::to_string(cells) + " exceeds max_cells = " +
                                std::to_string(max_cells));
  }
}

GeneratorStructure generator_structure(const GeneratorConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.channels);
  const double row_scale =
      cfg.noise_sigma / std::sqrt(static_cast<double>(cfg.window_length));

  std::mt19937_64 rng(derive_seed(cfg.seed, "structure"));
  GeneratorStructure s;
  s.baseline.resize(d);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (double& b : s.baseline) b = uniform(rng);

  const std::vector<double> u = unit_gaussian(rng, d);
  s.signature_row.resize(d);
  for (std::size_t c = 0; c < d; ++c) {
    s.signature_row[c] = cfg.positive_separation * row_scale * u[c];
  }

  if (!cfg.drift_per_phase.empty()) {
    s.drift_row = cfg.drift_per_phase;
    return s;
  }
  std::vector<double> raw = unit_gaussian(rng, d);
  double along = 0.0;
  for (std::size_t c = 0; c < d; ++c) along += raw[c] * u[c];
  double norm2 = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    raw[c] -= along * u[c];
    norm2 += raw[c] * raw[c];
  }
  s.orth_row.resize(d);
  const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    s.orth_row[c] = row_scale * raw[c] * inv;
  }
  const double orth_frac =
      std::sqrt(std::max(0.0, 1.0 - kDriftTowardNegative * kDriftTowardNegative));
  s.omega = cfg.positive_separation > 0.0
                ? cfg.drift_scale * orth_frac / cfg.positive_separation
                : 0.0;
  s.radial_step = cfg.drift_scale * kDriftTowardNegative;
  return s;
}

std::vector<PhaseDataset> generate_fleet(const GeneratorConfig& cfg) {
  cfg.validate();
  const GeneratorStructure structure = generator_structure(cfg);
  const auto l = static_cast<std::size_t>(cfg.window_length);
  const auto d = static_cast<std::size_t>(cfg.channels);
  const int n = cfg.records_per_phase;

  std::vector<PhaseDataset> fleet;
  fleet.reserve(static_cast<std::size_t>(cfg.phases));
  OracleAudit setup_audit;

  for (int phase = 1; phase <= cfg.phases; ++phase) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(phase)));

    auto n_pos = static_cast<int>(std::llround(cfg.imbalance_rate * n));
    if (n_pos == 0) {
      n_pos = static_cast<int>(std::ceil(cfg.imbalance_rate * n));  // never all-negative
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> positive(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n_pos; ++i) positive[static_cast<std::size_t>(order[i])] = 1;

    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double k_steps = static_cast<double>(phase - 1);

    // Channel-mean shift of an amplitude-m copy of the failure signature at
    // lifecycle age a. On the default track the class centre rotates by omega
    // per phase while the separation erodes by radial_step; an explicit drift
    // override moves it along a straight additive line instead.
    const bool arc_track = structure.drift_row.empty();
    const double inv_sep =
        cfg.positive_separation > 0.0 ? 1.0 / cfg.positive_separation : 0.0;
    const auto signature_at = [&](double m, double a, std::size_t c) {
      if (!arc_track) {
        return m * (structure.signature_row[c] + a * structure.drift_row[c]);
      }
      const double radius =
          std::max(0.0, cfg.positive_separation - structure.radial_step * a);
      const double angle = structure.omega * a;
      const double radial = structure.signature_row[c] * inv_sep;
      return m * radius *
             (std::cos(angle) * radial + std::sin(angle) * structure.orth_row[c]);
    };

    std::vector<LabeledRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    std::vector<double> cells(l * d);
    char idbuf[32];
    for (int i = 0; i < n; ++i) {
      const bool pos = positive[static_cast<std::size_t>(i)] != 0;
      const double severity = pos ? draw_severity(rng) : 0.0;
      double trace = 0.0;  // residual signature on a mitigated survivor
      if (!pos) {
        const double r = unit(rng);
        if (r < kShadowRate) {
          trace = kShadowFloor + kShadowSpread * unit(rng);
        } else if (r < kShadowRate + kRecoveringRate) {
          trace = kRecoveringFloor + kRecoveringSpread * unit(rng);
        }
      }
      const double age = pos || trace > 0.0
                             ? k_steps + kLifecycleJitter * noise(rng)
                             : k_steps;
      const double noise_scale =
          pos || trace > 0.0 ? cfg.positive_noise_scale : 1.0;
      for (std::size_t t = 0; t < l; ++t) {
        for (std::size_t c = 0; c < d; ++c) {
          double v = structure.baseline[c] + noise_scale * noise(rng);
          if (pos) {
            v += signature_at(severity, age, c);
            if (channel_tag(c) == ChannelTag::ErrorCounter) {
              v += severity * cfg.degradation_slope * static_cast<double>(t);
            }
          } else {
            if (cfg.drift_both_classes) {
              v += signature_at(1.0, k_steps, c) - structure.signature_row[c];
            }
            if (trace > 0.0) {
              v += signature_at(trace, age, c);
            }
          }
          cells[t * d + c] = v;
        }
      }
      std::snprintf(idbuf, sizeof(idbuf), "p%d-%05d", phase, i);
      records.emplace_back(idbuf, phase, FeatureWindow(l, d, cells),
                           pos ? OracleLabel::Positive : OracleLabel::Negative);
    }
    fleet.push_back(PhaseDataset::make(phase, std::move(records), setup_audit,
                                       OracleReader::Setup));
  }
  return fleet;
}

int fleet_base_day() { return kBaseDay; }

int fleet_row_day(int phase, int window_length, int row) {
  return kBaseDay + (phase - 1) * window_length + row;
}

namespace {

void write_rows(std::ofstream& out, const PhaseDataset& phase, int window_length,
                OracleAudit& audit) {
  char numbuf[40];
  for (const auto& r : phase.records()) {
    const bool pos = r.oracle(audit, OracleReader::Setup) == OracleLabel::Positive;
    const auto& w = r.window();
    const std::string unit = r.id();
    for (std::size_t t = 0; t < w.timestamps(); ++t) {
      out << unit << ','
          << format_date(fleet_row_day(phase.phase(), window_length,
                                       static_cast<int>(t)))
          << ',' << ((pos && t + 1 == w.timestamps()) ? '1' : '0');
      for (std::size_t c = 0; c < w.channels(); ++c) {
        std::snprintf(numbuf, sizeof(numbuf), ",%.17g", w.at(t, c));
        out << numbuf;
      }
      out << '\n';
    }
  }
}

void write_header(std::ofstream& out, std::size_t channels) {
  out << "id,date,label";
  for (std::size_t c = 0; c < channels; ++c) {
    out << ',' << channel_column_name(c);
  }
  out << '\n';
}

std::ofstream open_csv(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);  // LF line endings everywhere
  if (!out) {
    throw std::runtime_error("cannot open " + file.string() + " for writing");
  }
  return out;
}

}  // namespace

void write_phase_csv(const PhaseDataset& phase, int window_length,
                     const std::filesystem::path& file, OracleAudit& audit) {
  if (phase.records().empty()) {
    throw std::invalid_argument("write_phase_csv: empty phase");
  }
  auto out = open_csv(file);
  write_header(out, phase.records().front().window().channels());
  write_rows(out, phase, window_length, audit);
  if (!out.good()) throw std::runtime_error("write failed: " + file.string());
}

void write_fleet_csv(const std::vector<PhaseDataset>& fleet, int window_length,
                     const std::filesystem::path& file, OracleAudit& audit) {
  if (fleet.empty() || fleet.front().records().empty()) {
    throw std::invalid_argument("write_fleet_csv: empty fleet");
  }
  auto out = open_csv(file);
  write_header(out, fleet.front().records().front().window().channels());
  for (const auto& phase : fleet) {
    write_rows(out, phase, window_length, audit);
  }
  if (!out.good()) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace uplearn
