#include "uplearn/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "uplearn/dates.hpp"

namespace uplearn {

void IngestConfig::validate() const {
  if (path.empty()) throw std::invalid_argument("ingest: path must be set");
  if (feature_columns.empty()) {
    throw std::invalid_argument("ingest: feature_columns must not be empty");
  }
  if (id_column.empty() || date_column.empty() || label_column.empty()) {
    throw std::invalid_argument("ingest: id/date/label column names must be set");
  }
  if (window_length < 1) throw std::invalid_argument("ingest: window_length must be >= 1");
  if (phases < 2) throw std::invalid_argument("ingest: phases must be >= 2");
  if (label_horizon_days < 0) {
    throw std::invalid_argument("ingest: label_horizon_days must be >= 0");
  }
}

nlohmann::json NormalizationStats::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : channels) {
    arr.push_back({{"mean", c.mean}, {"stddev", c.stddev}});
  }
  return nlohmann::json{{"channels", arr}};
}

NormalizationStats NormalizationStats::from_json(const nlohmann::json& j) {
  NormalizationStats s;
  for (const auto& c : j.at("channels")) {
    s.channels.push_back({c.at("mean").get<double>(), c.at("stddev").get<double>()});
  }
  return s;
}

NormalizationStats normalize_stats(const PhaseDataset& phase) {
  if (phase.records().empty()) {
    throw std::invalid_argument("normalize_stats: empty phase");
  }
  const std::size_t d = phase.records().front().window().channels();
  std::vector<double> sum(d, 0.0);
  std::vector<double> sum_sq(d, 0.0);
  std::uint64_t rows = 0;
  for (const auto& r : phase.records()) {
    const auto& w = r.window();
    for (std::size_t t = 0; t < w.timestamps(); ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        const double v = w.at(t, c);
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    rows += w.timestamps();
  }
  NormalizationStats stats;
  stats.channels.resize(d);
  const double n = static_cast<double>(rows);
  for (std::size_t c = 0; c < d; ++c) {
    const double mean = sum[c] / n;
    const double var = std::max(0.0, sum_sq[c] / n - mean * mean);
    stats.channels[c] = {mean, std::max(std::sqrt(var), 1e-8)};
  }
  return stats;
}

std::vector<LabeledRecord> apply_normalization(const std::vector<LabeledRecord>& records,
                                               const NormalizationStats& stats) {
  std::vector<LabeledRecord> out;
  out.reserve(records.size());
  OracleAudit audit;
  for (const auto& r : records) {
    const auto& w = r.window();
    if (w.channels() != stats.channels.size()) {
      throw std::invalid_argument("apply_normalization: channel count mismatch");
    }
    std::vector<double> values;
    values.reserve(w.values().size());
    for (std::size_t t = 0; t < w.timestamps(); ++t) {
      for (std::size_t c = 0; c < w.channels(); ++c) {
        const auto& ch = stats.channels[c];
        values.push_back((w.at(t, c) - ch.mean) / ch.stddev);
      }
    }
    out.emplace_back(r.id(), r.phase(),
                     FeatureWindow(w.timestamps(), w.channels(), std::move(values)),
                     r.oracle(audit, OracleReader::Setup), r.observed());
  }
  return out;
}

namespace {

struct Row {
  int day = 0;
  int label = 0;
  std::vector<double> features;
};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

LoadResult load_csv(const IngestConfig& cfg) {
  cfg.validate();
  std::ifstream in(cfg.path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("ingest: cannot open " + cfg.path.string());
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("ingest: " + cfg.path.string() + " is empty");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_fields(line);
  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error("ingest: column '" + name + "' not found in header of " +
                             cfg.path.string());
  };
  const std::size_t id_idx = column_index(cfg.id_column);
  const std::size_t date_idx = column_index(cfg.date_column);
  const std::size_t label_idx = column_index(cfg.label_column);
  std::vector<std::size_t> feature_idx;
  feature_idx.reserve(cfg.feature_columns.size());
  for (const auto& name : cfg.feature_columns) feature_idx.push_back(column_index(name));

  LoadResult result;
  SkipReport& skip = result.skipped;

  // unit id -> rows sorted by day
  std::map<std::string, std::vector<Row>> units;
  int min_day = 0;
  int max_day = 0;
  bool any = false;

  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      ++skip.rows_dropped_unparseable;
      continue;
    }
    const auto day = parse_date_days(fields[date_idx]);
    if (!day.has_value()) {
      ++skip.rows_dropped_unparseable;
      continue;
    }
    const std::string_view label_text = fields[label_idx];
    if (label_text != "0" && label_text != "1") {
      ++skip.rows_dropped_unparseable;
      continue;
    }
    Row row;
    row.day = *day;
    row.label = label_text == "1" ? 1 : 0;
    row.features.reserve(feature_idx.size());
    bool missing = false;
    bool bad = false;
    for (const std::size_t idx : feature_idx) {
      if (fields[idx].empty()) {
        missing = true;
        break;
      }
      const auto v = parse_double(fields[idx]);
      if (!v.has_value()) {
        bad = true;
        break;
      }
      row.features.push_back(*v);
    }
    if (missing) {
      ++skip.rows_dropped_missing;
      continue;
    }
    if (bad) {
      ++skip.rows_dropped_unparseable;
      continue;
    }
    const std::string unit(fields[id_idx]);
    if (unit.empty()) {
      ++skip.rows_dropped_unparseable;
      continue;
    }
    units[unit].push_back(std::move(row));
    min_day = any ? std::min(min_day, *day) : *day;
    max_day = any ? std::max(max_day, *day) : *day;
    any = true;
  }
  if (!any) {
    throw std::runtime_error("ingest: no usable rows in " + cfg.path.string());
  }

  for (auto& [unit, rows] : units) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.day < b.day; });
    std::vector<Row> unique;
    unique.reserve(rows.size());
    for (auto& row : rows) {
      if (!unique.empty() && unique.back().day == row.day) {
        ++skip.rows_dropped_duplicate;  // keep the first reading of a day
        continue;
      }
      unique.push_back(std::move(row));
    }
    rows = std::move(unique);
  }

  // Equal contiguous date spans: phase p covers days [cut(p-1), cut(p)).
  const std::int64_t span = static_cast<std::int64_t>(max_day) - min_day + 1;
  auto cut = [&](int p) {
    return min_day + static_cast<int>(span * p / cfg.phases);
  };
  auto phase_of_day = [&](int day) {
    for (int p = 1; p <= cfg.phases; ++p) {
      if (day < cut(p)) return p;
    }
    return cfg.phases;
  };

  const auto l = static_cast<std::size_t>(cfg.window_length);
  std::vector<std::vector<LabeledRecord>> phase_records(
      static_cast<std::size_t>(cfg.phases));

  for (const auto& [unit, rows] : units) {
    auto emit = [&](std::size_t end_idx) {
      if (end_idx + 1 < l) {
        ++skip.records_skipped_short_history;
        return;
      }
      const std::size_t first = end_idx + 1 - l;
      const int end_day = rows[end_idx].day;
      const int phase = phase_of_day(end_day);
      std::vector<double> values;
      values.reserve(l * feature_idx.size());
      for (std::size_t i = first; i <= end_idx; ++i) {
        values.insert(values.end(), rows[i].features.begin(), rows[i].features.end());
      }
      bool positive = false;
      const int horizon_end = end_day + cfg.label_horizon_days;
      for (std::size_t i = first; i < rows.size() && rows[i].day <= horizon_end; ++i) {
        if (rows[i].label == 1) {
          positive = true;
          break;
        }
      }
      phase_records[static_cast<std::size_t>(phase - 1)].emplace_back(
          unit + "@" + format_date(end_day), phase,
          FeatureWindow(l, feature_idx.size(), std::move(values)),
          positive ? OracleLabel::Positive : OracleLabel::Negative);
    };

    if (cfg.dense_stride) {
      for (std::size_t i = 0; i < rows.size(); ++i) emit(i);
    } else {
      // Last row of the unit inside each phase, if any.
      std::size_t i = 0;
      for (int p = 1; p <= cfg.phases; ++p) {
        std::optional<std::size_t> last;
        while (i < rows.size() && rows[i].day < cut(p)) {
          last = i;
          ++i;
        }
        if (last.has_value()) emit(*last);
      }
    }
  }

  OracleAudit audit;
  const bool zscore = cfg.normalization == Normalization::ZScorePerChannel;
  std::optional<NormalizationStats> stats;
  if (zscore) {
    if (phase_records[0].empty()) {
      throw std::runtime_error("ingest: phase 1 is empty, cannot derive normalization");
    }
    auto first_phase = PhaseDataset::make(1, phase_records[0], audit, OracleReader::Setup);
    stats = normalize_stats(first_phase);
  }

  for (int p = 1; p <= cfg.phases; ++p) {
    auto& records = phase_records[static_cast<std::size_t>(p - 1)];
    std::sort(records.begin(), records.end(),
              [](const LabeledRecord& a, const LabeledRecord& b) {
                return a.id() < b.id();
              });
    if (stats.has_value()) {
      records = apply_normalization(records, *stats);
    }
    result.phases.push_back(
        PhaseDataset::make(p, std::move(records), audit, OracleReader::Setup));
  }
  result.stats = std::move(stats);
  return result;
}

}  // namespace uplearn
