#include "uplearn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "uplearn/util.hpp"

namespace uplearn {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void fail(std::string_view context, std::string_view key,
                       const std::string& msg) {
  throw ConfigError(std::string(context) + ": " + std::string(key) + ": " + msg);
}

double parse_real(std::string_view context, std::string_view key,
                  std::string_view v) {
  double out{};
  const char* last = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), last, out);
  if (ec != std::errc() || p != last) {
    fail(context, key, "expected a real number, got '" + std::string(v) + "'");
  }
  return out;
}

long long parse_integer(std::string_view context, std::string_view key,
                        std::string_view v) {
  long long out{};
  const char* last = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), last, out);
  if (ec != std::errc() || p != last) {
    fail(context, key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

int parse_int_min(std::string_view context, std::string_view key,
                  std::string_view v, long long min) {
  const long long out = parse_integer(context, key, v);
  if (out < min) {
    fail(context, key, "must be >= " + std::to_string(min) + ", got '" +
                           std::string(v) + "'");
  }
  return static_cast<int>(out);
}

std::uint64_t parse_u64(std::string_view context, std::string_view key,
                        std::string_view v) {
  std::uint64_t out{};
  const char* last = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), last, out);
  if (ec != std::errc() || p != last) {
    fail(context, key,
         "expected a nonnegative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view context, std::string_view key,
                std::string_view v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  fail(context, key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::string> split_list(std::string_view context, std::string_view key,
                                    std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const std::string_view item =
        trim(v.substr(start, comma == std::string_view::npos ? comma
                                                             : comma - start));
    if (item.empty()) {
      fail(context, key, "empty list item in '" + std::string(v) + "'");
    }
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) fail(context, key, "empty list");
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ",";
    out += items[i];
  }
  return out;
}

void set_key(ExperimentConfig& cfg, std::string_view context,
             std::string_view key, std::string_view value) {
  auto& g = cfg.generate;
  auto& c = cfg.csv;
  auto& t = cfg.sim.train;
  if (key == "data.source") {
    if (value != "generate" && value != "csv") {
      fail(context, key, "expected generate or csv, got '" + std::string(value) + "'");
    }
    cfg.data_source = value;
  } else if (key == "generate.seed") {
    g.seed = parse_u64(context, key, value);
  } else if (key == "generate.phases") {
    g.phases = parse_int_min(context, key, value, 2);
  } else if (key == "generate.records_per_phase") {
    g.records_per_phase = parse_int_min(context, key, value, 1);
  } else if (key == "generate.window_length") {
    g.window_length = parse_int_min(context, key, value, 1);
  } else if (key == "generate.channels") {
    g.channels = parse_int_min(context, key, value, 1);
  } else if (key == "generate.imbalance_rate") {
    const double v = parse_real(context, key, value);
    if (!(v > 0.0 && v < 1.0)) fail(context, key, "must lie in (0, 1)");
    g.imbalance_rate = v;
  } else if (key == "generate.drift_per_phase") {
    if (value == "default") {
      g.drift_per_phase.clear();
    } else {
      g.drift_per_phase.clear();
      for (const std::string& item : split_list(context, key, value)) {
        g.drift_per_phase.push_back(parse_real(context, key, item));
      }
    }
  } else if (key == "generate.noise_sigma") {
    const double v = parse_real(context, key, value);
    if (!(v > 0.0)) fail(context, key, "must be > 0");
    g.noise_sigma = v;
  } else if (key == "generate.degradation_slope") {
    g.degradation_slope = parse_real(context, key, value);
  } else if (key == "generate.positive_noise_scale") {
    const double v = parse_real(context, key, value);
    if (!(v > 0.0)) fail(context, key, "must be > 0");
    g.positive_noise_scale = v;
  } else if (key == "generate.positive_separation") {
    const double v = parse_real(context, key, value);
    if (!(v >= 0.0)) fail(context, key, "must be >= 0");
    g.positive_separation = v;
  } else if (key == "generate.drift_scale") {
    const double v = parse_real(context, key, value);
    if (!(v >= 0.0)) fail(context, key, "must be >= 0");
    g.drift_scale = v;
  } else if (key == "generate.drift_both_classes") {
    g.drift_both_classes = parse_bool(context, key, value);
  } else if (key == "generate.max_cells") {
    g.max_cells = parse_u64(context, key, value);
  } else if (key == "csv.path") {
    c.path = std::string(value);
  } else if (key == "csv.feature_columns") {
    c.feature_columns = split_list(context, key, value);
  } else if (key == "csv.id_column") {
    c.id_column = std::string(value);
  } else if (key == "csv.date_column") {
    c.date_column = std::string(value);
  } else if (key == "csv.label_column") {
    c.label_column = std::string(value);
  } else if (key == "csv.window_length") {
    c.window_length = parse_int_min(context, key, value, 1);
  } else if (key == "csv.phases") {
    c.phases = parse_int_min(context, key, value, 2);
  } else if (key == "csv.normalization") {
    if (value == "zscore") {
      c.normalization = Normalization::ZScorePerChannel;
    } else if (value == "none") {
      c.normalization = Normalization::None;
    } else {
      fail(context, key, "expected zscore or none, got '" + std::string(value) + "'");
    }
  } else if (key == "csv.label_horizon_days") {
    c.label_horizon_days = parse_int_min(context, key, value, 0);
  } else if (key == "csv.dense_stride") {
    c.dense_stride = parse_bool(context, key, value);
  } else if (key == "strategies") {
    cfg.strategies = split_list(context, key, value);
    for (const std::string& s : cfg.strategies) {
      try {
        parse_strategy(s);
      } catch (const std::invalid_argument& e) {
        fail(context, key, e.what());
      }
    }
  } else if (key == "archs") {
    cfg.archs = split_list(context, key, value);
    for (const std::string& a : cfg.archs) {
      try {
        parse_arch(a);
      } catch (const std::invalid_argument& e) {
        fail(context, key, e.what());
      }
    }
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const std::string& s : split_list(context, key, value)) {
      cfg.seeds.push_back(parse_u64(context, key, s));
    }
  } else if (key == "train.learning_rate") {
    const double v = parse_real(context, key, value);
    if (!(v > 0.0)) fail(context, key, "must be > 0");
    t.learning_rate = v;
  } else if (key == "train.epochs") {
    t.epochs = parse_int_min(context, key, value, 1);
  } else if (key == "train.batch_size") {
    t.batch_size = parse_int_min(context, key, value, 1);
  } else if (key == "train.init_scale") {
    const double v = parse_real(context, key, value);
    if (!(v >= 0.0)) fail(context, key, "must be >= 0");
    t.init_scale = v;
  } else if (key == "train.decision_threshold") {
    const double v = parse_real(context, key, value);
    if (!(v > 0.0 && v < 1.0)) fail(context, key, "must lie in (0, 1)");
    t.decision_threshold = v;
  } else if (key == "train.momentum") {
    const double v = parse_real(context, key, value);
    if (!(v >= 0.0 && v < 1.0)) fail(context, key, "must lie in [0, 1)");
    t.momentum = v;
  } else if (key == "train.weight_decay") {
    const double v = parse_real(context, key, value);
    if (!(v >= 0.0)) fail(context, key, "must be >= 0");
    t.weight_decay = v;
  } else if (key == "sim.validation_fraction") {
    const double v = parse_real(context, key, value);
    if (!(v > 0.0 && v < 1.0)) fail(context, key, "must lie in (0, 1)");
    cfg.sim.validation_fraction = v;
  } else if (key == "sim.pi_p_override") {
    if (value == "auto") {
      cfg.sim.pi_p_override.reset();
    } else {
      const double v = parse_real(context, key, value);
      if (!(v >= 0.0 && v <= 1.0)) fail(context, key, "must lie in [0, 1]");
      cfg.sim.pi_p_override = v;
    }
  } else if (key == "sim.pi_p_fallback") {
    const double v = parse_real(context, key, value);
    if (!(v >= 0.0 && v <= 1.0)) fail(context, key, "must lie in [0, 1]");
    cfg.sim.pi_p_fallback = v;
  } else if (key == "sim.reestimate_pi_p") {
    cfg.sim.reestimate_pi_p = parse_bool(context, key, value);
  } else if (key == "sim.history_window") {
    cfg.sim.history_window = parse_int_min(context, key, value, 1);
  } else if (key == "sim.certain_full_weight") {
    cfg.certain_full_weight = parse_bool(context, key, value);
  } else if (key == "report.convention") {
    if (value == "t2") {
      cfg.convention = AvgConvention::FromT2;
    } else if (value == "t3") {
      cfg.convention = AvgConvention::FromT3;
    } else {
      fail(context, key, "expected t2 or t3, got '" + std::string(value) + "'");
    }
  } else if (key == "output_dir") {
    if (value.empty()) fail(context, key, "must not be empty");
    cfg.output_dir = std::string(value);
  } else {
    fail(context, key, "unknown key");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  const std::string_view context = "config";
  if (data_source != "generate" && data_source != "csv") {
    fail(context, "data.source", "expected generate or csv");
  }
  if (strategies.empty()) fail(context, "strategies", "at least one required");
  if (archs.empty()) fail(context, "archs", "at least one required");
  if (seeds.empty()) fail(context, "seeds", "at least one required");
  {
    std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) fail(context, "seeds", "duplicate seed");
  }
  try {
    resolve_strategies(*this);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(context, "strategies", e.what());
  }
  try {
    resolve_archs(*this);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(context, "archs", e.what());
  }
  try {
    sim.validate();
  } catch (const std::exception& e) {
    fail(context, "sim/train", e.what());
  }
  if (data_source == "generate") {
    try {
      generate.validate();
    } catch (const std::exception& e) {
      fail(context, "generate", e.what());
    }
  } else {
    try {
      csv.validate();
    } catch (const std::exception& e) {
      fail(context, "csv", e.what());
    }
  }
  if (output_dir.empty()) fail(context, "output_dir", "must not be empty");
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? nl : nl - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string_view stripped = trim(line);
    const std::string context = "config line " + std::to_string(line_no);
    if (!stripped.empty() && stripped.front() != '#') {
      const std::size_t eq = stripped.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(context + ": expected 'key = value', got '" +
                          std::string(stripped) + "'");
      }
      const std::string key{trim(stripped.substr(0, eq))};
      const std::string_view value = trim(stripped.substr(eq + 1));
      if (key.empty()) throw ConfigError(context + ": empty key");
      if (!seen.insert(key).second) {
        throw ConfigError(context + ": duplicate key '" + key + "'");
      }
      set_key(cfg, context, key, value);
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void set_config_value(ExperimentConfig& cfg, std::string_view key,
                      std::string_view value, std::string_view context) {
  set_key(cfg, context, key, trim(value));
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  const auto& g = cfg.generate;
  const auto& c = cfg.csv;
  const auto& t = cfg.sim.train;
  std::vector<std::string> seed_strs;
  seed_strs.reserve(cfg.seeds.size());
  for (std::uint64_t s : cfg.seeds) seed_strs.push_back(std::to_string(s));
  std::vector<std::string> drift_strs;
  for (double v : g.drift_per_phase) drift_strs.push_back(fmt_real(v));

  std::string out;
  auto kv = [&out](std::string_view key, const std::string& value) {
    out += std::string(key) + " = " + value + "\n";
  };
  kv("data.source", cfg.data_source);
  kv("generate.seed", std::to_string(g.seed));
  kv("generate.phases", std::to_string(g.phases));
  kv("generate.records_per_phase", std::to_string(g.records_per_phase));
  kv("generate.window_length", std::to_string(g.window_length));
  kv("generate.channels", std::to_string(g.channels));
  kv("generate.imbalance_rate", fmt_real(g.imbalance_rate));
  kv("generate.drift_per_phase",
     g.drift_per_phase.empty() ? "default" : join(drift_strs));
  kv("generate.noise_sigma", fmt_real(g.noise_sigma));
  kv("generate.degradation_slope", fmt_real(g.degradation_slope));
  kv("generate.positive_noise_scale", fmt_real(g.positive_noise_scale));
  kv("generate.positive_separation", fmt_real(g.positive_separation));
  kv("generate.drift_scale", fmt_real(g.drift_scale));
  kv("generate.drift_both_classes", g.drift_both_classes ? "true" : "false");
  kv("generate.max_cells", std::to_string(g.max_cells));
  kv("csv.path", c.path.string());
  kv("csv.feature_columns",
     c.feature_columns.empty() ? "" : join(c.feature_columns));
  kv("csv.id_column", c.id_column);
  kv("csv.date_column", c.date_column);
  kv("csv.label_column", c.label_column);
  kv("csv.window_length", std::to_string(c.window_length));
  kv("csv.phases", std::to_string(c.phases));
  kv("csv.normalization",
     c.normalization == Normalization::ZScorePerChannel ? "zscore" : "none");
  kv("csv.label_horizon_days", std::to_string(c.label_horizon_days));
  kv("csv.dense_stride", c.dense_stride ? "true" : "false");
  kv("strategies", join(cfg.strategies));
  kv("archs", join(cfg.archs));
  kv("seeds", join(seed_strs));
  kv("train.learning_rate", fmt_real(t.learning_rate));
  kv("train.epochs", std::to_string(t.epochs));
  kv("train.batch_size", std::to_string(t.batch_size));
  kv("train.init_scale", fmt_real(t.init_scale));
  kv("train.decision_threshold", fmt_real(t.decision_threshold));
  kv("train.momentum", fmt_real(t.momentum));
  kv("train.weight_decay", fmt_real(t.weight_decay));
  kv("sim.validation_fraction", fmt_real(cfg.sim.validation_fraction));
  kv("sim.pi_p_override", cfg.sim.pi_p_override.has_value()
                              ? fmt_real(*cfg.sim.pi_p_override)
                              : "auto");
  kv("sim.pi_p_fallback", fmt_real(cfg.sim.pi_p_fallback));
  kv("sim.reestimate_pi_p", cfg.sim.reestimate_pi_p ? "true" : "false");
  kv("sim.history_window", std::to_string(cfg.sim.history_window));
  kv("sim.certain_full_weight", cfg.certain_full_weight ? "true" : "false");
  kv("report.convention",
     cfg.convention == AvgConvention::FromT2 ? "t2" : "t3");
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(canonical_config_text(cfg));
}

std::vector<Strategy> resolve_strategies(const ExperimentConfig& cfg) {
  std::vector<Strategy> out;
  std::set<std::string> names;
  for (const std::string& raw : cfg.strategies) {
    Strategy s = parse_strategy(raw);
    if (s.kind == StrategyKind::Uptake && cfg.certain_full_weight) {
      s.certain_full_weight = true;
    }
    if (!names.insert(strategy_name(s)).second) {
      throw ConfigError("config: strategies: duplicate strategy '" +
                        strategy_name(s) + "'");
    }
    out.push_back(s);
  }
  return out;
}

std::vector<Arch> resolve_archs(const ExperimentConfig& cfg) {
  std::vector<Arch> out;
  std::set<std::string> names;
  for (const std::string& raw : cfg.archs) {
    const Arch a = parse_arch(raw);
    if (!names.insert(arch_name(a)).second) {
      throw ConfigError("config: archs: duplicate arch '" + arch_name(a) + "'");
    }
    out.push_back(a);
  }
  return out;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  const std::string_view context = "grid spec";
  const std::string_view s = trim(spec);
  if (s.empty()) throw ConfigError("grid spec: empty");
  std::vector<double> out;
  if (s.find(':') != std::string_view::npos) {
    const std::size_t c1 = s.find(':');
    const std::size_t c2 = s.find(':', c1 + 1);
    if (c2 == std::string_view::npos ||
        s.find(':', c2 + 1) != std::string_view::npos) {
      throw ConfigError("grid spec: expected start:stop:step, got '" +
                        std::string(s) + "'");
    }
    const double start = parse_real(context, "start", trim(s.substr(0, c1)));
    const double stop = parse_real(context, "stop", trim(s.substr(c1 + 1, c2 - c1 - 1)));
    const double step = parse_real(context, "step", trim(s.substr(c2 + 1)));
    if (!(step > 0.0)) throw ConfigError("grid spec: step must be > 0");
    if (stop < start) throw ConfigError("grid spec: stop must be >= start");
    if ((stop - start) / step > 10000.0) {
      throw ConfigError("grid spec: more than 10000 points");
    }
    for (int i = 0;; ++i) {
      // Snap accumulated values so 0:1:0.1 yields exact tenths.
      const double v = std::round((start + i * step) * 1e9) / 1e9;
      if (v > stop + 1e-9) break;
      out.push_back(v);
    }
  } else {
    for (const std::string& item : split_list(context, "values", s)) {
      out.push_back(parse_real(context, "values", item));
    }
  }
  if (out.empty()) throw ConfigError("grid spec: empty grid");
  return out;
}

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag.has_value()) {
    if (*flag < 1) throw ConfigError("--threads: must be >= 1");
    return *flag;
  }
  if (const char* env = std::getenv("UPLEARN_THREADS")) {
    const std::string_view v{env};
    unsigned out{};
    const char* last = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), last, out);
    if (ec != std::errc() || p != last || out < 1) {
      throw ConfigError("UPLEARN_THREADS: expected a positive integer, got '" +
                        std::string(v) + "'");
    }
    return out;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const unsigned workers =
      std::max(1u, static_cast<unsigned>(
                       std::min<std::size_t>(threads, count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (std::thread& th : pool) th.join();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  const fs::path target{path};
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::string run_file_name(const Strategy& strategy, const Arch& arch,
                          std::uint64_t seed) {
  return strategy_name(strategy) + "_" + arch_slug(arch) + "_s" +
         std::to_string(seed) + ".json";
}

namespace {

/// Per-seed datasets for the grid: generated fleets are seeded per run so
/// every strategy and arch sees identical data at equal seed; a CSV source is
/// loaded once and shared.
struct GridData {
  std::map<std::uint64_t, std::vector<PhaseDataset>> fleets;
  std::vector<PhaseDataset> shared;
  bool use_shared = false;

  const std::vector<PhaseDataset>& for_seed(std::uint64_t seed) const {
    return use_shared ? shared : fleets.at(seed);
  }
};

GridData prepare_data(const ExperimentConfig& cfg, std::ostream& out) {
  GridData data;
  if (cfg.data_source == "generate") {
    for (const std::uint64_t seed : cfg.seeds) {
      GeneratorConfig g = cfg.generate;
      g.seed = seed;
      data.fleets.emplace(seed, generate_fleet(g));
    }
  } else {
    LoadResult loaded = load_csv(cfg.csv);
    const SkipReport& sk = loaded.skipped;
    if (sk.rows_dropped_unparseable + sk.rows_dropped_missing +
            sk.rows_dropped_duplicate + sk.records_skipped_short_history >
        0) {
      out << "ingest: dropped " << sk.rows_dropped_unparseable
          << " unparseable, " << sk.rows_dropped_missing << " missing, "
          << sk.rows_dropped_duplicate << " duplicate rows; skipped "
          << sk.records_skipped_short_history
          << " records with short history\n";
    }
    data.shared = std::move(loaded.phases);
    data.use_shared = true;
  }
  return data;
}

std::string report_header(const std::string& hash_hex,
                          const ExperimentConfig& cfg) {
  return "config hash: " + hash_hex + "\nsource: " + cfg.data_source;
}

void write_reports(const fs::path& base, const std::vector<SimulationRun>& runs,
                   const ExperimentConfig& cfg, const std::string& hash_hex,
                   std::ostream& out) {
  const Aggregate agg = aggregate(runs, cfg.convention);
  const std::string text = render_text(agg, report_header(hash_hex, cfg));
  write_file_atomic((base / "reports" / "summary.txt").string(), text);
  write_file_atomic((base / "reports" / "phase_metrics.csv").string(),
                    phase_metrics_csv(runs));
  write_file_atomic((base / "reports" / "f1_series.csv").string(),
                    f1_series_csv(agg));
  out << text;
}

}  // namespace

int cmd_generate(const ExperimentConfig& cfg, bool force, std::ostream& out,
                 std::ostream& err) {
  const fs::path dir = fs::path(cfg.output_dir) / "data";
  std::vector<fs::path> files;
  for (int p = 1; p <= cfg.generate.phases; ++p) {
    files.push_back(dir / ("phase_" + std::to_string(p) + ".csv"));
  }
  const fs::path manifest_path = dir / "manifest.json";
  files.push_back(manifest_path);
  if (!force) {
    for (const fs::path& f : files) {
      if (fs::exists(f)) {
        err << "refusing to overwrite '" << f.string()
            << "' (pass --force to replace)\n";
        return 2;
      }
    }
  }

  const std::vector<PhaseDataset> fleet = generate_fleet(cfg.generate);
  fs::create_directories(dir);
  OracleAudit audit;
  nlohmann::json per_phase = nlohmann::json::array();
  for (const PhaseDataset& phase : fleet) {
    const fs::path file =
        dir / ("phase_" + std::to_string(phase.phase()) + ".csv");
    fs::path tmp = file;
    tmp += ".tmp";
    write_phase_csv(phase, cfg.generate.window_length, tmp, audit);
    fs::rename(tmp, file);
    per_phase.push_back({{"phase", phase.phase()},
                         {"records", phase.size()},
                         {"positives", phase.positives()},
                         {"negatives", phase.negatives()},
                         {"file", file.filename().string()}});
  }
  nlohmann::json manifest;
  manifest["schema"] = "uplearn.manifest/1";
  manifest["seed"] = cfg.generate.seed;
  manifest["config_hash"] = to_hex(config_hash(cfg));
  manifest["phases"] = cfg.generate.phases;
  manifest["records_per_phase"] = cfg.generate.records_per_phase;
  manifest["window_length"] = cfg.generate.window_length;
  manifest["channels"] = cfg.generate.channels;
  manifest["per_phase"] = std::move(per_phase);
  write_file_atomic(manifest_path.string(), manifest.dump(2) + "\n");
  out << "wrote " << fleet.size() << " phase files and manifest.json under "
      << dir.string() << "\n";
  return 0;
}

int cmd_run(const ExperimentConfig& cfg, unsigned threads, std::ostream& out,
            std::ostream& err) {
  const std::vector<Strategy> strategies = resolve_strategies(cfg);
  const std::vector<Arch> archs = resolve_archs(cfg);
  const std::string hash_hex = to_hex(config_hash(cfg));
  const fs::path base{cfg.output_dir};

  const GridData data = prepare_data(cfg, out);

  struct Cell {
    Strategy strategy;
    Arch arch;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const Strategy& s : strategies) {
    for (const Arch& a : archs) {
      for (const std::uint64_t seed : cfg.seeds) {
        cells.push_back({s, a, seed});
      }
    }
  }
  out << "running " << cells.size() << " grid cells on " << threads
      << " threads\n";

  std::vector<std::optional<SimulationRun>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const Cell& cell = cells[i];
    try {
      SimOptions opts = cfg.sim;
      opts.train.seed = cell.seed;
      results[i] = run(data.for_seed(cell.seed), cell.strategy, cell.arch, opts);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  write_file_atomic((base / "config.txt").string(),
                    "# config hash: " + hash_hex + "\n" +
                        canonical_config_text(cfg));

  std::vector<SimulationRun> ok;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!results[i].has_value()) continue;
    const std::string name =
        run_file_name(cells[i].strategy, cells[i].arch, cells[i].seed);
    nlohmann::json j = run_to_json(*results[i]);
    j["config_hash"] = hash_hex;
    write_file_atomic((base / "runs" / name).string(), j.dump(2) + "\n");

    nlohmann::json timing = run_to_json(*results[i], true).at("timings");
    nlohmann::json sidecar;
    sidecar["schema"] = "uplearn.timings/1";
    sidecar["config_hash"] = hash_hex;
    sidecar["cell"] = name;
    sidecar["timings"] = std::move(timing);
    write_file_atomic((base / "timings" / name).string(),
                      sidecar.dump(2) + "\n");
    ok.push_back(std::move(*results[i]));
  }

  if (!ok.empty()) {
    write_reports(base, ok, cfg, hash_hex, out);
    out << "\nwrote " << ok.size() << " run files under "
        << (base / "runs").string() << "\n";
  }

  bool any_failed = false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (failures[i].empty()) continue;
    if (!any_failed) err << "failed cells:\n";
    any_failed = true;
    err << "  "
        << run_file_name(cells[i].strategy, cells[i].arch, cells[i].seed)
        << ": " << failures[i] << "\n";
  }
  return any_failed ? 2 : 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& grid_spec,
              unsigned threads, std::ostream& out, std::ostream& err) {
  const std::vector<double> grid = parse_grid_spec(grid_spec);
  for (const double v : grid) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("grid spec: value " + fmt_real(v) +
                        " outside [0, 1]");
    }
  }
  const std::vector<Arch> archs = resolve_archs(cfg);
  const fs::path base = fs::path(cfg.output_dir) / "sweep";
  const GridData data = prepare_data(cfg, out);

  struct Job {
    std::size_t arch_index;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < archs.size(); ++a) {
    for (const std::uint64_t seed : cfg.seeds) jobs.push_back({a, seed});
  }
  out << "sweeping " << grid.size() << " grid values x " << cfg.seeds.size()
      << " seeds x " << archs.size() << " archs on " << threads
      << " threads\n";

  std::vector<std::optional<SweepResult>> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    try {
      SimOptions opts = cfg.sim;
      opts.train.seed = job.seed;
      results[i] = sweep_pi_p(data.for_seed(job.seed), archs[job.arch_index],
                              opts, grid, cfg.convention);
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });

  bool any_failed = false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (failures[i].empty()) continue;
    if (!any_failed) err << "failed sweep jobs:\n";
    any_failed = true;
    err << "  " << arch_name(archs[jobs[i].arch_index]) << " seed "
        << jobs[i].seed << ": " << failures[i] << "\n";
  }

  for (std::size_t a = 0; a < archs.size(); ++a) {
    std::vector<const SweepResult*> members;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].arch_index == a && results[i].has_value()) {
        members.push_back(&*results[i]);
      }
    }
    if (members.empty()) continue;
    std::string csv = "pi_p,mean_f1\n";
    std::optional<double> best_f1;
    double best_pi = 0.0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const SweepResult* r : members) {
        if (r->points[gi].mean_f1.has_value()) {
          sum += *r->points[gi].mean_f1;
          ++n;
        }
      }
      csv += fmt_real(grid[gi]) + ",";
      if (n > 0) {
        const double mean = sum / static_cast<double>(n);
        csv += fmt_real(mean);
        if (!best_f1.has_value() || mean > *best_f1) {
          best_f1 = mean;
          best_pi = grid[gi];
        }
      }
      csv += "\n";
    }
    double auto_pi_sum = 0.0;
    double auto_f1_sum = 0.0;
    std::size_t auto_f1_n = 0;
    for (const SweepResult* r : members) {
      auto_pi_sum += r->auto_pi_p;
      if (r->auto_mean_f1.has_value()) {
        auto_f1_sum += *r->auto_mean_f1;
        ++auto_f1_n;
      }
    }
    const double auto_pi = auto_pi_sum / static_cast<double>(members.size());
    const std::string slug = arch_slug(archs[a]);
    write_file_atomic((base / ("sweep_" + slug + ".csv")).string(), csv);
    std::string auto_line = fmt_real(auto_pi) + ",";
    if (auto_f1_n > 0) {
      auto_line += fmt_real(auto_f1_sum / static_cast<double>(auto_f1_n));
    }
    auto_line += "\n";
    write_file_atomic((base / ("sweep_" + slug + "_auto.csv")).string(),
                      auto_line);
    out << arch_name(archs[a]) << ": auto pi_p " << fmt_real(auto_pi)
        << " -> mean F1 "
        << (auto_f1_n > 0
                ? fmt_real(auto_f1_sum / static_cast<double>(auto_f1_n))
                : std::string("n/a"));
    if (best_f1.has_value()) {
      out << "; best grid pi_p " << fmt_real(best_pi) << " -> "
          << fmt_real(*best_f1);
    }
    out << "\n";
  }
  return any_failed ? 2 : 0;
}

int cmd_report(const ExperimentConfig& cfg, std::ostream& out,
               std::ostream& err) {
  const fs::path base{cfg.output_dir};
  const fs::path runs_dir = base / "runs";
  if (!fs::exists(runs_dir)) {
    err << "no runs directory at '" << runs_dir.string() << "'\n";
    return 2;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    err << "no run files under '" << runs_dir.string() << "'\n";
    return 2;
  }
  std::vector<SimulationRun> runs;
  std::string hash_hex = "unknown";
  for (const fs::path& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) {
      err << "cannot read '" << f.string() << "'\n";
      return 2;
    }
    try {
      const nlohmann::json j = nlohmann::json::parse(in);
      if (j.contains("config_hash")) {
        hash_hex = j.at("config_hash").get<std::string>();
      }
      runs.push_back(run_from_json(j));
    } catch (const std::exception& e) {
      err << "cannot parse '" << f.string() << "': " << e.what() << "\n";
      return 2;
    }
  }
  write_reports(base, runs, cfg, hash_hex, out);
  return 0;
}

}  // namespace uplearn
