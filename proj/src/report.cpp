#include "uplearn/report.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace uplearn {

int first_averaged_phase(AvgConvention convention) {
  return convention == AvgConvention::FromT2 ? 2 : 3;
}

namespace {

int strategy_rank(std::string_view s) {
  if (s == "offline") return 0;
  if (s == "certain") return 1;
  if (s == "naive") return 2;
  if (s == "uptake") return 3;
  if (s == "uptake-full") return 4;
  return 5;
}

bool strategy_less(const std::string& a, const std::string& b) {
  const int ra = strategy_rank(a);
  const int rb = strategy_rank(b);
  if (ra != rb) return ra < rb;
  return a < b;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

/// Percentage with two decimals, or "n/a".
std::string fmt_pct(const std::optional<double>& v) {
  if (!v.has_value()) return "n/a";
  return fmt("%.2f", *v * 100.0);
}

/// CSV metric field: full precision, empty when undefined.
std::string fmt_csv(const std::optional<double>& v) {
  if (!v.has_value()) return "";
  return fmt("%.17g", *v);
}

void validate_run_shape(const SimulationRun& run, int phases) {
  if (run.phases != phases) {
    throw std::invalid_argument("aggregate: runs disagree on phase count");
  }
  if (run.phase_reports.size() != static_cast<std::size_t>(phases - 1)) {
    throw std::invalid_argument("aggregate: run '" + run.strategy + "/" +
                                run.arch +
                                "' does not report phases 2..K exactly");
  }
  for (std::size_t i = 0; i < run.phase_reports.size(); ++i) {
    if (run.phase_reports[i].phase != static_cast<int>(i) + 2) {
      throw std::invalid_argument("aggregate: run '" + run.strategy + "/" +
                                  run.arch + "' reports phases out of order");
    }
  }
}

struct MeanAcc {
  double sum = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (v.has_value()) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

}  // namespace

Aggregate aggregate(const std::vector<SimulationRun>& runs,
                    AvgConvention convention) {
  if (runs.empty()) {
    throw std::invalid_argument("aggregate: no runs");
  }
  const int phases = runs.front().phases;

  std::map<std::pair<std::string, std::string>, std::vector<const SimulationRun*>>
      groups;  // (arch, strategy) -> runs
  std::set<std::tuple<std::string, std::string, std::uint64_t>> seen;
  for (const SimulationRun& run : runs) {
    validate_run_shape(run, phases);
    if (!seen.insert({run.arch, run.strategy, run.options.train.seed}).second) {
      throw std::invalid_argument("aggregate: duplicate run for (" + run.arch +
                                  ", " + run.strategy + ", seed " +
                                  std::to_string(run.options.train.seed) + ")");
    }
    groups[{run.arch, run.strategy}].push_back(&run);
  }

  Aggregate agg;
  agg.phases = phases;
  agg.convention = convention;
  const int first_phase = first_averaged_phase(convention);

  for (const auto& [key, members] : groups) {
    CellSummary cell;
    cell.arch = key.first;
    cell.strategy = key.second;
    cell.runs = members.size();
    for (int phase = 2; phase <= phases; ++phase) {
      PhaseCell pc;
      pc.phase = phase;
      pc.runs = members.size();
      MeanAcc p, r, f;
      for (const SimulationRun* run : members) {
        const PhaseReport& rep =
            run->phase_reports[static_cast<std::size_t>(phase - 2)];
        p.add(rep.scores.precision);
        r.add(rep.scores.recall);
        f.add(rep.scores.f1);
        pc.confusion_total.tp += rep.confusion.tp;
        pc.confusion_total.fp += rep.confusion.fp;
        pc.confusion_total.tn += rep.confusion.tn;
        pc.confusion_total.fn += rep.confusion.fn;
      }
      pc.precision = p.mean();
      pc.recall = r.mean();
      pc.f1 = f.mean();
      pc.precision_defined = p.n;
      pc.recall_defined = r.n;
      pc.f1_defined = f.n;
      cell.phases.push_back(pc);
    }
    MeanAcc avg;
    for (const PhaseCell& pc : cell.phases) {
      if (pc.phase < first_phase) continue;
      ++cell.avg_phases_total;
      avg.add(pc.f1);
    }
    cell.avg_phases_defined = avg.n;
    cell.avg_f1 = avg.mean();
    agg.cells.push_back(std::move(cell));
  }

  std::sort(agg.cells.begin(), agg.cells.end(),
            [](const CellSummary& a, const CellSummary& b) {
              if (a.arch != b.arch) return a.arch < b.arch;
              return strategy_less(a.strategy, b.strategy);
            });

  std::map<std::string, MeanAcc> by_strategy;
  std::map<std::string, std::size_t> totals;
  for (const CellSummary& cell : agg.cells) {
    by_strategy[cell.strategy].add(cell.avg_f1);
    ++totals[cell.strategy];
  }
  for (const auto& [strategy, acc] : by_strategy) {
    agg.cross_model.push_back(
        {strategy, acc.mean(), acc.n, totals.at(strategy)});
  }
  std::sort(agg.cross_model.begin(), agg.cross_model.end(),
            [](const StrategyAverage& a, const StrategyAverage& b) {
              return strategy_less(a.strategy, b.strategy);
            });
  return agg;
}

std::string render_text(const Aggregate& agg, std::string_view header) {
  std::string out;
  if (!header.empty()) {
    std::size_t start = 0;
    while (start <= header.size()) {
      const std::size_t nl = header.find('\n', start);
      const std::string_view line =
          header.substr(start, nl == std::string_view::npos ? nl : nl - start);
      if (!line.empty()) {
        out += "# ";
        out += line;
        out += "\n";
      }
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  }
  const int first_phase = first_averaged_phase(agg.convention);
  out += "# phases: " + std::to_string(agg.phases) + "; average window: T" +
         std::to_string(first_phase) + "..T" + std::to_string(agg.phases) +
         "; metrics in percent\n";

  std::string current_arch;
  std::vector<std::string> notes;
  auto flush_notes = [&] {
    for (const std::string& n : notes) out += n;
    notes.clear();
  };
  for (const CellSummary& cell : agg.cells) {
    if (cell.arch != current_arch) {
      flush_notes();
      current_arch = cell.arch;
      out += "\n== arch: " + cell.arch + " ==\n";
      char head[256];
      std::snprintf(head, sizeof(head), "%-12s %6s", "strategy", "runs");
      out += head;
      for (const PhaseCell& pc : cell.phases) {
        std::snprintf(head, sizeof(head), " %20s",
                      ("T" + std::to_string(pc.phase) + " P/R/F1").c_str());
        out += head;
      }
      std::snprintf(head, sizeof(head), " %8s\n", "avg F1");
      out += head;
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %6zu", cell.strategy.c_str(),
                  cell.runs);
    out += buf;
    for (const PhaseCell& pc : cell.phases) {
      const std::string triple =
          fmt_pct(pc.precision) + "/" + fmt_pct(pc.recall) + "/" + fmt_pct(pc.f1);
      std::snprintf(buf, sizeof(buf), " %20s", triple.c_str());
      out += buf;
      if (pc.f1_defined < pc.runs) {
        notes.push_back("# note: " + cell.arch + " " + cell.strategy + " T" +
                        std::to_string(pc.phase) + ": F1 defined in " +
                        std::to_string(pc.f1_defined) + "/" +
                        std::to_string(pc.runs) + " runs\n");
      }
    }
    std::snprintf(buf, sizeof(buf), " %8s\n", fmt_pct(cell.avg_f1).c_str());
    out += buf;
    if (cell.avg_phases_defined < cell.avg_phases_total) {
      notes.push_back("# note: " + cell.arch + " " + cell.strategy +
                      " average covers " +
                      std::to_string(cell.avg_phases_defined) + "/" +
                      std::to_string(cell.avg_phases_total) + " phases\n");
    }
  }
  flush_notes();

  out += "\n== cross-model average F1 ==\n";
  for (const StrategyAverage& s : agg.cross_model) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-12s %8s", s.strategy.c_str(),
                  fmt_pct(s.avg_f1).c_str());
    out += buf;
    if (s.cells_defined < s.cells_total) {
      out += "  (" + std::to_string(s.cells_defined) + "/" +
             std::to_string(s.cells_total) + " archs)";
    }
    out += "\n";
  }
  return out;
}

std::string phase_metrics_csv(const std::vector<SimulationRun>& runs) {
  std::vector<const SimulationRun*> order;
  order.reserve(runs.size());
  for (const SimulationRun& r : runs) order.push_back(&r);
  std::sort(order.begin(), order.end(),
            [](const SimulationRun* a, const SimulationRun* b) {
              if (a->arch != b->arch) return a->arch < b->arch;
              if (a->strategy != b->strategy)
                return strategy_less(a->strategy, b->strategy);
              return a->options.train.seed < b->options.train.seed;
            });
  std::string out = "arch,strategy,seed,phase,tp,fp,tn,fn,precision,recall,f1\n";
  for (const SimulationRun* run : order) {
    for (const PhaseReport& rep : run->phase_reports) {
      out += run->arch + "," + run->strategy + "," +
             std::to_string(run->options.train.seed) + "," +
             std::to_string(rep.phase) + "," + std::to_string(rep.confusion.tp) +
             "," + std::to_string(rep.confusion.fp) + "," +
             std::to_string(rep.confusion.tn) + "," +
             std::to_string(rep.confusion.fn) + "," +
             fmt_csv(rep.scores.precision) + "," + fmt_csv(rep.scores.recall) +
             "," + fmt_csv(rep.scores.f1) + "\n";
    }
  }
  return out;
}

std::string f1_series_csv(const Aggregate& agg) {
  std::string out = "arch,strategy,phase,mean_f1,defined_runs,total_runs\n";
  for (const CellSummary& cell : agg.cells) {
    for (const PhaseCell& pc : cell.phases) {
      out += cell.arch + "," + cell.strategy + "," + std::to_string(pc.phase) +
             "," + fmt_csv(pc.f1) + "," + std::to_string(pc.f1_defined) + "," +
             std::to_string(pc.runs) + "\n";
    }
  }
  return out;
}

std::optional<double> avg_f1_of_run(const SimulationRun& run,
                                    AvgConvention convention) {
  const int first_phase = first_averaged_phase(convention);
  MeanAcc acc;
  for (const PhaseReport& rep : run.phase_reports) {
    if (rep.phase < first_phase) continue;
    acc.add(f1_from_confusion(rep.confusion));
  }
  return acc.mean();
}

SweepResult sweep_pi_p(const std::vector<PhaseDataset>& phases, const Arch& arch,
                       const SimOptions& base, std::span<const double> grid,
                       AvgConvention convention) {
  if (grid.empty()) {
    throw std::invalid_argument("sweep_pi_p: empty grid");
  }
  for (double v : grid) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("sweep_pi_p: grid value " + fmt("%g", v) +
                                  " outside [0, 1]");
    }
  }
  const Strategy uptake = Strategy::make(StrategyKind::Uptake);
  SweepResult result;
  result.arch = arch_name(arch);
  for (double v : grid) {
    SimOptions opts = base;
    opts.pi_p_override = v;
    const SimulationRun r = run(phases, uptake, arch, opts);
    result.points.push_back({v, avg_f1_of_run(r, convention)});
  }
  SimOptions auto_opts = base;
  auto_opts.pi_p_override.reset();
  const SimulationRun r = run(phases, uptake, arch, auto_opts);
  result.auto_pi_p = r.pi_p_used;
  result.auto_mean_f1 = avg_f1_of_run(r, convention);
  return result;
}

std::string sweep_csv(const SweepResult& s) {
  std::string out = "pi_p,mean_f1\n";
  for (const SweepPoint& p : s.points) {
    out += fmt("%.6g", p.pi_p) + "," + fmt_csv(p.mean_f1) + "\n";
  }
  return out;
}

}  // namespace uplearn
