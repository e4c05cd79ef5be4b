#include "uplearn/simulate.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <utility>

#include "uplearn/risk.hpp"
#include "uplearn/util.hpp"

namespace uplearn {

Strategy Strategy::make(StrategyKind kind, bool certain_full_weight) {
  if (certain_full_weight && kind != StrategyKind::Uptake) {
    throw std::invalid_argument(
        "certain_full_weight applies to the uptake strategy only");
  }
  return Strategy{kind, certain_full_weight};
}

Strategy parse_strategy(std::string_view name) {
  if (name == "offline") return Strategy::make(StrategyKind::Offline);
  if (name == "certain") return Strategy::make(StrategyKind::Certain);
  if (name == "naive") return Strategy::make(StrategyKind::Naive);
  if (name == "uptake") return Strategy::make(StrategyKind::Uptake);
  if (name == "uptake-full") return Strategy::make(StrategyKind::Uptake, true);
  throw std::invalid_argument("unknown strategy '" + std::string(name) +
                              "' (expected offline, certain, naive, uptake, "
                              "or uptake-full)");
}

std::string strategy_name(const Strategy& s) {
  switch (s.kind) {
    case StrategyKind::Offline: return "offline";
    case StrategyKind::Certain: return "certain";
    case StrategyKind::Naive: return "naive";
    case StrategyKind::Uptake:
      return s.certain_full_weight ? "uptake-full" : "uptake";
  }
  throw std::logic_error("strategy_name: unknown kind");
}

void SimOptions::validate() const {
  train.validate();
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie in (0, 1)");
  }
  if (pi_p_override.has_value() &&
      !(*pi_p_override >= 0.0 && *pi_p_override <= 1.0)) {
    throw std::invalid_argument("pi_p_override must lie in [0, 1]");
  }
  if (!(pi_p_fallback >= 0.0 && pi_p_fallback <= 1.0)) {
    throw std::invalid_argument("pi_p_fallback must lie in [0, 1]");
  }
  if (history_window < 1) {
    throw std::invalid_argument("history_window must be at least 1");
  }
}

DeployOutcome deploy_phase(const ModelState& model, const PhaseDataset& phase,
                           double threshold, OracleAudit& audit) {
  DeployOutcome out;
  out.labeled.reserve(phase.size());
  for (const LabeledRecord& r : phase.records()) {
    const bool predicted =
        predict(model, r.window(), threshold) == OracleLabel::Positive;
    const bool truth =
        r.oracle(audit, OracleReader::Evaluator) == OracleLabel::Positive;
    if (predicted) {
      truth ? ++out.confusion.tp : ++out.confusion.fp;
      // Mitigated: the outcome that would have happened stays hidden.
      out.labeled.push_back(r.with_observed(ObservedLabel::UncertainPositive));
    } else {
      truth ? ++out.confusion.fn : ++out.confusion.tn;
      const bool revealed =
          r.oracle(audit, OracleReader::Environment) == OracleLabel::Positive;
      out.labeled.push_back(r.with_observed(revealed
                                                ? ObservedLabel::CertainPositive
                                                : ObservedLabel::CertainNegative));
    }
  }
  return out;
}

double estimate_pi_p(const Confusion& validation_confusion) {
  const std::uint64_t pp = validation_confusion.predicted_positives();
  if (pp == 0) {
    throw std::runtime_error(
        "pi_p undefined: the fit predicted no validation positives");
  }
  return static_cast<double>(validation_confusion.tp) / static_cast<double>(pp);
}

namespace {

TrainConfig boundary_config(const SimOptions& opts, int boundary) {
  TrainConfig cfg = opts.train;
  cfg.seed = derive_seed(opts.train.seed, static_cast<std::uint64_t>(boundary));
  return cfg;
}

std::string format_pi(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

SimulationRun run(const std::vector<PhaseDataset>& phases, const Strategy& strategy,
                  const Arch& arch, const SimOptions& opts) {
  opts.validate();
  const int total_phases = static_cast<int>(phases.size());
  if (total_phases < 2) {
    throw std::invalid_argument("run: at least 2 phases are required");
  }
  for (int i = 0; i < total_phases; ++i) {
    if (phases[i].phase() != i + 1) {
      throw std::invalid_argument("run: phases must be numbered 1..K in order");
    }
    if (phases[i].size() == 0) {
      throw std::invalid_argument("run: phase " + std::to_string(i + 1) +
                                  " is empty");
    }
  }
  const FeatureWindow& first_window = phases[0].records().front().window();
  const Shape shape{first_window.timestamps(), first_window.channels()};
  for (const auto& ph : phases) {
    if (!ph.records().front().window().same_shape(first_window)) {
      throw std::invalid_argument("run: phases disagree on window shape");
    }
  }

  SimulationRun out;
  out.strategy = strategy_name(strategy);
  out.arch = arch_name(arch);
  out.phases = total_phases;
  out.options = opts;

  OracleAudit audit;
  std::vector<std::vector<LabeledRecord>> labeled(
      static_cast<std::size_t>(total_phases));

  // Phase 1 predates any deployment, so its outcomes are fully known.
  labeled[0].reserve(phases[0].size());
  for (const LabeledRecord& r : phases[0].records()) {
    const bool pos = r.oracle(audit, OracleReader::Setup) == OracleLabel::Positive;
    labeled[0].push_back(r.with_observed(pos ? ObservedLabel::CertainPositive
                                             : ObservedLabel::CertainNegative));
  }

  const CertainLabeler certain = observed_certain_labeler();

  // Initial fit; failure here is fatal since there is nothing to fall back to.
  const TrainConfig cfg1 = boundary_config(opts, 1);
  const RecordRefs pool1 = as_refs(labeled[0]);
  const SplitResult split1 =
      split_validation(pool1, opts.validation_fraction, cfg1.seed, certain);
  const Partition part1 = partition_by_observed(split1.train);
  const WeightedBatch batch1 = standard_loss(part1.positives, part1.negatives);
  const auto val1 = make_val_examples(split1.validation, certain);
  TrainResult fitres = fit(arch, shape, batch1, val1, cfg1);
  out.boundaries.push_back({2, pool1.size(), batch1.size(), true,
                            fitres.best_epoch});

  double pi_estimate = 0.0;
  try {
    pi_estimate = estimate_pi_p(fitres.val_confusion_at_best);
  } catch (const std::runtime_error&) {
    pi_estimate = opts.pi_p_fallback;
    out.log.push_back(
        "initial fit predicted no validation positives; falling back to "
        "pi_p = " + format_pi(pi_estimate));
  }
  out.pi_p_estimate = pi_estimate;
  double pi_used = opts.pi_p_override.value_or(pi_estimate);
  out.pi_p_used = pi_used;

  ModelState model = fitres.model;
  double seconds_per_epoch = fitres.seconds_per_epoch;

  for (int k = 2; k <= total_phases; ++k) {
    const PhaseDataset& phase = phases[static_cast<std::size_t>(k - 1)];
    DeployOutcome dep =
        deploy_phase(model, phase, opts.train.decision_threshold, audit);
    labeled[static_cast<std::size_t>(k - 1)] = std::move(dep.labeled);

    ObservedCounts oc;
    oc.phase = k;
    for (const LabeledRecord& r : labeled[static_cast<std::size_t>(k - 1)]) {
      switch (*r.observed()) {
        case ObservedLabel::UncertainPositive: ++oc.uncertain; break;
        case ObservedLabel::CertainPositive: ++oc.certain_positive; break;
        case ObservedLabel::CertainNegative: ++oc.certain_negative; break;
      }
    }
    out.observed.push_back(oc);

    PhaseReport rep;
    rep.phase = k;
    rep.strategy = out.strategy;
    rep.arch = out.arch;
    rep.confusion = dep.confusion;
    rep.scores = metrics(dep.confusion);
    rep.seconds_per_epoch = seconds_per_epoch;
    out.phase_reports.push_back(std::move(rep));
    if (phase.positives() == 0) {
      out.log.push_back("phase " + std::to_string(k) +
                        " has no ground-truth positives; recall and F1 are "
                        "undefined");
    }

    if (k == total_phases) break;

    // Boundary k: refit the model that deploys on phase k + 1.
    const TrainConfig cfgk = boundary_config(opts, k);
    RecordRefs pool;
    CertainLabeler labeler = certain;
    if (strategy.kind == StrategyKind::Certain) {
      for (int p = 1; p <= k; ++p) {
        for (const LabeledRecord& r : labeled[static_cast<std::size_t>(p - 1)]) {
          if (*r.observed() != ObservedLabel::UncertainPositive) {
            pool.push_back(&r);
          }
        }
      }
    } else {
      const int first = std::max(1, k - opts.history_window + 1);
      for (int p = first; p <= k; ++p) {
        for (const LabeledRecord& r : labeled[static_cast<std::size_t>(p - 1)]) {
          pool.push_back(&r);
        }
      }
      if (strategy.kind == StrategyKind::Offline) {
        labeler = oracle_labeler(audit, OracleReader::OfflineStrategy);
      }
    }

    BoundaryInfo info;
    info.trains_model_for_phase = k + 1;
    info.pool_records = pool.size();
    try {
      const SplitResult split =
          split_validation(pool, opts.validation_fraction, cfgk.seed, labeler);
      WeightedBatch batch;
      switch (strategy.kind) {
        case StrategyKind::Offline: {
          RecordRefs pos;
          RecordRefs neg;
          for (const LabeledRecord* r : split.train) {
            (*labeler(*r) ? pos : neg).push_back(r);
          }
          batch = standard_loss(pos, neg);
          break;
        }
        case StrategyKind::Certain: {
          const Partition part = partition_by_observed(split.train);
          batch = standard_loss(part.positives, part.negatives);
          break;
        }
        case StrategyKind::Naive: {
          const Partition part = partition_by_observed(split.train);
          batch = naive_loss(part.positives, part.negatives, part.uncertains);
          break;
        }
        case StrategyKind::Uptake: {
          const Partition part = partition_by_observed(split.train);
          batch = uptake_loss(part.positives, part.negatives, part.uncertains,
                              ClassPrior(pi_used), strategy.certain_full_weight);
          break;
        }
      }
      const auto val = make_val_examples(split.validation, labeler);
      const TrainResult res = fit(arch, shape, batch, val, cfgk);
      model = res.model;
      seconds_per_epoch = res.seconds_per_epoch;
      info.batch_items = batch.size();
      info.refit = true;
      info.best_epoch = res.best_epoch;
      if (opts.reestimate_pi_p && !opts.pi_p_override.has_value()) {
        try {
          pi_used = estimate_pi_p(res.val_confusion_at_best);
          out.log.push_back("boundary " + std::to_string(k + 1) +
                            ": re-estimated pi_p = " + format_pi(pi_used));
        } catch (const std::runtime_error&) {
          out.log.push_back("boundary " + std::to_string(k + 1) +
                            ": pi_p re-estimate undefined; keeping " +
                            format_pi(pi_used));
        }
      }
    } catch (const std::runtime_error& e) {
      out.log.push_back("boundary " + std::to_string(k + 1) + ": " +
                        std::string(e.what()) + "; keeping the previous model");
    }
    out.boundaries.push_back(info);
  }

  for (const auto& [key, count] : audit.entries()) {
    out.audit.push_back({oracle_reader_name(static_cast<OracleReader>(key.first)),
                         key.second, count});
  }
  out.strategy_oracle_reads_after_t1 = audit.strategy_reads_after_phase1();
  return out;
}

namespace {

nlohmann::json opt_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

nlohmann::json confusion_to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

Confusion confusion_from_json(const nlohmann::json& j) {
  Confusion c;
  c.tp = j.at("tp").get<std::uint64_t>();
  c.fp = j.at("fp").get<std::uint64_t>();
  c.tn = j.at("tn").get<std::uint64_t>();
  c.fn = j.at("fn").get<std::uint64_t>();
  return c;
}

}  // namespace

nlohmann::json run_to_json(const SimulationRun& run, bool include_timings) {
  nlohmann::json j;
  j["schema"] = "uplearn.run/1";
  j["strategy"] = run.strategy;
  j["arch"] = run.arch;
  j["phases"] = run.phases;
  j["options"] = {
      {"train",
       {{"learning_rate", run.options.train.learning_rate},
        {"epochs", run.options.train.epochs},
        {"batch_size", run.options.train.batch_size},
        {"seed", run.options.train.seed},
        {"init_scale", run.options.train.init_scale},
        {"decision_threshold", run.options.train.decision_threshold},
        {"momentum", run.options.train.momentum},
        {"weight_decay", run.options.train.weight_decay}}},
      {"validation_fraction", run.options.validation_fraction},
      {"pi_p_override", opt_to_json(run.options.pi_p_override)},
      {"pi_p_fallback", run.options.pi_p_fallback},
      {"reestimate_pi_p", run.options.reestimate_pi_p},
      {"history_window", run.options.history_window},
  };
  j["pi_p_estimate"] = run.pi_p_estimate;
  j["pi_p_used"] = run.pi_p_used;

  nlohmann::json reports = nlohmann::json::array();
  for (const PhaseReport& rep : run.phase_reports) {
    reports.push_back({{"phase", rep.phase},
                       {"confusion", confusion_to_json(rep.confusion)},
                       {"precision", opt_to_json(rep.scores.precision)},
                       {"recall", opt_to_json(rep.scores.recall)},
                       {"f1", opt_to_json(rep.scores.f1)}});
  }
  j["phase_reports"] = std::move(reports);

  nlohmann::json observed = nlohmann::json::array();
  for (const ObservedCounts& oc : run.observed) {
    observed.push_back({{"phase", oc.phase},
                        {"uncertain", oc.uncertain},
                        {"certain_positive", oc.certain_positive},
                        {"certain_negative", oc.certain_negative}});
  }
  j["observed"] = std::move(observed);

  nlohmann::json boundaries = nlohmann::json::array();
  for (const BoundaryInfo& b : run.boundaries) {
    boundaries.push_back({{"trains_model_for_phase", b.trains_model_for_phase},
                          {"pool_records", b.pool_records},
                          {"batch_items", b.batch_items},
                          {"refit", b.refit},
                          {"best_epoch", b.best_epoch}});
  }
  j["boundaries"] = std::move(boundaries);

  nlohmann::json audit = nlohmann::json::array();
  for (const AuditEntry& a : run.audit) {
    audit.push_back({{"reader", a.reader}, {"phase", a.phase}, {"count", a.count}});
  }
  j["audit"] = std::move(audit);
  j["strategy_oracle_reads_after_t1"] = run.strategy_oracle_reads_after_t1;
  j["log"] = run.log;

  if (include_timings) {
    nlohmann::json timings = nlohmann::json::object();
    for (const PhaseReport& rep : run.phase_reports) {
      timings[std::to_string(rep.phase)] = rep.seconds_per_epoch;
    }
    j["timings"] = {{"seconds_per_epoch", std::move(timings)}};
  }
  return j;
}

SimulationRun run_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != "uplearn.run/1") {
    throw std::invalid_argument("run_from_json: unsupported schema '" +
                                j.at("schema").get<std::string>() + "'");
  }
  SimulationRun run;
  run.strategy = j.at("strategy").get<std::string>();
  run.arch = j.at("arch").get<std::string>();
  run.phases = j.at("phases").get<int>();

  const nlohmann::json& o = j.at("options");
  const nlohmann::json& t = o.at("train");
  run.options.train.learning_rate = t.at("learning_rate").get<double>();
  run.options.train.epochs = t.at("epochs").get<int>();
  run.options.train.batch_size = t.at("batch_size").get<int>();
  run.options.train.seed = t.at("seed").get<std::uint64_t>();
  run.options.train.init_scale = t.at("init_scale").get<double>();
  run.options.train.decision_threshold = t.at("decision_threshold").get<double>();
  run.options.train.momentum = t.value("momentum", 0.0);
  run.options.train.weight_decay = t.value("weight_decay", 0.0);
  run.options.validation_fraction = o.at("validation_fraction").get<double>();
  run.options.pi_p_override = opt_from_json(o.at("pi_p_override"));
  run.options.pi_p_fallback = o.at("pi_p_fallback").get<double>();
  run.options.reestimate_pi_p = o.at("reestimate_pi_p").get<bool>();
  run.options.history_window = o.at("history_window").get<int>();

  run.pi_p_estimate = j.at("pi_p_estimate").get<double>();
  run.pi_p_used = j.at("pi_p_used").get<double>();

  for (const nlohmann::json& r : j.at("phase_reports")) {
    PhaseReport rep;
    rep.phase = r.at("phase").get<int>();
    rep.strategy = run.strategy;
    rep.arch = run.arch;
    rep.confusion = confusion_from_json(r.at("confusion"));
    rep.scores = metrics(rep.confusion);
    run.phase_reports.push_back(std::move(rep));
  }
  for (const nlohmann::json& r : j.at("observed")) {
    ObservedCounts oc;
    oc.phase = r.at("phase").get<int>();
    oc.uncertain = r.at("uncertain").get<std::uint64_t>();
    oc.certain_positive = r.at("certain_positive").get<std::uint64_t>();
    oc.certain_negative = r.at("certain_negative").get<std::uint64_t>();
    run.observed.push_back(oc);
  }
  for (const nlohmann::json& r : j.at("boundaries")) {
    BoundaryInfo b;
    b.trains_model_for_phase = r.at("trains_model_for_phase").get<int>();
    b.pool_records = r.at("pool_records").get<std::uint64_t>();
    b.batch_items = r.at("batch_items").get<std::uint64_t>();
    b.refit = r.at("refit").get<bool>();
    b.best_epoch = r.at("best_epoch").get<int>();
    run.boundaries.push_back(b);
  }
  for (const nlohmann::json& r : j.at("audit")) {
    run.audit.push_back({r.at("reader").get<std::string>(),
                         r.at("phase").get<int>(),
                         r.at("count").get<std::uint64_t>()});
  }
  run.strategy_oracle_reads_after_t1 =
      j.at("strategy_oracle_reads_after_t1").get<std::uint64_t>();
  run.log = j.at("log").get<std::vector<std::string>>();

  if (j.contains("timings")) {
    const nlohmann::json& timings = j.at("timings").at("seconds_per_epoch");
    for (PhaseReport& rep : run.phase_reports) {
      const std::string key = std::to_string(rep.phase);
      if (timings.contains(key)) {
        rep.seconds_per_epoch = timings.at(key).get<double>();
      }
    }
  }
  return run;
}

}  // namespace uplearn
