#include "uplearn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "uplearn/util.hpp"

namespace uplearn {

CertainLabeler observed_certain_labeler() {
  return [](const LabeledRecord& r) -> std::optional<bool> {
    if (!r.observed().has_value()) return std::nullopt;
    switch (*r.observed()) {
      case ObservedLabel::CertainPositive: return true;
      case ObservedLabel::CertainNegative: return false;
      case ObservedLabel::UncertainPositive: return std::nullopt;
    }
    return std::nullopt;
  };
}

CertainLabeler oracle_labeler(OracleAudit& audit, OracleReader reader) {
  return [&audit, reader](const LabeledRecord& r) -> std::optional<bool> {
    return r.oracle(audit, reader) == OracleLabel::Positive;
  };
}

SplitResult split_validation(const RecordRefs& records, double fraction,
                             std::uint64_t seed, const CertainLabeler& labeler) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split_validation: fraction must lie in (0, 1)");
  }
  RecordRefs positives;
  RecordRefs negatives;
  SplitResult out;
  for (const LabeledRecord* r : records) {
    const auto label = labeler(*r);
    if (!label.has_value()) {
      out.train.push_back(r);  // uncertain records never validate
    } else if (*label) {
      positives.push_back(r);
    } else {
      negatives.push_back(r);
    }
  }
  if (positives.size() < 2) {
    throw std::runtime_error("split_validation: fewer than 2 certain positives");
  }

  std::mt19937_64 rng(derive_seed(seed, "validation-split"));
  auto take = [&](RecordRefs& pool) {
    if (pool.size() < 2) {  // too few to stratify; keep for training
      out.train.insert(out.train.end(), pool.begin(), pool.end());
      return;
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    auto n_val = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(pool.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, pool.size() - 1);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i < n_val ? out.validation : out.train).push_back(pool[i]);
    }
  };
  take(positives);
  take(negatives);
  return out;
}

std::vector<ValExample> make_val_examples(const RecordRefs& records,
                                          const CertainLabeler& labeler) {
  std::vector<ValExample> out;
  out.reserve(records.size());
  for (const LabeledRecord* r : records) {
    const auto label = labeler(*r);
    if (!label.has_value()) {
      throw std::invalid_argument("make_val_examples: record " + r->id() +
                                  " has no certain label");
    }
    out.push_back({&r->window(), *label});
  }
  return out;
}

namespace {

Confusion validation_confusion(const ModelState& m,
                               const std::vector<ValExample>& validation,
                               double threshold) {
  Confusion c;
  for (const auto& ex : validation) {
    const bool predicted = forward(m, *ex.window) >= threshold;
    if (predicted) {
      ex.positive ? ++c.tp : ++c.fp;
    } else {
      ex.positive ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

}  // namespace

TrainResult fit(const Arch& arch, Shape shape, const WeightedBatch& train_batch,
                const std::vector<ValExample>& validation, const TrainConfig& cfg) {
  cfg.validate();
  if (train_batch.empty()) throw std::invalid_argument("fit: empty training batch");
  if (validation.empty()) throw std::invalid_argument("fit: empty validation set");
  if (std::none_of(validation.begin(), validation.end(),
                   [](const ValExample& e) { return e.positive; })) {
    throw std::runtime_error("fit: validation F1 undefined for selection");
  }

  ModelState model = init_model(arch, shape, derive_seed(cfg.seed, "init"), cfg.init_scale);
  std::vector<double> theta = model.theta();
  {
    // Start the output bias at the batch's base-rate logit so early epochs
    // refine the decision surface instead of re-learning the class prior.
    double pos_mass = 0.0;
    double total_mass = 0.0;
    for (const BatchItem& item : train_batch) {
      total_mass += item.weight;
      if (item.target == 1) pos_mass += item.weight;
    }
    if (total_mass > 0.0) {
      const double rate =
          std::clamp(pos_mass / total_mass, 1e-6, 1.0 - 1e-6);
      theta.back() = std::log(rate / (1.0 - rate));
    }
  }
  std::vector<std::size_t> order(train_batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "epoch-shuffle"));

  WeightedBatch slice;
  slice.reserve(static_cast<std::size_t>(cfg.batch_size));
  // Adam moments. Adaptive steps keep rare-class gradients effective once the
  // bulk of the batch is already classified; plain SGD stalls there.
  std::vector<double> moment1(theta.size(), 0.0);
  std::vector<double> moment2(theta.size(), 0.0);
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  TrainResult result{model};
  std::optional<double> best_f1;
  double total_seconds = 0.0;

  // Step schedule: drop to a tenth of the rate for the final stretch so the
  // momentum trajectory settles instead of ringing around the optimum.
  const int cooldown_epoch = 1 + (cfg.epochs * 3) / 5;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double rate =
        epoch > cooldown_epoch ? 0.1 * cfg.learning_rate : cfg.learning_rate;
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t offset = 0; offset < order.size();
         offset += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), offset + static_cast<std::size_t>(cfg.batch_size));
      slice.clear();
      double slice_weight = 0.0;
      for (std::size_t i = offset; i < end; ++i) {
        slice.push_back(train_batch[order[i]]);
        slice_weight += slice.back().weight;
      }
      if (slice_weight == 0.0) continue;
      const std::vector<double> g = grad_unchecked(arch, shape, theta, slice);
      const std::size_t bias = theta.size() - 1;
      beta1_pow *= cfg.momentum;
      beta2_pow *= kBeta2;
      for (std::size_t j = 0; j < theta.size(); ++j) {
        moment1[j] = cfg.momentum * moment1[j] + (1.0 - cfg.momentum) * g[j];
        moment2[j] = kBeta2 * moment2[j] + (1.0 - kBeta2) * g[j] * g[j];
        const double m_hat = moment1[j] / (1.0 - beta1_pow);
        const double v_hat = moment2[j] / (1.0 - beta2_pow);
        double step = m_hat / (std::sqrt(v_hat) + kEps);
        if (j != bias) step += cfg.weight_decay * theta[j];  // decoupled decay
        theta[j] -= rate * step;
      }
    }
    if (std::any_of(theta.begin(), theta.end(),
                    [](double v) { return !std::isfinite(v); })) {
      throw std::runtime_error("fit: training diverged at epoch " +
                               std::to_string(epoch));
    }
    const ModelState epoch_model = model.with_theta(theta);
    const auto stop = std::chrono::steady_clock::now();
    total_seconds += std::chrono::duration<double>(stop - start).count();

    const Confusion c = validation_confusion(epoch_model, validation,
                                             cfg.decision_threshold);
    const std::optional<double> f1 = metrics(c).f1;
    if (std::getenv("UPLEARN_TRACE") && epoch % 25 == 0) {
      const std::vector<double> gfull = grad_unchecked(arch, shape, theta, train_batch);
      double wn = 0.0;
      for (std::size_t j = 0; j + 1 < theta.size(); ++j) wn += theta[j] * theta[j];
      std::fprintf(stderr,
                   "trace epoch %d tp %llu fp %llu f1 %.3f b %.3f |w| %.3f gb %.5f\n",
                   epoch, (unsigned long long)c.tp, (unsigned long long)c.fp,
                   f1.value_or(-1.0), theta.back(), std::sqrt(wn), gfull.back());
    }
    const bool better =
        f1.has_value() && (!best_f1.has_value() || *f1 > *best_f1);
    if (epoch == 1 || better) {
      best_f1 = f1;
      result.model = epoch_model;
      result.best_epoch = epoch;
      result.val_f1_at_best = f1;
      result.val_confusion_at_best = c;
    }
  }

  result.epochs_run = cfg.epochs;
  result.seconds_per_epoch =
      std::max(total_seconds / static_cast<double>(cfg.epochs), 1e-12);
  return result;
}

}  // namespace uplearn
