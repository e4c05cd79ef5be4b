#pragma once

#include <functional>
#include <optional>

#include "uplearn/core.hpp"
#include "uplearn/metrics.hpp"
#include "uplearn/model.hpp"
#include "uplearn/risk.hpp"

namespace uplearn {

/// Maps a record to its trustworthy binary label (true = positive), or
/// nullopt when the record has no certain label and must stay in training.
using CertainLabeler = std::function<std::optional<bool>(const LabeledRecord&)>;

/// Labeler over observed labels: CertainPositive -> true,
/// CertainNegative -> false, UncertainPositive or unassigned -> nullopt.
CertainLabeler observed_certain_labeler();

/// Labeler that reads ground truth, recording every access against the given
/// audit. Only evaluation and the Offline strategy may use this for
/// deployment phases.
CertainLabeler oracle_labeler(OracleAudit& audit, OracleReader reader);

struct SplitResult {
  RecordRefs train;
  RecordRefs validation;
};

/// Deterministic stratified holdout. Labeled positives and negatives are
/// shuffled and split independently; each class keeps at least one record on
/// both sides. Records without a certain label always stay in train.
/// Throws std::runtime_error when fewer than 2 certain positives exist.
SplitResult split_validation(const RecordRefs& records, double fraction,
                             std::uint64_t seed, const CertainLabeler& labeler);

struct ValExample {
  const FeatureWindow* window;
  bool positive;
};

std::vector<ValExample> make_val_examples(const RecordRefs& records,
                                          const CertainLabeler& labeler);

struct TrainResult {
  ModelState model;
  int epochs_run = 0;
  int best_epoch = 0;  // 1-based epoch whose parameters were kept
  std::optional<double> val_f1_at_best;
  Confusion val_confusion_at_best;
  double seconds_per_epoch = 0.0;  // arithmetic mean of per-epoch wall times
};

/// Plain SGD over the weighted batch. Each epoch shuffles the items with a
/// seeded generator, slices minibatches of cfg.batch_size, and applies one
/// step per slice (slices whose total weight is zero are skipped). After
/// every epoch the validation F1 at cfg.decision_threshold is computed; the
/// parameters of the best epoch are returned, earliest epoch winning ties,
/// with any defined F1 ranked above an undefined one.
/// Throws std::invalid_argument on an empty batch or empty validation and
/// std::runtime_error("validation F1 undefined for selection") when the
/// validation set has no positives.
TrainResult fit(const Arch& arch, Shape shape, const WeightedBatch& train_batch,
                const std::vector<ValExample>& validation, const TrainConfig& cfg);

}  // namespace uplearn
