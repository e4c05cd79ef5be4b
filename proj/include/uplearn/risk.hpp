#pragma once

#include "uplearn/core.hpp"

namespace uplearn {

/// One training example: a feature window with a target label and the weight
/// its risk term assigns to it. Windows are borrowed from the owning records.
struct BatchItem {
  const FeatureWindow* window;
  double weight;
  int target;  // 0 or 1
};

using WeightedBatch = std::vector<BatchItem>;

/// Total weight of a batch.
double batch_weight(const WeightedBatch& batch);

/// Empirical-prior certain-label risk. With pi_hat = |X_p| / (|X_p| + |X_n|),
/// positives carry weight pi_hat / |X_p| and negatives (1 - pi_hat) / |X_n|,
/// which reduces to the plain mean over the pooled set. Item order: X_p, X_n.
/// Throws std::invalid_argument when both sides are empty.
WeightedBatch standard_loss(const RecordRefs& positives, const RecordRefs& negatives);

/// Uncertain-positive risk. The positive side is the concatenation
/// [X_p, X_u] with every item weighted pi_p / |X_p u X_u|, the negative side
/// [X_n, X_u] with weight pi_n / |X_n u X_u|; each uncertain record therefore
/// appears twice, once per target. Item order: X_p, X_u (target 1), then
/// X_n, X_u (target 0). With certain_full_weight set, certain records keep
/// weight 1 / |side| instead of sharing the prior factor.
/// Throws std::invalid_argument when all three sets are empty.
WeightedBatch uptake_loss(const RecordRefs& positives, const RecordRefs& negatives,
                          const RecordRefs& uncertains, const ClassPrior& prior,
                          bool certain_full_weight = false);

/// Mitigation-blind baseline: uncertain records are taken at face value as
/// positives and every record carries uniform weight 1 / n. Item order:
/// X_p, X_n, X_u. Throws std::invalid_argument when all sets are empty.
WeightedBatch naive_loss(const RecordRefs& positives, const RecordRefs& negatives,
                         const RecordRefs& uncertains);

}  // namespace uplearn
