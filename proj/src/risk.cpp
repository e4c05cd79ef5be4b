#include "uplearn/risk.hpp"

#include <stdexcept>

namespace uplearn {

double batch_weight(const WeightedBatch& batch) {
  double sum = 0.0;
  for (const auto& item : batch) sum += item.weight;
  return sum;
}

WeightedBatch standard_loss(const RecordRefs& positives, const RecordRefs& negatives) {
  const std::size_t np = positives.size();
  const std::size_t nn = negatives.size();
  if (np + nn == 0) {
    throw std::invalid_argument("standard_loss: no records");
  }
  const double n = static_cast<double>(np + nn);
  const double pi_hat = static_cast<double>(np) / n;
  WeightedBatch batch;
  batch.reserve(np + nn);
  for (const LabeledRecord* r : positives) {
    batch.push_back({&r->window(), pi_hat / static_cast<double>(np), 1});
  }
  for (const LabeledRecord* r : negatives) {
    batch.push_back({&r->window(), (1.0 - pi_hat) / static_cast<double>(nn), 0});
  }
  return batch;
}

WeightedBatch uptake_loss(const RecordRefs& positives, const RecordRefs& negatives,
                          const RecordRefs& uncertains, const ClassPrior& prior,
                          bool certain_full_weight) {
  const std::size_t pos_side = positives.size() + uncertains.size();
  const std::size_t neg_side = negatives.size() + uncertains.size();
  if (pos_side == 0 && neg_side == 0) {
    throw std::invalid_argument("uptake_loss: no records");
  }
  WeightedBatch batch;
  batch.reserve(pos_side + neg_side);
  if (pos_side > 0) {
    const double base = 1.0 / static_cast<double>(pos_side);
    const double certain_w = certain_full_weight ? base : prior.pi_p() * base;
    for (const LabeledRecord* r : positives) {
      batch.push_back({&r->window(), certain_w, 1});
    }
    for (const LabeledRecord* r : uncertains) {
      batch.push_back({&r->window(), prior.pi_p() * base, 1});
    }
  }
  if (neg_side > 0) {
    const double base = 1.0 / static_cast<double>(neg_side);
    const double certain_w = certain_full_weight ? base : prior.pi_n() * base;
    for (const LabeledRecord* r : negatives) {
      batch.push_back({&r->window(), certain_w, 0});
    }
    for (const LabeledRecord* r : uncertains) {
      batch.push_back({&r->window(), prior.pi_n() * base, 0});
    }
  }
  return batch;
}

WeightedBatch naive_loss(const RecordRefs& positives, const RecordRefs& negatives,
                         const RecordRefs& uncertains) {
  const std::size_t n = positives.size() + negatives.size() + uncertains.size();
  if (n == 0) {
    throw std::invalid_argument("naive_loss: no records");
  }
  const double w = 1.0 / static_cast<double>(n);
  WeightedBatch batch;
  batch.reserve(n);
  for (const LabeledRecord* r : positives) batch.push_back({&r->window(), w, 1});
  for (const LabeledRecord* r : negatives) batch.push_back({&r->window(), w, 0});
  for (const LabeledRecord* r : uncertains) batch.push_back({&r->window(), w, 1});
  return batch;
}

}  // namespace uplearn
