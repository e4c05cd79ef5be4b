#include "uplearn/metrics.hpp"

namespace uplearn {

Metrics metrics(const Confusion& c) {
  Metrics m;
  if (c.tp + c.fp > 0) {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn > 0) {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

std::optional<double> f1_score(std::optional<double> precision,
                               std::optional<double> recall) {
  if (!precision.has_value() || !recall.has_value()) return std::nullopt;
  const double sum = *precision + *recall;
  if (sum == 0.0) return std::nullopt;
  return 2.0 * *precision * *recall / sum;
}

std::optional<double> f1_from_confusion(const Confusion& c) {
  const std::uint64_t den = 2 * c.tp + c.fp + c.fn;
  if (den == 0) return std::nullopt;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

}  // namespace uplearn
