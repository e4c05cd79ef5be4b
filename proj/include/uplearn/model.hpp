#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "uplearn/core.hpp"
#include "uplearn/risk.hpp"

namespace uplearn {

// --- architectures ---------------------------------------------------------

struct LinearArch {};

struct MlpArch {
  int hidden;
};

struct RecurArch {
  int hidden;
};

/// Linear: logistic regression on the flattened window.
/// Mlp: one tanh hidden layer on the flattened window, logistic output.
/// Recur: tanh state update over the window rows, logistic score of the
/// final state.
using Arch = std::variant<LinearArch, MlpArch, RecurArch>;

/// Parse "linear", "mlp:<hidden>" or "recur:<hidden>". Bare "mlp"/"recur"
/// get default hidden sizes 8 and 4. Throws std::invalid_argument otherwise.
Arch parse_arch(std::string_view spec);

/// Canonical spec string, e.g. "mlp:8".
std::string arch_name(const Arch& arch);

/// Filename-safe name, e.g. "mlp8".
std::string arch_slug(const Arch& arch);

struct Shape {
  std::size_t timestamps;
  std::size_t channels;
  bool operator==(const Shape&) const = default;
};

std::size_t param_count(const Arch& arch, Shape shape);

/// Immutable parameter vector bound to an architecture and input shape.
class ModelState {
 public:
  ModelState(Arch arch, Shape input_shape, std::vector<double> theta);

  const Arch& arch() const { return arch_; }
  Shape input_shape() const { return shape_; }
  const std::vector<double>& theta() const { return theta_; }
  ModelState with_theta(std::vector<double> theta) const;

 private:
  Arch arch_;
  Shape shape_;
  std::vector<double> theta_;
};

struct TrainConfig {
  double learning_rate = 0.2;
  int epochs = 40;
  int batch_size = 64;
  std::uint64_t seed = 1;
  double init_scale = 0.1;
  double decision_threshold = 0.5;
  /// Heavy-ball momentum on minibatch gradients. Rare-event batches make
  /// plain SGD crawl once logits saturate; momentum keeps the descent moving.
  double momentum = 0.9;
  /// L2 penalty on everything but the output bias; bounds logit sharpening
  /// so late epochs stay responsive to the minority class.
  double weight_decay = 1e-3;
  void validate() const;
};

/// Fresh parameters drawn uniformly from [-init_scale, init_scale].
ModelState init_model(const Arch& arch, Shape shape, std::uint64_t seed,
                      double init_scale);

/// Failure probability in (0, 1). Pure function of (theta, window).
double forward(const ModelState& model, const FeatureWindow& window);

/// Positive iff forward(model, window) >= threshold.
OracleLabel predict(const ModelState& model, const FeatureWindow& window,
                    double threshold);

/// Binary cross-entropy with p clamped to [1e-12, 1 - 1e-12].
double bce(double p, int target);

/// Weight-normalized batch loss: sum_i w_i * bce(p_i, y_i) / sum_i w_i.
double batch_loss(const ModelState& model, std::span<const BatchItem> batch);

/// Analytic gradient of batch_loss with respect to theta.
/// Throws std::invalid_argument on an empty batch, zero total weight, or an
/// item whose window shape does not match the model.
std::vector<double> grad(const ModelState& model, std::span<const BatchItem> batch);

/// Gradient core over a bare parameter vector; skips the finiteness
/// validation of ModelState so SGD loops can run on their working buffer.
/// theta must have param_count(arch, shape) entries.
std::vector<double> grad_unchecked(const Arch& arch, Shape shape,
                                   std::span<const double> theta,
                                   std::span<const BatchItem> batch);

// --- checkpoints ------------------------------------------------------------

/// Schema: {"arch": "<spec>", "input_shape": [l, d], "theta": [...],
///          "decision_threshold": t}
nlohmann::json checkpoint_to_json(const ModelState& model, double decision_threshold);

struct Checkpoint {
  ModelState model;
  double decision_threshold;
};

Checkpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace uplearn
