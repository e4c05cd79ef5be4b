#include "uplearn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace uplearn {

namespace {

constexpr double kProbClamp = 1e-12;
constexpr int kDefaultMlpHidden = 8;
constexpr int kDefaultRecurHidden = 4;

double sigmoid(double score) {
  if (score >= 0.0) {
    return 1.0 / (1.0 + std::exp(-score));
  }
  const double e = std::exp(score);
  return e / (1.0 + e);
}

// Forward pass for the recurrent architecture, optionally recording the
// post-tanh states of every step for backpropagation through time.
double recur_score(const RecurArch& arch, Shape shape,
                   std::span<const double> theta, const FeatureWindow& x,
                   std::vector<double>* states) {
  const std::size_t h = static_cast<std::size_t>(arch.hidden);
  const std::size_t d = shape.channels;
  const std::size_t l = shape.timestamps;
  const std::size_t wx = 0;
  const std::size_t wh = h * d;
  const std::size_t bh = wh + h * h;
  const std::size_t wo = bh + h;
  const std::size_t bo = wo + h;

  std::vector<double> state(h, 0.0);
  std::vector<double> next(h, 0.0);
  if (states) states->assign(l * h, 0.0);
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t i = 0; i < h; ++i) {
      double a = theta[bh + i];
      const double* wx_row = &theta[wx + i * d];
      for (std::size_t j = 0; j < d; ++j) a += wx_row[j] * x.at(t, j);
      const double* wh_row = &theta[wh + i * h];
      for (std::size_t j = 0; j < h; ++j) a += wh_row[j] * state[j];
      next[i] = std::tanh(a);
    }
    state.swap(next);
    if (states) {
      std::copy(state.begin(), state.end(), states->begin() + t * h);
    }
  }
  double score = theta[bo];
  for (std::size_t i = 0; i < h; ++i) score += theta[wo + i] * state[i];
  return score;
}

double score_of(const ModelState& m, const FeatureWindow& x) {
  const Shape shape = m.input_shape();
  if (x.timestamps() != shape.timestamps || x.channels() != shape.channels) {
    throw std::invalid_argument("forward: window shape does not match model");
  }
  const auto& theta = m.theta();
  if (std::holds_alternative<LinearArch>(m.arch())) {
    const std::size_t n = shape.timestamps * shape.channels;
    double s = theta[n];
    const auto& v = x.values();
    for (std::size_t j = 0; j < n; ++j) s += theta[j] * v[j];
    return s;
  }
  if (const auto* mlp = std::get_if<MlpArch>(&m.arch())) {
    const std::size_t n = shape.timestamps * shape.channels;
    const std::size_t h = static_cast<std::size_t>(mlp->hidden);
    const std::size_t b1 = h * n;
    const std::size_t w2 = b1 + h;
    const std::size_t b2 = w2 + h;
    const auto& v = x.values();
    double s = theta[b2];
    for (std::size_t i = 0; i < h; ++i) {
      double a = theta[b1 + i];
      const double* row = &theta[i * n];
      for (std::size_t j = 0; j < n; ++j) a += row[j] * v[j];
      s += theta[w2 + i] * std::tanh(a);
    }
    return s;
  }
  return recur_score(std::get<RecurArch>(m.arch()), shape, theta, x, nullptr);
}

}  // namespace

Arch parse_arch(std::string_view spec) {
  if (spec == "linear") return LinearArch{};
  auto parse_hidden = [&](std::string_view rest, int fallback) {
    if (rest.empty()) return fallback;
    if (rest[0] != ':') throw std::invalid_argument("bad arch spec");
    int hidden = 0;
    for (char c : rest.substr(1)) {
      if (c < '0' || c > '9') throw std::invalid_argument("bad arch spec");
      hidden = hidden * 10 + (c - '0');
      if (hidden > 4096) throw std::invalid_argument("arch hidden size too large");
    }
    if (hidden < 1) throw std::invalid_argument("arch hidden size must be >= 1");
    return hidden;
  };
  try {
    if (spec.substr(0, 3) == "mlp") {
      return MlpArch{parse_hidden(spec.substr(3), kDefaultMlpHidden)};
    }
    if (spec.substr(0, 5) == "recur") {
      return RecurArch{parse_hidden(spec.substr(5), kDefaultRecurHidden)};
    }
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("parse_arch: bad spec '" + std::string(spec) +
                                "' (expected linear, mlp:<h> or recur:<h>)");
  }
  throw std::invalid_argument("parse_arch: unknown architecture '" +
                              std::string(spec) + "'");
}

std::string arch_name(const Arch& arch) {
  if (std::holds_alternative<LinearArch>(arch)) return "linear";
  if (const auto* m = std::get_if<MlpArch>(&arch)) {
    return "mlp:" + std::to_string(m->hidden);
  }
  return "recur:" + std::to_string(std::get<RecurArch>(arch).hidden);
}

std::string arch_slug(const Arch& arch) {
  std::string name = arch_name(arch);
  name.erase(std::remove(name.begin(), name.end(), ':'), name.end());
  return name;
}

std::size_t param_count(const Arch& arch, Shape shape) {
  const std::size_t n = shape.timestamps * shape.channels;
  if (std::holds_alternative<LinearArch>(arch)) return n + 1;
  if (const auto* m = std::get_if<MlpArch>(&arch)) {
    const std::size_t h = static_cast<std::size_t>(m->hidden);
    return h * n + h + h + 1;
  }
  const std::size_t h = static_cast<std::size_t>(std::get<RecurArch>(arch).hidden);
  const std::size_t d = shape.channels;
  return h * d + h * h + h + h + 1;
}

ModelState::ModelState(Arch arch, Shape input_shape, std::vector<double> theta)
    : arch_(arch), shape_(input_shape), theta_(std::move(theta)) {
  if (shape_.timestamps == 0 || shape_.channels == 0) {
    throw std::invalid_argument("ModelState: degenerate input shape");
  }
  if (theta_.size() != param_count(arch_, shape_)) {
    throw std::invalid_argument("ModelState: theta size does not match architecture");
  }
  for (double v : theta_) {
    if (!std::isfinite(v)) throw std::invalid_argument("ModelState: non-finite parameter");
  }
}

ModelState ModelState::with_theta(std::vector<double> theta) const {
  return ModelState(arch_, shape_, std::move(theta));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(init_scale >= 0.0)) throw std::invalid_argument("init_scale must be >= 0");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
    throw std::invalid_argument("decision_threshold must lie in (0, 1)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("weight_decay must be >= 0");
  }
}

ModelState init_model(const Arch& arch, Shape shape, std::uint64_t seed,
                      double init_scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-init_scale, init_scale);
  std::vector<double> theta(param_count(arch, shape));
  for (double& v : theta) v = dist(rng);
  return ModelState(arch, shape, std::move(theta));
}

double forward(const ModelState& model, const FeatureWindow& window) {
  return sigmoid(score_of(model, window));
}

OracleLabel predict(const ModelState& model, const FeatureWindow& window,
                    double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("predict: threshold must lie in (0, 1)");
  }
  return forward(model, window) >= threshold ? OracleLabel::Positive
                                             : OracleLabel::Negative;
}

double bce(double p, int target) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return target == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double batch_loss(const ModelState& model, std::span<const BatchItem> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double num = 0.0;
  double den = 0.0;
  for (const auto& item : batch) {
    num += item.weight * bce(forward(model, *item.window), item.target);
    den += item.weight;
  }
  if (den == 0.0) throw std::invalid_argument("batch_loss: zero total weight");
  return num / den;
}

std::vector<double> grad(const ModelState& model, std::span<const BatchItem> batch) {
  return grad_unchecked(model.arch(), model.input_shape(), model.theta(), batch);
}

std::vector<double> grad_unchecked(const Arch& arch_v, Shape shape,
                                   std::span<const double> theta,
                                   std::span<const BatchItem> batch) {
  if (batch.empty()) throw std::invalid_argument("grad: empty batch");
  std::vector<double> g(theta.size(), 0.0);
  double total_weight = 0.0;

  auto check_shape = [&](const FeatureWindow& x) {
    if (x.timestamps() != shape.timestamps || x.channels() != shape.channels) {
      throw std::invalid_argument("grad: window shape does not match model");
    }
  };

  if (std::holds_alternative<LinearArch>(arch_v)) {
    const std::size_t n = shape.timestamps * shape.channels;
    for (const auto& item : batch) {
      check_shape(*item.window);
      total_weight += item.weight;
      if (item.weight == 0.0) continue;
      const auto& v = item.window->values();
      double s = theta[n];
      for (std::size_t j = 0; j < n; ++j) s += theta[j] * v[j];
      const double err = item.weight * (sigmoid(s) - item.target);
      for (std::size_t j = 0; j < n; ++j) g[j] += err * v[j];
      g[n] += err;
    }
  } else if (const auto* mlp = std::get_if<MlpArch>(&arch_v)) {
    const std::size_t n = shape.timestamps * shape.channels;
    const std::size_t h = static_cast<std::size_t>(mlp->hidden);
    const std::size_t b1 = h * n;
    const std::size_t w2 = b1 + h;
    const std::size_t b2 = w2 + h;
    std::vector<double> z(h);
    for (const auto& item : batch) {
      check_shape(*item.window);
      total_weight += item.weight;
      if (item.weight == 0.0) continue;
      const auto& v = item.window->values();
      double s = theta[b2];
      for (std::size_t i = 0; i < h; ++i) {
        double a = theta[b1 + i];
        const double* row = &theta[i * n];
        for (std::size_t j = 0; j < n; ++j) a += row[j] * v[j];
        z[i] = std::tanh(a);
        s += theta[w2 + i] * z[i];
      }
      const double err = item.weight * (sigmoid(s) - item.target);
      g[b2] += err;
      for (std::size_t i = 0; i < h; ++i) {
        g[w2 + i] += err * z[i];
        const double da = err * theta[w2 + i] * (1.0 - z[i] * z[i]);
        g[b1 + i] += da;
        double* grow = &g[i * n];
        for (std::size_t j = 0; j < n; ++j) grow[j] += da * v[j];
      }
    }
  } else {
    const auto& arch = std::get<RecurArch>(arch_v);
    const std::size_t h = static_cast<std::size_t>(arch.hidden);
    const std::size_t d = shape.channels;
    const std::size_t l = shape.timestamps;
    const std::size_t wx = 0;
    const std::size_t wh = h * d;
    const std::size_t bh = wh + h * h;
    const std::size_t wo = bh + h;
    const std::size_t bo = wo + h;
    std::vector<double> states;
    std::vector<double> ds(h);
    std::vector<double> ds_prev(h);
    std::vector<double> da(h);
    for (const auto& item : batch) {
      check_shape(*item.window);
      total_weight += item.weight;
      if (item.weight == 0.0) continue;
      const FeatureWindow& x = *item.window;
      const double s = recur_score(arch, shape, theta, x, &states);
      const double err = item.weight * (sigmoid(s) - item.target);
      g[bo] += err;
      for (std::size_t i = 0; i < h; ++i) {
        g[wo + i] += err * states[(l - 1) * h + i];
        ds[i] = err * theta[wo + i];
      }
      for (std::size_t t = l; t-- > 0;) {
        const double* st = &states[t * h];
        const double* st_prev = t > 0 ? &states[(t - 1) * h] : nullptr;
        for (std::size_t i = 0; i < h; ++i) {
          da[i] = ds[i] * (1.0 - st[i] * st[i]);
        }
        std::fill(ds_prev.begin(), ds_prev.end(), 0.0);
        for (std::size_t i = 0; i < h; ++i) {
          const double dai = da[i];
          if (dai == 0.0) continue;
          double* gx_row = &g[wx + i * d];
          for (std::size_t j = 0; j < d; ++j) gx_row[j] += dai * x.at(t, j);
          double* gh_row = &g[wh + i * h];
          const double* wh_row = &theta[wh + i * h];
          for (std::size_t j = 0; j < h; ++j) {
            if (st_prev) gh_row[j] += dai * st_prev[j];
            ds_prev[j] += dai * wh_row[j];
          }
          g[bh + i] += dai;
        }
        ds.swap(ds_prev);
      }
    }
  }

  if (total_weight == 0.0) throw std::invalid_argument("grad: zero total weight");
  for (double& v : g) v /= total_weight;
  return g;
}

nlohmann::json checkpoint_to_json(const ModelState& model, double decision_threshold) {
  nlohmann::json j;
  j["arch"] = arch_name(model.arch());
  j["input_shape"] = {model.input_shape().timestamps, model.input_shape().channels};
  j["theta"] = model.theta();
  j["decision_threshold"] = decision_threshold;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  for (const char* key : {"arch", "input_shape", "theta", "decision_threshold"}) {
    if (!j.contains(key)) {
      throw std::invalid_argument(std::string("checkpoint: missing field '") + key + "'");
    }
  }
  const Arch arch = parse_arch(j.at("arch").get<std::string>());
  const auto shape_arr = j.at("input_shape");
  if (!shape_arr.is_array() || shape_arr.size() != 2) {
    throw std::invalid_argument("checkpoint: input_shape must be [timestamps, channels]");
  }
  const Shape shape{shape_arr[0].get<std::size_t>(), shape_arr[1].get<std::size_t>()};
  auto theta = j.at("theta").get<std::vector<double>>();
  const double threshold = j.at("decision_threshold").get<double>();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("checkpoint: decision_threshold out of range");
  }
  return Checkpoint{ModelState(arch, shape, std::move(theta)), threshold};
}

}  // namespace uplearn
