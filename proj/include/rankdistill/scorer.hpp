#ifndef RANKDISTILL_SCORER_HPP_
#define RANKDISTILL_SCORER_HPP_

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rankdistill/core.hpp"

namespace rankdistill {

enum class Architecture { Linear, Mlp };

inline std::string to_string(Architecture a) { return a == Architecture::Linear ? "linear" : "mlp"; }

/// Feature-vector relevance scorer.
///
/// Parameter layout (flat):
///   Linear: w[0..F), b
///   Mlp:    W1 (H x F, row-major), b1[0..H), w2[0..H), b2
/// The MLP computes w2 . tanh(W1 x + b1) + b2.
class ScorerModel {
 public:
  ScorerModel() = default;

  static ScorerModel linear(std::size_t feature_dim) {
    return ScorerModel(Architecture::Linear, feature_dim, 0);
  }
  static ScorerModel mlp(std::size_t feature_dim, std::size_t hidden) {
    if (hidden == 0) throw ArgumentError("MLP hidden width must be >= 1");
    return ScorerModel(Architecture::Mlp, feature_dim, hidden);
  }

  static std::size_t parameter_count(Architecture arch, std::size_t f, std::size_t h) {
    return arch == Architecture::Linear ? f + 1 : f * h + h + h + 1;
  }

  Architecture architecture() const noexcept { return arch_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t hidden() const noexcept { return hidden_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  void set_parameters(std::vector<double> p) {
    if (p.size() != params_.size()) throw ArgumentError("parameter count mismatch");
    for (double v : p)
      if (!std::isfinite(v)) throw ArgumentError("non-finite parameter");
    params_ = std::move(p);
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 0x5c0ae));
    auto fill = [&](std::size_t begin, std::size_t end, double fan_in) {
      const double bound = 1.0 / std::sqrt(fan_in);
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = begin; i < end; ++i) params_[i] = u(rng);
    };
    const auto f = static_cast<double>(feature_dim_);
    if (arch_ == Architecture::Linear) {
      fill(0, params_.size(), f);
    } else {
      const std::size_t first = feature_dim_ * hidden_ + hidden_;
      fill(0, first, f);
      fill(first, params_.size(), static_cast<double>(hidden_));
    }
  }

  friend bool operator==(const ScorerModel&, const ScorerModel&) = default;

 private:
  ScorerModel(Architecture arch, std::size_t f, std::size_t h)
      : arch_(arch), feature_dim_(f), hidden_(h), params_(parameter_count(arch, f, h), 0.0) {
    if (f == 0) throw ArgumentError("feature dimension must be >= 1");
  }

  Architecture arch_ = Architecture::Linear;
  std::size_t feature_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

namespace detail {
inline void check_dim(const ScorerModel& model, std::span<const double> x) {
  if (x.size() != model.feature_dim())
    throw ArgumentError("feature dimension " + std::to_string(x.size()) + " != model dimension " +
                        std::to_string(model.feature_dim()));
}
}  // namespace detail

inline double score(const ScorerModel& model, std::span<const double> x) {
  detail::check_dim(model, x);
  const auto p = model.parameters();
  const std::size_t f = model.feature_dim();
  if (model.architecture() == Architecture::Linear) {
    double s = p[f];
    for (std::size_t k = 0; k < f; ++k) s += p[k] * x[k];
    return s;
  }
  const std::size_t h = model.hidden();
  const double* b1 = p.data() + f * h;
  const double* w2 = b1 + h;
  double s = w2[h];
  for (std::size_t j = 0; j < h; ++j) {
    const double* row = p.data() + j * f;
    double a = b1[j];
    for (std::size_t k = 0; k < f; ++k) a += row[k] * x[k];
    s += w2[j] * std::tanh(a);
  }
  return s;
}

/// Accumulates upstream * d(score)/d(params) into `grad`.
inline void accumulate_score_grad(const ScorerModel& model, std::span<const double> x,
                                  double upstream, std::span<double> grad) {
  detail::check_dim(model, x);
  if (grad.size() != model.parameters().size()) throw ArgumentError("gradient size mismatch");
  if (upstream == 0.0) return;
  const auto p = model.parameters();
  const std::size_t f = model.feature_dim();
  if (model.architecture() == Architecture::Linear) {
    for (std::size_t k = 0; k < f; ++k) grad[k] += upstream * x[k];
    grad[f] += upstream;
    return;
  }
  const std::size_t h = model.hidden();
  const std::size_t b1_off = f * h;
  const std::size_t w2_off = b1_off + h;
  for (std::size_t j = 0; j < h; ++j) {
    const double* row = p.data() + j * f;
    double a = p[b1_off + j];
    for (std::size_t k = 0; k < f; ++k) a += row[k] * x[k];
    const double t = std::tanh(a);
    grad[w2_off + j] += upstream * t;
    const double back = upstream * p[w2_off + j] * (1.0 - t * t);
    grad[b1_off + j] += back;
    for (std::size_t k = 0; k < f; ++k) grad[j * f + k] += back * x[k];
  }
  grad[w2_off + h] += upstream;
}

inline std::vector<double> score_grad(const ScorerModel& model, std::span<const double> x,
                                      double upstream) {
  std::vector<double> grad(model.parameters().size(), 0.0);
  accumulate_score_grad(model, x, upstream, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

struct AdamWConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

struct AdamWState {
  AdamWConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamWState() = default;
  AdamWState(const AdamWConfig& cfg, std::size_t num_params)
      : config(cfg), first_moment(num_params, 0.0), second_moment(num_params, 0.0) {}

  friend bool operator==(const AdamWState&, const AdamWState&) = default;
};

/// One decoupled-weight-decay Adam update in place. A non-finite gradient
/// leaves model and state untouched and throws.
inline void adamw_step(ScorerModel& model, AdamWState& state, std::span<const double> grad) {
  auto theta = model.parameters();
  if (grad.size() != theta.size() || state.first_moment.size() != theta.size())
    throw ArgumentError("adamw_step: shape mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) throw DataError("adamw_step: non-finite gradient");

  const auto& c = state.config;
  const std::uint64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grad[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    theta[i] -= c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * theta[i]);
  }
  state.step = t;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr const char* kCheckpointMagic = "rankdistill-checkpoint 1";

inline void write_checkpoint(std::ostream& out, const ScorerModel& model) {
  out << kCheckpointMagic << '\n'
      << "architecture " << to_string(model.architecture()) << '\n'
      << "feature_dim " << model.feature_dim() << '\n'
      << "hidden " << model.hidden() << '\n'
      << "parameters " << model.parameters().size() << '\n';
  char buf[40];
  for (double p : model.parameters()) {
    std::snprintf(buf, sizeof(buf), "%.17g", p);
    out << buf << '\n';
  }
}

inline ScorerModel read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, "checkpoint truncated");
    ++lineno;
    return line;
  };
  if (next() != kCheckpointMagic) throw ParseError(lineno, "not a rankdistill checkpoint");
  auto keyed = [&](const std::string& key) {
    std::istringstream ls(next());
    std::string k, v;
    if (!(ls >> k >> v) || k != key) throw ParseError(lineno, "expected '" + key + "'");
    return v;
  };
  auto count = [&](const std::string& key) -> std::size_t {
    const std::string v = keyed(key);
    if (v.empty() || v.size() > 9 || v.find_first_not_of("0123456789") != std::string::npos)
      throw ParseError(lineno, "malformed " + key + " '" + v + "'");
    return std::stoul(v);
  };
  const std::string arch = keyed("architecture");
  const std::size_t f = count("feature_dim");
  const std::size_t h = count("hidden");
  const std::size_t n = count("parameters");
  ScorerModel model;
  if (arch == "linear") {
    model = ScorerModel::linear(f);
  } else if (arch == "mlp") {
    model = ScorerModel::mlp(f, h);
  } else {
    throw ParseError(2, "unknown architecture '" + arch + "'");
  }
  if (n != model.parameters().size()) throw ParseError(5, "parameter count does not match architecture");
  std::vector<double> params(n);
  for (auto& p : params) {
    const std::string text = next();
    try {
      std::size_t used = 0;
      p = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ParseError(lineno, "malformed parameter '" + text + "'");
    }
  }
  model.set_parameters(std::move(params));
  return model;
}

}  // namespace rankdistill

#endif  // RANKDISTILL_SCORER_HPP_
