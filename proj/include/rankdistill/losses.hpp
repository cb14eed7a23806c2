#ifndef RANKDISTILL_LOSSES_HPP_
#define RANKDISTILL_LOSSES_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rankdistill/core.hpp"

namespace rankdistill::losses {

/// Sharpness of the pairwise sigmoids in the smooth rank estimate.
struct ApproxConfig {
  double alpha = 1.0;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw ArgumentError("ApproxConfig.alpha must be a positive finite number");
  }
};

/// Loss value plus d(loss)/d(score) for every input score.
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

/// Target-rank discount 1 / log2(rank + 1); rank is 1-based.
inline double rank_discount(std::size_t rank) {
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

/// Listwise softmax cross-entropy with a single positive.
inline LossOutput infonce(std::span<const double> scores, std::size_t positive_index) {
  if (scores.empty()) throw ArgumentError("infonce: empty score vector");
  if (positive_index >= scores.size()) throw ArgumentError("infonce: positive index out of range");

  const double max_score = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  LossOutput out;
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.grad[i] = std::exp(scores[i] - max_score);
    sum += out.grad[i];
  }
  const double log_sum_exp = max_score + std::log(sum);
  out.value = std::max(0.0, log_sum_exp - scores[positive_index]);
  for (auto& g : out.grad) g /= sum;
  out.grad[positive_index] -= 1.0;
  return out;
}

/// Pairwise logistic loss; scores[0] belongs to the teacher's top passage.
inline LossOutput ranknet(std::span<const double> scores) {
  if (scores.empty()) throw ArgumentError("ranknet: empty score vector");
  const std::size_t n = scores.size();
  LossOutput out;
  out.grad.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double margin = scores[j] - scores[i];
      out.value += softplus(margin);
      const double p = sigmoid(margin);
      out.grad[j] += p;
      out.grad[i] -= p;
    }
  }
  return out;
}

/// Differentiable rank estimate: 1 + sum over j != i of sigmoid(alpha (s_j - s_i)).
inline std::vector<double> smooth_rank(std::span<const double> scores,
                                       const ApproxConfig& cfg = {}) {
  cfg.validate();
  if (scores.empty()) throw ArgumentError("smooth_rank: empty score vector");
  const std::size_t n = scores.size();
  std::vector<double> ranks(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // sigmoid(x) + sigmoid(-x) == 1, so one evaluation serves both entries.
      const double p = sigmoid(cfg.alpha * (scores[j] - scores[i]));
      ranks[i] += p;
      ranks[j] += 1.0 - p;
    }
  }
  return ranks;
}

/// Discounted squared error between teacher rank and smooth rank, averaged
/// over the list. scores[i] belongs to the passage the teacher put at rank i+1.
inline LossOutput adr_mse(std::span<const double> scores, const ApproxConfig& cfg = {}) {
  if (scores.empty()) throw ArgumentError("adr_mse: empty score vector");
  const std::size_t n = scores.size();
  const std::vector<double> approx = smooth_rank(scores, cfg);
  const double inv_n = 1.0 / static_cast<double>(n);

  LossOutput out;
  // d(loss)/d(approx rank i)
  std::vector<double> upstream(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = static_cast<double>(i + 1);
    const double err = target - approx[i];
    const double w = rank_discount(i + 1);
    out.value += w * err * err;
    upstream[i] = -2.0 * inv_n * w * err;
  }
  out.value *= inv_n;

  // d approx_i / d s_k = alpha sig'(alpha (s_k - s_i)) for k != i, and the
  // diagonal is minus the row sum; sig' is even, so each pair contributes
  // symmetrically.
  out.grad.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = sigmoid(cfg.alpha * (scores[j] - scores[i]));
      const double dp = cfg.alpha * p * (1.0 - p);
      const double diff = upstream[i] - upstream[j];
      out.grad[j] += dp * diff;
      out.grad[i] -= dp * diff;
    }
  }
  return out;
}

}  // namespace rankdistill::losses

#endif  // RANKDISTILL_LOSSES_HPP_
