#ifndef RANKDISTILL_EVAL_HPP_
#define RANKDISTILL_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankdistill/core.hpp"

namespace rankdistill::eval {

struct EvalConfig {
  std::size_t cutoff = 10;
  double significance_level = 0.05;

  void validate() const {
    if (cutoff < 1) throw ArgumentError("cutoff must be >= 1");
    if (!(significance_level > 0.0 && significance_level < 1.0))
      throw ArgumentError("significance level must be in (0, 1)");
  }
};

inline double gain(int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; }

inline double position_discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

/// DCG@k over grades listed in ranked order.
inline double dcg(std::span<const int> grades, std::size_t k) {
  double total = 0.0;
  const std::size_t m = std::min(k, grades.size());
  for (std::size_t i = 0; i < m; ++i) total += gain(grades[i]) * position_discount(i + 1);
  return total;
}

/// nDCG@k with 2^g - 1 gains and 1/log2(i + 1) discounts. The ideal ranking is
/// built from all judgments of the query, retrieved or not; a query without
/// relevant judgments scores 0.
inline double ndcg_at_k(const ScoredList& ranking, const Qrels& qrels, std::size_t k) {
  if (k < 1) throw ArgumentError("cutoff must be >= 1");
  const auto& judged = qrels.judged(ranking.query);
  std::vector<int> ideal;
  for (const auto& [_, g] : judged)
    if (g > 0) ideal.push_back(g);
  if (ideal.empty()) return 0.0;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, k);

  std::vector<ScoredDoc> entries = ranking.entries;
  std::sort(entries.begin(), entries.end(), ranks_before);
  std::vector<int> grades;
  grades.reserve(std::min(k, entries.size()));
  for (std::size_t i = 0; i < entries.size() && i < k; ++i) {
    auto it = judged.find(entries[i].doc);
    grades.push_back(it == judged.end() ? 0 : it->second);
  }
  return dcg(grades, k) / idcg;
}

using PerQuery = std::map<QueryId, double>;

/// Per-query nDCG@k for every query in `qrels`; queries missing from the run
/// score 0.
inline PerQuery evaluate_run(const Run& run, const Qrels& qrels, std::size_t k) {
  PerQuery out;
  for (const auto& [qid, _] : qrels.all()) {
    auto it = run.find(qid);
    out[qid] = it == run.end() ? 0.0 : ndcg_at_k(it->second, qrels, k);
  }
  return out;
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean of an empty collection");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

inline double mean(const PerQuery& scores) {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const auto& [_, s] : scores) v.push_back(s);
  return mean(v);
}

/// Arithmetic mean over the queries of each collection.
inline std::map<std::string, double> micro_average(
    const std::map<std::string, std::vector<double>>& per_collection) {
  std::map<std::string, double> out;
  for (const auto& [name, scores] : per_collection) {
    if (scores.empty()) throw ArgumentError("collection '" + name + "' has no queries");
    out[name] = mean(scores);
  }
  return out;
}

inline constexpr double kGeometricMeanFloor = 1e-4;

/// exp(mean(log x)); entries <= 0 are floored at 1e-4 with a warning.
inline double geometric_mean(std::span<const double> values, const WarningSink& warn = warn_to_stderr) {
  if (values.empty()) throw ArgumentError("geometric mean of an empty collection");
  double log_sum = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) {
      if (warn) warn("geometric mean: value " + std::to_string(v) + " floored at 1e-4");
      v = kGeometricMeanFloor;
    }
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

// ---------------------------------------------------------------------------
// Student t distribution
// ---------------------------------------------------------------------------

namespace detail {

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ArgumentError("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw ArgumentError("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability P(|T| >= |t|) for T ~ Student t(dof).
inline double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw ArgumentError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  double mean_difference = 0.0;
};

/// Paired two-sided t-test on a - b. With zero variance in the differences,
/// p = 1 when they are all zero and p = 0 (with a warning) otherwise.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b,
                                 const WarningSink& warn = warn_to_stderr) {
  if (a.size() != b.size()) throw ArgumentError("paired t-test: length mismatch");
  if (a.size() < 2) throw ArgumentError("paired t-test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double m = mean(diff);
  double ss = 0.0;
  for (double d : diff) ss += (d - m) * (d - m);
  const double var = ss / static_cast<double>(n - 1);

  TTestResult r;
  r.n = n;
  r.mean_difference = m;
  // Differences equal up to rounding (0.4-0.3 vs 0.6-0.5) count as constant.
  double scale = 0.0;
  for (double d : diff) scale = std::max(scale, std::abs(d));
  const bool constant = std::sqrt(var) <= 1e-12 * scale || scale == 0.0;
  if (constant) {
    if (scale == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      if (warn) warn("paired t-test: constant non-zero differences, reporting p = 0");
      r.t = m > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = m / std::sqrt(var / static_cast<double>(n));
  r.p = student_t_two_sided_p(r.t, static_cast<double>(n - 1));
  return r;
}

/// Holm's step-down procedure; decisions are returned in input order
/// (true = reject).
inline std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must be in (0, 1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("p-value outside [0, 1]");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<bool> reject(m, false);
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t i = order[rank];
    if (p_values[i] > alpha / static_cast<double>(m - rank)) break;
    reject[i] = true;
  }
  return reject;
}

// ---------------------------------------------------------------------------
// Significance reports
// ---------------------------------------------------------------------------

/// Per-query scores of one system, grouped by collection.
using SystemScores = std::map<std::string, PerQuery>;

struct Comparison {
  std::string system;
  std::string collection;  // "*" for the pooled variant
  double baseline_mean = 0.0;
  double system_mean = 0.0;
  TTestResult test;
  bool reject = false;
};

struct SignificanceReport {
  std::string baseline;
  double alpha = 0.05;
  std::vector<Comparison> comparisons;

  /// One JSON object per comparison.
  void write_jsonl(std::ostream& out) const {
    for (const auto& c : comparisons) {
      nlohmann::ordered_json j;
      j["baseline"] = baseline;
      j["system"] = c.system;
      j["collection"] = c.collection;
      j["queries"] = c.test.n;
      j["baseline_mean"] = c.baseline_mean;
      j["system_mean"] = c.system_mean;
      j["t"] = std::isfinite(c.test.t) ? nlohmann::ordered_json(c.test.t)
                                       : nlohmann::ordered_json(c.test.t > 0 ? "inf" : "-inf");
      j["p"] = c.test.p;
      j["reject"] = c.reject;
      j["alpha"] = alpha;
      out << j.dump() << '\n';
    }
  }

  void write_text(std::ostream& out) const;
};

inline void SignificanceReport::write_text(std::ostream& out) const {
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %-14s %6s %9s %9s %9s %10s  %s\n", "system", "collection",
                "n", "base", "mean", "t", "p", "holm");
  out << "baseline: " << baseline << "  (alpha " << alpha << ", Holm-Bonferroni)\n" << line;
  for (const auto& c : comparisons) {
    std::snprintf(line, sizeof(line), "%-20s %-14s %6zu %9.4f %9.4f %9.3f %10.3g  %s\n",
                  c.system.c_str(), c.collection.c_str(), c.test.n, c.baseline_mean, c.system_mean,
                  c.test.t, c.test.p, c.reject ? "significant" : "-");
    out << line;
  }
}

/// Paired t-tests of every system against the baseline, per collection (or
/// pooled over all collections), with one Holm correction over the family.
inline SignificanceReport compare_systems(const std::string& baseline_name, const SystemScores& baseline,
                                          const std::map<std::string, SystemScores>& systems,
                                          const EvalConfig& cfg, bool pooled = false,
                                          const WarningSink& warn = warn_to_stderr) {
  cfg.validate();
  SignificanceReport report;
  report.baseline = baseline_name;
  report.alpha = cfg.significance_level;

  auto paired = [&](const PerQuery& base, const PerQuery& sys, std::vector<double>& a,
                    std::vector<double>& b) {
    for (const auto& [qid, score] : base) {
      auto it = sys.find(qid);
      if (it == sys.end()) throw ArgumentError("query " + qid.str() + " missing from a compared system");
      a.push_back(it->second);
      b.push_back(score);
    }
    if (sys.size() != base.size()) throw ArgumentError("compared systems cover different queries");
  };

  for (const auto& [name, scores] : systems) {
    if (scores.size() != baseline.size()) throw ArgumentError("system '" + name + "' has different collections");
    if (pooled) {
      std::vector<double> a, b;
      for (const auto& [coll, base] : baseline) {
        auto it = scores.find(coll);
        if (it == scores.end()) throw ArgumentError("system '" + name + "' lacks collection " + coll);
        paired(base, it->second, a, b);
      }
      report.comparisons.push_back({name, "*", mean(b), mean(a), paired_t_test(a, b, warn), false});
    } else {
      for (const auto& [coll, base] : baseline) {
        auto it = scores.find(coll);
        if (it == scores.end()) throw ArgumentError("system '" + name + "' lacks collection " + coll);
        std::vector<double> a, b;
        paired(base, it->second, a, b);
        report.comparisons.push_back({name, coll, mean(b), mean(a), paired_t_test(a, b, warn), false});
      }
    }
  }
  std::vector<double> ps;
  for (const auto& c : report.comparisons) ps.push_back(c.test.p);
  const auto decisions = holm_bonferroni(ps, cfg.significance_level);
  for (std::size_t i = 0; i < decisions.size(); ++i) report.comparisons[i].reject = decisions[i];
  return report;
}

/// "qid<TAB>metric<TAB>value" lines, then an "all" line with the mean.
inline void write_per_query(std::ostream& out, const PerQuery& scores, const std::string& metric) {
  char buf[64];
  for (const auto& [qid, v] : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << qid << '\t' << metric << '\t' << buf << '\n';
  }
  if (!scores.empty()) {
    std::snprintf(buf, sizeof(buf), "%.6f", mean(scores));
    out << "all\t" << metric << '\t' << buf << '\n';
  }
}

}  // namespace rankdistill::eval

#endif  // RANKDISTILL_EVAL_HPP_
