#ifndef RANKDISTILL_RERANK_SIM_HPP_
#define RANKDISTILL_RERANK_SIM_HPP_

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankdistill/core.hpp"

namespace rankdistill::rerank_sim {

enum class StrategyKind { Pointwise, SlidingWindow };

struct StrategySpec {
  StrategyKind kind = StrategyKind::Pointwise;
  std::size_t window = 20;
  std::size_t stride = 10;
  /// Number of back-to-front passes over the list.
  std::size_t passes = 1;

  static StrategySpec pointwise() { return {StrategyKind::Pointwise, 0, 0, 1}; }
  static StrategySpec sliding(std::size_t window = 20, std::size_t stride = 10, std::size_t passes = 1) {
    return {StrategyKind::SlidingWindow, window, stride, passes};
  }

  void validate(std::size_t depth) const {
    if (depth < 1) throw ArgumentError("depth must be >= 1");
    if (passes < 1) throw ArgumentError("passes must be >= 1");
    if (kind == StrategyKind::SlidingWindow &&
        !(1 <= stride && stride <= window && window <= depth))
      throw ArgumentError("sliding window requires 1 <= stride <= window <= depth (stride " +
                          std::to_string(stride) + ", window " + std::to_string(window) + ", depth " +
                          std::to_string(depth) + ")");
  }

  std::string describe() const {
    if (kind == StrategyKind::Pointwise) return "pointwise";
    std::string s = "window(" + std::to_string(window) + "," + std::to_string(stride) + ")";
    if (passes > 1) s += "x" + std::to_string(passes);
    return s;
  }
};

/// Inclusive 1-based rank range scored in one call.
struct Window {
  std::size_t first = 1;
  std::size_t last = 1;
  std::size_t size() const { return last - first + 1; }
  friend bool operator==(const Window&, const Window&) = default;
};

/// Calls in execution order. Sliding windows start at the bottom of the list
/// and step toward the top by `stride`; the last window is clamped to [1, w].
inline std::vector<Window> schedule(std::size_t depth, const StrategySpec& spec) {
  spec.validate(depth);
  std::vector<Window> out;
  for (std::size_t pass = 0; pass < spec.passes; ++pass) {
    if (spec.kind == StrategyKind::Pointwise) {
      out.push_back({1, depth});
      continue;
    }
    std::size_t last = depth;
    while (true) {
      if (last <= spec.window) {
        out.push_back({1, spec.window});
        break;
      }
      out.push_back({last - spec.window + 1, last});
      last -= spec.stride;
    }
  }
  return out;
}

/// Total passages scored over all calls.
inline std::size_t scoring_count(std::size_t depth, const StrategySpec& spec) {
  std::size_t total = 0;
  for (const auto& w : schedule(depth, spec)) total += w.size();
  return total;
}

/// Per-call latency and resident memory of one model under one strategy.
struct CostModel {
  double per_call_latency = 0.0;  // seconds
  std::optional<double> memory_gb;

  void validate() const {
    if (!(per_call_latency >= 0.0)) throw ArgumentError("per-call latency must be >= 0");
    if (memory_gb && !(*memory_gb >= 0.0)) throw ArgumentError("memory must be >= 0");
  }
};

/// Spreads a measured total latency for re-ranking `depth` passages evenly
/// over the strategy's calls.
inline CostModel calibrate(double total_latency, std::size_t depth, const StrategySpec& spec,
                           std::optional<double> memory_gb = std::nullopt) {
  const auto calls = schedule(depth, spec).size();
  return {total_latency / static_cast<double>(calls), memory_gb};
}

struct Estimate {
  std::size_t calls = 0;
  std::size_t scorings = 0;
  double latency = 0.0;
  std::optional<double> memory_gb;
};

inline Estimate estimate(std::size_t depth, const StrategySpec& spec, const CostModel& cost) {
  cost.validate();
  const auto windows = schedule(depth, spec);
  Estimate e;
  e.calls = windows.size();
  for (const auto& w : windows) {
    e.scorings += w.size();
    e.latency += cost.per_call_latency;
  }
  e.memory_gb = cost.memory_gb;
  return e;
}

struct ModelProfile {
  std::string name;
  StrategySpec strategy;
  CostModel cost;
};

/// Re-ranking 100 passages: measured totals (seconds) and GPU memory (GB).
inline std::vector<ModelProfile> reference_profiles(std::size_t depth = 100) {
  const auto window = StrategySpec::sliding(20, 10);
  const auto point = StrategySpec::pointwise();
  return {
      {"RankGPT-4", window, calibrate(20.234, depth, window)},
      {"RankZephyr", window, calibrate(24.047, depth, window, 15.48)},
      {"monoT5-3B", point, calibrate(0.998, depth, point, 29.36)},
      {"RankT5-3B", point, calibrate(0.942, depth, point, 29.04)},
      {"monoELECTRA-Base", point, calibrate(0.139, depth, point, 1.18)},
      {"monoELECTRA-Large", point, calibrate(0.215, depth, point, 2.69)},
  };
}

struct CostRow {
  std::string model;
  std::string strategy;
  Estimate estimate;
  double latency_ratio = 1.0;
  std::optional<double> memory_ratio;
};

/// Estimates every profile and divides by the baseline profile's figures.
inline std::vector<CostRow> cost_report(const std::vector<ModelProfile>& profiles, const std::string& baseline,
                                        std::size_t depth) {
  const ModelProfile* base = nullptr;
  for (const auto& p : profiles)
    if (p.name == baseline) base = &p;
  if (!base) throw ArgumentError("unknown baseline model '" + baseline + "'");
  const Estimate b = estimate(depth, base->strategy, base->cost);
  std::vector<CostRow> rows;
  for (const auto& p : profiles) {
    CostRow row{p.name, p.strategy.describe(), estimate(depth, p.strategy, p.cost), 0.0, std::nullopt};
    row.latency_ratio = b.latency > 0.0 ? row.estimate.latency / b.latency : NAN;
    if (row.estimate.memory_gb && b.memory_gb && *b.memory_gb > 0.0)
      row.memory_ratio = *row.estimate.memory_gb / *b.memory_gb;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_cost_table(std::ostream& out, const std::vector<CostRow>& rows, const std::string& baseline) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-18s %-16s %6s %9s %11s %9s %9s %9s\n", "model", "strategy", "calls",
                "scorings", "latency_s", "mem_gb", "lat_x", "mem_x");
  out << "baseline: " << baseline << '\n' << line;
  for (const auto& r : rows) {
    char mem[32] = "n/a", memx[32] = "n/a";
    if (r.estimate.memory_gb) std::snprintf(mem, sizeof(mem), "%.2f", *r.estimate.memory_gb);
    if (r.memory_ratio) std::snprintf(memx, sizeof(memx), "%.2f", *r.memory_ratio);
    std::snprintf(line, sizeof(line), "%-18s %-16s %6zu %9zu %11.3f %9s %9.1f %9s\n", r.model.c_str(),
                  r.strategy.c_str(), r.estimate.calls, r.estimate.scorings, r.estimate.latency, mem,
                  r.latency_ratio, memx);
    out << line;
  }
}

inline void write_cost_jsonl(std::ostream& out, const std::vector<CostRow>& rows, const std::string& baseline) {
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["strategy"] = r.strategy;
    j["calls"] = r.estimate.calls;
    j["scorings"] = r.estimate.scorings;
    j["latency_s"] = r.estimate.latency;
    j["memory_gb"] = r.estimate.memory_gb ? nlohmann::ordered_json(*r.estimate.memory_gb) : nlohmann::ordered_json(nullptr);
    j["baseline"] = baseline;
    j["latency_ratio"] = r.latency_ratio;
    j["memory_ratio"] = r.memory_ratio ? nlohmann::ordered_json(*r.memory_ratio) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
}

}  // namespace rankdistill::rerank_sim

#endif  // RANKDISTILL_RERANK_SIM_HPP_
