#ifndef RANKDISTILL_TRAINER_HPP_
#define RANKDISTILL_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankdistill/core.hpp"
#include "rankdistill/distill_data.hpp"
#include "rankdistill/eval.hpp"
#include "rankdistill/losses.hpp"
#include "rankdistill/parallel.hpp"
#include "rankdistill/scorer.hpp"
#include "rankdistill/world.hpp"

namespace rankdistill {

enum class LossKind { InfoNCE, RankNet, AdrMse };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::InfoNCE: return "infonce";
    case LossKind::RankNet: return "ranknet";
    case LossKind::AdrMse: return "adr-mse";
  }
  return "?";
}

inline LossKind parse_loss(const std::string& name) {
  if (name == "infonce") return LossKind::InfoNCE;
  if (name == "ranknet") return LossKind::RankNet;
  if (name == "adr-mse") return LossKind::AdrMse;
  throw ArgumentError("unknown loss '" + name + "' (expected infonce, ranknet or adr-mse)");
}

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_steps = 2000;
  LossKind loss = LossKind::InfoNCE;
  double alpha = 1.0;
  AdamWConfig optimizer{};
  std::size_t patience_steps = 100;
  std::size_t validation_every = 10;
  std::size_t eval_cutoff = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (patience_steps < 1) throw ArgumentError("patience_steps must be >= 1");
    if (validation_every < 1) throw ArgumentError("validation_every must be >= 1");
    if (eval_cutoff < 1) throw ArgumentError("eval_cutoff must be >= 1");
    if (!(optimizer.learning_rate >= 0.0)) throw ArgumentError("learning_rate must be >= 0");
    losses::ApproxConfig{alpha}.validate();
  }
};

enum class StopReason { MaxSteps, EarlyStopped };

inline std::string to_string(StopReason r) { return r == StopReason::MaxSteps ? "max_steps" : "early_stopped"; }

struct TrainReport {
  std::size_t steps_executed = 0;
  /// NaN when the stage ran without validation.
  double best_validation_ndcg10 = std::numeric_limits<double>::quiet_NaN();
  std::size_t step_of_best = 0;
  std::vector<std::pair<std::size_t, double>> loss_curve;
  std::vector<std::pair<std::size_t, double>> validation_curve;
  StopReason stop_reason = StopReason::MaxSteps;
};

/// Line-delimited metrics: one record per optimizer step, plus one per
/// validation check.
inline void write_metrics_log(std::ostream& out, const TrainReport& report, const std::string& stage) {
  std::size_t v = 0;
  auto emit_validation_upto = [&](std::size_t step) {
    while (v < report.validation_curve.size() && report.validation_curve[v].first <= step) {
      nlohmann::ordered_json j;
      j["stage"] = stage;
      j["step"] = report.validation_curve[v].first;
      j["val_ndcg10"] = report.validation_curve[v].second;
      out << j.dump() << '\n';
      ++v;
    }
  };
  for (const auto& [step, loss] : report.loss_curve) {
    emit_validation_upto(step - 1);
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["step"] = step;
    j["loss"] = loss;
    out << j.dump() << '\n';
  }
  emit_validation_upto(std::numeric_limits<std::size_t>::max());
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationQuery {
  QueryId query;
  std::vector<DocId> docs;
  std::vector<FeatureVector> features;
};

/// Candidate lists to re-rank plus the judgments to score them against.
struct ValidationSet {
  std::vector<ValidationQuery> queries;
  Qrels qrels;

  bool empty() const noexcept { return queries.empty(); }
};

/// Takes each query's top `depth` passages from `run`.
inline ValidationSet build_validation_set(const Run& run, const Corpus& corpus, const Qrels& qrels,
                                          std::size_t depth = 100) {
  ValidationSet vs;
  vs.qrels = qrels;
  for (const auto& [qid, list] : run) {
    ValidationQuery q{qid, {}, {}};
    const std::size_t m = std::min(depth, list.size());
    for (std::size_t r = 0; r < m; ++r) {
      q.docs.push_back(list.entries[r].doc);
      q.features.push_back(corpus.features(qid, list.entries[r].doc));
    }
    vs.queries.push_back(std::move(q));
  }
  return vs;
}

inline ScoredList rerank(const ScorerModel& model, const ValidationQuery& q) {
  ScoredList list{q.query, {}};
  list.entries.reserve(q.docs.size());
  for (std::size_t i = 0; i < q.docs.size(); ++i) list.entries.push_back({q.docs[i], score(model, q.features[i])});
  list.sort();
  return list;
}

inline Run rerank(const ScorerModel& model, const ValidationSet& vs, std::size_t jobs = 1) {
  std::vector<ScoredList> lists(vs.queries.size());
  parallel_for(lists.size(), jobs, [&](std::size_t i) { lists[i] = rerank(model, vs.queries[i]); });
  Run run;
  for (auto& l : lists) {
    QueryId q = l.query;
    run.emplace(std::move(q), std::move(l));
  }
  return run;
}

/// Mean nDCG@k of the model's re-ranking over the validation queries.
inline double mean_ndcg(const ScorerModel& model, const ValidationSet& vs, std::size_t k = 10,
                        std::size_t jobs = 1) {
  if (vs.empty()) throw ArgumentError("validation set is empty");
  std::vector<double> per(vs.queries.size());
  parallel_for(per.size(), jobs,
               [&](std::size_t i) { per[i] = eval::ndcg_at_k(rerank(model, vs.queries[i]), vs.qrels, k); });
  return eval::mean(per);
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

/// Endless stream of item indices, reshuffled every epoch with a seed derived
/// from (seed, epoch). A batch that crosses an epoch boundary is completed
/// from the next epoch; with fewer items than the batch size each batch is
/// the whole (shuffled) set.
class BatchStream {
 public:
  BatchStream(std::size_t num_items, std::size_t batch_size, std::uint64_t seed)
      : n_(num_items), batch_(batch_size), seed_(seed), order_(num_items) {
    if (num_items == 0) throw ArgumentError("no training items");
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (n_ <= batch_) {
      std::vector<std::size_t> all = order_;
      ++epoch_;
      reshuffle();
      return all;
    }
    std::vector<std::size_t> out;
    out.reserve(batch_);
    while (out.size() < batch_) {
      if (pos_ == n_) {
        ++epoch_;
        reshuffle();
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), 0);
    std::mt19937_64 rng(derive_seed(seed_, detail::kStreamShuffle, epoch_));
    for (std::size_t i = n_; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order_[i - 1], order_[pick(rng)]);
    }
    pos_ = 0;
  }

  std::size_t n_, batch_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------------------
// Loss over a batch of lists
// ---------------------------------------------------------------------------

/// A list of candidate feature vectors; for InfoNCE the positive is item 0,
/// for the distillation losses items are in teacher order.
using FeatureList = std::vector<const FeatureVector*>;

inline losses::LossOutput list_loss(std::span<const double> scores, LossKind kind, double alpha) {
  switch (kind) {
    case LossKind::InfoNCE: return losses::infonce(scores, 0);
    case LossKind::RankNet: return losses::ranknet(scores);
    case LossKind::AdrMse: return losses::adr_mse(scores, {alpha});
  }
  throw ArgumentError("unknown loss");
}

/// Mean per-list loss over `batch` and its gradient w.r.t. the parameters.
inline double batch_loss(const ScorerModel& model, const std::vector<FeatureList>& lists,
                         std::span<const std::size_t> batch, LossKind kind, double alpha,
                         std::vector<double>& grad) {
  grad.assign(model.parameters().size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<double> scores;
  for (std::size_t idx : batch) {
    const FeatureList& items = lists[idx];
    scores.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) scores[i] = score(model, *items[i]);
    const auto out = list_loss(scores, kind, alpha);
    if (!std::isfinite(out.value))
      throw DataError("non-finite " + to_string(kind) + " loss on training list " + std::to_string(idx));
    total += out.value;
    for (std::size_t i = 0; i < items.size(); ++i)
      accumulate_score_grad(model, *items[i], out.grad[i] * inv_b, grad);
  }
  return total * inv_b;
}

namespace detail {

struct TrainLoopResult {
  ScorerModel model;
  TrainReport report;
};

/// Shared optimizer loop. With a validation set the best checkpoint is kept
/// and training stops once `patience_steps` steps pass without a strict
/// improvement (tolerance 1e-9).
inline TrainLoopResult train_loop(ScorerModel model, const std::vector<FeatureList>& lists,
                                  const TrainConfig& cfg, const ValidationSet* validation,
                                  const std::string& stage) {
  constexpr double kImprovementTolerance = 1e-9;
  TrainReport report;
  if (cfg.max_steps == 0 && !validation) return {std::move(model), report};

  AdamWState state(cfg.optimizer, model.parameters().size());
  BatchStream stream(lists.size(), cfg.batch_size, derive_seed(cfg.seed, kStreamShuffle));
  std::vector<double> grad;

  ScorerModel best = model;
  auto validate_at = [&](std::size_t step) {
    const double ndcg = mean_ndcg(model, *validation, cfg.eval_cutoff, cfg.jobs);
    report.validation_curve.emplace_back(step, ndcg);
    if (std::isnan(report.best_validation_ndcg10) ||
        ndcg > report.best_validation_ndcg10 + kImprovementTolerance) {
      report.best_validation_ndcg10 = ndcg;
      report.step_of_best = step;
      best = model;
    }
  };
  if (validation) validate_at(0);

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const auto batch = stream.next();
    const double loss = batch_loss(model, lists, batch, cfg.loss, cfg.alpha, grad);
    adamw_step(model, state, grad);
    for (double p : model.parameters())
      if (!std::isfinite(p)) throw DataError(stage + ": parameters diverged at step " + std::to_string(step));
    report.loss_curve.emplace_back(step, loss);
    report.steps_executed = step;
    if (validation && step % cfg.validation_every == 0) {
      validate_at(step);
      if (step - report.step_of_best >= cfg.patience_steps) {
        report.stop_reason = StopReason::EarlyStopped;
        break;
      }
    }
  }
  if (validation) {
    // A final partial interval still gets checked so the last steps count.
    if (report.stop_reason == StopReason::MaxSteps && report.steps_executed % cfg.validation_every != 0)
      validate_at(report.steps_executed);
    return {std::move(best), report};
  }
  report.step_of_best = report.steps_executed;
  return {std::move(model), report};
}

}  // namespace detail

/// InfoNCE on hard-negative groups for exactly `max_steps` steps.
inline std::pair<ScorerModel, TrainReport> train_stage1(ScorerModel model,
                                                        const std::vector<TrainingGroup>& groups,
                                                        const Corpus& corpus, TrainConfig cfg) {
  cfg.validate();
  if (cfg.loss != LossKind::InfoNCE) throw ArgumentError("stage 1 trains with the InfoNCE loss");
  if (groups.empty()) throw ArgumentError("stage 1 needs at least one training group");
  std::vector<FeatureList> lists;
  lists.reserve(groups.size());
  for (const auto& g : groups) {
    FeatureList items{&corpus.features(g.query, g.positive)};
    for (const auto& d : g.negatives) items.push_back(&corpus.features(g.query, d));
    lists.push_back(std::move(items));
  }
  auto result = detail::train_loop(std::move(model), lists, cfg, nullptr, "stage1");
  return {std::move(result.model), std::move(result.report)};
}

/// RankNet or ADR-MSE on teacher rankings with nDCG@k early stopping. Returns
/// the best validated checkpoint.
inline std::pair<ScorerModel, TrainReport> train_distill(ScorerModel model, const DistillDataset& ds,
                                                         const ValidationSet& validation, TrainConfig cfg) {
  cfg.validate();
  if (cfg.loss == LossKind::InfoNCE) throw ArgumentError("distillation trains with RankNet or ADR-MSE");
  if (ds.empty()) throw ArgumentError("distillation dataset is empty");
  if (validation.empty()) throw ArgumentError("distillation needs a non-empty validation set");
  std::vector<FeatureList> lists;
  lists.reserve(ds.size());
  for (const auto& rec : ds) {
    FeatureList items;
    for (const auto& f : rec.features) items.push_back(&f);
    if (items.empty()) throw ArgumentError("empty distillation list for " + rec.ranking.query.str());
    lists.push_back(std::move(items));
  }
  auto result = detail::train_loop(std::move(model), lists, cfg, &validation, "distill");
  return {std::move(result.model), std::move(result.report)};
}

struct TwoStageResult {
  ScorerModel model;
  TrainReport stage1;
  TrainReport stage2;
};

inline TwoStageResult train_two_stage(ScorerModel model, const std::vector<TrainingGroup>& groups,
                                      const Corpus& corpus, const DistillDataset& ds,
                                      const ValidationSet& validation, const TrainConfig& stage1_cfg,
                                      const TrainConfig& stage2_cfg) {
  auto [after1, report1] = train_stage1(std::move(model), groups, corpus, stage1_cfg);
  auto [after2, report2] = train_distill(std::move(after1), ds, validation, stage2_cfg);
  return {std::move(after2), std::move(report1), std::move(report2)};
}

}  // namespace rankdistill

#endif  // RANKDISTILL_TRAINER_HPP_
