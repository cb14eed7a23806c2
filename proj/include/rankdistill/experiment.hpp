#ifndef RANKDISTILL_EXPERIMENT_HPP_
#define RANKDISTILL_EXPERIMENT_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rankdistill/distill_data.hpp"
#include "rankdistill/eval.hpp"
#include "rankdistill/scorer.hpp"
#include "rankdistill/trainer.hpp"
#include "rankdistill/world.hpp"

namespace rankdistill::experiment {

/// Everything needed to generate train/validation/test worlds and train a
/// scorer on them.
struct ExperimentConfig {
  WorldConfig world{};  // world.num_queries is the training query count
  std::size_t validation_queries = 200;
  std::size_t test_queries = 1000;
  std::string distill_retriever = "strong";
  std::string eval_retriever = "strong";
  std::size_t depth = 100;
  SamplingConfig sampling{};
  Architecture architecture = Architecture::Linear;
  std::size_t hidden = 8;
  TrainConfig stage1 = [] {
    TrainConfig c;
    c.loss = LossKind::InfoNCE;
    return c;
  }();
  TrainConfig stage2 = [] {
    TrainConfig c;
    c.loss = LossKind::RankNet;
    return c;
  }();
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
};

/// Training, validation and test splits. Validation and test are scored
/// against the graded dense judgments.
struct Splits {
  World train;
  World validation;
  World test;
  ValidationSet validation_set;
  ValidationSet test_set;
};

inline WorldConfig split_config(const ExperimentConfig& cfg, const std::string& prefix, std::size_t n,
                                std::uint64_t stream) {
  WorldConfig w = cfg.world;
  w.num_queries = n;
  w.id_prefix = prefix;
  w.seed = derive_seed(cfg.seed, 0xe0 + stream);
  return w;
}

inline Splits make_splits(const ExperimentConfig& cfg) {
  Splits s;
  s.train = generate_world(split_config(cfg, "train", cfg.world.num_queries, 0), cfg.jobs);
  s.validation = generate_world(split_config(cfg, "val", cfg.validation_queries, 1), cfg.jobs);
  s.test = generate_world(split_config(cfg, "test", cfg.test_queries, 2), cfg.jobs);
  s.validation_set = build_validation_set(s.validation.run(cfg.eval_retriever), s.validation.corpus,
                                          s.validation.dense_qrels, cfg.depth);
  s.test_set =
      build_validation_set(s.test.run(cfg.eval_retriever), s.test.corpus, s.test.dense_qrels, cfg.depth);
  return s;
}

inline ScorerModel initial_model(const ExperimentConfig& cfg) {
  ScorerModel m = cfg.architecture == Architecture::Linear ? ScorerModel::linear(cfg.world.feature_dim)
                                                            : ScorerModel::mlp(cfg.world.feature_dim, cfg.hidden);
  m.initialize(derive_seed(cfg.seed, 0x1417));
  return m;
}

inline TrainConfig with_seed(TrainConfig c, std::uint64_t seed, std::size_t jobs) {
  c.seed = seed;
  c.jobs = jobs;
  return c;
}

inline DistillDataset teacher_dataset(const ExperimentConfig& cfg, const World& train,
                                      const std::string& retriever) {
  return build_teacher_dataset(train.run(retriever), train.teacher(), train.corpus, cfg.depth);
}

inline std::vector<TrainingGroup> hard_negative_groups(const ExperimentConfig& cfg, const World& train) {
  SamplingConfig s = cfg.sampling;
  s.seed = derive_seed(cfg.seed, 0x5a3);
  return build_hard_negative_groups(train.run(cfg.distill_retriever), train.qrels, s, nullptr).groups;
}

struct Outcome {
  double test_ndcg = 0.0;
  double validation_ndcg = 0.0;
  ScorerModel model;
  std::vector<TrainReport> reports;
};

inline Outcome finish(const ExperimentConfig& cfg, const Splits& s, ScorerModel model,
                      std::vector<TrainReport> reports) {
  Outcome o;
  o.validation_ndcg = mean_ndcg(model, s.validation_set, cfg.stage2.eval_cutoff, cfg.jobs);
  o.test_ndcg = mean_ndcg(model, s.test_set, cfg.stage2.eval_cutoff, cfg.jobs);
  o.model = std::move(model);
  o.reports = std::move(reports);
  return o;
}

inline Outcome run_stage1_only(const ExperimentConfig& cfg, const Splits& s) {
  auto [m, r] = train_stage1(initial_model(cfg), hard_negative_groups(cfg, s.train), s.train.corpus,
                             with_seed(cfg.stage1, derive_seed(cfg.seed, 1), cfg.jobs));
  return finish(cfg, s, std::move(m), {r});
}

inline Outcome run_distill(const ExperimentConfig& cfg, const Splits& s, const DistillDataset& ds,
                           ScorerModel init) {
  auto [m, r] = train_distill(std::move(init), ds, s.validation_set,
                              with_seed(cfg.stage2, derive_seed(cfg.seed, 2), cfg.jobs));
  return finish(cfg, s, std::move(m), {r});
}

inline Outcome run_distill(const ExperimentConfig& cfg, const Splits& s, const DistillDataset& ds) {
  return run_distill(cfg, s, ds, initial_model(cfg));
}

inline Outcome run_two_stage(const ExperimentConfig& cfg, const Splits& s, const DistillDataset& ds) {
  auto r = train_two_stage(initial_model(cfg), hard_negative_groups(cfg, s.train), s.train.corpus, ds,
                           s.validation_set, with_seed(cfg.stage1, derive_seed(cfg.seed, 1), cfg.jobs),
                           with_seed(cfg.stage2, derive_seed(cfg.seed, 2), cfg.jobs));
  return finish(cfg, s, std::move(r.model), {r.stage1, r.stage2});
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

struct AblationCell {
  std::size_t depth = 0;
  double query_fraction = 1.0;
  std::size_t queries = 0;
  double validation_ndcg = 0.0;
  double test_ndcg = 0.0;
};

/// Distills from every (depth, query-fraction) subsample of one teacher
/// dataset of depth cfg.depth. Depths equal to cfg.depth use the full lists.
inline std::vector<AblationCell> ablation_grid(const ExperimentConfig& cfg, const Splits& s,
                                               const std::vector<std::size_t>& depths,
                                               const std::vector<double>& fractions) {
  const DistillDataset full = teacher_dataset(cfg, s.train, cfg.distill_retriever);
  std::vector<AblationCell> cells;
  for (double fraction : fractions) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("query fraction must be in (0, 1]");
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(full.size()))));
    const DistillDataset queries = subsample_queries(full, count, cfg.seed);
    for (std::size_t depth : depths) {
      if (depth > cfg.depth) throw ArgumentError("ablation depth exceeds the dataset depth");
      const DistillDataset ds = depth == cfg.depth ? queries : subsample_depth(queries, depth);
      const Outcome o = run_distill(cfg, s, ds);
      cells.push_back({depth, fraction, count, o.validation_ndcg, o.test_ndcg});
    }
  }
  return cells;
}

/// True if the sequence is non-decreasing (within `tol`) up to its maximum
/// and non-increasing (within `tol`) after it.
inline bool rises_then_flat_or_declines(const std::vector<double>& values, double tol) {
  if (values.empty()) return false;
  const auto peak = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  for (std::size_t i = 0; i < peak; ++i)
    if (values[i] > values[i + 1] + tol) return false;
  for (std::size_t i = peak; i + 1 < values.size(); ++i)
    if (values[i + 1] > values[i] + tol) return false;
  return true;
}

}  // namespace rankdistill::experiment

#endif  // RANKDISTILL_EXPERIMENT_HPP_
