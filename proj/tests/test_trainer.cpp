#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rankdistill/trainer.hpp"

using namespace rankdistill;

namespace {

WorldConfig world_config(std::size_t queries, const std::string& prefix, std::uint64_t seed) {
  WorldConfig c;
  c.num_queries = queries;
  c.pool_size = 120;
  c.id_prefix = prefix;
  c.seed = seed;
  return c;
}

TrainConfig distill_config(LossKind loss, std::size_t steps) {
  TrainConfig c;
  c.loss = loss;
  c.max_steps = steps;
  c.batch_size = 16;
  c.patience_steps = 1000;
  c.validation_every = 25;
  c.seed = 3;
  return c;
}

std::vector<TrainingGroup> groups_of(const World& w) {
  return build_hard_negative_groups(w.run("strong"), w.qrels, {100, 7, 1}, nullptr).groups;
}

double mean_infonce(const ScorerModel& m, const std::vector<TrainingGroup>& groups, const Corpus& corpus) {
  double total = 0.0;
  for (const auto& g : groups) {
    std::vector<double> s{score(m, corpus.features(g.query, g.positive))};
    for (const auto& d : g.negatives) s.push_back(score(m, corpus.features(g.query, d)));
    total += losses::infonce(s, 0).value;
  }
  return total / static_cast<double>(groups.size());
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.patience_steps = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  EXPECT_EQ(parse_loss("adr-mse"), LossKind::AdrMse);
  EXPECT_THROW(parse_loss("listnet"), ArgumentError);
}

TEST(BatchStream, EpochsCoverEveryItemOnce) {
  BatchStream s(10, 5, 1);
  std::vector<int> seen(10, 0);
  for (int b = 0; b < 2; ++b)
    for (auto i : s.next()) seen[i]++;
  for (int c : seen) EXPECT_EQ(c, 1);
  BatchStream small(3, 8, 1);
  EXPECT_EQ(small.next().size(), 3u);
  EXPECT_THROW(BatchStream(0, 4, 1), ArgumentError);
}

TEST(BatchLoss, EqualsMeanOfPerListLosses) {
  const World w = generate_world(world_config(20, "q", 2));
  const auto ds = build_teacher_dataset(w.run("strong"), w.teacher(), w.corpus, 30);
  ScorerModel m = ScorerModel::mlp(16, 4);
  m.initialize(8);
  std::vector<FeatureList> lists;
  for (const auto& rec : ds) {
    FeatureList items;
    for (const auto& f : rec.features) items.push_back(&f);
    lists.push_back(items);
  }
  const std::vector<std::size_t> batch{0, 3, 7, 7, 11};
  for (LossKind kind : {LossKind::RankNet, LossKind::AdrMse, LossKind::InfoNCE}) {
    std::vector<double> grad;
    const double got = batch_loss(m, lists, batch, kind, 1.0, grad);
    double expected = 0.0;
    for (auto i : batch) {
      std::vector<double> s;
      for (const auto* f : lists[i]) s.push_back(score(m, *f));
      expected += list_loss(s, kind, 1.0).value;
    }
    EXPECT_NEAR(got, expected / batch.size(), 1e-12);

    auto p = m.parameters();
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& params) {
          ScorerModel probe = m;
          probe.set_parameters(params);
          std::vector<double> unused;
          return batch_loss(probe, lists, batch, kind, 1.0, unused);
        },
        std::vector<double>(p.begin(), p.end()));
    EXPECT_LE(oracle::worst_gradient_error(grad, fd), 1.0) << to_string(kind);
  }
}

TEST(Stage1, ZeroStepsLeavesModelUnchanged) {
  const World w = generate_world(world_config(20, "q", 1));
  ScorerModel m = ScorerModel::linear(16);
  m.initialize(1);
  TrainConfig cfg;
  cfg.max_steps = 0;
  auto [out, report] = train_stage1(m, groups_of(w), w.corpus, cfg);
  EXPECT_EQ(out, m);
  EXPECT_EQ(report.steps_executed, 0u);
  EXPECT_TRUE(report.loss_curve.empty());
}

TEST(Stage1, RejectsBadInput) {
  const World w = generate_world(world_config(5, "q", 1));
  TrainConfig cfg;
  EXPECT_THROW(train_stage1(ScorerModel::linear(16), {}, w.corpus, cfg), ArgumentError);
  cfg.loss = LossKind::RankNet;
  EXPECT_THROW(train_stage1(ScorerModel::linear(16), groups_of(w), w.corpus, cfg), ArgumentError);
}

TEST(Stage1, ReducesLossOnSeparableWorld) {
  WorldConfig c = world_config(500, "q", 4);
  c.retrievers = {{"strong", 0.0}};
  const World w = generate_world(c);
  const auto groups = groups_of(w);
  ScorerModel m = ScorerModel::linear(16);
  m.initialize(2);
  TrainConfig cfg;
  cfg.max_steps = 300;
  const double before = mean_infonce(m, groups, w.corpus);
  auto [out, report] = train_stage1(m, groups, w.corpus, cfg);
  EXPECT_LT(mean_infonce(out, groups, w.corpus), before);
  EXPECT_EQ(report.steps_executed, 300u);
  EXPECT_EQ(report.stop_reason, StopReason::MaxSteps);
  ASSERT_EQ(report.loss_curve.size(), 300u);
  for (std::size_t i = 0; i < 300; ++i) {
    EXPECT_EQ(report.loss_curve[i].first, i + 1);
    EXPECT_TRUE(std::isfinite(report.loss_curve[i].second));
  }
}

TEST(Stage1, DeterministicUnderSeed) {
  const World w = generate_world(world_config(60, "q", 5));
  TrainConfig cfg;
  cfg.max_steps = 50;
  cfg.seed = 9;
  ScorerModel m = ScorerModel::mlp(16, 4);
  m.initialize(1);
  const auto a = train_stage1(m, groups_of(w), w.corpus, cfg);
  const auto b = train_stage1(m, groups_of(w), w.corpus, cfg);
  EXPECT_EQ(a.first, b.first);
  cfg.seed = 10;
  EXPECT_NE(train_stage1(m, groups_of(w), w.corpus, cfg).first, a.first);
}

TEST(Training, ZeroLearningRateLeavesParameters) {
  const World w = generate_world(world_config(20, "q", 1));
  ScorerModel m = ScorerModel::linear(16);
  m.initialize(4);
  TrainConfig cfg;
  cfg.max_steps = 5;
  cfg.optimizer.learning_rate = 0.0;
  EXPECT_EQ(train_stage1(m, groups_of(w), w.corpus, cfg).first, m);
}

TEST(Distill, EarlyStopBoundaryWithConstantValidation) {
  const World w = generate_world(world_config(10, "q", 1));
  const auto ds = build_teacher_dataset(w.run("strong"), w.teacher(), w.corpus, 20);
  // No judgments: every validation check scores exactly 0.
  const ValidationSet vs = build_validation_set(w.run("strong"), w.corpus, Qrels{}, 20);
  ScorerModel m = ScorerModel::linear(16);
  m.initialize(1);
  TrainConfig cfg = distill_config(LossKind::RankNet, 100);
  cfg.patience_steps = 1;
  cfg.validation_every = 1;
  auto [out, report] = train_distill(m, ds, vs, cfg);
  EXPECT_EQ(report.stop_reason, StopReason::EarlyStopped);
  EXPECT_EQ(report.steps_executed, 1u);
  EXPECT_EQ(report.step_of_best, 0u);
  EXPECT_EQ(report.validation_curve.size(), 2u);
  EXPECT_EQ(out, m);
}

TEST(Distill, RejectsBadInput) {
  const World w = generate_world(world_config(5, "q", 1));
  const auto ds = build_teacher_dataset(w.run("strong"), w.teacher(), w.corpus, 20);
  const ValidationSet vs = build_validation_set(w.run("strong"), w.corpus, w.dense_qrels, 20);
  EXPECT_THROW(train_distill(ScorerModel::linear(16), ds, vs, distill_config(LossKind::InfoNCE, 5)),
               ArgumentError);
  EXPECT_THROW(train_distill(ScorerModel::linear(16), {}, vs, distill_config(LossKind::RankNet, 5)),
               ArgumentError);
  EXPECT_THROW(train_distill(ScorerModel::linear(16), ds, ValidationSet{}, distill_config(LossKind::RankNet, 5)),
               ArgumentError);
}

TEST(Distill, ReturnsBestCheckpoint) {
  const World train = generate_world(world_config(100, "t", 1));
  const World val = generate_world(world_config(40, "v", 2));
  const auto ds = build_teacher_dataset(train.run("weak"), train.teacher(), train.corpus, 50);
  const ValidationSet vs = build_validation_set(val.run("weak"), val.corpus, val.dense_qrels, 50);
  ScorerModel m = ScorerModel::linear(16);
  m.initialize(5);
  TrainConfig cfg = distill_config(LossKind::RankNet, 400);
  cfg.validation_every = 10;
  cfg.patience_steps = 60;
  auto [out, report] = train_distill(m, ds, vs, cfg);
  EXPECT_LE(report.step_of_best, report.steps_executed);
  EXPECT_EQ(report.loss_curve.size(), report.steps_executed);
  double best = -1.0;
  for (const auto& [step, v] : report.validation_curve) best = std::max(best, v);
  EXPECT_EQ(report.best_validation_ndcg10, best);
  EXPECT_EQ(mean_ndcg(out, vs), report.best_validation_ndcg10);
  if (report.stop_reason == StopReason::EarlyStopped)
    EXPECT_GE(report.steps_executed - report.step_of_best, cfg.patience_steps);
}

TEST(Distill, CleanTeacherConvergesToHighKendallTau) {
  auto cfg_for = [](std::size_t n, const std::string& prefix, std::uint64_t seed) {
    WorldConfig c = world_config(n, prefix, seed);
    c.teacher_noise = 0.0;
    c.feature_noise = 0.05;
    return c;
  };
  const World train = generate_world(cfg_for(200, "t", 11));
  const World val = generate_world(cfg_for(40, "v", 12));
  const World test = generate_world(cfg_for(40, "h", 13));
  const auto ds = build_teacher_dataset(train.run("strong"), train.teacher(), train.corpus, 50);
  const ValidationSet vs = build_validation_set(val.run("strong"), val.corpus, val.dense_qrels, 50);
  const auto held_out = build_teacher_dataset(test.run("strong"), test.teacher(), test.corpus, 50);

  for (LossKind kind : {LossKind::RankNet, LossKind::AdrMse}) {
    ScorerModel m = ScorerModel::linear(16);
    m.initialize(3);
    TrainConfig cfg = distill_config(kind, 1500);
    cfg.patience_steps = 300;
    auto [out, report] = train_distill(m, ds, vs, cfg);
    double tau = 0.0;
    for (const auto& rec : held_out) {
      ValidationQuery q{rec.ranking.query, rec.ranking.docs, rec.features};
      std::vector<DocId> predicted;
      for (const auto& e : rerank(out, q).entries) predicted.push_back(e.doc);
      tau += oracle::kendall_tau(predicted, rec.ranking.docs);
    }
    tau /= static_cast<double>(held_out.size());
    EXPECT_GT(tau, 0.9) << to_string(kind);
  }
}

TEST(TwoStage, ZeroStage2StepsEqualsStage1) {
  const World w = generate_world(world_config(40, "q", 6));
  const auto ds = build_teacher_dataset(w.run("strong"), w.teacher(), w.corpus, 20);
  const ValidationSet vs = build_validation_set(w.run("strong"), w.corpus, w.dense_qrels, 20);
  ScorerModel m = ScorerModel::linear(16);
  m.initialize(2);
  TrainConfig s1;
  s1.max_steps = 40;
  TrainConfig s2 = distill_config(LossKind::RankNet, 0);
  const auto two = train_two_stage(m, groups_of(w), w.corpus, ds, vs, s1, s2);
  const auto one = train_stage1(m, groups_of(w), w.corpus, s1);
  EXPECT_EQ(two.model, one.first);
  EXPECT_EQ(two.stage1.steps_executed, 40u);
  EXPECT_EQ(two.stage2.steps_executed, 0u);

  const auto again = train_two_stage(m, groups_of(w), w.corpus, ds, vs, s1, distill_config(LossKind::AdrMse, 30));
  const auto again2 = train_two_stage(m, groups_of(w), w.corpus, ds, vs, s1, distill_config(LossKind::AdrMse, 30));
  EXPECT_EQ(again.model, again2.model);
}

TEST(MetricsLog, OneLinePerStepAndCheck) {
  TrainReport r;
  r.loss_curve = {{1, 0.5}, {2, 0.4}, {3, 0.3}};
  r.validation_curve = {{0, 0.1}, {2, 0.2}, {3, 0.25}};
  std::ostringstream out;
  write_metrics_log(out, r, "distill");
  std::istringstream in(out.str());
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0]["step"], 0);
  EXPECT_TRUE(rows[0].contains("val_ndcg10"));
  EXPECT_EQ(rows[1]["loss"], 0.5);
  EXPECT_EQ(rows[3]["step"], 2);
  EXPECT_TRUE(rows[3].contains("val_ndcg10"));
  for (const auto& row : rows) EXPECT_EQ(row["stage"], "distill");
}
