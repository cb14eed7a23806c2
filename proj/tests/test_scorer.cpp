#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "rankdistill/scorer.hpp"

using namespace rankdistill;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(ScorerModel, ParameterCounts) {
  EXPECT_EQ(ScorerModel::linear(16).parameters().size(), 17u);
  EXPECT_EQ(ScorerModel::mlp(16, 8).parameters().size(), 16u * 8 + 8 + 8 + 1);
  EXPECT_THROW(ScorerModel::linear(0), ArgumentError);
  EXPECT_THROW(ScorerModel::mlp(4, 0), ArgumentError);
}

TEST(Score, LinearExamples) {
  ScorerModel zero = ScorerModel::linear(3);
  EXPECT_EQ(score(zero, std::vector<double>{5.0, -2.0, 9.0}), 0.0);
  ScorerModel m = ScorerModel::linear(2);
  m.set_parameters({1.0, 2.0, 0.5});
  EXPECT_DOUBLE_EQ(score(m, std::vector<double>{1.0, 1.0}), 3.5);
}

TEST(Score, DimensionMismatch) {
  ScorerModel m = ScorerModel::linear(2);
  EXPECT_THROW(score(m, std::vector<double>{1.0}), ArgumentError);
  EXPECT_THROW(score_grad(m, std::vector<double>{1.0, 2.0, 3.0}, 1.0), ArgumentError);
}

TEST(Score, MlpMatchesIndependentForwardPass) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    ScorerModel m = ScorerModel::mlp(6, 4);
    m.initialize(t);
    auto p = m.parameters();
    std::vector<double> params(p.begin(), p.end());
    const auto x = random_vector(rng, 6);
    EXPECT_NEAR(score(m, x), oracle::mlp_forward(params, x, 4), 1e-12);
  }
}

TEST(ScoreGrad, LinearIsUpstreamTimesFeatures) {
  ScorerModel m = ScorerModel::linear(3);
  m.initialize(1);
  const auto g = score_grad(m, std::vector<double>{1.0, -2.0, 0.5}, 3.0);
  EXPECT_EQ(g, (std::vector<double>{3.0, -6.0, 1.5, 3.0}));
  const auto zero = score_grad(m, std::vector<double>{1.0, -2.0, 0.5}, 0.0);
  for (double v : zero) EXPECT_EQ(v, 0.0);
}

TEST(ScoreGrad, MatchesFiniteDifferencesBothArchitectures) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 40; ++t) {
    ScorerModel m = t % 2 ? ScorerModel::mlp(8, 5) : ScorerModel::linear(8);
    m.initialize(100 + t);
    const auto x = random_vector(rng, 8);
    const double upstream = 1.7;
    auto p0 = m.parameters();
    const std::vector<double> base(p0.begin(), p0.end());
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& params) {
          ScorerModel probe = m;
          probe.set_parameters(params);
          return upstream * score(probe, x);
        },
        base);
    EXPECT_LE(oracle::worst_gradient_error(score_grad(m, x, upstream), fd), 1.0) << "trial " << t;
  }
}

TEST(Initialize, SeededAndBounded) {
  ScorerModel a = ScorerModel::mlp(16, 8), b = ScorerModel::mlp(16, 8), c = ScorerModel::mlp(16, 8);
  a.initialize(3);
  b.initialize(3);
  c.initialize(4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const auto p = a.parameters();
  for (std::size_t i = 0; i < 16 * 8 + 8; ++i) EXPECT_LE(std::abs(p[i]), 0.25);
  for (std::size_t i = 16 * 8 + 8; i < p.size(); ++i) EXPECT_LE(std::abs(p[i]), 1.0 / std::sqrt(8.0));
}

TEST(AdamW, ZeroGradientNoDecayIsNoop) {
  ScorerModel m = ScorerModel::linear(4);
  m.initialize(9);
  const ScorerModel before = m;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamWState st(cfg, m.parameters().size());
  const std::vector<double> g(5, 0.0);
  for (int i = 0; i < 10; ++i) adamw_step(m, st, g);
  EXPECT_EQ(m, before);
  EXPECT_EQ(st.step, 10u);
}

TEST(AdamW, FirstStepHandComputed) {
  ScorerModel m = ScorerModel::linear(1);
  AdamWConfig cfg{0.1, 0.9, 0.999, 1e-8, 0.0};
  AdamWState st(cfg, 2);
  adamw_step(m, st, std::vector<double>{1.0, 1.0});
  EXPECT_NEAR(m.parameters()[0], -0.1, 1e-8);
  EXPECT_NEAR(m.parameters()[1], -0.1, 1e-8);
  EXPECT_NEAR(st.first_moment[0], 0.1, 1e-15);
  EXPECT_NEAR(st.second_moment[0], 0.001, 1e-15);
}

TEST(AdamW, WeightDecayShrinksGeometrically) {
  ScorerModel m = ScorerModel::mlp(3, 2);
  m.initialize(2);
  AdamWConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.weight_decay = 0.1;
  AdamWState st(cfg, m.parameters().size());
  const std::vector<double> g(m.parameters().size(), 0.0);
  double prev = norm(m.parameters());
  for (int i = 0; i < 20; ++i) {
    adamw_step(m, st, g);
    const double now = norm(m.parameters());
    EXPECT_NEAR(now / prev, 1.0 - 0.05 * 0.1, 1e-12);
    prev = now;
  }
}

TEST(AdamW, NonFiniteGradientRejectedWithoutSideEffects) {
  ScorerModel m = ScorerModel::linear(2);
  m.initialize(1);
  const ScorerModel before = m;
  AdamWState st(AdamWConfig{}, 3);
  const AdamWState st_before = st;
  EXPECT_THROW(adamw_step(m, st, std::vector<double>{0.1, NAN, 0.0}), DataError);
  EXPECT_THROW(adamw_step(m, st, std::vector<double>{INFINITY, 0.0, 0.0}), DataError);
  EXPECT_EQ(m, before);
  EXPECT_EQ(st, st_before);
  EXPECT_THROW(adamw_step(m, st, std::vector<double>{0.1}), ArgumentError);
}

TEST(AdamW, ConvexQuadraticDecreasesAfterWarmup) {
  // f(theta) = 0.5 * sum_i c_i (theta_i - t_i)^2
  const std::vector<double> c{1.0, 3.0, 0.5, 2.0, 1.5}, target{1.0, -2.0, 0.5, 3.0, -1.0};
  ScorerModel m = ScorerModel::linear(4);
  AdamWConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  AdamWState st(cfg, 5);
  auto f = [&] {
    double v = 0.0;
    for (std::size_t i = 0; i < 5; ++i) v += 0.5 * c[i] * std::pow(m.parameters()[i] - target[i], 2);
    return v;
  };
  const double initial = f();
  double prev = initial;
  for (int step = 0; step < 1000; ++step) {
    std::vector<double> g(5);
    for (std::size_t i = 0; i < 5; ++i) g[i] = c[i] * (m.parameters()[i] - target[i]);
    adamw_step(m, st, g);
    const double now = f();
    if (step >= 50) EXPECT_LE(now, prev + 1e-12) << "step " << step;
    prev = now;
  }
  EXPECT_LT(prev, 1e-3 * initial);
}

TEST(AdamW, Deterministic) {
  auto run = [] {
    ScorerModel m = ScorerModel::mlp(4, 3);
    m.initialize(77);
    AdamWState st(AdamWConfig{}, m.parameters().size());
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) adamw_step(m, st, random_vector(rng, m.parameters().size()));
    return m;
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (bool mlp : {false, true}) {
    ScorerModel m = mlp ? ScorerModel::mlp(5, 3) : ScorerModel::linear(5);
    m.initialize(12);
    std::stringstream ss;
    write_checkpoint(ss, m);
    EXPECT_EQ(read_checkpoint(ss), m);
  }
}

TEST(Checkpoint, RejectsMalformed) {
  std::istringstream bad_magic("nope\n");
  EXPECT_THROW(read_checkpoint(bad_magic), ParseError);
  std::istringstream truncated("rankdistill-checkpoint 1\narchitecture linear\nfeature_dim 2\nhidden 0\nparameters 3\n1\n2\n");
  EXPECT_THROW(read_checkpoint(truncated), ParseError);
  std::istringstream wrong_count("rankdistill-checkpoint 1\narchitecture linear\nfeature_dim 2\nhidden 0\nparameters 4\n");
  EXPECT_THROW(read_checkpoint(wrong_count), ParseError);
  std::istringstream bad_value("rankdistill-checkpoint 1\narchitecture linear\nfeature_dim 1\nhidden 0\nparameters 2\n1\nx\n");
  EXPECT_THROW(read_checkpoint(bad_value), ParseError);
  std::istringstream bad_dim("rankdistill-checkpoint 1\narchitecture linear\nfeature_dim two\nhidden 0\nparameters 3\n");
  EXPECT_THROW(read_checkpoint(bad_dim), ParseError);
}
