#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rankdistill/eval.hpp"

using namespace rankdistill;
using namespace rankdistill::eval;

namespace {

ScoredList ranked(const std::string& q, const std::vector<std::string>& docs) {
  ScoredList l{QueryId(q), {}};
  for (std::size_t i = 0; i < docs.size(); ++i) l.entries.push_back({DocId(docs[i]), static_cast<double>(docs.size() - i)});
  return l;
}

}  // namespace

TEST(Ndcg, HandWorkedExample) {
  Qrels q;
  q.set(QueryId("q"), DocId("dA"), 0);
  q.set(QueryId("q"), DocId("dB"), 2);
  q.set(QueryId("q"), DocId("dC"), 1);
  const double got = ndcg_at_k(ranked("q", {"dA", "dB", "dC"}), q, 3);
  const double dcg = 3.0 / std::log2(3.0) + 0.5, idcg = 3.0 + 1.0 / std::log2(3.0);
  EXPECT_NEAR(got, dcg / idcg, 1e-12);
  EXPECT_NEAR(got, 0.6590, 1e-4);
}

TEST(Ndcg, IdealAndDegenerate) {
  Qrels q;
  q.set(QueryId("q"), DocId("a"), 3);
  q.set(QueryId("q"), DocId("b"), 1);
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranked("q", {"a", "b", "c"}), q, 10), 1.0);
  Qrels zeros;
  zeros.set(QueryId("q"), DocId("a"), 0);
  EXPECT_EQ(ndcg_at_k(ranked("q", {"a", "b"}), zeros, 10), 0.0);
  EXPECT_EQ(ndcg_at_k(ranked("q", {"a", "b"}), Qrels{}, 10), 0.0);
  EXPECT_THROW(ndcg_at_k(ranked("q", {"a"}), q, 0), ArgumentError);
}

TEST(Ndcg, UnretrievedRelevantDocsLowerTheScore) {
  Qrels q;
  q.set(QueryId("q"), DocId("a"), 1);
  q.set(QueryId("q"), DocId("z"), 1);
  EXPECT_LT(ndcg_at_k(ranked("q", {"a", "b"}), q, 10), 1.0);
}

TEST(Ndcg, MatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 6), grade(0, 3), extra(0, 2), cutoff(1, 7);
  for (int t = 0; t < 1000; ++t) {
    const int n = size(rng);
    std::vector<std::string> docs;
    std::vector<int> grades;
    Qrels q;
    for (int i = 0; i < n; ++i) {
      docs.push_back("d" + std::to_string(i));
      grades.push_back(grade(rng));
      q.set(QueryId("q"), DocId(docs.back()), grades.back());
    }
    std::vector<int> missing;
    const int m = std::min(extra(rng), 6 - n);
    for (int i = 0; i < m; ++i) {
      missing.push_back(grade(rng));
      q.set(QueryId("q"), DocId("u" + std::to_string(i)), missing.back());
    }
    const std::size_t k = cutoff(rng);
    const double got = ndcg_at_k(ranked("q", docs), q, k);
    EXPECT_NEAR(got, oracle::ndcg_brute_force(grades, missing, k), 1e-12) << "trial " << t;
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0 + 1e-15);
  }
}

TEST(EvaluateRun, MissingQueriesScoreZero) {
  Qrels q;
  q.set(QueryId("q1"), DocId("a"), 1);
  q.set(QueryId("q2"), DocId("a"), 1);
  rankdistill::Run run;
  run[QueryId("q1")] = ranked("q1", {"a"});
  const auto per = evaluate_run(run, q, 10);
  ASSERT_EQ(per.size(), 2u);
  EXPECT_EQ(per.at(QueryId("q1")), 1.0);
  EXPECT_EQ(per.at(QueryId("q2")), 0.0);
}

TEST(Averages, MicroAverage) {
  std::map<std::string, std::vector<double>> by_coll{{"a", {0.7}}, {"b", {0.2, 0.4}}, {"c", {0.4, 0.2}}};
  const auto avg = micro_average(by_coll);
  EXPECT_DOUBLE_EQ(avg.at("a"), 0.7);
  EXPECT_NEAR(avg.at("b"), 0.3, 1e-15);
  EXPECT_EQ(avg.at("b"), avg.at("c"));
  EXPECT_THROW(micro_average({{"x", {}}}), ArgumentError);
}

TEST(Averages, GeometricMean) {
  EXPECT_DOUBLE_EQ(geometric_mean(std::vector<double>{0.42}), 0.42);
  EXPECT_NEAR(geometric_mean(std::vector<double>{0.25, 1.0}), 0.5, 1e-15);
  EXPECT_THROW(geometric_mean(std::vector<double>{}), ArgumentError);
  int warnings = 0;
  const double floored = geometric_mean(std::vector<double>{0.0, 1.0}, [&](const std::string&) { ++warnings; });
  EXPECT_NEAR(floored, 1e-2, 1e-15);
  EXPECT_EQ(warnings, 1);
}

TEST(Averages, GeometricMeanOfPrintedRow) {
  const std::vector<double> row{.593, .375, .209, .295, .692, .010, .507, .305, .541, .399, .306, .522, .458};
  EXPECT_NEAR(geometric_mean(row), 0.309, 0.002);
}

TEST(TTest, HandWorkedDiffs) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b(5, 0.0);
  const auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, 4.242640687119285, 1e-12);
  EXPECT_NEAR(r.p, 0.0132, 1e-4);
  const auto swapped = paired_t_test(b, a);
  EXPECT_DOUBLE_EQ(swapped.t, -r.t);
  EXPECT_DOUBLE_EQ(swapped.p, r.p);
}

TEST(TTest, ZeroVarianceConventions) {
  const std::vector<double> a{0.3, 0.5, 0.9};
  const auto same = paired_t_test(a, a);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_EQ(same.p, 1.0);
  int warnings = 0;
  const std::vector<double> shifted{0.4, 0.6, 1.0};
  const auto shift = paired_t_test(shifted, a, [&](const std::string&) { ++warnings; });
  EXPECT_EQ(shift.p, 0.0);
  EXPECT_EQ(warnings, 1);
  EXPECT_THROW(paired_t_test(a, std::vector<double>{1.0}), ArgumentError);
  EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}), ArgumentError);
}

TEST(TTest, MatchesReferenceDistribution) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> len(2, 60);
  std::uniform_real_distribution<double> effect(-0.8, 0.8);
  for (int t = 0; t < 100; ++t) {
    const int n = len(rng);
    const double shift = effect(rng);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      b[i] = g(rng);
      a[i] = b[i] + shift + g(rng);
    }
    const auto r = paired_t_test(a, b);
    const boost::math::students_t dist(n - 1);
    const double ref = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    EXPECT_NEAR(r.p, ref, 1e-6) << "trial " << t;
  }
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_NEAR(regularized_incomplete_beta(1.0, 1.0, 0.3), 0.3, 1e-14);
  EXPECT_NEAR(regularized_incomplete_beta(2.0, 3.0, 0.4), 0.5248, 1e-12);
  EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0);
  EXPECT_THROW(regularized_incomplete_beta(0.0, 1.0, 0.5), ArgumentError);
  EXPECT_THROW(regularized_incomplete_beta(1.0, 1.0, 1.5), ArgumentError);
}

TEST(Holm, HandWorkedCases) {
  EXPECT_EQ(holm_bonferroni(std::vector<double>{0.01}, 0.05), std::vector<bool>{true});
  EXPECT_EQ(holm_bonferroni(std::vector<double>{0.01, 0.04, 0.03}, 0.05), (std::vector<bool>{true, false, false}));
  EXPECT_EQ(holm_bonferroni(std::vector<double>{0.01, 0.02, 0.03}, 0.05), (std::vector<bool>{true, true, true}));
  EXPECT_TRUE(holm_bonferroni(std::vector<double>{}, 0.05).empty());
  EXPECT_THROW(holm_bonferroni(std::vector<double>{1.5}, 0.05), ArgumentError);
  EXPECT_THROW(holm_bonferroni(std::vector<double>{NAN}, 0.05), ArgumentError);
  EXPECT_THROW(holm_bonferroni(std::vector<double>{0.5}, 0.0), ArgumentError);
}

TEST(Holm, BracketedAndMatchesAdjustedPValues) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> u(0.0, 0.08);
  for (int t = 0; t < 1000; ++t) {
    const int m = size(rng);
    std::vector<double> p(m);
    for (auto& v : p) v = u(rng);
    const auto holm = holm_bonferroni(p, 0.05);
    EXPECT_EQ(holm, oracle::holm_adjusted(p, 0.05));
    for (int i = 0; i < m; ++i) {
      if (p[i] <= 0.05 / m) EXPECT_TRUE(holm[i]);
      if (holm[i]) EXPECT_LE(p[i], 0.05);
    }
    // Retained decisions are a suffix of the ascending order.
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] < p[b]; });
    bool retained = false;
    for (int i : order) {
      if (!holm[i]) retained = true;
      else EXPECT_FALSE(retained);
    }
  }
}

TEST(Holm, LoweringARetainedPNeverFlipsARejection) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 0.1);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> p(6);
    for (auto& v : p) v = u(rng);
    const auto before = holm_bonferroni(p, 0.05);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (before[i]) continue;
      auto lowered = p;
      lowered[i] *= 0.5;
      const auto after = holm_bonferroni(lowered, 0.05);
      for (std::size_t j = 0; j < p.size(); ++j)
        if (before[j]) EXPECT_TRUE(after[j]);
    }
  }
}

TEST(CompareSystems, PerCollectionAndPooled) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.5, 0.1);
  SystemScores base, better, same;
  for (const std::string coll : {"c1", "c2"}) {
    for (int i = 0; i < 40; ++i) {
      QueryId q(coll + "-" + std::to_string(i));
      const double s = g(rng);
      base[coll][q] = s;
      better[coll][q] = s + 0.1 + 0.01 * g(rng);
      same[coll][q] = s + 0.001 * (g(rng) - 0.5);
    }
  }
  const auto report = compare_systems("base", base, {{"better", better}, {"same", same}}, EvalConfig{}, false, nullptr);
  ASSERT_EQ(report.comparisons.size(), 4u);
  for (const auto& c : report.comparisons) {
    EXPECT_EQ(c.test.n, 40u);
    if (c.system == "better") EXPECT_TRUE(c.reject);
  }
  const auto pooled = compare_systems("base", base, {{"better", better}}, EvalConfig{}, true, nullptr);
  ASSERT_EQ(pooled.comparisons.size(), 1u);
  EXPECT_EQ(pooled.comparisons[0].collection, "*");
  EXPECT_EQ(pooled.comparisons[0].test.n, 80u);

  std::ostringstream jl, text;
  report.write_jsonl(jl);
  report.write_text(text);
  std::istringstream in(jl.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("p"));
    EXPECT_TRUE(j.contains("reject"));
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_NE(text.str().find("better"), std::string::npos);

  SystemScores missing = better;
  missing["c1"].erase(missing["c1"].begin());
  EXPECT_THROW(compare_systems("base", base, {{"m", missing}}, EvalConfig{}, false, nullptr), ArgumentError);
}

TEST(PerQueryFile, TabSeparatedWithMean) {
  PerQuery s{{QueryId("q1"), 0.5}, {QueryId("q2"), 1.0}};
  std::ostringstream out;
  write_per_query(out, s, "ndcg_cut_10");
  EXPECT_EQ(out.str(), "q1\tndcg_cut_10\t0.500000\nq2\tndcg_cut_10\t1.000000\nall\tndcg_cut_10\t0.750000\n");
}
