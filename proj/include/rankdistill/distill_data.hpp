#ifndef RANKDISTILL_DISTILL_DATA_HPP_
#define RANKDISTILL_DISTILL_DATA_HPP_

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rankdistill/core.hpp"
#include "rankdistill/world.hpp"

namespace rankdistill {

struct SamplingConfig {
  std::size_t pool_depth = 200;
  std::size_t num_negatives = 7;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_negatives == 0) throw ArgumentError("num_negatives must be >= 1");
    if (pool_depth < num_negatives + 1) throw ArgumentError("pool_depth must be >= num_negatives + 1");
  }
};

struct GroupBuildResult {
  std::vector<TrainingGroup> groups;
  std::size_t skipped_no_positive = 0;
  std::size_t skipped_shallow = 0;
  std::size_t skipped_small_pool = 0;

  std::size_t skipped() const { return skipped_no_positive + skipped_shallow + skipped_small_pool; }
};

/// Picks `count` distinct indices from [0, n) uniformly (partial Fisher-Yates).
template <typename Rng>
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  if (count > n) throw ArgumentError("cannot sample more items than available");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

/// One positive (the highest-graded judged passage) plus `num_negatives`
/// passages drawn uniformly from the run's top `pool_depth`, never a judged
/// positive. Each query's draw depends only on (seed, query id).
inline GroupBuildResult build_hard_negative_groups(const Run& run, const Qrels& qrels,
                                                   const SamplingConfig& cfg,
                                                   const WarningSink& warn = warn_to_stderr) {
  cfg.validate();
  GroupBuildResult out;
  for (const auto& [qid, list] : run) {
    const auto& judged = qrels.judged(qid);
    const DocId* positive = nullptr;
    int best_grade = 0;
    for (const auto& [doc, grade] : judged) {
      if (grade > best_grade) {
        best_grade = grade;
        positive = &doc;
      }
    }
    if (!positive) {
      ++out.skipped_no_positive;
      continue;
    }
    if (list.size() < cfg.pool_depth) {
      ++out.skipped_shallow;
      if (warn)
        warn("query " + qid.str() + ": run depth " + std::to_string(list.size()) + " < pool depth " +
             std::to_string(cfg.pool_depth) + ", skipped");
      continue;
    }
    std::vector<const DocId*> eligible;
    eligible.reserve(cfg.pool_depth);
    for (std::size_t r = 0; r < cfg.pool_depth; ++r) {
      const DocId& d = list.entries[r].doc;
      auto it = judged.find(d);
      if (it == judged.end() || it->second == 0) eligible.push_back(&d);
    }
    if (eligible.size() < cfg.num_negatives) {
      ++out.skipped_small_pool;
      if (warn)
        warn("query " + qid.str() + ": only " + std::to_string(eligible.size()) +
             " eligible negatives, skipped");
      continue;
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, detail::kStreamSampling, detail::stable_hash(qid.str())));
    TrainingGroup group{qid, *positive, {}};
    for (std::size_t i : sample_without_replacement(eligible.size(), cfg.num_negatives, rng))
      group.negatives.push_back(*eligible[i]);
    out.groups.push_back(std::move(group));
  }
  if (out.skipped_no_positive > 0 && warn)
    warn(std::to_string(out.skipped_no_positive) + " queries without a judged positive skipped");
  return out;
}

// ---------------------------------------------------------------------------
// Teacher-ranked distillation lists
// ---------------------------------------------------------------------------

/// One query's distillation list; all vectors are in teacher order.
struct DistillRecord {
  TeacherRanking ranking;
  std::vector<FeatureVector> features;
  std::vector<int> first_stage_rank;

  friend bool operator==(const DistillRecord&, const DistillRecord&) = default;
};

using DistillDataset = std::vector<DistillRecord>;

inline void validate(const DistillRecord& r) {
  const std::size_t n = r.ranking.size();
  if (r.features.size() != n || r.first_stage_rank.size() != n)
    throw DataError("record for " + r.ranking.query.str() + " has misaligned fields");
  std::vector<DocId> docs = r.ranking.docs;
  std::sort(docs.begin(), docs.end());
  if (std::adjacent_find(docs.begin(), docs.end()) != docs.end())
    throw DataError("record for " + r.ranking.query.str() + " repeats a doc");
  for (int fs : r.first_stage_rank)
    if (fs < 1 || fs > r.ranking.source_depth)
      throw DataError("record for " + r.ranking.query.str() + " has first-stage rank outside 1.." +
                      std::to_string(r.ranking.source_depth));
}

/// Teacher permutation of each query's top `depth` first-stage passages.
inline DistillDataset build_teacher_dataset(const Run& first_stage, const Teacher& teacher,
                                            const Corpus& corpus, std::size_t depth = 100) {
  if (depth == 0) throw ArgumentError("depth must be >= 1");
  DistillDataset ds;
  ds.reserve(first_stage.size());
  for (const auto& [qid, list] : first_stage) {
    if (list.size() < depth)
      throw ArgumentError("query " + qid.str() + ": run depth " + std::to_string(list.size()) +
                          " < requested depth " + std::to_string(depth));
    std::vector<DocId> pool;
    pool.reserve(depth);
    for (std::size_t r = 0; r < depth; ++r) pool.push_back(list.entries[r].doc);

    std::vector<DocId> ranked = teacher(qid, pool);
    std::vector<DocId> a = pool, b = ranked;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw DataError("teacher returned a non-permutation for query " + qid.str());

    DistillRecord rec;
    rec.ranking = {qid, std::move(ranked), static_cast<int>(depth)};
    rec.features.reserve(depth);
    rec.first_stage_rank.reserve(depth);
    for (const auto& d : rec.ranking.docs) {
      const auto pos = std::find(pool.begin(), pool.end(), d) - pool.begin();
      rec.first_stage_rank.push_back(static_cast<int>(pos) + 1);
      rec.features.push_back(corpus.features(qid, d));
    }
    ds.push_back(std::move(rec));
  }
  return ds;
}

/// Keeps passages whose first-stage rank is within `depth`, preserving the
/// teacher's order among them.
inline DistillDataset subsample_depth(const DistillDataset& ds, std::size_t depth) {
  if (depth == 0) throw ArgumentError("subsample depth must be >= 1");
  DistillDataset out;
  out.reserve(ds.size());
  for (const auto& rec : ds) {
    if (depth >= static_cast<std::size_t>(rec.ranking.source_depth))
      throw ArgumentError("subsample depth " + std::to_string(depth) +
                          " must be smaller than the source depth " +
                          std::to_string(rec.ranking.source_depth));
    DistillRecord kept;
    kept.ranking.query = rec.ranking.query;
    kept.ranking.source_depth = static_cast<int>(depth);
    for (std::size_t i = 0; i < rec.ranking.size(); ++i) {
      if (rec.first_stage_rank[i] <= static_cast<int>(depth)) {
        kept.ranking.docs.push_back(rec.ranking.docs[i]);
        kept.features.push_back(rec.features[i]);
        kept.first_stage_rank.push_back(rec.first_stage_rank[i]);
      }
    }
    out.push_back(std::move(kept));
  }
  return out;
}

/// First `count` records after a seeded shuffle; used for query-count ablations.
inline DistillDataset subsample_queries(const DistillDataset& ds, std::size_t count,
                                        std::uint64_t seed) {
  if (count > ds.size()) throw ArgumentError("cannot keep more queries than the dataset has");
  std::mt19937_64 rng(derive_seed(seed, detail::kStreamSampling, 0x9e37));
  DistillDataset out;
  out.reserve(count);
  for (std::size_t i : sample_without_replacement(ds.size(), count, rng)) out.push_back(ds[i]);
  return out;
}

}  // namespace rankdistill

#endif  // RANKDISTILL_DISTILL_DATA_HPP_
