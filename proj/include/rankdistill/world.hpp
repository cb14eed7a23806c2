#ifndef RANKDISTILL_WORLD_HPP_
#define RANKDISTILL_WORLD_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rankdistill/core.hpp"
#include "rankdistill/parallel.hpp"

namespace rankdistill {

/// A named first-stage retriever: ranks a pool by true relevance plus
/// Gaussian noise of the given standard deviation.
struct RetrieverSpec {
  std::string name;
  double noise = 0.0;
  friend bool operator==(const RetrieverSpec&, const RetrieverSpec&) = default;
};

/// Synthetic retrieval world.
///
/// Every query owns a pool of `pool_size` candidate passages. Query and
/// passage carry latent vectors of dimension `feature_dim - 2`; true relevance
/// is their dot product (scaled to unit variance). The scorer never sees the
/// latents, only a feature vector per (query, passage):
///
///   [0, L)   element-wise latent products plus observation noise whose
///            summed variance is `feature_noise`^2
///   L        a saturating match feature,
///            tanh(match_sharpness * (relevance - match_center)) plus
///            `match_noise`; informative across a whole pool but flat among
///            the most relevant passages
///   L + 1    pure noise
///
/// Qrels mark the truly most relevant passage of each pool. With
/// `qrels_noise` > 0 the judged passage is, with that probability, replaced
/// by another passage from the pool's true top `qrels_noise_depth`.
struct WorldConfig {
  std::size_t num_queries = 10000;
  std::size_t pool_size = 200;
  std::size_t feature_dim = 16;
  std::vector<RetrieverSpec> retrievers{{"strong", 0.1}, {"weak", 2.0}};
  double teacher_noise = 0.05;
  /// Extra teacher noise per first-stage rank position below the top.
  double teacher_noise_per_rank = 0.0;
  double feature_noise = 0.5;
  double match_noise = 0.5;
  double match_sharpness = 3.0;
  double match_center = -0.5;
  double qrels_noise = 0.0;
  std::size_t qrels_noise_depth = 10;
  /// Depth of the graded held-out judgments (grade 3 for the best passage,
  /// 2 for true ranks 2-3, 1 below that).
  std::size_t dense_judgment_depth = 10;
  std::string id_prefix = "q";
  std::uint64_t seed = 42;

  void validate() const {
    if (num_queries == 0) throw ArgumentError("num_queries must be >= 1");
    if (pool_size == 0) throw ArgumentError("pool_size must be >= 1");
    if (feature_dim < 3) throw ArgumentError("feature_dim must be >= 3");
    if (retrievers.empty()) throw ArgumentError("at least one retriever is required");
    for (std::size_t i = 0; i < retrievers.size(); ++i) {
      const auto& r = retrievers[i];
      if (r.name.empty() || r.name.find_first_of(" \t\n./") != std::string::npos)
        throw ArgumentError("retriever name must be a non-empty token without '/', '.' or spaces");
      if (!(r.noise >= 0.0) || !std::isfinite(r.noise))
        throw ArgumentError("retriever noise must be >= 0");
      for (std::size_t j = 0; j < i; ++j)
        if (retrievers[j].name == r.name) throw ArgumentError("duplicate retriever " + r.name);
    }
    auto non_negative = [](double v, const char* what) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError(std::string(what) + " must be >= 0");
    };
    non_negative(teacher_noise, "teacher_noise");
    non_negative(teacher_noise_per_rank, "teacher_noise_per_rank");
    non_negative(feature_noise, "feature_noise");
    non_negative(match_noise, "match_noise");
    if (!std::isfinite(match_sharpness) || !std::isfinite(match_center))
      throw ArgumentError("match_sharpness and match_center must be finite");
    if (!(qrels_noise >= 0.0 && qrels_noise <= 1.0)) throw ArgumentError("qrels_noise must be in [0, 1]");
    if (qrels_noise > 0.0 && (qrels_noise_depth < 2 || qrels_noise_depth > pool_size))
      throw ArgumentError("qrels_noise_depth must be in [2, pool_size]");
    if (dense_judgment_depth < 1 || dense_judgment_depth > pool_size)
      throw ArgumentError("dense_judgment_depth must be in [1, pool_size]");
    (void)QueryId(id_prefix);
  }

  std::size_t latent_dim() const { return feature_dim - 2; }
};

struct QueryPool {
  QueryId id;
  std::vector<DocId> docs;  // sorted ascending
  std::vector<FeatureVector> features;
  std::vector<double> relevance;

  /// Index of `doc` in this pool, or npos.
  std::size_t find(const DocId& doc) const {
    auto it = std::lower_bound(docs.begin(), docs.end(), doc);
    return (it != docs.end() && *it == doc) ? static_cast<std::size_t>(it - docs.begin())
                                            : static_cast<std::size_t>(-1);
  }
};

/// All query pools of a world, indexed by query id.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<QueryPool> pools) : pools_(std::move(pools)) { reindex(); }

  const std::vector<QueryPool>& pools() const noexcept { return pools_; }
  std::size_t size() const noexcept { return pools_.size(); }

  const QueryPool* find(const QueryId& q) const {
    auto it = std::lower_bound(index_.begin(), index_.end(), q,
                               [](const auto& e, const QueryId& k) { return e.first < k; });
    return (it != index_.end() && it->first == q) ? &pools_[it->second] : nullptr;
  }

  const QueryPool& pool(const QueryId& q) const {
    const QueryPool* p = find(q);
    if (!p) throw DataError("query " + q.str() + " not in corpus");
    return *p;
  }

  const FeatureVector& features(const QueryId& q, const DocId& d) const {
    const QueryPool& p = pool(q);
    const std::size_t i = p.find(d);
    if (i == static_cast<std::size_t>(-1))
      throw DataError("doc " + d.str() + " not in pool of query " + q.str());
    return p.features[i];
  }

  void merge(const Corpus& other) {
    pools_.insert(pools_.end(), other.pools_.begin(), other.pools_.end());
    reindex();
  }

 private:
  void reindex() {
    index_.clear();
    index_.reserve(pools_.size());
    for (std::size_t i = 0; i < pools_.size(); ++i) index_.emplace_back(pools_[i].id, i);
    std::sort(index_.begin(), index_.end());
    for (std::size_t i = 1; i < index_.size(); ++i)
      if (index_[i].first == index_[i - 1].first)
        throw DataError("duplicate query " + index_[i].first.str() + " in corpus");
  }

  std::vector<QueryPool> pools_;
  std::vector<std::pair<QueryId, std::size_t>> index_;
};

/// Reorders a list of a query's passages; returns them best first.
using Teacher = std::function<std::vector<DocId>(const QueryId&, std::span<const DocId>)>;

namespace detail {
/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string padded(std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu", width, value);
  return buf;
}

inline int digits(std::size_t n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

enum Stream : std::uint64_t {
  kStreamPool = 1,
  kStreamRetriever = 2,
  kStreamTeacher = 3,
  kStreamQrels = 4,
  kStreamSampling = 5,
  kStreamShuffle = 6,
};
}  // namespace detail

/// Ranks any subset of a pool by relevance + N(0, sigma(r)), where r is the
/// 1-based position in the list handed to it (first-stage order) and
/// sigma(r) = teacher_noise + teacher_noise_per_rank * (r - 1).
class TeacherOracle {
 public:
  TeacherOracle(const Corpus& corpus, double noise, double noise_per_rank, std::uint64_t seed)
      : corpus_(&corpus), noise_(noise), noise_per_rank_(noise_per_rank), seed_(seed) {}

  std::vector<DocId> operator()(const QueryId& q, std::span<const DocId> docs) const {
    const QueryPool& pool = corpus_->pool(q);
    std::mt19937_64 rng(derive_seed(seed_, detail::kStreamTeacher, detail::stable_hash(q.str())));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::pair<double, std::size_t>> keyed(docs.size());
    for (std::size_t r = 0; r < docs.size(); ++r) {
      const std::size_t i = pool.find(docs[r]);
      if (i == static_cast<std::size_t>(-1))
        throw DataError("teacher: doc " + docs[r].str() + " not in pool of " + q.str());
      const double sigma = noise_ + noise_per_rank_ * static_cast<double>(r);
      keyed[r] = {pool.relevance[i] + sigma * gauss(rng), r};
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<DocId> out;
    out.reserve(docs.size());
    for (const auto& [_, r] : keyed) out.push_back(docs[r]);
    return out;
  }

 private:
  const Corpus* corpus_;
  double noise_;
  double noise_per_rank_;
  std::uint64_t seed_;
};

struct World {
  WorldConfig config;
  Corpus corpus;
  /// Training labels: possibly noisy single positives.
  Qrels qrels;
  /// The truly most relevant passage per query, grade 1.
  Qrels true_qrels;
  /// Graded judgments of each pool's true top `dense_judgment_depth`.
  Qrels dense_qrels;
  std::map<std::string, Run> runs;

  TeacherOracle teacher() const {
    return TeacherOracle(corpus, config.teacher_noise, config.teacher_noise_per_rank, config.seed);
  }

  const Run& run(const std::string& retriever) const {
    auto it = runs.find(retriever);
    if (it == runs.end()) throw ArgumentError("unknown retriever '" + retriever + "'");
    return it->second;
  }
};

namespace detail {

struct GeneratedQuery {
  QueryPool pool;
  std::vector<ScoredList> runs;
  DocId judged;
  std::vector<DocId> by_relevance;
};

inline int dense_grade(std::size_t true_rank) { return true_rank == 1 ? 3 : true_rank <= 3 ? 2 : 1; }

inline GeneratedQuery generate_query(const WorldConfig& cfg, std::size_t index, int id_width) {
  const std::size_t latent = cfg.latent_dim();
  const std::uint64_t qseed = derive_seed(cfg.seed, stable_hash(cfg.id_prefix), index);
  std::mt19937_64 rng(derive_seed(qseed, kStreamPool));
  std::normal_distribution<double> gauss(0.0, 1.0);

  GeneratedQuery g;
  g.pool.id = QueryId(cfg.id_prefix + padded(index, id_width));
  const double scale = std::pow(static_cast<double>(latent), -0.25);
  std::vector<double> qvec(latent);
  for (auto& v : qvec) v = scale * gauss(rng);

  const int doc_width = digits(cfg.pool_size - 1);
  const double obs_sigma = cfg.feature_noise / std::sqrt(static_cast<double>(latent));
  g.pool.docs.reserve(cfg.pool_size);
  g.pool.features.reserve(cfg.pool_size);
  g.pool.relevance.reserve(cfg.pool_size);
  std::vector<double> dvec(latent), x(cfg.feature_dim);
  for (std::size_t j = 0; j < cfg.pool_size; ++j) {
    for (auto& v : dvec) v = scale * gauss(rng);
    double rel = 0.0;
    for (std::size_t k = 0; k < latent; ++k) {
      const double prod = qvec[k] * dvec[k];
      rel += prod;
      x[k] = prod + obs_sigma * gauss(rng);
    }
    x[latent] = std::tanh(cfg.match_sharpness * (rel - cfg.match_center)) + cfg.match_noise * gauss(rng);
    x[latent + 1] = gauss(rng);
    g.pool.docs.emplace_back(g.pool.id.str() + "-d" + padded(j, doc_width));
    g.pool.features.emplace_back(x);
    g.pool.relevance.push_back(rel);
  }

  const std::size_t n = cfg.pool_size;
  std::vector<std::size_t> by_rel(n);
  std::iota(by_rel.begin(), by_rel.end(), 0);
  std::stable_sort(by_rel.begin(), by_rel.end(), [&](std::size_t a, std::size_t b) {
    return g.pool.relevance[a] > g.pool.relevance[b];
  });
  for (std::size_t r = 0; r < cfg.dense_judgment_depth; ++r) g.by_relevance.push_back(g.pool.docs[by_rel[r]]);
  g.judged = g.by_relevance.front();
  if (cfg.qrels_noise > 0.0) {
    std::mt19937_64 qrng(derive_seed(qseed, kStreamQrels));
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(qrng) < cfg.qrels_noise) {
      std::uniform_int_distribution<std::size_t> pick(1, cfg.qrels_noise_depth - 1);
      g.judged = g.pool.docs[by_rel[pick(qrng)]];
    }
  }

  for (std::size_t r = 0; r < cfg.retrievers.size(); ++r) {
    std::mt19937_64 rrng(derive_seed(qseed, kStreamRetriever, r));
    ScoredList list{g.pool.id, {}};
    list.entries.reserve(n);
    for (std::size_t j = 0; j < n; ++j)
      list.entries.push_back({g.pool.docs[j], g.pool.relevance[j] + cfg.retrievers[r].noise * gauss(rrng)});
    list.sort();
    g.runs.push_back(std::move(list));
  }
  return g;
}

}  // namespace detail

/// Builds a world; query i's randomness depends only on (seed, id_prefix, i),
/// so the result is independent of `jobs`.
inline World generate_world(const WorldConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  const int width = std::max(5, detail::digits(cfg.num_queries - 1));
  std::vector<detail::GeneratedQuery> generated(cfg.num_queries);
  parallel_for(cfg.num_queries, jobs,
               [&](std::size_t i) { generated[i] = detail::generate_query(cfg, i, width); });

  World world;
  world.config = cfg;
  std::vector<QueryPool> pools;
  pools.reserve(cfg.num_queries);
  for (auto& g : generated) {
    world.qrels.set(g.pool.id, g.judged, 1);
    world.true_qrels.set(g.pool.id, g.by_relevance.front(), 1);
    for (std::size_t r = 0; r < g.by_relevance.size(); ++r)
      world.dense_qrels.set(g.pool.id, g.by_relevance[r], detail::dense_grade(r + 1));
    for (std::size_t r = 0; r < cfg.retrievers.size(); ++r)
      world.runs[cfg.retrievers[r].name].emplace(g.pool.id, std::move(g.runs[r]));
    pools.push_back(std::move(g.pool));
  }
  world.corpus = Corpus(std::move(pools));
  return world;
}

}  // namespace rankdistill

#endif  // RANKDISTILL_WORLD_HPP_
