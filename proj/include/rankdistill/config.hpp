#ifndef RANKDISTILL_CONFIG_HPP_
#define RANKDISTILL_CONFIG_HPP_

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "rankdistill/experiment.hpp"

// JSON form of ExperimentConfig. Every key is optional (defaults apply) but
// unknown keys are errors, so a typo never silently falls back to a default.

namespace rankdistill::config {

using json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ArgumentError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ArgumentError("unknown config key '" + where + "." + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ArgumentError("config key '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

inline json to_json(const TrainConfig& c) {
  json j;
  j["loss"] = to_string(c.loss);
  j["batch_size"] = c.batch_size;
  j["max_steps"] = c.max_steps;
  j["alpha"] = c.alpha;
  j["learning_rate"] = c.optimizer.learning_rate;
  j["beta1"] = c.optimizer.beta1;
  j["beta2"] = c.optimizer.beta2;
  j["epsilon"] = c.optimizer.epsilon;
  j["weight_decay"] = c.optimizer.weight_decay;
  j["patience_steps"] = c.patience_steps;
  j["validation_every"] = c.validation_every;
  j["eval_cutoff"] = c.eval_cutoff;
  return j;
}

inline void from_json(const json& j, TrainConfig& c, const std::string& where) {
  detail::reject_unknown(j,
                         {"loss", "batch_size", "max_steps", "alpha", "learning_rate", "beta1", "beta2", "epsilon",
                          "weight_decay", "patience_steps", "validation_every", "eval_cutoff"},
                         where);
  if (j.contains("loss")) {
    std::string name;
    detail::read(j, "loss", name, where);
    c.loss = parse_loss(name);
  }
  detail::read(j, "batch_size", c.batch_size, where);
  detail::read(j, "max_steps", c.max_steps, where);
  detail::read(j, "alpha", c.alpha, where);
  detail::read(j, "learning_rate", c.optimizer.learning_rate, where);
  detail::read(j, "beta1", c.optimizer.beta1, where);
  detail::read(j, "beta2", c.optimizer.beta2, where);
  detail::read(j, "epsilon", c.optimizer.epsilon, where);
  detail::read(j, "weight_decay", c.optimizer.weight_decay, where);
  detail::read(j, "patience_steps", c.patience_steps, where);
  detail::read(j, "validation_every", c.validation_every, where);
  detail::read(j, "eval_cutoff", c.eval_cutoff, where);
}

inline json to_json(const WorldConfig& w) {
  json j;
  j["num_queries"] = w.num_queries;
  j["pool_size"] = w.pool_size;
  j["feature_dim"] = w.feature_dim;
  j["retrievers"] = json::array();
  for (const auto& r : w.retrievers) j["retrievers"].push_back({{"name", r.name}, {"noise", r.noise}});
  j["teacher_noise"] = w.teacher_noise;
  j["teacher_noise_per_rank"] = w.teacher_noise_per_rank;
  j["feature_noise"] = w.feature_noise;
  j["match_noise"] = w.match_noise;
  j["match_sharpness"] = w.match_sharpness;
  j["match_center"] = w.match_center;
  j["qrels_noise"] = w.qrels_noise;
  j["qrels_noise_depth"] = w.qrels_noise_depth;
  j["dense_judgment_depth"] = w.dense_judgment_depth;
  return j;
}

inline void from_json(const json& j, WorldConfig& w) {
  const std::string where = "world";
  detail::reject_unknown(j,
                         {"num_queries", "pool_size", "feature_dim", "retrievers", "teacher_noise",
                          "teacher_noise_per_rank", "feature_noise", "match_noise", "match_sharpness",
                          "match_center", "qrels_noise", "qrels_noise_depth", "dense_judgment_depth"},
                         where);
  detail::read(j, "num_queries", w.num_queries, where);
  detail::read(j, "pool_size", w.pool_size, where);
  detail::read(j, "feature_dim", w.feature_dim, where);
  if (j.contains("retrievers")) {
    if (!j["retrievers"].is_array()) throw ArgumentError("world.retrievers must be an array");
    w.retrievers.clear();
    for (const auto& r : j["retrievers"]) {
      detail::reject_unknown(r, {"name", "noise"}, "world.retrievers[]");
      RetrieverSpec spec;
      detail::read(r, "name", spec.name, "world.retrievers[]");
      detail::read(r, "noise", spec.noise, "world.retrievers[]");
      w.retrievers.push_back(spec);
    }
  }
  detail::read(j, "teacher_noise", w.teacher_noise, where);
  detail::read(j, "teacher_noise_per_rank", w.teacher_noise_per_rank, where);
  detail::read(j, "feature_noise", w.feature_noise, where);
  detail::read(j, "match_noise", w.match_noise, where);
  detail::read(j, "match_sharpness", w.match_sharpness, where);
  detail::read(j, "match_center", w.match_center, where);
  detail::read(j, "qrels_noise", w.qrels_noise, where);
  detail::read(j, "qrels_noise_depth", w.qrels_noise_depth, where);
  detail::read(j, "dense_judgment_depth", w.dense_judgment_depth, where);
}

inline json to_json(const experiment::ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["depth"] = c.depth;
  j["validation_queries"] = c.validation_queries;
  j["test_queries"] = c.test_queries;
  j["distill_retriever"] = c.distill_retriever;
  j["eval_retriever"] = c.eval_retriever;
  j["architecture"] = to_string(c.architecture);
  j["hidden"] = c.hidden;
  j["world"] = to_json(c.world);
  j["sampling"] = {{"pool_depth", c.sampling.pool_depth}, {"num_negatives", c.sampling.num_negatives}};
  j["stage1"] = to_json(c.stage1);
  j["stage2"] = to_json(c.stage2);
  return j;
}

inline experiment::ExperimentConfig from_json(const json& j) {
  experiment::ExperimentConfig c;
  const std::string where = "config";
  detail::reject_unknown(j,
                         {"seed", "jobs", "depth", "validation_queries", "test_queries", "distill_retriever",
                          "eval_retriever", "architecture", "hidden", "world", "sampling", "stage1", "stage2"},
                         where);
  detail::read(j, "seed", c.seed, where);
  detail::read(j, "jobs", c.jobs, where);
  detail::read(j, "depth", c.depth, where);
  detail::read(j, "validation_queries", c.validation_queries, where);
  detail::read(j, "test_queries", c.test_queries, where);
  detail::read(j, "distill_retriever", c.distill_retriever, where);
  detail::read(j, "eval_retriever", c.eval_retriever, where);
  if (j.contains("architecture")) {
    std::string arch;
    detail::read(j, "architecture", arch, where);
    if (arch == "linear") c.architecture = Architecture::Linear;
    else if (arch == "mlp") c.architecture = Architecture::Mlp;
    else throw ArgumentError("config.architecture must be 'linear' or 'mlp'");
  }
  detail::read(j, "hidden", c.hidden, where);
  if (j.contains("world")) from_json(j["world"], c.world);
  if (j.contains("sampling")) {
    detail::reject_unknown(j["sampling"], {"pool_depth", "num_negatives"}, "sampling");
    detail::read(j["sampling"], "pool_depth", c.sampling.pool_depth, "sampling");
    detail::read(j["sampling"], "num_negatives", c.sampling.num_negatives, "sampling");
  }
  if (j.contains("stage1")) from_json(j["stage1"], c.stage1, "stage1");
  if (j.contains("stage2")) from_json(j["stage2"], c.stage2, "stage2");
  return c;
}

/// Checks everything that can be checked before any work starts.
inline void validate(const experiment::ExperimentConfig& c) {
  c.world.validate();
  c.sampling.validate();
  c.stage1.validate();
  c.stage2.validate();
  if (c.validation_queries == 0 || c.test_queries == 0) throw ArgumentError("validation/test query counts must be >= 1");
  if (c.depth == 0 || c.depth > c.world.pool_size) throw ArgumentError("depth must be in [1, pool_size]");
  if (c.sampling.pool_depth > c.world.pool_size) throw ArgumentError("sampling.pool_depth exceeds pool_size");
  if (c.jobs == 0) throw ArgumentError("jobs must be >= 1");
  if (c.architecture == Architecture::Mlp && c.hidden == 0) throw ArgumentError("hidden must be >= 1");
  if (c.stage1.loss != LossKind::InfoNCE) throw ArgumentError("stage1.loss must be infonce");
  if (c.stage2.loss == LossKind::InfoNCE) throw ArgumentError("stage2.loss must be ranknet or adr-mse");
  bool distill_found = false, eval_found = false;
  for (const auto& r : c.world.retrievers) {
    distill_found |= r.name == c.distill_retriever;
    eval_found |= r.name == c.eval_retriever;
  }
  if (!distill_found || !eval_found) throw ArgumentError("distill/eval retriever not defined in world.retrievers");
}

}  // namespace rankdistill::config

#endif  // RANKDISTILL_CONFIG_HPP_
