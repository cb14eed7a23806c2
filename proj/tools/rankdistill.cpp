// rankdistill command-line tool.
//
//   world        generate train/val/test splits of the synthetic world
//   distill      teacher-ranked lists + hard-negative groups from a world
//   train        single- or two-stage training, writes a checkpoint and test run
//   eval         per-query nDCG of a run against qrels
//   significance paired t-tests with Holm correction between runs
//   ablate       depth x query-count distillation grid
//   bench        re-ranking cost simulation
//
// Exit codes: 0 ok, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rankdistill/config.hpp"
#include "rankdistill/dataset_io.hpp"
#include "rankdistill/eval.hpp"
#include "rankdistill/experiment.hpp"
#include "rankdistill/rerank_sim.hpp"
#include "rankdistill/trec_io.hpp"

namespace fs = std::filesystem;
using namespace rankdistill;
using experiment::ExperimentConfig;
using config::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the experiment commands. Unset optionals leave the config
// value alone.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> depth;
  std::optional<std::string> loss;
  std::optional<double> alpha;
  std::optional<std::size_t> jobs;
  std::string stage = "two";
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_training) {
  cmd->add_option("--config", c.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--depth", c.depth, "retrieval depth of the distillation lists");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  if (with_training) {
    cmd->add_option("--loss", c.loss, "distillation loss")->check(CLI::IsMember({"infonce", "ranknet", "adr-mse"}));
    cmd->add_option("--alpha", c.alpha, "ADR-MSE smooth-rank temperature");
    cmd->add_option("--stage", c.stage, "single or two-stage training")->check(CLI::IsMember({"single", "two"}));
  }
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_text_file(c.config_path));
    } catch (const json::parse_error& e) {
      throw UsageError("config " + c.config_path + ": " + e.what());
    }
    cfg = config::from_json(j);
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.depth) cfg.depth = *c.depth;
  if (c.jobs) cfg.jobs = *c.jobs;
  if (c.alpha) {
    cfg.stage1.alpha = *c.alpha;
    cfg.stage2.alpha = *c.alpha;
  }
  if (c.loss && *c.loss != "infonce") cfg.stage2.loss = parse_loss(*c.loss);
  config::validate(cfg);
  return cfg;
}

void print_config(const std::string& command, const json& resolved) {
  json j;
  j["command"] = command;
  j["config"] = resolved;
  std::cout << "# " << j.dump() << '\n';
}

json with_flags(const ExperimentConfig& cfg, const Common& c) {
  json j = config::to_json(cfg);
  j["stage"] = c.stage;
  if (c.loss) j["loss"] = *c.loss;
  j["out"] = c.out;
  return j;
}

fs::path require_dir(const std::string& p, const char* what) {
  if (p.empty()) throw UsageError(std::string("--") + what + " is required");
  if (!fs::is_directory(p)) throw DataError(std::string(what) + " directory not found: " + p);
  return p;
}

void write_text(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  write_file_atomic(path, writer);
}

// ---------------------------------------------------------------------------
// World directory layout
//
//   <dir>/config.json
//   <dir>/<split>/corpus.jsonl, qrels.txt, dense_qrels.txt, runs/<retriever>.run
// ---------------------------------------------------------------------------

const char* const kSplits[] = {"train", "val", "test"};

void write_world(const fs::path& dir, const World& w) {
  write_text(dir / "corpus.jsonl", [&](std::ostream& o) { write_corpus(o, w.corpus); });
  write_text(dir / "qrels.txt", [&](std::ostream& o) { write_qrels(o, w.qrels); });
  write_text(dir / "dense_qrels.txt", [&](std::ostream& o) { write_qrels(o, w.dense_qrels); });
  for (const auto& [name, run] : w.runs)
    write_text(dir / "runs" / (name + ".run"), [&](std::ostream& o) { write_run(o, run, name); });
}

ExperimentConfig load_world_config(const fs::path& world_dir) {
  try {
    return config::from_json(json::parse(read_text_file(world_dir / "config.json")));
  } catch (const json::parse_error& e) {
    throw DataError("world config: " + std::string(e.what()));
  }
}

Run read_run_file(const fs::path& p) {
  auto in = open_input(p);
  return parse_run(in);
}

Qrels read_qrels_file(const fs::path& p) {
  auto in = open_input(p);
  return parse_qrels(in);
}

Corpus read_corpus_file(const fs::path& p) {
  auto in = open_input(p);
  return read_corpus(in);
}

/// Split seeds are derived the same way experiment::make_splits derives them.
TeacherOracle split_teacher(const ExperimentConfig& cfg, const Corpus& corpus) {
  const WorldConfig w = experiment::split_config(cfg, "train", cfg.world.num_queries, 0);
  return TeacherOracle(corpus, w.teacher_noise, w.teacher_noise_per_rank, w.seed);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_world(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  if (c.out.empty()) throw UsageError("--out is required");
  print_config("world", with_flags(cfg, c));
  const auto splits = experiment::make_splits(cfg);
  const fs::path out = c.out;
  write_world(out / "train", splits.train);
  write_world(out / "val", splits.validation);
  write_world(out / "test", splits.test);
  write_text(out / "config.json", [&](std::ostream& o) { o << config::to_json(cfg).dump(2) << '\n'; });
  std::cout << "wrote " << splits.train.corpus.size() << "/" << splits.validation.corpus.size() << "/"
            << splits.test.corpus.size() << " train/val/test queries to " << out.string() << '\n';
  return 0;
}

int cmd_distill(const Common& c, const std::string& world_dir, const std::string& retriever) {
  const fs::path wdir = require_dir(world_dir, "world");
  ExperimentConfig cfg = load_world_config(wdir);
  Common flags = c;
  if (flags.config_path.empty()) {
    // The world's own config is the baseline; flags still override it.
    if (c.seed) cfg.seed = *c.seed;
    if (c.depth) cfg.depth = *c.depth;
    if (c.jobs) cfg.jobs = *c.jobs;
    config::validate(cfg);
  } else {
    cfg = resolve(flags);
  }
  if (!retriever.empty()) cfg.distill_retriever = retriever;
  if (c.out.empty()) throw UsageError("--out is required");
  json shown = with_flags(cfg, c);
  shown["world_dir"] = world_dir;
  print_config("distill", shown);

  const Corpus corpus = read_corpus_file(wdir / "train" / "corpus.jsonl");
  const Run run = read_run_file(wdir / "train" / "runs" / (cfg.distill_retriever + ".run"));
  const Qrels qrels = read_qrels_file(wdir / "train" / "qrels.txt");
  const DistillDataset ds = build_teacher_dataset(run, split_teacher(cfg, corpus), corpus, cfg.depth);
  SamplingConfig sampling = cfg.sampling;
  sampling.seed = derive_seed(cfg.seed, 0x5a3);
  const auto groups = build_hard_negative_groups(run, qrels, sampling);

  const fs::path out = c.out;
  write_text(out / "distill.jsonl", [&](std::ostream& o) { write_distill_dataset(o, ds); });
  write_text(out / "groups.jsonl", [&](std::ostream& o) { write_groups(o, groups.groups); });
  std::cout << "distillation lists: " << ds.size() << " (depth " << cfg.depth << ")\n"
            << "hard-negative groups: " << groups.groups.size() << " (skipped " << groups.skipped() << ")\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& world_dir, const std::string& data_dir) {
  const fs::path wdir = require_dir(world_dir, "world");
  const fs::path ddir = require_dir(data_dir, "data");
  ExperimentConfig cfg = c.config_path.empty() ? load_world_config(wdir) : resolve(c);
  if (c.config_path.empty()) {
    if (c.seed) cfg.seed = *c.seed;
    if (c.depth) cfg.depth = *c.depth;
    if (c.jobs) cfg.jobs = *c.jobs;
    if (c.alpha) cfg.stage2.alpha = *c.alpha;
    if (c.loss && *c.loss != "infonce") cfg.stage2.loss = parse_loss(*c.loss);
    config::validate(cfg);
  }
  const bool stage1_only = c.loss && *c.loss == "infonce";
  if (stage1_only && c.stage == "two") throw UsageError("--loss infonce trains stage 1 only; use --stage single");
  if (c.out.empty()) throw UsageError("--out is required");
  json shown = with_flags(cfg, c);
  shown["world_dir"] = world_dir;
  shown["data_dir"] = data_dir;
  print_config("train", shown);

  auto load_set = [&](const char* split) {
    const fs::path dir = wdir / split;
    const Corpus corpus = read_corpus_file(dir / "corpus.jsonl");
    const Run run = read_run_file(dir / "runs" / (cfg.eval_retriever + ".run"));
    return build_validation_set(run, corpus, read_qrels_file(dir / "dense_qrels.txt"), cfg.depth);
  };
  const ValidationSet validation = load_set("val");
  const ValidationSet test = load_set("test");

  const ScorerModel init = experiment::initial_model(cfg);
  const TrainConfig s1 = experiment::with_seed(cfg.stage1, derive_seed(cfg.seed, 1), cfg.jobs);
  const TrainConfig s2 = experiment::with_seed(cfg.stage2, derive_seed(cfg.seed, 2), cfg.jobs);
  ScorerModel model;
  std::vector<std::pair<std::string, TrainReport>> reports;

  auto load_groups = [&] {
    auto in = open_input(ddir / "groups.jsonl");
    return read_groups(in);
  };
  auto load_distill = [&] {
    auto in = open_input(ddir / "distill.jsonl");
    return read_distill_dataset(in);
  };
  if (stage1_only) {
    const Corpus corpus = read_corpus_file(wdir / "train" / "corpus.jsonl");
    auto [m, r] = train_stage1(init, load_groups(), corpus, s1);
    model = std::move(m);
    reports.emplace_back("stage1", std::move(r));
  } else if (c.stage == "single") {
    auto [m, r] = train_distill(init, load_distill(), validation, s2);
    model = std::move(m);
    reports.emplace_back("distill", std::move(r));
  } else {
    const Corpus corpus = read_corpus_file(wdir / "train" / "corpus.jsonl");
    auto r = train_two_stage(init, load_groups(), corpus, load_distill(), validation, s1, s2);
    model = std::move(r.model);
    reports.emplace_back("stage1", std::move(r.stage1));
    reports.emplace_back("distill", std::move(r.stage2));
  }

  const fs::path out = c.out;
  write_text(out / "model.ckpt", [&](std::ostream& o) { write_checkpoint(o, model); });
  write_text(out / "metrics.jsonl", [&](std::ostream& o) {
    for (const auto& [stage, r] : reports) write_metrics_log(o, r, stage);
  });
  write_text(out / "val.run", [&](std::ostream& o) { write_run(o, rerank(model, validation, cfg.jobs), "rankdistill"); });
  write_text(out / "test.run", [&](std::ostream& o) { write_run(o, rerank(model, test, cfg.jobs), "rankdistill"); });
  const double val_ndcg = mean_ndcg(model, validation, cfg.stage2.eval_cutoff, cfg.jobs);
  const double test_ndcg = mean_ndcg(model, test, cfg.stage2.eval_cutoff, cfg.jobs);
  json summary;
  summary["validation_ndcg10"] = val_ndcg;
  summary["test_ndcg10"] = test_ndcg;
  for (const auto& [stage, r] : reports) {
    json s;
    s["steps_executed"] = r.steps_executed;
    s["stop_reason"] = to_string(r.stop_reason);
    s["step_of_best"] = r.step_of_best;
    if (!std::isnan(r.best_validation_ndcg10)) s["best_validation_ndcg10"] = r.best_validation_ndcg10;
    summary[stage] = s;
  }
  write_text(out / "summary.json", [&](std::ostream& o) { o << summary.dump(2) << '\n'; });
  std::printf("validation nDCG@10 %.4f  test nDCG@10 %.4f\n", val_ndcg, test_ndcg);
  return 0;
}

int cmd_eval(const std::string& run_path, const std::string& qrels_path, std::size_t k, const std::string& out) {
  json shown;
  shown["run"] = run_path;
  shown["qrels"] = qrels_path;
  shown["cutoff"] = k;
  shown["out"] = out;
  print_config("eval", shown);
  if (k < 1) throw UsageError("--cutoff must be >= 1");
  const auto scores = eval::evaluate_run(read_run_file(run_path), read_qrels_file(qrels_path), k);
  const std::string metric = "ndcg_cut_" + std::to_string(k);
  if (!out.empty()) write_text(out, [&](std::ostream& o) { eval::write_per_query(o, scores, metric); });
  if (scores.empty()) throw DataError("qrels contain no queries");
  std::printf("%s %.4f over %zu queries\n", metric.c_str(), eval::mean(scores), scores.size());
  return 0;
}

// "name:collection=path", "collection=path" or "path".
struct RunSpec {
  std::string system, collection, path;
};

RunSpec parse_run_spec(const std::string& text, bool named) {
  RunSpec s{"", "default", text};
  std::string rest = text;
  if (named) {
    const auto colon = rest.find(':');
    const auto eq = rest.find('=');
    if (colon == std::string::npos || (eq != std::string::npos && eq < colon))
      throw UsageError("system run must look like NAME:PATH or NAME:COLLECTION=PATH, got '" + text + "'");
    s.system = rest.substr(0, colon);
    rest = rest.substr(colon + 1);
  }
  const auto eq = rest.find('=');
  if (eq != std::string::npos) {
    s.collection = rest.substr(0, eq);
    rest = rest.substr(eq + 1);
  }
  s.path = rest;
  if (s.path.empty() || s.collection.empty() || (named && s.system.empty()))
    throw UsageError("malformed run spec '" + text + "'");
  return s;
}

int cmd_significance(const std::vector<std::string>& qrels_specs, const std::vector<std::string>& baseline_specs,
                     const std::vector<std::string>& system_specs, const std::string& baseline_name,
                     std::size_t k, double alpha, bool pooled, const std::string& out) {
  json shown;
  shown["qrels"] = qrels_specs;
  shown["baseline"] = baseline_specs;
  shown["systems"] = system_specs;
  shown["baseline_name"] = baseline_name;
  shown["cutoff"] = k;
  shown["alpha"] = alpha;
  shown["pooled"] = pooled;
  shown["out"] = out;
  print_config("significance", shown);

  const eval::EvalConfig ecfg{k, alpha};
  ecfg.validate();
  std::map<std::string, Qrels> qrels;
  for (const auto& q : qrels_specs) {
    const auto s = parse_run_spec(q, false);
    qrels[s.collection] = read_qrels_file(s.path);
  }
  auto score = [&](const RunSpec& s) {
    auto it = qrels.find(s.collection);
    if (it == qrels.end()) throw UsageError("no --qrels given for collection '" + s.collection + "'");
    return eval::evaluate_run(read_run_file(s.path), it->second, k);
  };
  eval::SystemScores baseline;
  for (const auto& b : baseline_specs) {
    const auto s = parse_run_spec(b, false);
    baseline[s.collection] = score(s);
  }
  std::map<std::string, eval::SystemScores> systems;
  for (const auto& t : system_specs) {
    const auto s = parse_run_spec(t, true);
    systems[s.system][s.collection] = score(s);
  }
  const auto report = eval::compare_systems(baseline_name, baseline, systems, ecfg, pooled);
  report.write_text(std::cout);
  if (!out.empty()) write_text(out, [&](std::ostream& o) { report.write_jsonl(o); });
  return 0;
}

int cmd_ablate(const Common& c, std::vector<std::size_t> depths, std::vector<double> fractions) {
  ExperimentConfig cfg = resolve(c);
  if (c.out.empty()) throw UsageError("--out is required");
  json shown = with_flags(cfg, c);
  shown["depths"] = depths;
  shown["fractions"] = fractions;
  print_config("ablate", shown);
  std::size_t max_depth = 0;
  for (auto d : depths) max_depth = std::max(max_depth, d);
  if (max_depth > cfg.depth) cfg.depth = max_depth;
  config::validate(cfg);

  const auto splits = experiment::make_splits(cfg);
  const auto cells = experiment::ablation_grid(cfg, splits, depths, fractions);
  const fs::path out = c.out;
  write_text(out / "grid.tsv", [&](std::ostream& o) {
    o << "depth\tquery_fraction\tqueries\tval_ndcg10\ttest_ndcg10\n";
    char buf[128];
    for (const auto& cell : cells) {
      std::snprintf(buf, sizeof(buf), "%zu\t%g\t%zu\t%.6f\t%.6f\n", cell.depth, cell.query_fraction, cell.queries,
                    cell.validation_ndcg, cell.test_ndcg);
      o << buf;
    }
  });
  write_text(out / "grid.jsonl", [&](std::ostream& o) {
    for (const auto& cell : cells) {
      json j;
      j["depth"] = cell.depth;
      j["query_fraction"] = cell.query_fraction;
      j["queries"] = cell.queries;
      j["val_ndcg10"] = cell.validation_ndcg;
      j["test_ndcg10"] = cell.test_ndcg;
      o << j.dump() << '\n';
    }
  });
  std::printf("%-8s", "queries");
  for (auto d : depths) std::printf("  d=%-6zu", d);
  std::printf("\n");
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    std::printf("%-8zu", cells[f * depths.size()].queries);
    for (std::size_t d = 0; d < depths.size(); ++d) std::printf("  %.4f  ", cells[f * depths.size() + d].validation_ndcg);
    std::printf("\n");
  }
  return 0;
}

int cmd_bench(std::size_t depth, const std::string& baseline, std::size_t window, std::size_t stride,
              std::size_t passes, const std::string& out) {
  json shown;
  shown["depth"] = depth;
  shown["baseline"] = baseline;
  shown["window"] = window;
  shown["stride"] = stride;
  shown["passes"] = passes;
  shown["out"] = out;
  print_config("bench", shown);
  // Per-call costs come from the measured 100-passage figures; the requested
  // strategy and depth are then simulated with them.
  auto profiles = rerank_sim::reference_profiles(100);
  for (auto& p : profiles)
    if (p.strategy.kind == rerank_sim::StrategyKind::SlidingWindow)
      p.strategy = rerank_sim::StrategySpec::sliding(window, stride, passes);
  const auto rows = rerank_sim::cost_report(profiles, baseline, depth);
  rerank_sim::write_cost_table(std::cout, rows, baseline);
  if (!out.empty()) write_text(out, [&](std::ostream& o) { rerank_sim::write_cost_jsonl(o, rows, baseline); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rankdistill: distilling re-rankers from teacher rankings"};
  app.require_subcommand(1);

  Common common;
  std::string world_dir, data_dir, retriever, run_path, qrels_path, out_file, baseline_name = "baseline";
  std::size_t cutoff = 10;
  double alpha_level = 0.05;
  bool pooled = false;
  std::vector<std::string> qrels_specs, baseline_specs, system_specs;
  std::vector<std::size_t> depths{10, 25, 50, 100};
  std::vector<double> fractions{0.1, 0.25, 0.5, 1.0};
  std::size_t bench_depth = 100, window = 20, stride = 10, passes = 1;
  std::string bench_baseline = "monoELECTRA-Large";

  auto* world = app.add_subcommand("world", "generate train/val/test worlds");
  add_common(world, common, false);
  world->add_option("--out", common.out, "output directory")->required();

  auto* distill = app.add_subcommand("distill", "build distillation lists and hard-negative groups");
  add_common(distill, common, false);
  distill->add_option("--world", world_dir, "world directory")->required();
  distill->add_option("--retriever", retriever, "first-stage retriever to distill from");
  distill->add_option("--out", common.out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a scorer");
  add_common(train, common, true);
  train->add_option("--world", world_dir, "world directory")->required();
  train->add_option("--data", data_dir, "directory written by 'distill'")->required();
  train->add_option("--out", common.out, "output directory")->required();

  auto* evalc = app.add_subcommand("eval", "nDCG of a run");
  evalc->add_option("--run", run_path, "TREC run file")->required();
  evalc->add_option("--qrels", qrels_path, "TREC qrels file")->required();
  evalc->add_option("--cutoff", cutoff, "nDCG cutoff");
  evalc->add_option("--out", out_file, "per-query output file");

  auto* sig = app.add_subcommand("significance", "paired t-tests with Holm-Bonferroni correction");
  sig->add_option("--qrels", qrels_specs, "[COLLECTION=]PATH, repeatable")->required();
  sig->add_option("--baseline", baseline_specs, "[COLLECTION=]PATH, repeatable")->required();
  sig->add_option("--system", system_specs, "NAME:[COLLECTION=]PATH, repeatable")->required();
  sig->add_option("--baseline-name", baseline_name, "label of the baseline");
  sig->add_option("--cutoff", cutoff, "nDCG cutoff");
  sig->add_option("--alpha", alpha_level, "family-wise significance level");
  sig->add_flag("--pooled", pooled, "one test per system over all collections");
  sig->add_option("--out", out_file, "JSON-lines report");

  auto* ablate = app.add_subcommand("ablate", "depth x query-count distillation grid");
  add_common(ablate, common, false);
  ablate->add_option("--depths", depths, "depths to sweep")->delimiter(',');
  ablate->add_option("--fractions", fractions, "query fractions to sweep")->delimiter(',');
  ablate->add_option("--out", common.out, "output directory")->required();

  auto* bench = app.add_subcommand("bench", "re-ranking cost simulation");
  bench->add_option("--depth", bench_depth, "passages to re-rank");
  bench->add_option("--baseline", bench_baseline, "profile the ratios are relative to");
  bench->add_option("--window", window, "sliding window size");
  bench->add_option("--stride", stride, "sliding window stride");
  bench->add_option("--passes", passes, "sliding passes");
  bench->add_option("--out", out_file, "JSON-lines report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*world) return cmd_world(common);
    if (*distill) return cmd_distill(common, world_dir, retriever);
    if (*train) return cmd_train(common, world_dir, data_dir);
    if (*evalc) return cmd_eval(run_path, qrels_path, cutoff, out_file);
    if (*sig)
      return cmd_significance(qrels_specs, baseline_specs, system_specs, baseline_name, cutoff, alpha_level, pooled,
                              out_file);
    if (*ablate) return cmd_ablate(common, depths, fractions);
    if (*bench) return cmd_bench(bench_depth, bench_baseline, window, stride, passes, out_file);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
