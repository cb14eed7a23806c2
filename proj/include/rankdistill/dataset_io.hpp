#ifndef RANKDISTILL_DATASET_IO_HPP_
#define RANKDISTILL_DATASET_IO_HPP_

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankdistill/core.hpp"
#include "rankdistill/distill_data.hpp"
#include "rankdistill/world.hpp"

namespace rankdistill {

// Record layouts (one JSON object per line, keys in this order):
//
//   distillation: {"query_id", "source_depth",
//                  "passages": [{"doc_id", "features", "first_stage_rank",
//                                "teacher_rank"}, ...]}   passages in teacher order
//   groups:       {"query_id", "positive", "negatives": [...]}
//   corpus:       {"query_id", "passages": [{"doc_id", "relevance", "features"}, ...]}
//
// Floats are written with the shortest representation that round-trips.

namespace detail {

using json = nlohmann::ordered_json;

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    try {
      fn(j, lineno);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("schema error: ") + e.what());
    } catch (const ArgumentError& e) {
      throw ParseError(lineno, e.what());
    }
  }
}

inline void require_keys(const json& j, std::initializer_list<const char*> keys, std::size_t lineno) {
  if (!j.is_object()) throw ParseError(lineno, "record is not an object");
  if (j.size() != keys.size()) throw ParseError(lineno, "unexpected number of fields");
  for (const char* k : keys)
    if (!j.contains(k)) throw ParseError(lineno, std::string("missing field '") + k + "'");
}

}  // namespace detail

inline void write_distill_dataset(std::ostream& out, const DistillDataset& ds) {
  for (const auto& rec : ds) {
    validate(rec);
    detail::json j;
    j["query_id"] = rec.ranking.query.str();
    j["source_depth"] = rec.ranking.source_depth;
    auto& passages = j["passages"] = detail::json::array();
    for (std::size_t i = 0; i < rec.ranking.size(); ++i) {
      detail::json p;
      p["doc_id"] = rec.ranking.docs[i].str();
      p["features"] = std::vector<double>(rec.features[i].values().begin(), rec.features[i].values().end());
      p["first_stage_rank"] = rec.first_stage_rank[i];
      p["teacher_rank"] = i + 1;
      passages.push_back(std::move(p));
    }
    out << j.dump() << '\n';
  }
}

inline DistillDataset read_distill_dataset(std::istream& in) {
  DistillDataset ds;
  detail::for_each_json_line(in, [&](const detail::json& j, std::size_t lineno) {
    detail::require_keys(j, {"query_id", "source_depth", "passages"}, lineno);
    DistillRecord rec;
    rec.ranking.query = QueryId(j.at("query_id").get<std::string>());
    rec.ranking.source_depth = j.at("source_depth").get<int>();
    std::size_t expected_rank = 1;
    for (const auto& p : j.at("passages")) {
      detail::require_keys(p, {"doc_id", "features", "first_stage_rank", "teacher_rank"}, lineno);
      if (p.at("teacher_rank").get<std::size_t>() != expected_rank++)
        throw ParseError(lineno, "passages must be listed in teacher order 1..n");
      rec.ranking.docs.emplace_back(p.at("doc_id").get<std::string>());
      rec.features.emplace_back(p.at("features").get<std::vector<double>>());
      rec.first_stage_rank.push_back(p.at("first_stage_rank").get<int>());
    }
    try {
      validate(rec);
    } catch (const DataError& e) {
      throw ParseError(lineno, e.what());
    }
    ds.push_back(std::move(rec));
  });
  return ds;
}

inline void write_groups(std::ostream& out, const std::vector<TrainingGroup>& groups) {
  for (const auto& g : groups) {
    detail::json j;
    j["query_id"] = g.query.str();
    j["positive"] = g.positive.str();
    auto& neg = j["negatives"] = detail::json::array();
    for (const auto& d : g.negatives) neg.push_back(d.str());
    out << j.dump() << '\n';
  }
}

inline std::vector<TrainingGroup> read_groups(std::istream& in) {
  std::vector<TrainingGroup> groups;
  detail::for_each_json_line(in, [&](const detail::json& j, std::size_t lineno) {
    detail::require_keys(j, {"query_id", "positive", "negatives"}, lineno);
    TrainingGroup g{QueryId(j.at("query_id").get<std::string>()), DocId(j.at("positive").get<std::string>()), {}};
    for (const auto& d : j.at("negatives")) g.negatives.emplace_back(d.get<std::string>());
    validate(g);
    groups.push_back(std::move(g));
  });
  return groups;
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& pool : corpus.pools()) {
    detail::json j;
    j["query_id"] = pool.id.str();
    auto& passages = j["passages"] = detail::json::array();
    for (std::size_t i = 0; i < pool.docs.size(); ++i) {
      detail::json p;
      p["doc_id"] = pool.docs[i].str();
      p["relevance"] = pool.relevance[i];
      p["features"] = std::vector<double>(pool.features[i].values().begin(), pool.features[i].values().end());
      passages.push_back(std::move(p));
    }
    out << j.dump() << '\n';
  }
}

inline Corpus read_corpus(std::istream& in) {
  std::vector<QueryPool> pools;
  detail::for_each_json_line(in, [&](const detail::json& j, std::size_t lineno) {
    detail::require_keys(j, {"query_id", "passages"}, lineno);
    QueryPool pool;
    pool.id = QueryId(j.at("query_id").get<std::string>());
    for (const auto& p : j.at("passages")) {
      detail::require_keys(p, {"doc_id", "relevance", "features"}, lineno);
      pool.docs.emplace_back(p.at("doc_id").get<std::string>());
      pool.relevance.push_back(p.at("relevance").get<double>());
      pool.features.emplace_back(p.at("features").get<std::vector<double>>());
    }
    if (!std::is_sorted(pool.docs.begin(), pool.docs.end()) ||
        std::adjacent_find(pool.docs.begin(), pool.docs.end()) != pool.docs.end())
      throw ParseError(lineno, "passages must be sorted by doc_id without repeats");
    pools.push_back(std::move(pool));
  });
  return Corpus(std::move(pools));
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Writes through a temporary sibling file and renames it into place, so a
/// failure never leaves a partial output behind.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rankdistill

#endif  // RANKDISTILL_DATASET_IO_HPP_
