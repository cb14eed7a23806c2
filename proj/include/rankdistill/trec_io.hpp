#ifndef RANKDISTILL_TREC_IO_HPP_
#define RANKDISTILL_TREC_IO_HPP_

#include <cctype>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rankdistill/core.hpp"

namespace rankdistill {

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", score);
  return buf;
}

}  // namespace detail

/// Reads a 6-column TREC run. Ranks in the file are ignored; every list comes
/// back in canonical order (descending score, ascending doc id).
inline Run parse_run(std::istream& in) {
  Run run;
  std::map<QueryId, std::set<DocId>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 6)
      throw ParseError(lineno, "expected 6 fields, got " + std::to_string(fields.size()));
    if (fields[1] != "Q0") throw ParseError(lineno, "second field must be Q0");
    long long rank = 0;
    if (!detail::parse_number(fields[3], rank))
      throw ParseError(lineno, "malformed rank '" + std::string(fields[3]) + "'");
    double score = 0.0;
    if (!detail::parse_number(fields[4], score))
      throw ParseError(lineno, "malformed score '" + std::string(fields[4]) + "'");
    if (!std::isfinite(score)) throw ParseError(lineno, "non-finite score");

    QueryId qid{std::string(fields[0])};
    DocId did{std::string(fields[2])};
    if (!seen[qid].insert(did).second)
      throw DuplicateError(lineno, "duplicate (" + qid.str() + ", " + did.str() + ")");
    auto& list = run[qid];
    list.query = qid;
    list.entries.push_back({std::move(did), score});
  }
  for (auto& [_, list] : run) list.sort();
  return run;
}

inline Run parse_run(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_run(in);
}

/// Writes lists in canonical order with ranks 1..n and 6-decimal scores.
inline void write_run(std::ostream& out, const Run& run, std::string_view tag) {
  if (tag.empty() || detail::split_fields(tag).size() != 1)
    throw ArgumentError("run tag must be a single non-empty token");
  for (const auto& [qid, list] : run) {
    std::vector<ScoredDoc> entries = list.entries;
    std::sort(entries.begin(), entries.end(), ranks_before);
    std::size_t rank = 1;
    for (const auto& e : entries) {
      out << qid << " Q0 " << e.doc << ' ' << rank++ << ' ' << detail::format_score(e.score)
          << ' ' << tag << '\n';
    }
  }
}

inline std::string write_run(const Run& run, std::string_view tag) {
  std::ostringstream out;
  write_run(out, run, tag);
  return out.str();
}

/// Reads 4-column qrels (qid 0 docid grade). Repeated pairs keep the last
/// grade and raise a warning.
inline Qrels parse_qrels(std::istream& in, const WarningSink& warn = warn_to_stderr) {
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 4)
      throw ParseError(lineno, "expected 4 fields, got " + std::to_string(fields.size()));
    if (fields[1] != "0") throw ParseError(lineno, "second field must be 0");
    int grade = 0;
    if (!detail::parse_number(fields[3], grade))
      throw ParseError(lineno, "malformed grade '" + std::string(fields[3]) + "'");
    if (grade < 0) throw ParseError(lineno, "negative grade");
    QueryId qid{std::string(fields[0])};
    DocId did{std::string(fields[2])};
    if (qrels.contains(qid, did) && warn)
      warn("line " + std::to_string(lineno) + ": duplicate judgment for (" + qid.str() + ", " +
           did.str() + "), keeping the later grade");
    qrels.set(qid, did, grade);
  }
  return qrels;
}

inline Qrels parse_qrels(std::string_view text, const WarningSink& warn = warn_to_stderr) {
  std::istringstream in{std::string(text)};
  return parse_qrels(in, warn);
}

inline void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [qid, judgments] : qrels.all())
    for (const auto& [did, grade] : judgments) out << qid << " 0 " << did << ' ' << grade << '\n';
}

inline std::string write_qrels(const Qrels& qrels) {
  std::ostringstream out;
  write_qrels(out, qrels);
  return out.str();
}

}  // namespace rankdistill

#endif  // RANKDISTILL_TREC_IO_HPP_
