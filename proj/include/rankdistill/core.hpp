#ifndef RANKDISTILL_CORE_HPP_
#define RANKDISTILL_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rankdistill {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input; line() is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Inconsistent data discovered while building or training (bad teacher
/// permutation, non-finite loss, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& message) {
  std::cerr << "warning: " << message << '\n';
}

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

/// Opaque non-empty identifier without whitespace. The tag keeps query and
/// document ids from being mixed up.
template <typename Tag>
class Identifier {
 public:
  Identifier() = default;
  explicit Identifier(std::string value) : value_(std::move(value)) {
    if (value_.empty()) throw ArgumentError("identifier must be non-empty");
    for (char c : value_) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f')
        throw ArgumentError("identifier contains whitespace: '" + value_ + "'");
    }
  }

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Identifier&, const Identifier&) = default;
  friend bool operator==(const Identifier&, const Identifier&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Identifier& id) {
    return os << id.value_;
  }

 private:
  std::string value_;
};

struct QueryTag {};
struct DocTag {};
using QueryId = Identifier<QueryTag>;
using DocId = Identifier<DocTag>;

// ---------------------------------------------------------------------------
// Feature vectors
// ---------------------------------------------------------------------------

class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!std::isfinite(v)) throw ArgumentError("feature vector entry is not finite");
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  operator std::span<const double>() const noexcept { return values_; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Scored lists and runs
// ---------------------------------------------------------------------------

struct ScoredDoc {
  DocId doc;
  double score = 0.0;
  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Descending score, ties by ascending doc id.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc < b.doc;
}

struct ScoredList {
  QueryId query;
  std::vector<ScoredDoc> entries;

  void sort() { std::sort(entries.begin(), entries.end(), ranks_before); }
  std::size_t size() const noexcept { return entries.size(); }

  friend bool operator==(const ScoredList&, const ScoredList&) = default;
};

/// Throws unless docs are unique and scores finite.
inline void validate(const ScoredList& list) {
  std::vector<const DocId*> ids;
  ids.reserve(list.entries.size());
  for (const auto& e : list.entries) {
    if (!std::isfinite(e.score))
      throw ArgumentError("non-finite score for " + e.doc.str() + " in query " + list.query.str());
    ids.push_back(&e.doc);
  }
  std::sort(ids.begin(), ids.end(), [](auto* a, auto* b) { return *a < *b; });
  auto dup = std::adjacent_find(ids.begin(), ids.end(), [](auto* a, auto* b) { return *a == *b; });
  if (dup != ids.end())
    throw ArgumentError("duplicate doc " + (*dup)->str() + " in query " + list.query.str());
}

using Run = std::map<QueryId, ScoredList>;

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

struct TrainingGroup {
  QueryId query;
  DocId positive;
  std::vector<DocId> negatives;

  std::size_t size() const noexcept { return negatives.size() + 1; }
  friend bool operator==(const TrainingGroup&, const TrainingGroup&) = default;
};

inline void validate(const TrainingGroup& group) {
  std::vector<DocId> sorted = group.negatives;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ArgumentError("duplicate negative in group for " + group.query.str());
  if (std::binary_search(sorted.begin(), sorted.end(), group.positive))
    throw ArgumentError("positive listed among negatives for " + group.query.str());
}

/// Teacher order, best first. Position i (0-based) has target rank i + 1.
struct TeacherRanking {
  QueryId query;
  std::vector<DocId> docs;
  int source_depth = 0;

  std::size_t size() const noexcept { return docs.size(); }
  friend bool operator==(const TeacherRanking&, const TeacherRanking&) = default;
};

// ---------------------------------------------------------------------------
// Relevance judgments
// ---------------------------------------------------------------------------

class Qrels {
 public:
  using Judgments = std::map<DocId, int>;

  void set(const QueryId& q, const DocId& d, int grade) {
    if (grade < 0) throw ArgumentError("relevance grade must be non-negative");
    judgments_[q][d] = grade;
  }

  int grade(const QueryId& q, const DocId& d) const {
    auto it = judgments_.find(q);
    if (it == judgments_.end()) return 0;
    auto jt = it->second.find(d);
    return jt == it->second.end() ? 0 : jt->second;
  }

  bool contains(const QueryId& q, const DocId& d) const {
    auto it = judgments_.find(q);
    return it != judgments_.end() && it->second.count(d) > 0;
  }

  /// Judgments for one query; empty when the query is unjudged.
  const Judgments& judged(const QueryId& q) const {
    static const Judgments kEmpty;
    auto it = judgments_.find(q);
    return it == judgments_.end() ? kEmpty : it->second;
  }

  bool empty() const noexcept { return judgments_.empty(); }
  std::size_t num_queries() const noexcept { return judgments_.size(); }
  const std::map<QueryId, Judgments>& all() const noexcept { return judgments_; }

  friend bool operator==(const Qrels&, const Qrels&) = default;

 private:
  std::map<QueryId, Judgments> judgments_;
};

// ---------------------------------------------------------------------------
// Deterministic seeding
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; used to derive independent per-item seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(seed) ^ stream) ^ index);
}

}  // namespace rankdistill

template <typename Tag>
struct std::hash<rankdistill::Identifier<Tag>> {
  std::size_t operator()(const rankdistill::Identifier<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

#endif  // RANKDISTILL_CORE_HPP_
