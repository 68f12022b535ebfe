#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "refdedup/corpus.hpp"
#include "refdedup/text.hpp"

namespace refdedup {

/// Sparse symmetric reference x reference scores in [0,1]. Absent entries
/// are 0; the diagonal is never stored.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(std::size_t dimension = 0) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t nonzeros() const { return entries_.size(); }

  double get(RefId i, RefId j) const {
    if (i == j) return 0.0;
    auto it = entries_.find(RefPair::of(i, j).key());
    return it == entries_.end() ? 0.0 : it->second;
  }

  void set(RefId i, RefId j, double score) {
    if (i == j) throw std::invalid_argument("SimilarityMatrix: diagonal entries are not stored");
    if (i >= dimension_ || j >= dimension_)
      throw std::out_of_range("SimilarityMatrix: index outside dimension");
    if (!(score >= 0.0 && score <= 1.0))
      throw std::invalid_argument("SimilarityMatrix: score outside [0,1]");
    const auto key = RefPair::of(i, j).key();
    if (score == 0.0) {
      entries_.erase(key);
    } else {
      entries_[key] = score;
    }
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [key, score] : entries_) f(RefPair::from_key(key), score);
  }

  std::vector<std::pair<RefPair, double>> sorted_entries() const {
    std::vector<std::pair<RefPair, double>> out;
    out.reserve(entries_.size());
    for (const auto& [key, score] : entries_) out.emplace_back(RefPair::from_key(key), score);
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    return out;
  }

 private:
  std::size_t dimension_;
  std::unordered_map<std::uint64_t, double> entries_;
};

// ---------------------------------------------------------------------------
// n-best cooccurrence

/// Occurrence and pairwise co-occurrence counts over n-best lists. Partial
/// stats from shards of a log merge by addition.
struct CooccurrenceStats {
  std::vector<std::uint64_t> occurrences;
  std::unordered_map<std::uint64_t, std::uint64_t> co_occurrences;

  explicit CooccurrenceStats(std::size_t references = 0) : occurrences(references, 0) {}

  void add_request(std::span<const RefId> nbest) {
    for (std::size_t x = 0; x < nbest.size(); ++x) {
      ++occurrences[nbest[x]];
      for (std::size_t y = x + 1; y < nbest.size(); ++y) {
        ++co_occurrences[RefPair::of(nbest[x], nbest[y]).key()];
      }
    }
  }

  static CooccurrenceStats from_log(const RequestLog& log, std::size_t begin = 0,
                                    std::size_t end = std::numeric_limits<std::size_t>::max()) {
    CooccurrenceStats s(log.reference_count());
    end = std::min(end, log.size());
    for (std::size_t i = begin; i < end; ++i) s.add_request(log.nbest_ids(i));
    return s;
  }

  CooccurrenceStats& merge(const CooccurrenceStats& other) {
    if (other.occurrences.size() > occurrences.size()) occurrences.resize(other.occurrences.size(), 0);
    for (std::size_t i = 0; i < other.occurrences.size(); ++i) occurrences[i] += other.occurrences[i];
    for (const auto& [key, n] : other.co_occurrences) co_occurrences[key] += n;
    return *this;
  }

  std::uint64_t co(RefId i, RefId j) const {
    auto it = co_occurrences.find(RefPair::of(i, j).key());
    return it == co_occurrences.end() ? 0 : it->second;
  }
};

/// c_ij = (p(i|j) + p(j|i)) / 2 with p(i|j) = co(i,j) / occ(j). Occurrence
/// counts any n-best position, top-1 included.
inline SimilarityMatrix cooccurrence_matrix(const CooccurrenceStats& stats) {
  SimilarityMatrix m(stats.occurrences.size());
  for (const auto& [key, co] : stats.co_occurrences) {
    const RefPair p = RefPair::from_key(key);
    const auto oa = stats.occurrences[p.a];
    const auto ob = stats.occurrences[p.b];
    if (oa == 0 || ob == 0 || co > oa || co > ob)
      throw std::logic_error("cooccurrence: inconsistent counts for pair (" +
                             std::to_string(p.a) + ", " + std::to_string(p.b) + ")");
    const double c = 0.5 * (static_cast<double>(co) / static_cast<double>(ob) +
                            static_cast<double>(co) / static_cast<double>(oa));
    m.set(p.a, p.b, std::min(c, 1.0));
  }
  return m;
}

inline SimilarityMatrix nbest_cooccurrence(const RequestLog& log) {
  if (log.empty()) throw std::invalid_argument("nbest_cooccurrence: empty log");
  return cooccurrence_matrix(CooccurrenceStats::from_log(log));
}

// ---------------------------------------------------------------------------
// Item-item similarity over user histories

struct TimeWindow {
  std::int64_t begin = std::numeric_limits<std::int64_t>::min();
  std::int64_t end = std::numeric_limits<std::int64_t>::max();  // exclusive

  bool contains(std::int64_t t) const { return t >= begin && t < end; }
};

/// U_i for one reference: summed request counts of every user who requested
/// reference i as a top-1. Sorted by ref id.
struct HistoryVector {
  RefId ref_id = 0;
  std::vector<std::pair<RefId, double>> counts;

  double norm() const {
    double s = 0.0;
    for (const auto& [_, v] : counts) s += v * v;
    return std::sqrt(s);
  }
};

inline double cosine(const HistoryVector& a, const HistoryVector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  auto x = a.counts.begin(), y = b.counts.begin();
  while (x != a.counts.end() && y != b.counts.end()) {
    if (x->first < y->first) {
      ++x;
    } else if (y->first < x->first) {
      ++y;
    } else {
      dot += x->second * y->second;
      ++x;
      ++y;
    }
  }
  return std::clamp(dot / (na * nb), 0.0, 1.0);
}

/// Per-user top-1 request counts inside a time window, with the inverse
/// reference -> users map. Answers single-pair cosines and builds the full
/// sparse matrix.
///
/// References requested by fewer than `min_requesters` distinct users score 0
/// against everything: with one requester, U_i is that user's history and
/// every other reference of the same user would score 1.
class HistoryIndex {
 public:
  HistoryIndex(const RequestLog& log, TimeWindow window = {}, std::size_t min_requesters = 1)
      : references_(log.reference_count()),
        min_requesters_(std::max<std::size_t>(1, min_requesters)),
        users_of_(log.reference_count()) {
    std::unordered_map<std::string, std::uint32_t> user_ids;
    std::vector<std::unordered_map<RefId, double>> counts;
    const auto& reqs = log.requests();
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      if (!window.contains(reqs[i].timestamp)) continue;
      auto [it, inserted] =
          user_ids.try_emplace(reqs[i].user_id, static_cast<std::uint32_t>(counts.size()));
      if (inserted) counts.emplace_back();
      counts[it->second][log.top1(i)] += 1.0;
    }
    user_vectors_.resize(counts.size());
    for (std::uint32_t k = 0; k < counts.size(); ++k) {
      user_vectors_[k].assign(counts[k].begin(), counts[k].end());
      std::sort(user_vectors_[k].begin(), user_vectors_[k].end());
      for (const auto& [ref, n] : user_vectors_[k]) users_of_[ref].emplace_back(k, n);
    }
  }

  std::size_t reference_count() const { return references_; }
  std::size_t user_count() const { return user_vectors_.size(); }

  /// Number of distinct users who requested `ref` as a top-1.
  std::size_t requesters(RefId ref) const { return users_of_[ref].size(); }
  bool eligible(RefId ref) const { return users_of_[ref].size() >= min_requesters_; }

  HistoryVector history_vector(RefId ref) const {
    std::unordered_map<RefId, double> acc;
    for (const auto& [k, _] : users_of_[ref]) {
      for (const auto& [j, n] : user_vectors_[k]) acc[j] += n;
    }
    HistoryVector h{ref, {acc.begin(), acc.end()}};
    std::sort(h.counts.begin(), h.counts.end());
    return h;
  }

  double similarity(RefId i, RefId j) const {
    if (!eligible(i) || !eligible(j)) return 0.0;
    if (i == j) return 1.0;
    return cosine(history_vector(i), history_vector(j));
  }

  /// All pairs with u_ij >= min_score (and > 0).
  ///
  /// U_i . U_j = sum over users k of i and l of j of (v_k . v_l). For each i
  /// the user-space vector a_i[l] = sum_k (v_k . v_l) is built once; the dot
  /// with every U_j is then a sum of a_i over the users of j.
  SimilarityMatrix matrix(double min_score = 0.0) const {
    SimilarityMatrix m(references_);
    std::vector<double> a(user_vectors_.size(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<double> norms(references_, 0.0);
    std::vector<RefId> active;
    for (RefId i = 0; i < references_; ++i) {
      if (!eligible(i)) continue;
      active.push_back(i);
      fill_user_space(i, a, touched);
      norms[i] = std::sqrt(dot_with(a, i));
      clear(a, touched);
    }
    for (std::size_t x = 0; x < active.size(); ++x) {
      const RefId i = active[x];
      fill_user_space(i, a, touched);
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const RefId j = active[y];
        const double d = dot_with(a, j);
        if (d <= 0.0) continue;
        const double u = std::clamp(d / (norms[i] * norms[j]), 0.0, 1.0);
        if (u > 0.0 && u >= min_score) m.set(i, j, u);
      }
      clear(a, touched);
    }
    return m;
  }

 private:
  void fill_user_space(RefId i, std::vector<double>& a, std::vector<std::uint32_t>& touched) const {
    for (const auto& [k, _] : users_of_[i]) {
      for (const auto& [ref, n] : user_vectors_[k]) {
        for (const auto& [l, n2] : users_of_[ref]) {
          if (a[l] == 0.0) touched.push_back(l);
          a[l] += n * n2;
        }
      }
    }
  }

  double dot_with(const std::vector<double>& a, RefId j) const {
    double s = 0.0;
    for (const auto& [l, _] : users_of_[j]) s += a[l];
    return s;
  }

  static void clear(std::vector<double>& a, std::vector<std::uint32_t>& touched) {
    for (auto l : touched) a[l] = 0.0;
    touched.clear();
  }

  std::size_t references_;
  std::size_t min_requesters_;
  std::vector<std::vector<std::pair<RefId, double>>> user_vectors_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> users_of_;
};

/// Cosine of history vectors for every pair of references. References with
/// no requests in the window have zero norm and score 0 against everything.
inline SimilarityMatrix item_similarity(const RequestLog& log, TimeWindow window = {},
                                        double min_score = 0.0, std::size_t min_requesters = 1) {
  return HistoryIndex(log, window, min_requesters).matrix(min_score);
}

// ---------------------------------------------------------------------------
// Character-edit baseline

struct EditMatchCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct EditMatchReport {
  std::vector<EditMatchCounts> per_input;
  EditMatchCounts total;

  double recall() const {
    const auto d = total.tp + total.fn;
    return d ? static_cast<double>(total.tp) / static_cast<double>(d) : 0.0;
  }
  double precision() const {
    const auto d = total.tp + total.fp;
    return d ? static_cast<double>(total.tp) / static_cast<double>(d) : 0.0;
  }
};

struct ObservedOutput {
  std::string output;
  std::size_t true_input = 0;  // index into the inputs list
};

/// Each output is matched when its distance to its own input is no larger
/// than its distance to every other input. A miss costs one false positive
/// on the nearest other input and one false negative on the true input.
inline EditMatchReport edit_baseline_match(std::span<const ObservedOutput> outputs,
                                           std::span<const std::string> inputs) {
  EditMatchReport rep;
  rep.per_input.resize(inputs.size());
  for (const auto& o : outputs) {
    if (o.true_input >= inputs.size())
      throw std::out_of_range("edit_baseline_match: true_input outside inputs");
    const std::size_t own = edit_distance(o.output, inputs[o.true_input]);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::size_t best_idx = o.true_input;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (k == o.true_input) continue;
      const std::size_t la = o.output.size(), lb = inputs[k].size();
      const std::size_t lower = la > lb ? la - lb : lb - la;
      // Only strictly closer inputs matter, and the minimum among them.
      if (lower >= std::min(own, best)) continue;
      const std::size_t d = edit_distance(o.output, inputs[k]);
      if (d < best) {
        best = d;
        best_idx = k;
      }
    }
    if (best >= own) {
      ++rep.per_input[o.true_input].tp;
      ++rep.total.tp;
    } else {
      ++rep.per_input[best_idx].fp;
      ++rep.per_input[o.true_input].fn;
      ++rep.total.fp;
      ++rep.total.fn;
    }
  }
  return rep;
}

}  // namespace refdedup
