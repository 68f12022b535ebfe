#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "refdedup/clustering.hpp"
#include "refdedup/corpus.hpp"
#include "refdedup/distribution.hpp"
#include "refdedup/text.hpp"

namespace refdedup {

inline double f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

struct RecallResult {
  std::optional<double> recall;  // nullopt when there are no known pairs
  std::size_t tp = 0;
  std::size_t fn = 0;
};

struct PrecisionResult {
  std::optional<double> precision;  // nullopt when nothing could be evaluated
  std::size_t fp = 0;
  std::size_t evaluated = 0;
};

struct EvalReport {
  std::string dataset;
  std::string model;
  std::optional<double> recall;
  std::optional<double> precision;
  std::optional<double> f1;
  std::size_t tp = 0, fp = 0, fn = 0, evaluated = 0;

  static EvalReport combine(std::string dataset, std::string model, const RecallResult& r,
                            const PrecisionResult& p) {
    EvalReport e{std::move(dataset), std::move(model), r.recall, p.precision, std::nullopt,
                 r.tp, p.fp, r.fn, p.evaluated};
    if (r.recall && p.precision) e.f1 = refdedup::f1(*p.precision, *r.recall);
    return e;
  }
};

/// Known coreferent pairs recovered by the clustering: a pair counts when
/// both members share a cluster, i.e. the edge is in the transitive closure.
inline RecallResult recall(const ClusterSet& clusters, const std::set<RefPair>& known) {
  RecallResult r;
  for (const auto& p : known) {
    if (clusters.same_cluster(p.a, p.b)) ++r.tp; else ++r.fn;
  }
  if (!known.empty()) r.recall = double(r.tp) / double(known.size());
  return r;
}

inline RecallResult recall(const AdjacencyMatrix& edges, const std::set<RefPair>& known) {
  return recall(connected_components(edges), known);
}

/// Over the given edges with both endpoints resolved, an edge is a false
/// positive when the endpoints resolve to different entities.
inline PrecisionResult precision(const AdjacencyMatrix& edges,
                                 const std::map<RefId, std::string>& resolutions) {
  PrecisionResult p;
  for (const auto& e : edges.edges()) {
    auto a = resolutions.find(e.a), b = resolutions.find(e.b);
    if (a == resolutions.end() || b == resolutions.end()) continue;
    ++p.evaluated;
    if (a->second != b->second) ++p.fp;
  }
  if (p.evaluated) p.precision = double(p.evaluated - p.fp) / double(p.evaluated);
  return p;
}

/// The same measure over every clustered-together pair (the closure),
/// counted per cluster without enumerating pairs.
inline PrecisionResult precision(const ClusterSet& clusters,
                                 const std::map<RefId, std::string>& resolutions) {
  PrecisionResult p;
  for (const auto& members : clusters.clusters) {
    std::map<std::string, std::size_t> per_entity;
    std::size_t resolved = 0;
    for (auto r : members) {
      auto it = resolutions.find(r);
      if (it == resolutions.end()) continue;
      ++per_entity[it->second];
      ++resolved;
    }
    std::size_t all = resolved * (resolved - (resolved ? 1 : 0)) / 2;
    std::size_t same = 0;
    for (const auto& [_, n] : per_entity) same += n * (n - 1) / 2;
    p.evaluated += all;
    p.fp += all - same;
  }
  if (p.evaluated) p.precision = double(p.evaluated - p.fp) / double(p.evaluated);
  return p;
}

// ---------------------------------------------------------------------------
// Ground truth available only for generated logs

/// (observed misrecognized top-1, true spoken form) pairs, for requests whose
/// true form also occurs somewhere in the log.
inline std::set<RefPair> ground_truth_pairs(const RequestLog& log, const Catalog& catalog) {
  std::set<RefPair> out;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& req = log.requests()[i];
    if (!req.true_entity) continue;
    const Entity* e = catalog.find(*req.true_entity);
    if (!e || req.top1() == e->spoken_form) continue;
    if (auto t = log.find(e->spoken_form)) out.insert(RefPair::of(log.top1(i), *t));
  }
  return out;
}

/// reference -> the entity whose requests produced it most often (any
/// n-best rank); ties go to the smaller entity id.
inline std::map<RefId, std::string> ground_truth_resolutions(const RequestLog& log) {
  std::vector<std::map<std::string, std::size_t>> votes(log.reference_count());
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& req = log.requests()[i];
    if (!req.true_entity) continue;
    for (auto r : log.nbest_ids(i)) ++votes[r][*req.true_entity];
  }
  std::map<RefId, std::string> out;
  for (RefId r = 0; r < votes.size(); ++r) {
    if (votes[r].empty()) continue;
    auto best = votes[r].begin();
    for (auto it = votes[r].begin(); it != votes[r].end(); ++it) {
      if (it->second > best->second) best = it;
    }
    out.emplace(r, best->first);
  }
  return out;
}

/// Character-edit nearest-input baseline over misrecognized requests.
inline EvalReport edit_baseline_report(const RequestLog& log, const Catalog& catalog,
                                       std::string dataset) {
  std::vector<std::string> inputs;
  for (const auto& e : catalog.entities()) inputs.push_back(e.spoken_form);
  std::vector<ObservedOutput> outputs;
  for (const auto& req : log.requests()) {
    if (!req.true_entity) continue;
    const auto idx = catalog.index_of(*req.true_entity);
    if (!idx || req.top1() == inputs[*idx]) continue;
    outputs.push_back({req.top1(), *idx});
  }
  const auto rep = edit_baseline_match(outputs, inputs);
  EvalReport e;
  e.dataset = std::move(dataset);
  e.model = "Edit similarity";
  e.tp = rep.total.tp;
  e.fp = rep.total.fp;
  e.fn = rep.total.fn;
  e.evaluated = outputs.size();
  if (!outputs.empty()) {
    e.recall = rep.recall();
    e.precision = rep.precision();
    e.f1 = refdedup::f1(*e.precision, *e.recall);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Simulated shallow fusion

enum class WerScope { full, modeled_only, unmodeled_only };

inline const char* to_string(WerScope s) {
  switch (s) {
    case WerScope::full: return "full";
    case WerScope::modeled_only: return "modeled only";
    case WerScope::unmodeled_only: return "unmodeled only";
  }
  return "?";
}

struct FusionParams {
  double boost_strength = 1.5;
  double rank_gap = 1.0;          // mean acoustic score drop per n-best rank
  // Gaps between adjacent ranks are exponential with mean rank_gap, drawn
  // per request from this seed; false gives every gap exactly rank_gap.
  bool random_gaps = true;
  std::uint64_t seed = 0x5f0;
  double distance_penalty = 4.0;  // per unit of normalized character distance
  bool out_of_list = true;        // biased phrases may replace hypotheses not in the n-best
};

struct WerReport {
  std::string source;
  WerScope scope = WerScope::full;
  double relative_wer_percent = 0.0;
  double base_wer = 0.0;
  double biased_wer = 0.0;
  std::size_t requests = 0;
  std::size_t reference_words = 0;
  std::size_t changed = 0;  // requests whose emitted top-1 changed
};

/// Rescores every in-scope request's n-best with the biasing list and
/// measures word errors against the true spoken form. Hypothesis scores fall
/// by one gap per rank; a biased phrase gains weight * boost_strength; a
/// biased phrase missing from the n-best enters one gap below the last rank
/// with a penalty for its character distance to the top-1. The highest score
/// wins, earlier ranks win ties.
///
/// `modeled` holds the reference ids that scope the modeled/unmodeled
/// subsets (a request is modeled when its top-1 is in the set).
inline WerReport simulate_wer(const RequestLog& log, const Catalog& catalog,
                              const BiasingList& biasing, const FusionParams& params,
                              WerScope scope = WerScope::full,
                              const std::unordered_set<RefId>* modeled = nullptr,
                              std::string source = {}) {
  if (params.boost_strength < 0.0) throw std::invalid_argument("simulate_wer: negative boost_strength");
  if (scope != WerScope::full && !modeled)
    throw std::invalid_argument("simulate_wer: scoped replay needs the modeled reference set");
  std::unordered_map<std::string, double> boost;
  for (const auto& e : biasing.entries) {
    double& b = boost[e.canonical];
    b = std::max(b, e.weight * params.boost_strength);
  }

  WerReport rep;
  rep.source = std::move(source);
  rep.scope = scope;
  std::size_t base_err = 0, biased_err = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& req = log.requests()[i];
    if (!req.true_entity) throw std::invalid_argument("simulate_wer: request without true_entity");
    if (scope != WerScope::full) {
      const bool in = modeled->count(log.top1(i)) > 0;
      if (in != (scope == WerScope::modeled_only)) continue;
    }
    const Entity* e = catalog.find(*req.true_entity);
    if (!e) throw std::invalid_argument("simulate_wer: unknown entity '" + *req.true_entity + "'");

    const std::string* emitted = &req.nbest.front();
    if (!boost.empty() && params.boost_strength > 0.0) {
      std::vector<double> acoustic(req.nbest.size() + 1, 0.0);
      Rng gaps = Rng::derive(params.seed, i);
      for (std::size_t k = 1; k < acoustic.size(); ++k) {
        const double g = params.random_gaps ? -params.rank_gap * std::log1p(-gaps.uniform()) : params.rank_gap;
        acoustic[k] = acoustic[k - 1] - g;
      }
      double best = -1e300;
      for (std::size_t k = 0; k < req.nbest.size(); ++k) {
        double s = acoustic[k];
        if (auto it = boost.find(req.nbest[k]); it != boost.end()) s += it->second;
        if (s > best) {
          best = s;
          emitted = &req.nbest[k];
        }
      }
      if (params.out_of_list) {
        const double floor = acoustic.back();
        const std::string& top = req.nbest.front();
        for (const auto& entry : biasing.entries) {
          const double b = boost[entry.canonical];
          if (floor + b <= best) continue;
          if (std::find(req.nbest.begin(), req.nbest.end(), entry.canonical) != req.nbest.end())
            continue;
          const double len = double(std::max(top.size(), entry.canonical.size()));
          const double lower = double(top.size() > entry.canonical.size()
                                          ? top.size() - entry.canonical.size()
                                          : entry.canonical.size() - top.size()) / len;
          if (floor + b - params.distance_penalty * lower <= best) continue;
          const double d = double(edit_distance(top, entry.canonical)) / len;
          const double s = floor + b - params.distance_penalty * d;
          if (s > best) {
            best = s;
            emitted = &entry.canonical;
          }
        }
      }
    }
    const std::size_t words = tokenize(e->spoken_form).size();
    rep.reference_words += words;
    ++rep.requests;
    base_err += word_edit_distance(req.nbest.front(), e->spoken_form);
    biased_err += word_edit_distance(*emitted, e->spoken_form);
    if (*emitted != req.nbest.front()) ++rep.changed;
  }
  if (rep.reference_words) {
    rep.base_wer = double(base_err) / double(rep.reference_words);
    rep.biased_wer = double(biased_err) / double(rep.reference_words);
  }
  if (base_err > 0) {
    rep.relative_wer_percent = 100.0 * (double(biased_err) - double(base_err)) / double(base_err);
  }
  return rep;
}

}  // namespace refdedup
