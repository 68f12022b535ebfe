#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "refdedup/clustering.hpp"
#include "refdedup/corpus.hpp"

namespace refdedup {

/// p_r: share of requests whose top-1 is r. References that only appear at
/// lower n-best ranks get 0.
inline std::vector<double> reference_probabilities(const RequestLog& log) {
  if (log.empty()) throw std::invalid_argument("reference_probabilities: empty log");
  std::vector<std::uint64_t> counts(log.reference_count(), 0);
  for (std::size_t i = 0; i < log.size(); ++i) ++counts[log.top1(i)];
  std::vector<double> p(counts.size());
  const double n = static_cast<double>(log.size());
  for (std::size_t r = 0; r < counts.size(); ++r) p[r] = static_cast<double>(counts[r]) / n;
  return p;
}

struct EntityDistribution {
  std::vector<double> cluster_mass;    // p_e per cluster id
  std::vector<double> reference_mass;  // p_r per ref id
};

/// p_e = sum of p_r over cluster members, summed in member order.
inline EntityDistribution cluster_distribution(const ClusterSet& clusters,
                                               std::span<const double> p_r) {
  for (std::size_t r = clusters.cluster_of.size(); r < p_r.size(); ++r) {
    if (p_r[r] > 0.0)
      throw std::invalid_argument("cluster_distribution: reference " + std::to_string(r) +
                                  " has mass but no cluster");
  }
  EntityDistribution d;
  d.reference_mass.assign(p_r.begin(), p_r.end());
  d.reference_mass.resize(std::max(p_r.size(), clusters.cluster_of.size()), 0.0);
  d.cluster_mass.reserve(clusters.size());
  for (const auto& members : clusters.clusters) {
    double m = 0.0;
    for (auto r : members) m += d.reference_mass[r];
    d.cluster_mass.push_back(m);
  }
  return d;
}

/// The resolved member with the highest request mass; without resolved
/// members, the highest-mass member. Ties go to the lexicographically
/// smallest string.
inline RefId select_canonical(std::span<const RefId> members,
                              const std::map<RefId, std::string>& resolutions,
                              std::span<const double> p_r,
                              std::span<const std::string> references) {
  if (members.empty()) throw std::invalid_argument("select_canonical: empty cluster");
  auto better = [&](RefId x, RefId y) {
    if (p_r[x] != p_r[y]) return p_r[x] > p_r[y];
    return references[x] < references[y];
  };
  std::optional<RefId> best_resolved, best_any;
  for (auto r : members) {
    if (!best_any || better(r, *best_any)) best_any = r;
    if (resolutions.count(r) && (!best_resolved || better(r, *best_resolved))) best_resolved = r;
  }
  return best_resolved ? *best_resolved : *best_any;
}

struct BiasEntry {
  std::string canonical;
  double weight = 0.0;
  std::optional<std::uint32_t> cluster_id;
  double misrecognized_mass = 0.0;
};

struct BiasingList {
  std::vector<BiasEntry> entries;
  std::size_t budget = 0;
};

struct BiasingOptions {
  double weight_cap = 1.0;
  // Only clusters with at least one click-resolved member carry a trusted
  // entity name; clusters made purely of unresolved references are skipped.
  bool require_resolved_canonical = true;
};

/// Clusters ranked by misrecognized mass (sum of p_r over members without a
/// click resolution), top k emitted under their canonical names. Weights are
/// proportional to misrecognized mass with the largest equal to the cap.
inline BiasingList select_biasing_entities(const EntityDistribution& dist, const ClusterSet& clusters,
                                           const std::map<RefId, std::string>& resolutions,
                                           std::span<const std::string> references, std::size_t k,
                                           const BiasingOptions& opt = {}) {
  if (k == 0) throw std::invalid_argument("select_biasing_entities: k must be at least 1");
  struct Candidate {
    std::uint32_t cluster;
    double mass;
  };
  std::vector<Candidate> ranked;
  for (std::uint32_t c = 0; c < clusters.size(); ++c) {
    double miss = 0.0;
    bool any_resolved = false;
    for (auto r : clusters.clusters[c]) {
      if (resolutions.count(r)) any_resolved = true;
      else miss += dist.reference_mass[r];
    }
    if (miss <= 0.0) continue;
    if (opt.require_resolved_canonical && !any_resolved) continue;
    ranked.push_back({c, miss});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Candidate& x, const Candidate& y) {
    return x.mass > y.mass;
  });
  if (ranked.size() > k) ranked.resize(k);

  BiasingList list;
  list.budget = k;
  if (ranked.empty()) return list;
  const double top = ranked.front().mass;
  for (const auto& cand : ranked) {
    const RefId canon = select_canonical(clusters.clusters[cand.cluster], resolutions,
                                         dist.reference_mass, references);
    list.entries.push_back({references[canon], opt.weight_cap * cand.mass / top, cand.cluster,
                            cand.mass});
  }
  return list;
}

/// The k most frequent raw top-1 references, no deduplication.
inline BiasingList topk_mentions_baseline(const RequestLog& log, std::size_t k,
                                          double weight_cap = 1.0) {
  if (k == 0) throw std::invalid_argument("topk_mentions_baseline: k must be at least 1");
  const auto p = reference_probabilities(log);
  std::vector<RefId> order;
  for (RefId r = 0; r < p.size(); ++r) {
    if (p[r] > 0.0) order.push_back(r);
  }
  std::sort(order.begin(), order.end(), [&](RefId x, RefId y) {
    if (p[x] != p[y]) return p[x] > p[y];
    return log.reference(x) < log.reference(y);
  });
  if (order.size() > k) order.resize(k);
  BiasingList list;
  list.budget = k;
  if (order.empty()) return list;
  const double top = p[order.front()];
  for (auto r : order) {
    list.entries.push_back({log.reference(r), weight_cap * p[r] / top, std::nullopt, 0.0});
  }
  return list;
}

}  // namespace refdedup
