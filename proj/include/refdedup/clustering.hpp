#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "refdedup/comparison.hpp"
#include "refdedup/corpus.hpp"
#include "refdedup/similarity.hpp"

namespace refdedup {

/// Every reference of the log in one block, in id order.
inline std::vector<RefId> make_block(const RequestLog& log) {
  std::vector<RefId> block(log.reference_count());
  std::iota(block.begin(), block.end(), RefId{0});
  return block;
}

/// One block per distinct key of `partition` (e.g. an entity class from an
/// upstream tagger). Blocks are ordered by key.
inline std::vector<std::vector<RefId>> make_blocks(
    const RequestLog& log, const std::function<std::string(RefId, const std::string&)>& partition) {
  std::map<std::string, std::vector<RefId>> by_key;
  for (RefId r = 0; r < log.reference_count(); ++r) {
    by_key[partition(r, log.reference(r))].push_back(r);
  }
  std::vector<std::vector<RefId>> out;
  for (auto& [_, refs] : by_key) out.push_back(std::move(refs));
  return out;
}

/// Undirected edge set without self-loops, kept sorted and unique.
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(std::size_t dimension = 0) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  const std::vector<RefPair>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

  void add(RefId i, RefId j) {
    if (i == j) throw std::invalid_argument("AdjacencyMatrix: self-edge");
    if (i >= dimension_ || j >= dimension_) throw std::out_of_range("AdjacencyMatrix: index");
    edges_.push_back(RefPair::of(i, j));
    sorted_ = false;
  }

  void finalize() {
    if (sorted_) return;
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    sorted_ = true;
  }

  bool contains(RefId i, RefId j) const {
    return std::binary_search(edges_.begin(), edges_.end(), RefPair::of(i, j));
  }

  static AdjacencyMatrix complete(std::span<const RefId> nodes, std::size_t dimension) {
    AdjacencyMatrix a(dimension);
    for (std::size_t x = 0; x < nodes.size(); ++x) {
      for (std::size_t y = x + 1; y < nodes.size(); ++y) a.add(nodes[x], nodes[y]);
    }
    a.finalize();
    return a;
  }

 private:
  std::size_t dimension_;
  std::vector<RefPair> edges_;
  bool sorted_ = true;
};

/// Edge (i, j) iff s_ij >= tau. Absent entries score 0, so tau = 0 yields
/// the complete graph.
inline AdjacencyMatrix threshold_adjacency(const SimilarityMatrix& s, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("threshold_adjacency: tau outside [0,1]");
  if (tau == 0.0) {
    std::vector<RefId> all(s.dimension());
    std::iota(all.begin(), all.end(), RefId{0});
    return AdjacencyMatrix::complete(all, s.dimension());
  }
  AdjacencyMatrix a(s.dimension());
  s.for_each([&](RefPair p, double score) {
    if (score >= tau) a.add(p.a, p.b);
  });
  a.finalize();
  return a;
}

/// Edge iff the model links the pair. Pairs absent from both feature
/// matrices have features (0, 0) and are only linked if the model links
/// (0, 0), in which case the block is complete.
inline AdjacencyMatrix classifier_adjacency(const ComparisonModel& model, std::span<const RefId> block,
                                            const FeatureLookup& features, std::size_t dimension) {
  if (model.classify({0.0, 0.0}) == 1) return AdjacencyMatrix::complete(block, dimension);
  std::vector<char> in_block(dimension, 0);
  for (auto r : block) in_block[r] = 1;
  std::unordered_set<std::uint64_t> candidates;
  auto collect = [&](const SimilarityMatrix& m) {
    m.for_each([&](RefPair p, double) {
      if (in_block[p.a] && in_block[p.b]) candidates.insert(p.key());
    });
  };
  collect(features.cooccurrence());
  if (features.item()) collect(*features.item());
  AdjacencyMatrix a(dimension);
  for (auto key : candidates) {
    const RefPair p = RefPair::from_key(key);
    if (model.classify(features(p.a, p.b)) == 1) a.add(p.a, p.b);
  }
  a.finalize();
  return a;
}

/// Partition of reference ids. Clusters are ordered by their smallest member
/// and members are sorted.
struct ClusterSet {
  std::vector<std::vector<RefId>> clusters;
  std::vector<std::uint32_t> cluster_of;

  std::size_t size() const { return clusters.size(); }
  bool same_cluster(RefId a, RefId b) const { return cluster_of[a] == cluster_of[b]; }

  static ClusterSet from_labels(const std::vector<std::uint32_t>& root_of) {
    ClusterSet cs;
    cs.cluster_of.assign(root_of.size(), 0);
    std::map<std::uint32_t, std::uint32_t> remap;
    for (RefId r = 0; r < root_of.size(); ++r) {
      auto [it, inserted] = remap.try_emplace(root_of[r], static_cast<std::uint32_t>(cs.clusters.size()));
      if (inserted) cs.clusters.emplace_back();
      cs.clusters[it->second].push_back(r);
      cs.cluster_of[r] = it->second;
    }
    return cs;
  }
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

inline ClusterSet connected_components(const AdjacencyMatrix& a) {
  UnionFind uf(a.dimension());
  for (const auto& e : a.edges()) uf.unite(e.a, e.b);
  std::vector<std::uint32_t> root(a.dimension());
  for (RefId r = 0; r < a.dimension(); ++r) root[r] = uf.find(r);
  return ClusterSet::from_labels(root);
}

/// Threshold maximizing pairwise F1 of (s_ij >= tau) on labeled pairs.
/// Self-pairs score 1.
inline double tune_threshold(const SimilarityMatrix& s, std::span<const LabeledPair> labeled) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(labeled.size());
  for (const auto& p : labeled) {
    scores.push_back(p.ref_a == p.ref_b ? 1.0 : s.get(p.ref_a, p.ref_b));
    labels.push_back(p.label);
  }
  return best_f1_cut(scores, labels).cut;
}

/// Paths a-b-c with edges a~b and b~c but no a~c. Components merge these
/// silently; the count is reported as a diagnostic.
inline std::uint64_t count_intransitive_triples(const AdjacencyMatrix& a) {
  std::vector<std::vector<RefId>> nbr(a.dimension());
  for (const auto& e : a.edges()) {
    nbr[e.a].push_back(e.b);
    nbr[e.b].push_back(e.a);
  }
  std::uint64_t open = 0;
  for (RefId v = 0; v < a.dimension(); ++v) {
    const auto& n = nbr[v];
    for (std::size_t x = 0; x < n.size(); ++x) {
      for (std::size_t y = x + 1; y < n.size(); ++y) {
        if (!a.contains(n[x], n[y])) ++open;
      }
    }
  }
  return open;
}

}  // namespace refdedup
