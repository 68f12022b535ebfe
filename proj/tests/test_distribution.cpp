#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "refdedup/distribution.hpp"
#include "refdedup/pipeline.hpp"

using namespace refdedup;

namespace {

RequestLog top1_log(const std::vector<std::string>& tops) {
  std::vector<Request> reqs;
  for (const auto& t : tops) {
    Request r;
    r.user_id = "u";
    r.timestamp = std::int64_t(reqs.size());
    r.nbest = {t};
    reqs.push_back(r);
  }
  return RequestLog(reqs);
}

ClusterSet singletons(std::size_t n) {
  std::vector<std::uint32_t> labels(n);
  std::iota(labels.begin(), labels.end(), 0u);
  return ClusterSet::from_labels(labels);
}

ClusterSet one_cluster(std::size_t n) { return ClusterSet::from_labels(std::vector<std::uint32_t>(n, 0)); }

}  // namespace

TEST(ReferenceProbabilities, Examples) {
  const auto single = reference_probabilities(top1_log({"a"}));
  EXPECT_EQ(single, std::vector<double>{1.0});
  const auto log = top1_log({"A", "A", "B", "C"});
  const auto p = reference_probabilities(log);
  EXPECT_DOUBLE_EQ(p[*log.find("A")], 0.5);
  EXPECT_DOUBLE_EQ(p[*log.find("B")], 0.25);
  EXPECT_DOUBLE_EQ(p[*log.find("C")], 0.25);
  EXPECT_THROW(reference_probabilities(RequestLog{}), std::invalid_argument);
}

TEST(ReferenceProbabilities, OnlyTopOneCounts) {
  Request r;
  r.user_id = "u";
  r.nbest = {"a", "b"};
  const RequestLog log({r});
  EXPECT_EQ(reference_probabilities(log), (std::vector<double>{1.0, 0.0}));
}

TEST(ClusterDistribution, Examples) {
  const std::vector<double> p = {0.2, 0.3, 0.5};
  EXPECT_NEAR(cluster_distribution(one_cluster(3), p).cluster_mass.at(0), 1.0, 1e-12);
  const auto pair = cluster_distribution(ClusterSet::from_labels({0, 0, 1}), p);
  EXPECT_DOUBLE_EQ(pair.cluster_mass[0], 0.5);
  EXPECT_EQ(cluster_distribution(singletons(3), p).cluster_mass, p);
  EXPECT_THROW(cluster_distribution(singletons(2), p), std::invalid_argument);
}

TEST(ClusterDistribution, ConservationAndAdditivity) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (auto cfg : {public_preset(seed), live_preset(seed)}) {
      cfg.corpus.users = 400;
      const Corpus c = build_corpus(cfg);
      const auto p = reference_probabilities(c.log);
      EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
      const auto f = compute_features(c.log, cfg);
      const auto clusters = connected_components(threshold_adjacency(f->cooccurrence, 0.3));
      const auto d = cluster_distribution(clusters, p);
      EXPECT_NEAR(std::accumulate(d.cluster_mass.begin(), d.cluster_mass.end(), 0.0), 1.0, 1e-9);

      // Merging clusters 0 and 1 adds their masses.
      if (clusters.size() < 2) continue;
      std::vector<std::uint32_t> labels = clusters.cluster_of;
      for (auto& l : labels) if (l == 1) l = 0;
      const auto merged = cluster_distribution(ClusterSet::from_labels(labels), p);
      EXPECT_NEAR(merged.cluster_mass[0], d.cluster_mass[0] + d.cluster_mass[1], 1e-15);
    }
  }
}

TEST(SelectCanonical, Examples) {
  const std::vector<std::string> refs = {"archive eighty one", "arcade eighty one", "x", "y"};
  const std::vector<double> p = {0.1, 0.3, 0.2, 0.1};
  const std::map<RefId, std::string> res = {{0, "e1"}, {2, "e2"}, {3, "e2"}};
  const std::vector<RefId> arch = {0, 1};
  EXPECT_EQ(select_canonical(arch, res, p, refs), 0u);
  const std::vector<RefId> single = {1};
  EXPECT_EQ(select_canonical(single, res, p, refs), 1u);
  const std::vector<RefId> two = {2, 3};
  EXPECT_EQ(select_canonical(two, res, p, refs), 2u);
  const std::vector<RefId> unresolved = {1};
  EXPECT_EQ(select_canonical(unresolved, {}, p, refs), 1u);
  EXPECT_THROW(select_canonical(std::vector<RefId>{}, res, p, refs), std::invalid_argument);
}

namespace {

// Clusters {0,1}, {2,3}, {4,5}, {6}: even members resolved, odd members
// carry the misrecognized mass.
struct BiasCase {
  std::vector<std::string> refs = {"a", "a2", "b", "b2", "c", "c2", "d"};
  std::vector<double> p = {0.1, 0.3, 0.2, 0.1, 0.2, 0.05, 0.05};
  std::map<RefId, std::string> res = {{0, "A"}, {2, "B"}, {4, "C"}, {6, "D"}};
  ClusterSet clusters = ClusterSet::from_labels({0, 0, 1, 1, 2, 2, 3});
};

}  // namespace

TEST(SelectBiasingEntities, RankedByMisrecognizedMass) {
  BiasCase b;
  const auto d = cluster_distribution(b.clusters, b.p);
  const auto list = select_biasing_entities(d, b.clusters, b.res, b.refs, 2);
  ASSERT_EQ(list.entries.size(), 2u);
  EXPECT_EQ(list.entries[0].canonical, "a");
  EXPECT_EQ(list.entries[1].canonical, "b");
  EXPECT_DOUBLE_EQ(list.entries[0].misrecognized_mass, 0.3);
  EXPECT_DOUBLE_EQ(list.entries[0].weight, 1.0);
  EXPECT_NEAR(list.entries[1].weight, 1.0 / 3.0, 1e-12);

  // Larger k returns every qualifying cluster; D has no misrecognized mass.
  EXPECT_EQ(select_biasing_entities(d, b.clusters, b.res, b.refs, 10).entries.size(), 3u);
  EXPECT_THROW(select_biasing_entities(d, b.clusters, b.res, b.refs, 0), std::invalid_argument);
}

TEST(SelectBiasingEntities, NothingMisrecognized) {
  BiasCase b;
  std::map<RefId, std::string> all;
  for (RefId r = 0; r < b.refs.size(); ++r) all[r] = "E" + std::to_string(r);
  const auto d = cluster_distribution(b.clusters, b.p);
  EXPECT_TRUE(select_biasing_entities(d, b.clusters, all, b.refs, 5).entries.empty());
}

TEST(SelectBiasingEntities, ResolvedCanonicalRequirement) {
  BiasCase b;
  b.res.erase(0);
  const auto d = cluster_distribution(b.clusters, b.p);
  const auto strict = select_biasing_entities(d, b.clusters, b.res, b.refs, 5);
  for (const auto& e : strict.entries) EXPECT_NE(e.cluster_id, 0u);
  BiasingOptions loose;
  loose.require_resolved_canonical = false;
  const auto all = select_biasing_entities(d, b.clusters, b.res, b.refs, 5, loose);
  EXPECT_EQ(all.entries.front().cluster_id, 0u);
  EXPECT_EQ(all.entries.front().canonical, "a2");
}

TEST(SelectBiasingEntities, ScaleInvariantAndBounded) {
  Rng rng(41);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + rng.below(30);
    std::vector<std::string> refs;
    std::vector<double> p;
    std::vector<std::uint32_t> labels;
    std::map<RefId, std::string> res;
    for (RefId r = 0; r < n; ++r) {
      refs.push_back("r" + std::to_string(r));
      p.push_back(rng.uniform());
      labels.push_back(std::uint32_t(rng.below(n / 2 + 1)));
      if (rng.bernoulli(0.5)) res[r] = "e";
    }
    const auto cs = ClusterSet::from_labels(labels);
    const std::size_t k = 1 + rng.below(6);
    const auto base = select_biasing_entities(cluster_distribution(cs, p), cs, res, refs, k);
    ASSERT_LE(base.entries.size(), k);
    std::vector<double> scaled = p;
    for (auto& x : scaled) x *= 7.25;
    const auto other = select_biasing_entities(cluster_distribution(cs, scaled), cs, res, refs, k);
    ASSERT_EQ(base.entries.size(), other.entries.size());
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
      ASSERT_EQ(base.entries[i].cluster_id, other.entries[i].cluster_id);
      ASSERT_EQ(base.entries[i].canonical, other.entries[i].canonical);
      ASSERT_NEAR(base.entries[i].weight, other.entries[i].weight, 1e-12);
    }
  }
}

TEST(TopkMentions, Counts) {
  std::vector<std::string> tops;
  for (int i = 0; i < 5; ++i) tops.push_back("A");
  for (int i = 0; i < 3; ++i) tops.push_back("B");
  tops.push_back("C");
  const auto log = top1_log(tops);
  const auto one = topk_mentions_baseline(log, 1);
  ASSERT_EQ(one.entries.size(), 1u);
  EXPECT_EQ(one.entries[0].canonical, "A");
  const auto two = topk_mentions_baseline(log, 2);
  ASSERT_EQ(two.entries.size(), 2u);
  EXPECT_EQ(two.entries[1].canonical, "B");
  EXPECT_DOUBLE_EQ(two.entries[1].weight, 0.6);
  EXPECT_FALSE(two.entries[0].cluster_id.has_value());
}

TEST(TopkMentions, CanPickAMisrecognition) {
  // The garbled form outweighs the correct one, and nothing filters it out.
  const auto log = top1_log({"arkive", "arkive", "arkive", "archive"});
  EXPECT_EQ(topk_mentions_baseline(log, 1).entries[0].canonical, "arkive");
}
