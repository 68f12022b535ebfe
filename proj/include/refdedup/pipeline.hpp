#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "refdedup/clustering.hpp"
#include "refdedup/comparison.hpp"
#include "refdedup/corpus.hpp"
#include "refdedup/distribution.hpp"
#include "refdedup/evaluation.hpp"
#include "refdedup/similarity.hpp"

namespace refdedup {

enum class DedupVariant { nbest_threshold, classifier };

struct PipelineConfig {
  CatalogConfig catalog;
  ProfileConfig profiles;
  CorpusConfig corpus;

  bool item_features = false;
  double item_floor = 0.3;  // item-matrix entries below this are not stored
  std::size_t min_requesters = 1;
  TimeWindow window;

  DedupVariant variant = DedupVariant::nbest_threshold;
  ModelKind model_kind = ModelKind::tree;
  Hyperparameters hyper;
  double split_ratio = 0.8;

  std::size_t min_support = 3;
  std::size_t budget = 50;
  BiasingOptions biasing;
  FusionParams fusion;
  std::uint64_t seed = 42;

  /// Re-derives every component seed from one top-level seed.
  void reseed(std::uint64_t s) {
    seed = s;
    catalog.seed = Rng::mix(s ^ 0x1);
    profiles.seed = Rng::mix(s ^ 0x2);
    corpus.seed = Rng::mix(s ^ 0x3);
    hyper.seed = Rng::mix(s ^ 0x4);
  }
};

/// 900 entities, nine voices, one utterance per (entity, voice), n = 5.
inline PipelineConfig public_preset(std::uint64_t seed = 42) {
  PipelineConfig c;
  c.catalog.size = 900;
  c.catalog.zipf_exponent = 0.0;
  c.catalog.name_fraction = 0.8;
  c.profiles.count = 9;
  c.profiles.confusable_fraction = 0.6;
  c.profiles.known_word_confusable_fraction = 0.6;
  c.profiles.max_confusables = 2;
  c.profiles.substitution_rate = 0.8;
  c.profiles.deletion_rate = 0.05;
  c.profiles.insertion_rate = 0.03;
  c.profiles.real_word_rate = 0.1;
  c.profiles.misheard_rate = 0.8;
  c.profiles.respelling_rate = 0.9;
  c.corpus.mode = SamplingMode::exhaustive;
  c.corpus.nbest_size = 5;
  c.corpus.recovery_probability = 0.9;
  c.corpus.click_rate_correct = 0.8;
  c.corpus.click_rate_misrecognized = 0.3;
  c.corpus.repeat_rate = 0.0;
  c.item_features = false;
  c.variant = DedupVariant::nbest_threshold;
  c.model_kind = ModelKind::threshold;
  c.reseed(seed);
  return c;
}

/// The public corpus with two hypotheses per utterance and a wider error
/// distribution: more confusable tokens, more drops, and a true form that
/// survives into the short list less often.
inline PipelineConfig public_short_nbest_preset(std::uint64_t seed = 42) {
  PipelineConfig c = public_preset(seed);
  c.corpus.nbest_size = 2;
  c.corpus.recovery_probability = 0.8;
  c.profiles.confusable_fraction = 0.75;
  c.profiles.known_word_confusable_fraction = 0.75;
  c.profiles.deletion_rate = 0.08;
  c.profiles.insertion_rate = 0.05;
  return c;
}

/// Traffic-like log: Zipfian popularity, small user communities around
/// favorite titles, one voice per user, n = 2, click and repeat feedback.
/// Invented names are confused far more often than vocabulary words, and the
/// recognizer mishears each of them the same way for every voice.
inline PipelineConfig live_preset(std::uint64_t seed = 42) {
  PipelineConfig c;
  c.catalog.size = 400;
  c.catalog.zipf_exponent = 0.9;
  c.catalog.name_fraction = 0.5;
  c.profiles.count = 9;
  c.profiles.confusable_fraction = 0.7;
  c.profiles.known_word_confusable_fraction = 0.02;
  c.profiles.max_confusables = 2;
  c.profiles.substitution_rate = 0.8;
  c.profiles.deletion_rate = 0.05;
  c.profiles.insertion_rate = 0.03;
  c.profiles.real_word_rate = 0.1;
  c.profiles.misheard_rate = 0.6;
  c.profiles.respelling_rate = 0.9;
  c.profiles.shared_confusable_fraction = 1.0;
  c.corpus.mode = SamplingMode::sampled;
  c.corpus.users = 6000;
  c.corpus.min_requests_per_user = 4;
  c.corpus.mean_extra_requests = 6.0;
  c.corpus.nbest_size = 2;
  c.corpus.recovery_probability = 0.6;
  c.corpus.click_rate_correct = 0.85;
  c.corpus.click_rate_misrecognized = 0.4;
  c.corpus.repeat_rate = 0.1;
  c.corpus.repeat_clarity = 0.4;
  c.corpus.communities = 100;
  c.corpus.community_affinity = 0.05;
  c.corpus.favorites_per_user = 1;
  c.corpus.favorite_affinity = 0.9;
  c.item_features = true;
  c.variant = DedupVariant::nbest_threshold;
  c.model_kind = ModelKind::threshold;
  c.budget = 50;
  c.reseed(seed);
  return c;
}

struct Corpus {
  Catalog catalog;
  std::vector<CorruptionProfile> profiles;
  RequestLog log;
};

inline Corpus build_corpus(const PipelineConfig& cfg) {
  Corpus c;
  c.catalog = make_synthetic_catalog(cfg.catalog);
  c.profiles = make_voice_profiles(c.catalog, cfg.profiles);
  c.log = generate_corpus(c.catalog, c.profiles, cfg.corpus);
  return c;
}

/// Feature matrices for one log. Not copyable: lookup() hands out pointers
/// into this object.
struct Features {
  SimilarityMatrix cooccurrence;
  std::optional<HistoryIndex> history;
  std::optional<SimilarityMatrix> item;

  Features() = default;
  Features(const Features&) = delete;
  Features& operator=(const Features&) = delete;

  FeatureLookup lookup() const {
    return FeatureLookup(cooccurrence, item ? &*item : nullptr, history ? &*history : nullptr);
  }
};

inline std::unique_ptr<Features> compute_features(const RequestLog& log, const PipelineConfig& cfg) {
  auto f = std::make_unique<Features>();
  f->cooccurrence = log.empty() ? SimilarityMatrix(0) : nbest_cooccurrence(log);
  if (cfg.item_features) {
    f->history.emplace(log, cfg.window, cfg.min_requesters);
    f->item = f->history->matrix(cfg.item_floor);
  }
  return f;
}

struct Labels {
  std::map<RefId, std::string> resolutions;
  std::vector<LabeledPair> pairs;
  TrainTestSplit split;
};

inline Labels mine_labels(const RequestLog& log, const Features& features, const PipelineConfig& cfg) {
  Labels l;
  l.resolutions = mine_click_resolutions(log);
  l.pairs = build_training_set(l.resolutions, features.lookup(), Rng::mix(cfg.seed ^ 0x5));
  l.split = split_train_test(l.pairs, cfg.split_ratio, Rng::mix(cfg.seed ^ 0x6));
  return l;
}

struct DedupResult {
  ComparisonModel model;
  AdjacencyMatrix edges;
  ClusterSet clusters;
};

/// n-best-only variant: cut tuned on the training split, edges by
/// thresholding c. Classifier variant: edges from the model's labels.
inline DedupResult run_dedup(const RequestLog& log, const Features& features,
                             const ComparisonModel& model) {
  DedupResult d;
  d.model = model;
  if (model.kind == ModelKind::threshold) {
    d.edges = threshold_adjacency(features.cooccurrence, model.cut);
  } else {
    d.edges = classifier_adjacency(model, make_block(log), features.lookup(), log.reference_count());
  }
  d.clusters = connected_components(d.edges);
  return d;
}

inline ComparisonModel fit_model(const PipelineConfig& cfg, const Labels& labels, ModelKind kind) {
  return train(kind, labels.split.train, cfg.hyper);
}

inline EvalReport evaluate_ground_truth(const RequestLog& log, const Catalog& catalog,
                                        const ClusterSet& clusters, std::string dataset,
                                        std::string model) {
  return EvalReport::combine(std::move(dataset), std::move(model),
                             recall(clusters, ground_truth_pairs(log, catalog)),
                             precision(clusters, ground_truth_resolutions(log)));
}

inline EvalReport evaluate_feedback(const RequestLog& log, const ClusterSet& clusters,
                                    std::size_t min_support, std::string dataset,
                                    std::string model) {
  return EvalReport::combine(std::move(dataset), std::move(model),
                             recall(clusters, mine_repeat_pairs(log, min_support)),
                             precision(clusters, mine_click_resolutions(log)));
}

/// Members of the clusters that made it into a biasing list.
inline std::unordered_set<RefId> modeled_references(const BiasingList& list, const ClusterSet& clusters) {
  std::unordered_set<RefId> out;
  for (const auto& e : list.entries) {
    if (!e.cluster_id) continue;
    for (auto r : clusters.clusters[*e.cluster_id]) out.insert(r);
  }
  return out;
}

}  // namespace refdedup
