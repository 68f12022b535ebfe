#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "refdedup/corpus.hpp"
#include "refdedup/rng.hpp"
#include "refdedup/similarity.hpp"

namespace refdedup {

struct PairFeatures {
  double c = 0.0;  // n-best cooccurrence
  double u = 0.0;  // item similarity
};

struct LabeledPair {
  RefId ref_a = 0;
  RefId ref_b = 0;
  PairFeatures features;
  int label = 0;
};

/// Feature values for arbitrary pairs. Item similarity is optional; without
/// it every pair gets u = 0. Pairs missing from the item matrix (cold or
/// below its floor) fall back to the exact history cosine when a history
/// index is attached.
class FeatureLookup {
 public:
  FeatureLookup(const SimilarityMatrix& cooccurrence, const SimilarityMatrix* item = nullptr,
                const HistoryIndex* history = nullptr)
      : cooccurrence_(&cooccurrence), item_(item), history_(history) {}

  PairFeatures operator()(RefId a, RefId b) const {
    if (a == b) {
      double u = 0.0;
      if (history_) u = history_->similarity(a, a);
      else if (item_) u = 1.0;
      return {1.0, u};
    }
    PairFeatures f{cooccurrence_->get(a, b), 0.0};
    if (item_) f.u = item_->get(a, b);
    if (f.u == 0.0 && history_) f.u = history_->similarity(a, b);
    return f;
  }

  const SimilarityMatrix& cooccurrence() const { return *cooccurrence_; }
  const SimilarityMatrix* item() const { return item_; }

 private:
  const SimilarityMatrix* cooccurrence_;
  const SimilarityMatrix* item_;
  const HistoryIndex* history_;
};

/// Balanced weak-label set. Positives are every pair of distinct references
/// resolved to the same entity plus one self-pair per resolved reference;
/// the same number of negatives is drawn from pairs resolved to different
/// entities.
inline std::vector<LabeledPair> build_training_set(const std::map<RefId, std::string>& resolutions,
                                                   const FeatureLookup& features,
                                                   std::uint64_t seed) {
  if (resolutions.empty()) throw std::invalid_argument("build_training_set: no resolutions");
  std::vector<RefId> refs;
  std::vector<std::uint32_t> entity_of;
  std::map<std::string, std::uint32_t> entity_ids;
  for (const auto& [r, e] : resolutions) {
    refs.push_back(r);
    entity_of.push_back(entity_ids.try_emplace(e, static_cast<std::uint32_t>(entity_ids.size()))
                            .first->second);
  }
  std::vector<std::vector<std::size_t>> groups(entity_ids.size());
  for (std::size_t i = 0; i < refs.size(); ++i) groups[entity_of[i]].push_back(i);

  std::vector<LabeledPair> out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    out.push_back({refs[i], refs[i], features(refs[i], refs[i]), 1});
  }
  for (const auto& g : groups) {
    for (std::size_t x = 0; x < g.size(); ++x) {
      for (std::size_t y = x + 1; y < g.size(); ++y) {
        const RefId a = refs[g[x]], b = refs[g[y]];
        out.push_back({a, b, features(a, b), 1});
      }
    }
  }
  const std::size_t positives = out.size();

  const std::size_t n = refs.size();
  std::size_t same = 0;
  for (const auto& g : groups) same += g.size() * (g.size() - 1) / 2;
  const std::size_t candidates = n * (n - 1) / 2 - same;
  if (candidates < positives) {
    throw std::invalid_argument("build_training_set: " + std::to_string(candidates) +
                                " candidate negatives for " + std::to_string(positives) +
                                " positives");
  }

  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> negatives;
  if (2 * positives >= candidates) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = x + 1; y < n; ++y) {
        if (entity_of[x] != entity_of[y]) negatives.emplace_back(x, y);
      }
    }
    rng.shuffle(negatives);
    negatives.resize(positives);
  } else {
    std::unordered_set<std::uint64_t> used;
    while (negatives.size() < positives) {
      std::size_t x = rng.below(n), y = rng.below(n);
      if (x == y || entity_of[x] == entity_of[y]) continue;
      if (x > y) std::swap(x, y);
      if (!used.insert((static_cast<std::uint64_t>(x) << 32) | y).second) continue;
      negatives.emplace_back(x, y);
    }
  }
  for (auto [x, y] : negatives) {
    out.push_back({refs[x], refs[y], features(refs[x], refs[y]), 0});
  }
  rng.shuffle(out);
  return out;
}

struct TrainTestSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> test;
};

/// Label-stratified shuffle split.
inline TrainTestSplit split_train_test(std::span<const LabeledPair> pairs, double ratio,
                                       std::uint64_t seed) {
  if (pairs.size() < 5) throw std::invalid_argument("split_train_test: need at least 5 pairs");
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split_train_test: ratio outside (0,1)");
  Rng rng(seed);
  TrainTestSplit s;
  for (int label : {0, 1}) {
    std::vector<LabeledPair> part;
    for (const auto& p : pairs) {
      if (p.label == label) part.push_back(p);
    }
    rng.shuffle(part);
    const auto cut = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(part.size())));
    s.train.insert(s.train.end(), part.begin(), part.begin() + static_cast<std::ptrdiff_t>(cut));
    s.test.insert(s.test.end(), part.begin() + static_cast<std::ptrdiff_t>(cut), part.end());
  }
  rng.shuffle(s.train);
  rng.shuffle(s.test);
  return s;
}

// ---------------------------------------------------------------------------
// Metrics shared by training and threshold tuning

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  double precision() const { return tp + fp ? double(tp) / double(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? double(tp) / double(tp + fn) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  double accuracy() const {
    const auto n = tp + fp + fn + tn;
    return n ? double(tp + tn) / double(n) : 0.0;
  }
};

struct CutChoice {
  double cut = 0.0;
  double f1 = 0.0;
};

/// Cut maximizing F1 of (score >= cut) over midpoints of sorted distinct
/// scores; equal F1 resolves to the higher cut. With a single distinct score
/// the cut is that score.
inline CutChoice best_f1_cut(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("best_f1_cut: size mismatch");
  std::size_t total_pos = 0;
  for (int l : labels) total_pos += l == 1;
  if (total_pos == 0) throw std::invalid_argument("best_f1_cut: no positive labels");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return scores[x] > scores[y];
  });
  // Walk from the highest score down; after consuming every item with score
  // >= s_k, the cut (s_k + s_{k+1}) / 2 predicts exactly those positive.
  std::vector<double> distinct;
  for (auto i : order) {
    if (distinct.empty() || distinct.back() != scores[i]) distinct.push_back(scores[i]);
  }
  if (distinct.size() == 1) {
    const double f = 2.0 * double(total_pos) / double(total_pos + scores.size());
    return {distinct[0], f};
  }
  CutChoice best{0.0, -1.0};
  std::size_t tp = 0, fp = 0, idx = 0;
  for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
    while (idx < order.size() && scores[order[idx]] >= distinct[k]) {
      if (labels[order[idx]] == 1) ++tp; else ++fp;
      ++idx;
    }
    const double f = 2.0 * double(tp) / double(tp + fp + total_pos);
    // Cuts are visited from high to low, so only a strict gain moves down.
    if (f > best.f1) best = {0.5 * (distinct[k] + distinct[k + 1]), f};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Comparison models

enum class ModelKind { threshold, linear, tree, svm };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::threshold: return "threshold";
    case ModelKind::linear: return "linear";
    case ModelKind::tree: return "tree";
    case ModelKind::svm: return "svm";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "threshold") return ModelKind::threshold;
  if (s == "linear") return ModelKind::linear;
  if (s == "tree") return ModelKind::tree;
  if (s == "svm") return ModelKind::svm;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

struct Hyperparameters {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2 = 0.0;
  std::size_t max_depth = 4;
  std::size_t min_leaf = 5;
  double svm_c = 1.0;
  std::size_t svm_epochs = 200;
  std::uint64_t seed = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf; 0 = c, 1 = u
  double threshold = 0.0;  // go left when value < threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // positive fraction at a leaf
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Immutable trained scorer mapping (c, u) to [0,1].
class ComparisonModel {
 public:
  ModelKind kind = ModelKind::threshold;
  double cut = 0.5;                      // threshold
  std::array<double, 2> weights{0, 0};   // linear, svm
  double bias = 0.0;                     // linear, svm
  std::vector<TreeNode> tree;            // tree
  double platt_a = 1.0, platt_b = 0.0;   // svm margin -> probability
  std::vector<double> loss_trace;        // linear: mean log-loss per epoch
  std::uint64_t seed = 0;

  static ComparisonModel make_threshold(double cut) {
    ComparisonModel m;
    m.kind = ModelKind::threshold;
    m.cut = cut;
    return m;
  }

  static ComparisonModel make_linear(std::array<double, 2> w, double b) {
    ComparisonModel m;
    m.kind = ModelKind::linear;
    m.weights = w;
    m.bias = b;
    return m;
  }

  double margin(const PairFeatures& f) const {
    return weights[0] * f.c + weights[1] * f.u + bias;
  }

  double score(const PairFeatures& f) const {
    switch (kind) {
      case ModelKind::threshold: return std::clamp(f.c, 0.0, 1.0);
      case ModelKind::linear: return sigmoid(margin(f));
      case ModelKind::tree: return tree.empty() ? 0.0 : tree[leaf_for(f)].value;
      case ModelKind::svm: return sigmoid(platt_a * margin(f) + platt_b);
    }
    return 0.0;
  }

  /// Score at or above which a pair is linked.
  double boundary() const {
    switch (kind) {
      case ModelKind::threshold: return cut;
      case ModelKind::svm: return sigmoid(platt_b);  // margin 0
      default: return 0.5;
    }
  }

  int classify(const PairFeatures& f) const {
    if (kind == ModelKind::svm) return margin(f) >= 0.0 ? 1 : 0;
    return score(f) >= boundary() ? 1 : 0;
  }

 private:
  std::size_t leaf_for(const PairFeatures& f) const {
    std::size_t n = 0;
    while (tree[n].feature >= 0) {
      const double v = tree[n].feature == 0 ? f.c : f.u;
      n = static_cast<std::size_t>(v < tree[n].threshold ? tree[n].left : tree[n].right);
    }
    return n;
  }
};

inline ConfusionCounts evaluate_model(const ComparisonModel& m, std::span<const LabeledPair> pairs) {
  ConfusionCounts c;
  for (const auto& p : pairs) {
    const int y = m.classify(p.features);
    if (y == 1 && p.label == 1) ++c.tp;
    else if (y == 1) ++c.fp;
    else if (p.label == 1) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace detail {

inline double log_loss(std::span<const LabeledPair> pairs, std::array<double, 2> w, double b,
                       double l2) {
  double loss = 0.0;
  for (const auto& p : pairs) {
    const double z = w[0] * p.features.c + w[1] * p.features.u + b;
    // log(1 + e^{-z}) and log(1 + e^{z}) computed stably
    const double lp = z >= 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    const double ln = z >= 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += p.label == 1 ? lp : ln;
  }
  loss /= static_cast<double>(pairs.size());
  return loss + 0.5 * l2 * (w[0] * w[0] + w[1] * w[1]);
}

inline ComparisonModel train_linear(std::span<const LabeledPair> pairs, const Hyperparameters& hp) {
  std::array<double, 2> w{0.0, 0.0};
  double b = 0.0;
  ComparisonModel m;
  m.kind = ModelKind::linear;
  const double n = static_cast<double>(pairs.size());
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    double g0 = 0.0, g1 = 0.0, gb = 0.0;
    for (const auto& p : pairs) {
      const double err = sigmoid(w[0] * p.features.c + w[1] * p.features.u + b) - p.label;
      g0 += err * p.features.c;
      g1 += err * p.features.u;
      gb += err;
    }
    w[0] -= hp.learning_rate * (g0 / n + hp.l2 * w[0]);
    w[1] -= hp.learning_rate * (g1 / n + hp.l2 * w[1]);
    b -= hp.learning_rate * gb / n;
    m.loss_trace.push_back(log_loss(pairs, w, b, hp.l2));
  }
  m.weights = w;
  m.bias = b;
  return m;
}

inline double gini(std::size_t pos, std::size_t n) {
  if (n == 0) return 0.0;
  const double p = double(pos) / double(n);
  return 2.0 * p * (1.0 - p);
}

inline int grow_tree(std::vector<TreeNode>& nodes, std::span<const LabeledPair> pairs,
                     std::vector<std::size_t> idx, std::size_t depth, const Hyperparameters& hp) {
  std::size_t pos = 0;
  for (auto i : idx) pos += pairs[i].label == 1;
  const int id = static_cast<int>(nodes.size());
  nodes.push_back({});
  nodes[id].value = idx.empty() ? 0.0 : double(pos) / double(idx.size());
  if (depth >= hp.max_depth || pos == 0 || pos == idx.size() || idx.size() < 2 * hp.min_leaf)
    return id;

  const double parent = gini(pos, idx.size());
  double best_gain = 1e-12;
  int best_feature = -1;
  double best_threshold = 0.0;
  for (int f = 0; f < 2; ++f) {
    auto value = [&](std::size_t i) { return f == 0 ? pairs[i].features.c : pairs[i].features.u; };
    std::vector<std::size_t> sorted = idx;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t x, std::size_t y) { return value(x) < value(y); });
    std::size_t left_pos = 0;
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
      left_pos += pairs[sorted[k]].label == 1;
      const double v = value(sorted[k]), next = value(sorted[k + 1]);
      if (v == next) continue;
      const std::size_t nl = k + 1, nr = sorted.size() - nl;
      if (nl < hp.min_leaf || nr < hp.min_leaf) continue;
      const double child = (double(nl) * gini(left_pos, nl) +
                            double(nr) * gini(pos - left_pos, nr)) / double(sorted.size());
      const double gain = parent - child;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
        best_threshold = 0.5 * (v + next);
      }
    }
  }
  if (best_feature < 0) return id;

  std::vector<std::size_t> left, right;
  for (auto i : idx) {
    const double v = best_feature == 0 ? pairs[i].features.c : pairs[i].features.u;
    (v < best_threshold ? left : right).push_back(i);
  }
  nodes[id].feature = best_feature;
  nodes[id].threshold = best_threshold;
  const int l = grow_tree(nodes, pairs, std::move(left), depth + 1, hp);
  const int r = grow_tree(nodes, pairs, std::move(right), depth + 1, hp);
  nodes[id].left = l;
  nodes[id].right = r;
  return id;
}

// Pegasos-style stochastic subgradient on the primal soft-margin objective,
// lambda = 1 / (C n). Bias is an unregularized extra coordinate.
inline ComparisonModel train_svm(std::span<const LabeledPair> pairs, const Hyperparameters& hp) {
  const double n = static_cast<double>(pairs.size());
  const double lambda = 1.0 / (hp.svm_c * n);
  std::array<double, 2> w{0.0, 0.0};
  double b = 0.0;
  Rng rng(hp.seed);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < hp.svm_epochs; ++epoch) {
    rng.shuffle(order);
    for (auto i : order) {
      ++t;
      // Offset t0 = 100 n keeps the first steps at C / 100.
      const double eta = 1.0 / (lambda * (static_cast<double>(t) + 100.0 * n));
      const auto& p = pairs[i];
      const double y = p.label == 1 ? 1.0 : -1.0;
      const double m = w[0] * p.features.c + w[1] * p.features.u + b;
      w[0] *= (1.0 - eta * lambda);
      w[1] *= (1.0 - eta * lambda);
      if (y * m < 1.0) {
        w[0] += eta * y * p.features.c;
        w[1] += eta * y * p.features.u;
        b += eta * y;
      }
    }
  }
  ComparisonModel model;
  model.kind = ModelKind::svm;
  model.weights = w;
  model.bias = b;

  // Platt link on training margins, Newton iterations on smoothed targets.
  std::size_t npos = 0;
  for (const auto& p : pairs) npos += p.label == 1;
  const double hi = (double(npos) + 1.0) / (double(npos) + 2.0);
  const double lo = 1.0 / (double(pairs.size() - npos) + 2.0);
  double A = 1.0, B = 0.0;
  for (int it = 0; it < 100; ++it) {
    double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
    for (const auto& p : pairs) {
      const double m = model.margin(p.features);
      const double q = sigmoid(A * m + B);
      const double t_ = p.label == 1 ? hi : lo;
      const double d = q - t_;
      const double s = std::max(q * (1.0 - q), 1e-12);
      ga += d * m;
      gb += d;
      haa += s * m * m;
      hab += s * m;
      hbb += s;
    }
    haa += 1e-9;
    hbb += 1e-9;
    const double det = haa * hbb - hab * hab;
    if (std::abs(det) < 1e-18) break;
    const double da = (hbb * ga - hab * gb) / det;
    const double db = (haa * gb - hab * ga) / det;
    A -= da;
    B -= db;
    if (std::abs(da) < 1e-10 && std::abs(db) < 1e-10) break;
  }
  // The link must stay increasing so that score order matches margin order.
  model.platt_a = std::max(A, 1e-6);
  model.platt_b = B;
  return model;
}

}  // namespace detail

/// Trains one comparison model. Threshold ignores u and picks the F1-best
/// cut on c; linear is logistic regression by batch gradient descent; tree
/// is CART with Gini splits; svm is a linear soft-margin classifier.
inline ComparisonModel train(ModelKind kind, std::span<const LabeledPair> pairs,
                             const Hyperparameters& hp = {}) {
  bool has_pos = false, has_neg = false;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.features.c) || !std::isfinite(p.features.u))
      throw std::invalid_argument("train: non-finite feature for pair (" +
                                  std::to_string(p.ref_a) + ", " + std::to_string(p.ref_b) + ")");
    (p.label == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("train: training set needs both labels");

  ComparisonModel m;
  switch (kind) {
    case ModelKind::threshold: {
      std::vector<double> s;
      std::vector<int> y;
      for (const auto& p : pairs) {
        s.push_back(p.features.c);
        y.push_back(p.label);
      }
      m = ComparisonModel::make_threshold(best_f1_cut(s, y).cut);
      break;
    }
    case ModelKind::linear:
      m = detail::train_linear(pairs, hp);
      break;
    case ModelKind::tree: {
      m.kind = ModelKind::tree;
      std::vector<std::size_t> idx(pairs.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      detail::grow_tree(m.tree, pairs, std::move(idx), 0, hp);
      break;
    }
    case ModelKind::svm:
      m = detail::train_svm(pairs, hp);
      break;
  }
  m.seed = hp.seed;
  return m;
}

}  // namespace refdedup
