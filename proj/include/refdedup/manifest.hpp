#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "refdedup/pipeline.hpp"
#include "refdedup/rng.hpp"

namespace refdedup {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounds checked by `evaluate`. Unset gates are not checked.
struct Gates {
  std::optional<double> recall_min;         // dedup recall on the primary evaluation
  std::optional<double> precision_min;      // dedup precision on the primary evaluation
  std::optional<double> edit_gap_min;       // dedup F1 minus edit-baseline F1
  std::optional<double> pair_f1_lift_min;   // min(linear, tree) held-out F1 minus threshold F1
  std::optional<double> wer_dedup_below;    // dedup relative WER (%) strictly below
  std::optional<double> wer_topk_min;       // top-k relative WER (%) at least
  std::optional<double> modeled_ratio_min;  // |modeled-only| / |full| relative WER at least

  bool any() const {
    return recall_min || precision_min || edit_gap_min || pair_f1_lift_min || wer_dedup_below ||
           wer_topk_min || modeled_ratio_min;
  }
};

struct RunPaths {
  std::filesystem::path catalog, log, cooccurrence, item, labels, model, clusters, distribution,
      biasing, biasing_text, topk, report_json, report_text;

  static RunPaths under(const std::filesystem::path& dir) {
    RunPaths p;
    p.catalog = dir / "catalog.jsonl";
    p.log = dir / "log.jsonl";
    p.cooccurrence = dir / "cooccurrence.jsonl";
    p.item = dir / "item_similarity.jsonl";
    p.labels = dir / "labels.jsonl";
    p.model = dir / "model.json";
    p.clusters = dir / "clusters.jsonl";
    p.distribution = dir / "distribution.jsonl";
    p.biasing = dir / "biasing.jsonl";
    p.biasing_text = dir / "biasing.txt";
    p.topk = dir / "biasing_topk.jsonl";
    p.report_json = dir / "report.json";
    p.report_text = dir / "report.txt";
    return p;
  }
};

struct Manifest {
  std::string preset = "none";
  std::string dataset = "run";
  PipelineConfig config;
  std::optional<double> tau;  // fixed cut for the n-best variant; unset = tuned
  std::filesystem::path out_dir = "run";
  RunPaths paths = RunPaths::under("run");
  Gates gates;
  std::map<std::string, std::string> entries;  // effective settings, paths excluded
  std::string source;                          // file name, for diagnostics

  /// FNV-1a over the sorted effective entries, as 16 hex digits.
  std::string hash() const {
    std::uint64_t h = fnv1a("refdedup-manifest-1\n");
    for (const auto& [k, v] : entries) {
      h = fnv1a(k, h);
      h = fnv1a(" = ", h);
      h = fnv1a(v, h);
      h = fnv1a("\n", h);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct FieldContext {
  const std::string& source;
  std::size_t line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << source << ':' << line << ": key '" << key << "': " << what;
    throw ManifestError(os.str());
  }
};

inline double parse_real(std::string_view v, const FieldContext& ctx, double lo = -1e300,
                         double hi = 1e300) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    ctx.fail("expected a number, got '" + std::string(v) + "'");
  if (!(x >= lo && x <= hi)) {
    std::ostringstream os;
    os << "value " << x << " outside [" << lo << ", " << hi << "]";
    ctx.fail(os.str());
  }
  return x;
}

inline double parse_rate(std::string_view v, const FieldContext& ctx) { return parse_real(v, ctx, 0.0, 1.0); }

inline std::uint64_t parse_count(std::string_view v, const FieldContext& ctx, std::uint64_t lo = 0) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    ctx.fail("expected a non-negative integer, got '" + std::string(v) + "'");
  if (x < lo) ctx.fail("must be at least " + std::to_string(lo));
  return x;
}

inline std::int64_t parse_int(std::string_view v, const FieldContext& ctx) {
  std::int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    ctx.fail("expected an integer, got '" + std::string(v) + "'");
  return x;
}

inline bool parse_flag(std::string_view v, const FieldContext& ctx) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  ctx.fail("expected true or false, got '" + std::string(v) + "'");
}

using Setter = std::function<void(Manifest&, std::string_view, const FieldContext&)>;

inline const std::map<std::string, Setter>& manifest_keys() {
  using M = Manifest;
  using V = std::string_view;
  using C = const FieldContext&;
  static const std::map<std::string, Setter> keys = {
      {"seed", [](M&, V, C) {}},  // applied after every other key
      {"preset", [](M&, V, C) {}},  // applied before every other key
      {"dataset", [](M& m, V v, C) { m.dataset = std::string(v); }},
      {"out_dir", [](M&, V, C) {}},  // applied before the path.* keys

      {"catalog.size", [](M& m, V v, C c) { m.config.catalog.size = parse_count(v, c, 1); }},
      {"catalog.zipf_exponent", [](M& m, V v, C c) { m.config.catalog.zipf_exponent = parse_real(v, c, 0.0, 10.0); }},
      {"catalog.name_fraction", [](M& m, V v, C c) { m.config.catalog.name_fraction = parse_rate(v, c); }},

      {"profiles.count", [](M& m, V v, C c) { m.config.profiles.count = parse_count(v, c, 1); }},
      {"profiles.confusable_fraction", [](M& m, V v, C c) { m.config.profiles.confusable_fraction = parse_rate(v, c); }},
      {"profiles.known_word_confusable_fraction", [](M& m, V v, C c) { m.config.profiles.known_word_confusable_fraction = parse_rate(v, c); }},
      {"profiles.shared_confusable_fraction", [](M& m, V v, C c) { m.config.profiles.shared_confusable_fraction = parse_rate(v, c); }},
      {"profiles.max_confusables", [](M& m, V v, C c) { m.config.profiles.max_confusables = parse_count(v, c, 1); }},
      {"profiles.substitution_rate", [](M& m, V v, C c) { m.config.profiles.substitution_rate = parse_rate(v, c); }},
      {"profiles.deletion_rate", [](M& m, V v, C c) { m.config.profiles.deletion_rate = parse_rate(v, c); }},
      {"profiles.insertion_rate", [](M& m, V v, C c) { m.config.profiles.insertion_rate = parse_rate(v, c); }},
      {"profiles.real_word_rate", [](M& m, V v, C c) { m.config.profiles.real_word_rate = parse_rate(v, c); }},
      {"profiles.misheard_rate", [](M& m, V v, C c) { m.config.profiles.misheard_rate = parse_rate(v, c); }},
      {"profiles.respelling_rate", [](M& m, V v, C c) { m.config.profiles.respelling_rate = parse_rate(v, c); }},

      {"corpus.mode", [](M& m, V v, C c) {
         if (v == "exhaustive") m.config.corpus.mode = SamplingMode::exhaustive;
         else if (v == "sampled") m.config.corpus.mode = SamplingMode::sampled;
         else c.fail("expected exhaustive or sampled, got '" + std::string(v) + "'");
       }},
      {"corpus.users", [](M& m, V v, C c) { m.config.corpus.users = parse_count(v, c, 1); }},
      {"corpus.min_requests_per_user", [](M& m, V v, C c) { m.config.corpus.min_requests_per_user = parse_count(v, c); }},
      {"corpus.mean_extra_requests", [](M& m, V v, C c) { m.config.corpus.mean_extra_requests = parse_real(v, c, 0.0, 1e6); }},
      {"corpus.n_max", [](M& m, V v, C c) { m.config.corpus.nbest_size = parse_count(v, c, 1); }},
      {"corpus.recovery_probability", [](M& m, V v, C c) { m.config.corpus.recovery_probability = parse_rate(v, c); }},
      {"corpus.click_rate_correct", [](M& m, V v, C c) { m.config.corpus.click_rate_correct = parse_rate(v, c); }},
      {"corpus.click_rate_misrecognized", [](M& m, V v, C c) { m.config.corpus.click_rate_misrecognized = parse_rate(v, c); }},
      {"corpus.repeat_rate", [](M& m, V v, C c) { m.config.corpus.repeat_rate = parse_real(v, c, 0.0, 0.5); }},
      {"corpus.repeat_clarity", [](M& m, V v, C c) { m.config.corpus.repeat_clarity = parse_real(v, c, 0.0, 10.0); }},
      {"corpus.communities", [](M& m, V v, C c) { m.config.corpus.communities = parse_count(v, c); }},
      {"corpus.community_affinity", [](M& m, V v, C c) { m.config.corpus.community_affinity = parse_rate(v, c); }},
      {"corpus.favorites_per_user", [](M& m, V v, C c) { m.config.corpus.favorites_per_user = parse_count(v, c); }},
      {"corpus.favorite_affinity", [](M& m, V v, C c) { m.config.corpus.favorite_affinity = parse_rate(v, c); }},

      {"features.item", [](M& m, V v, C c) { m.config.item_features = parse_flag(v, c); }},
      {"features.item_floor", [](M& m, V v, C c) { m.config.item_floor = parse_rate(v, c); }},
      {"features.min_requesters", [](M& m, V v, C c) { m.config.min_requesters = parse_count(v, c, 1); }},
      {"features.window_begin", [](M& m, V v, C c) { m.config.window.begin = parse_int(v, c); }},
      {"features.window_end", [](M& m, V v, C c) { m.config.window.end = parse_int(v, c); }},

      {"dedup.variant", [](M& m, V v, C c) {
         if (v == "nbest") m.config.variant = DedupVariant::nbest_threshold;
         else if (v == "classifier") m.config.variant = DedupVariant::classifier;
         else c.fail("expected nbest or classifier, got '" + std::string(v) + "'");
       }},
      {"dedup.tau", [](M& m, V v, C c) {
         if (v == "auto") m.tau.reset();
         else m.tau = parse_rate(v, c);
       }},
      {"dedup.model", [](M& m, V v, C c) {
         try {
           m.config.model_kind = parse_model_kind(v);
         } catch (const std::invalid_argument& e) {
           c.fail(std::string(e.what()) + " (expected threshold, linear, tree or svm)");
         }
       }},
      {"dedup.split_ratio", [](M& m, V v, C c) {
         m.config.split_ratio = parse_real(v, c, 0.0, 1.0);
         if (m.config.split_ratio <= 0.0 || m.config.split_ratio >= 1.0) c.fail("must be strictly between 0 and 1");
       }},
      {"train.learning_rate", [](M& m, V v, C c) { m.config.hyper.learning_rate = parse_real(v, c, 0.0, 1e6); }},
      {"train.epochs", [](M& m, V v, C c) { m.config.hyper.epochs = parse_count(v, c, 1); }},
      {"train.l2", [](M& m, V v, C c) { m.config.hyper.l2 = parse_real(v, c, 0.0, 1e6); }},
      {"train.max_depth", [](M& m, V v, C c) { m.config.hyper.max_depth = parse_count(v, c); }},
      {"train.min_leaf", [](M& m, V v, C c) { m.config.hyper.min_leaf = parse_count(v, c, 1); }},
      {"train.svm_c", [](M& m, V v, C c) { m.config.hyper.svm_c = parse_real(v, c, 1e-9, 1e9); }},
      {"train.svm_epochs", [](M& m, V v, C c) { m.config.hyper.svm_epochs = parse_count(v, c, 1); }},

      {"feedback.min_support", [](M& m, V v, C c) { m.config.min_support = parse_count(v, c, 1); }},
      {"bias.budget", [](M& m, V v, C c) { m.config.budget = parse_count(v, c, 1); }},
      {"bias.weight_cap", [](M& m, V v, C c) { m.config.biasing.weight_cap = parse_real(v, c, 1e-12, 1e6); }},
      {"bias.require_resolved_canonical", [](M& m, V v, C c) { m.config.biasing.require_resolved_canonical = parse_flag(v, c); }},

      {"fusion.boost_strength", [](M& m, V v, C c) { m.config.fusion.boost_strength = parse_real(v, c, 0.0, 1e6); }},
      {"fusion.rank_gap", [](M& m, V v, C c) { m.config.fusion.rank_gap = parse_real(v, c, 0.0, 1e6); }},
      {"fusion.distance_penalty", [](M& m, V v, C c) { m.config.fusion.distance_penalty = parse_real(v, c, 0.0, 1e6); }},
      {"fusion.out_of_list", [](M& m, V v, C c) { m.config.fusion.out_of_list = parse_flag(v, c); }},
      {"fusion.random_gaps", [](M& m, V v, C c) { m.config.fusion.random_gaps = parse_flag(v, c); }},

      {"gate.recall_min", [](M& m, V v, C c) { m.gates.recall_min = parse_rate(v, c); }},
      {"gate.precision_min", [](M& m, V v, C c) { m.gates.precision_min = parse_rate(v, c); }},
      {"gate.edit_gap_min", [](M& m, V v, C c) { m.gates.edit_gap_min = parse_real(v, c, -1.0, 1.0); }},
      {"gate.pair_f1_lift_min", [](M& m, V v, C c) { m.gates.pair_f1_lift_min = parse_real(v, c, -1.0, 1.0); }},
      {"gate.wer_dedup_below", [](M& m, V v, C c) { m.gates.wer_dedup_below = parse_real(v, c); }},
      {"gate.wer_topk_min", [](M& m, V v, C c) { m.gates.wer_topk_min = parse_real(v, c); }},
      {"gate.modeled_ratio_min", [](M& m, V v, C c) { m.gates.modeled_ratio_min = parse_real(v, c, 0.0, 1e6); }},
  };
  return keys;
}

inline const std::map<std::string, std::filesystem::path RunPaths::*>& path_keys() {
  static const std::map<std::string, std::filesystem::path RunPaths::*> keys = {
      {"path.catalog", &RunPaths::catalog},           {"path.log", &RunPaths::log},
      {"path.cooccurrence", &RunPaths::cooccurrence}, {"path.item", &RunPaths::item},
      {"path.labels", &RunPaths::labels},             {"path.model", &RunPaths::model},
      {"path.clusters", &RunPaths::clusters},         {"path.distribution", &RunPaths::distribution},
      {"path.biasing", &RunPaths::biasing},           {"path.biasing_text", &RunPaths::biasing_text},
      {"path.topk", &RunPaths::topk},                 {"path.report_json", &RunPaths::report_json},
      {"path.report_text", &RunPaths::report_text},
  };
  return keys;
}

inline PipelineConfig preset_config(std::string_view name, const FieldContext& ctx) {
  if (name == "public") return public_preset();
  if (name == "public-n2") return public_short_nbest_preset();
  if (name == "live") return live_preset();
  if (name == "none") return PipelineConfig{};
  ctx.fail("unknown preset '" + std::string(name) + "' (expected public, public-n2, live or none)");
}

}  // namespace detail

/// Parses `key = value` lines. '#' starts a comment; blank lines are
/// skipped. `preset` is applied first and `seed` last, whatever their
/// position. Relative paths are used as given, i.e. against the working
/// directory.
inline Manifest parse_manifest(std::string_view text, std::string source = "<manifest>",
                               std::optional<std::uint64_t> seed_override = std::nullopt) {
  struct Line {
    std::size_t number;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    std::string_view s = raw;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    std::string key(detail::trim(s.substr(0, eq == std::string_view::npos ? s.size() : eq)));
    const detail::FieldContext ctx{source, n, key};
    if (eq == std::string_view::npos) ctx.fail("expected 'key = value'");
    if (key.empty()) ctx.fail("empty key");
    std::string value(detail::trim(s.substr(eq + 1)));
    if (value.empty()) ctx.fail("empty value");
    if (!detail::manifest_keys().count(key) && !detail::path_keys().count(key)) ctx.fail("unknown key");
    if (auto [it, fresh] = seen.emplace(key, n); !fresh)
      ctx.fail("duplicate key (first set on line " + std::to_string(it->second) + ")");
    lines.push_back({n, std::move(key), std::move(value)});
  }

  Manifest m;
  m.source = source;
  auto find = [&](const std::string& key) -> const Line* {
    for (const auto& l : lines) {
      if (l.key == key) return &l;
    }
    return nullptr;
  };
  if (const Line* p = find("preset")) {
    m.preset = p->value;
    m.config = detail::preset_config(p->value, {source, p->number, p->key});
  }
  if (const Line* o = find("out_dir")) m.out_dir = o->value;
  m.paths = RunPaths::under(m.out_dir);

  std::uint64_t seed = m.config.seed;
  for (const auto& l : lines) {
    const detail::FieldContext ctx{source, l.number, l.key};
    if (auto p = detail::path_keys().find(l.key); p != detail::path_keys().end()) {
      m.paths.*(p->second) = l.value;
      continue;
    }
    if (l.key != "out_dir") m.entries[l.key] = l.value;
    if (l.key == "seed") {
      seed = detail::parse_count(l.value, ctx);
      continue;
    }
    detail::manifest_keys().at(l.key)(m, l.value, ctx);
  }
  if (seed_override) seed = *seed_override;
  m.config.reseed(seed);
  m.entries["seed"] = std::to_string(seed);
  if (m.config.window.end <= m.config.window.begin)
    throw ManifestError(source + ": features.window_end must exceed features.window_begin");
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& file,
                              std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest '" + file.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), file.string(), seed_override);
}

}  // namespace refdedup
