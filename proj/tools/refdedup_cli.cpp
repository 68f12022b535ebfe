// refdedup: manifest-driven pipeline from synthetic logs to biasing lists.
//
//   refdedup --manifest manifests/public.txt generate
//   refdedup --manifest manifests/public.txt featurize
//   ... mine-labels, train, dedup, distribute, bias, evaluate, report
//
// Exit codes: 0 success, 1 runtime error, 2 usage or manifest error,
// 3 an acceptance gate failed.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "refdedup/refdedup.hpp"

namespace fs = std::filesystem;
using namespace refdedup;

namespace {

constexpr int kGateFailure = 3;

struct Context {
  Manifest manifest;
  bool quiet = false;

  const PipelineConfig& cfg() const { return manifest.config; }
  const RunPaths& paths() const { return manifest.paths; }
  std::string hash() const { return manifest.hash(); }

  void info(const std::string& msg) const {
    if (!quiet) std::cerr << msg << '\n';
  }

  void write(const fs::path& path, const std::string& content) const {
    const bool changed = write_if_changed(path, content);
    info((changed ? "wrote " : "unchanged ") + path.string());
  }

  JsonLines read(const fs::path& path, const std::string& format) const {
    if (!fs::exists(path)) throw std::runtime_error("missing input '" + path.string() + "'; run the producing stage first");
    JsonLines doc = read_jsonl(path, format);
    const auto h = doc.header.value("manifest_hash", "");
    if (h != hash()) info("warning: " + path.string() + " was produced under manifest " + h + ", current is " + hash());
    return doc;
  }

  RequestLog log() const { return log_from_jsonl(read(paths().log, "refdedup.log")); }
};

struct StageFeatures {
  std::unique_ptr<Features> features = std::make_unique<Features>();
};

// Matrices from featurize; the history index is rebuilt from the log so that
// pairs below the stored item floor still get their exact cosine.
StageFeatures load_features(const Context& ctx, const RequestLog& log) {
  StageFeatures f;
  f.features->cooccurrence = similarity_from_jsonl(ctx.read(ctx.paths().cooccurrence, "refdedup.similarity"));
  if (ctx.cfg().item_features) {
    f.features->item = similarity_from_jsonl(ctx.read(ctx.paths().item, "refdedup.similarity"));
    f.features->history.emplace(log, ctx.cfg().window, ctx.cfg().min_requesters);
  }
  if (f.features->cooccurrence.dimension() != log.reference_count())
    throw std::runtime_error("cooccurrence matrix does not match the log; rerun featurize");
  return f;
}

void cmd_generate(const Context& ctx) {
  const Corpus c = build_corpus(ctx.cfg());
  ctx.write(ctx.paths().catalog, catalog_to_jsonl(c.catalog, ctx.hash()));
  ctx.write(ctx.paths().log, log_to_jsonl(c.log, ctx.hash()));
  ctx.info(std::to_string(c.catalog.size()) + " entities, " + std::to_string(c.profiles.size()) + " voices, " +
           std::to_string(c.log.size()) + " requests, " + std::to_string(c.log.reference_count()) + " references");
}

void cmd_featurize(const Context& ctx) {
  const RequestLog log = ctx.log();
  const auto f = compute_features(log, ctx.cfg());
  ctx.write(ctx.paths().cooccurrence, similarity_to_jsonl(f->cooccurrence, "cooccurrence", ctx.hash()));
  if (f->item) ctx.write(ctx.paths().item, similarity_to_jsonl(*f->item, "item", ctx.hash()));
  ctx.info(std::to_string(f->cooccurrence.nonzeros()) + " cooccurrence entries" +
           (f->item ? ", " + std::to_string(f->item->nonzeros()) + " item entries" : ""));
}

void cmd_mine_labels(const Context& ctx) {
  const RequestLog log = ctx.log();
  const auto f = load_features(ctx, log);
  const Labels l = mine_labels(log, *f.features, ctx.cfg());
  ctx.write(ctx.paths().labels, labels_to_jsonl(l.resolutions, l.split, log, ctx.hash()));
  ctx.info(std::to_string(l.resolutions.size()) + " resolved references, " + std::to_string(l.split.train.size()) +
           " train / " + std::to_string(l.split.test.size()) + " test pairs");
}

ModelKind stage_model_kind(const PipelineConfig& cfg) {
  return cfg.variant == DedupVariant::nbest_threshold ? ModelKind::threshold : cfg.model_kind;
}

LabelFile load_labels(const Context& ctx) {
  return labels_from_jsonl(ctx.read(ctx.paths().labels, "refdedup.labels"));
}

void cmd_train(const Context& ctx) {
  const LabelFile labels = load_labels(ctx);
  const ModelKind kind = stage_model_kind(ctx.cfg());
  const ComparisonModel m = train(kind, labels.split.train, ctx.cfg().hyper);
  const ConfusionCounts held_out = evaluate_model(m, labels.split.test);
  json j = model_to_json(m, evaluate_model(m, labels.split.train).f1(), held_out.f1());
  j["manifest_hash"] = ctx.hash();
  ctx.write(ctx.paths().model, j.dump(2) + "\n");
  ctx.info(std::string(to_string(kind)) + " model, held-out F1 " + std::to_string(held_out.f1()));
}

ComparisonModel load_model(const Context& ctx) {
  if (!fs::exists(ctx.paths().model))
    throw std::runtime_error("missing model file '" + ctx.paths().model.string() + "'; run train first");
  const json j = json::parse(read_file(ctx.paths().model));
  if (!j.is_object() || !j.contains("kind") || !j.contains("parameters"))
    throw FormatError(ctx.paths().model.string() + ": not a model file");
  return model_from_json(j);
}

void cmd_dedup(const Context& ctx) {
  const RequestLog log = ctx.log();
  ClusterSet clusters;
  std::string model_name = "none";
  if (!log.empty()) {
    const auto f = load_features(ctx, log);
    ComparisonModel m;
    if (ctx.cfg().variant == DedupVariant::nbest_threshold && ctx.manifest.tau) {
      m = ComparisonModel::make_threshold(*ctx.manifest.tau);
    } else {
      m = load_model(ctx);
      if (m.kind != stage_model_kind(ctx.cfg()))
        throw std::runtime_error(std::string("model file holds a ") + to_string(m.kind) + " model, manifest asks for " +
                                 to_string(stage_model_kind(ctx.cfg())) + "; rerun train");
    }
    const DedupResult d = run_dedup(log, *f.features, m);
    clusters = d.clusters;
    model_name = to_string(m.kind);
    ctx.info(std::to_string(d.edges.edge_count()) + " edges, " + std::to_string(clusters.size()) + " clusters, " +
             std::to_string(count_intransitive_triples(d.edges)) + " open triples");
  }
  ctx.write(ctx.paths().clusters, clusters_to_jsonl(clusters, log, model_name, ctx.hash()));
}

ClusterSet load_clusters(const Context& ctx) {
  return clusters_from_jsonl(ctx.read(ctx.paths().clusters, "refdedup.clusters"));
}

void cmd_distribute(const Context& ctx) {
  const RequestLog log = ctx.log();
  const ClusterSet clusters = load_clusters(ctx);
  const EntityDistribution d = cluster_distribution(clusters, reference_probabilities(log));
  ctx.write(ctx.paths().distribution, distribution_to_jsonl(d, clusters, ctx.hash()));
}

void cmd_bias(const Context& ctx) {
  const RequestLog log = ctx.log();
  const ClusterSet clusters = load_clusters(ctx);
  const EntityDistribution d = distribution_from_jsonl(ctx.read(ctx.paths().distribution, "refdedup.distribution"));
  const LabelFile labels = load_labels(ctx);
  const BiasingList list = select_biasing_entities(d, clusters, labels.resolutions, log.references(),
                                                   ctx.cfg().budget, ctx.cfg().biasing);
  const BiasingList topk = topk_mentions_baseline(log, ctx.cfg().budget, ctx.cfg().biasing.weight_cap);
  ctx.write(ctx.paths().biasing, biasing_to_jsonl(list, "dedup", ctx.hash()));
  ctx.write(ctx.paths().biasing_text, biasing_to_text(list));
  ctx.write(ctx.paths().topk, biasing_to_jsonl(topk, "topk", ctx.hash()));
  ctx.info(std::to_string(list.entries.size()) + " biased entities (budget " + std::to_string(ctx.cfg().budget) + ")");
}

PairScore pair_score(const std::string& name, const ComparisonModel& m, const TrainTestSplit& split) {
  const ConfusionCounts c = evaluate_model(m, split.test);
  PairScore p;
  p.model = name;
  p.recall = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
  p.precision = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
  p.f1 = c.f1();
  p.train = split.train.size();
  p.test = split.test.size();
  return p;
}

GateResult gate_at_least(std::string name, std::optional<double> value, double bound) {
  return {std::move(name), value, ">=", bound, value && *value >= bound};
}

GateResult gate_below(std::string name, std::optional<double> value, double bound) {
  return {std::move(name), value, "<", bound, value && *value < bound};
}

Report build_report(const Context& ctx) {
  const PipelineConfig& cfg = ctx.cfg();
  const RequestLog log = ctx.log();
  const ClusterSet clusters = load_clusters(ctx);
  const LabelFile labels = load_labels(ctx);
  const bool annotated = !log.empty() && std::all_of(log.requests().begin(), log.requests().end(),
                                                     [](const Request& r) { return r.true_entity.has_value(); });
  std::optional<Catalog> catalog;
  if (annotated && fs::exists(ctx.paths().catalog))
    catalog = catalog_from_jsonl(ctx.read(ctx.paths().catalog, "refdedup.catalog"));

  Report r;
  r.manifest_hash = ctx.hash();
  r.dataset = ctx.manifest.dataset;
  r.summary["requests"] = double(log.size());
  r.summary["references"] = double(log.reference_count());
  r.summary["clusters"] = double(clusters.size());
  r.summary["resolved_references"] = double(labels.resolutions.size());

  // Cluster-level rows. Ground truth is the primary evaluation when the log
  // is annotated; click and repeat feedback otherwise.
  const ClusterSet singletons = connected_components(AdjacencyMatrix(log.reference_count()));
  std::optional<EvalReport> primary, edit;
  if (catalog) {
    const auto pairs = ground_truth_pairs(log, *catalog);
    const auto truth = ground_truth_resolutions(log);
    r.clusters.push_back(EvalReport::combine(r.dataset, "No dedup", recall(singletons, pairs), precision(singletons, truth)));
    edit = edit_baseline_report(log, *catalog, r.dataset);
    r.clusters.push_back(*edit);
    primary = evaluate_ground_truth(log, *catalog, clusters, r.dataset, "Record dedup.");
    r.clusters.push_back(*primary);
  }
  EvalReport feedback = evaluate_feedback(log, clusters, cfg.min_support, r.dataset + " (feedback)", "Record dedup.");
  r.clusters.push_back(feedback);
  if (!primary) primary = feedback;
  r.summary["known_repeat_pairs"] = double(feedback.tp + feedback.fn);

  // Held-out pair rows: every model kind on the same split.
  std::map<ModelKind, double> pair_f1;
  if (!labels.split.train.empty() && !labels.split.test.empty()) {
    const std::pair<ModelKind, const char*> kinds[] = {{ModelKind::threshold, "n-best-only"},
                                                       {ModelKind::linear, "Linear"},
                                                       {ModelKind::tree, "Tree"},
                                                       {ModelKind::svm, "SVM"}};
    for (auto [kind, name] : kinds) {
      const ComparisonModel m = train(kind, labels.split.train, cfg.hyper);
      r.pairs.push_back(pair_score(name, m, labels.split));
      pair_f1[kind] = r.pairs.back().f1;
    }
  }

  // Relative WER rows.
  std::optional<double> wer_full, wer_topk, wer_modeled;
  if (catalog && fs::exists(ctx.paths().biasing)) {
    const BiasingList list = biasing_from_jsonl(ctx.read(ctx.paths().biasing, "refdedup.biasing"));
    const BiasingList topk = biasing_from_jsonl(ctx.read(ctx.paths().topk, "refdedup.biasing"));
    const auto modeled = modeled_references(list, clusters);
    const BiasingList none;
    r.wer.push_back(simulate_wer(log, *catalog, none, cfg.fusion, WerScope::full, &modeled, "base"));
    r.wer.push_back(simulate_wer(log, *catalog, topk, cfg.fusion, WerScope::full, &modeled, "base + TopK entities"));
    r.wer.push_back(simulate_wer(log, *catalog, list, cfg.fusion, WerScope::full, &modeled, "base + Record dedup."));
    r.wer.push_back(simulate_wer(log, *catalog, none, cfg.fusion, WerScope::modeled_only, &modeled, "base"));
    r.wer.push_back(simulate_wer(log, *catalog, list, cfg.fusion, WerScope::modeled_only, &modeled, "base + Record dedup."));
    wer_topk = r.wer[1].relative_wer_percent;
    wer_full = r.wer[2].relative_wer_percent;
    wer_modeled = r.wer[4].relative_wer_percent;
    r.summary["base_wer"] = r.wer[0].base_wer;
    r.summary["modeled_requests"] = double(r.wer[3].requests);
  }

  const Gates& g = ctx.manifest.gates;
  if (g.recall_min) r.gates.push_back(gate_at_least("recall", primary->recall, *g.recall_min));
  if (g.precision_min) r.gates.push_back(gate_at_least("precision", primary->precision, *g.precision_min));
  if (g.edit_gap_min) {
    std::optional<double> gap;
    if (edit && edit->f1 && primary->f1) gap = *primary->f1 - *edit->f1;
    r.gates.push_back(gate_at_least("dedup F1 - edit F1", gap, *g.edit_gap_min));
  }
  if (g.pair_f1_lift_min) {
    std::optional<double> lift;
    if (pair_f1.size() == 4)
      lift = std::min(pair_f1[ModelKind::linear], pair_f1[ModelKind::tree]) - pair_f1[ModelKind::threshold];
    r.gates.push_back(gate_at_least("min(linear, tree) - n-best-only pair F1", lift, *g.pair_f1_lift_min));
  }
  if (g.wer_dedup_below) r.gates.push_back(gate_below("dedup rel. WER (%)", wer_full, *g.wer_dedup_below));
  if (g.wer_topk_min) r.gates.push_back(gate_at_least("top-k rel. WER (%)", wer_topk, *g.wer_topk_min));
  if (g.modeled_ratio_min) {
    std::optional<double> ratio;
    if (wer_full && wer_modeled && *wer_full != 0.0) ratio = std::abs(*wer_modeled) / std::abs(*wer_full);
    r.gates.push_back(gate_at_least("|modeled| / |full| rel. WER", ratio, *g.modeled_ratio_min));
  }
  return r;
}

int cmd_evaluate(const Context& ctx) {
  const Report r = build_report(ctx);
  ctx.write(ctx.paths().report_json, report_to_json(r).dump(2) + "\n");
  const std::string text = report_to_text(r);
  ctx.write(ctx.paths().report_text, text);
  if (!ctx.quiet) std::cout << text;
  if (!r.gates_pass()) {
    std::cerr << "gate failure\n";
    return kGateFailure;
  }
  return 0;
}

int cmd_report(const Context& ctx) {
  if (!fs::exists(ctx.paths().report_text))
    throw std::runtime_error("missing report '" + ctx.paths().report_text.string() + "'; run evaluate first");
  std::cout << read_file(ctx.paths().report_text);
  const json j = json::parse(read_file(ctx.paths().report_json));
  return j.value("gates_pass", true) ? 0 : kGateFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference deduplication and entity biasing pipeline"};
  std::string manifest_path;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--manifest", manifest_path, "Run manifest (key = value text file)")->required();
  app.add_option("--seed", seed, "Override the manifest seed");
  app.add_flag("--quiet", quiet, "Suppress progress output");
  app.require_subcommand(1, 1);

  const std::pair<const char*, const char*> commands[] = {
      {"generate", "Synthesize a catalog and request log"},
      {"featurize", "Compute n-best cooccurrence and item similarity"},
      {"mine-labels", "Mine click resolutions and the labeled pair split"},
      {"train", "Fit the comparison model on the training split"},
      {"dedup", "Link references and cluster them"},
      {"distribute", "Aggregate request mass per cluster"},
      {"bias", "Select the biasing list and the top-k baseline"},
      {"evaluate", "Score clusters, pair models and biasing; check gates"},
      {"report", "Print the last evaluation report"},
  };
  for (auto [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  Context ctx;
  ctx.quiet = quiet;
  try {
    ctx.manifest = load_manifest(manifest_path, seed);
  } catch (const ManifestError& e) {
    std::cerr << "manifest error: " << e.what() << '\n';
    return 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "generate") cmd_generate(ctx);
    else if (cmd == "featurize") cmd_featurize(ctx);
    else if (cmd == "mine-labels") cmd_mine_labels(ctx);
    else if (cmd == "train") cmd_train(ctx);
    else if (cmd == "dedup") cmd_dedup(ctx);
    else if (cmd == "distribute") cmd_distribute(ctx);
    else if (cmd == "bias") cmd_bias(ctx);
    else if (cmd == "evaluate") return cmd_evaluate(ctx);
    else if (cmd == "report") return cmd_report(ctx);
  } catch (const std::exception& e) {
    std::cerr << cmd << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
