#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "refdedup/clustering.hpp"
#include "refdedup/comparison.hpp"
#include "refdedup/corpus.hpp"
#include "refdedup/distribution.hpp"
#include "refdedup/evaluation.hpp"
#include "refdedup/similarity.hpp"

namespace refdedup {

using json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `content` unless the file already holds exactly these bytes.
/// Returns whether the file was written.
inline bool write_if_changed(const std::filesystem::path& path, const std::string& content) {
  {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::ostringstream cur;
      cur << in.rdbuf();
      if (cur.str() == content) return false;
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
  return true;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// JSON-lines container: a header object, then one record per line.

struct JsonLines {
  json header;
  std::vector<json> records;
};

inline json make_header(const std::string& format, const std::string& manifest_hash) {
  return json{{"format", format}, {"version", 1}, {"manifest_hash", manifest_hash}};
}

inline std::string dump_jsonl(const json& header, const std::vector<json>& records) {
  std::string out = header.dump();
  out += '\n';
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline JsonLines parse_jsonl(const std::string& text, const std::string& expected_format,
                             const std::string& source) {
  JsonLines doc;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(source + ":" + std::to_string(n) + ": " + e.what());
    }
    if (doc.header.is_null()) {
      if (!j.is_object() || j.value("format", "") != expected_format)
        throw FormatError(source + ": expected a '" + expected_format + "' header on line 1");
      doc.header = std::move(j);
    } else {
      doc.records.push_back(std::move(j));
    }
  }
  if (doc.header.is_null()) throw FormatError(source + ": empty file");
  return doc;
}

inline JsonLines read_jsonl(const std::filesystem::path& path, const std::string& format) {
  return parse_jsonl(read_file(path), format, path.string());
}

namespace detail {

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
  else j[key] = nullptr;
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->template get<T>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Catalog and request log

inline std::string catalog_to_jsonl(const Catalog& c, const std::string& hash) {
  std::vector<json> recs;
  for (const auto& e : c.entities()) {
    recs.push_back({{"id", e.id},
                    {"canonical_title", e.canonical_title},
                    {"spoken_form", e.spoken_form},
                    {"popularity", e.popularity}});
  }
  return dump_jsonl(make_header("refdedup.catalog", hash), recs);
}

inline Catalog catalog_from_jsonl(const JsonLines& doc) {
  std::vector<Entity> es;
  for (const auto& r : doc.records) {
    es.push_back({r.at("id").get<std::string>(), r.at("canonical_title").get<std::string>(),
                  r.at("spoken_form").get<std::string>(), r.at("popularity").get<double>()});
  }
  return Catalog(std::move(es));
}

inline std::string log_to_jsonl(const RequestLog& log, const std::string& hash) {
  std::vector<json> recs;
  recs.reserve(log.size());
  for (const auto& r : log.requests()) {
    json j{{"user_id", r.user_id}, {"ts", r.timestamp}, {"nbest", r.nbest}};
    detail::put_optional(j, "clicked_entity", r.clicked_entity);
    detail::put_optional(j, "repeat_of", r.repeat_of);
    detail::put_optional(j, "true_entity", r.true_entity);
    recs.push_back(std::move(j));
  }
  json h = make_header("refdedup.log", hash);
  h["requests"] = log.size();
  return dump_jsonl(h, recs);
}

inline RequestLog log_from_jsonl(const JsonLines& doc) {
  std::vector<Request> reqs;
  reqs.reserve(doc.records.size());
  for (const auto& j : doc.records) {
    Request r;
    r.user_id = j.at("user_id").get<std::string>();
    r.timestamp = j.at("ts").get<std::int64_t>();
    r.nbest = j.at("nbest").get<std::vector<std::string>>();
    r.clicked_entity = detail::get_optional<std::string>(j, "clicked_entity");
    r.repeat_of = detail::get_optional<std::size_t>(j, "repeat_of");
    r.true_entity = detail::get_optional<std::string>(j, "true_entity");
    reqs.push_back(std::move(r));
  }
  return RequestLog(std::move(reqs));
}

// ---------------------------------------------------------------------------
// Similarity matrices: one record per stored pair, ordered by (i, j), scores
// rounded to 9 decimals.

inline double round9(double x) { return std::round(x * 1e9) / 1e9; }

inline std::string similarity_to_jsonl(const SimilarityMatrix& s, const std::string& feature,
                                       const std::string& hash) {
  std::vector<json> recs;
  for (const auto& [p, score] : s.sorted_entries()) {
    const double v = round9(score);
    if (v > 0.0) recs.push_back({{"i", p.a}, {"j", p.b}, {"score", v}});
  }
  json h = make_header("refdedup.similarity", hash);
  h["feature"] = feature;
  h["dimension"] = s.dimension();
  return dump_jsonl(h, recs);
}

inline SimilarityMatrix similarity_from_jsonl(const JsonLines& doc) {
  SimilarityMatrix s(doc.header.at("dimension").get<std::size_t>());
  for (const auto& r : doc.records) s.set(r.at("i").get<RefId>(), r.at("j").get<RefId>(), r.at("score").get<double>());
  return s;
}

// ---------------------------------------------------------------------------
// Weak labels: resolutions, then labeled pairs tagged with their split.

inline json pair_to_json(const LabeledPair& p, const char* split) {
  return {{"kind", "pair"}, {"a", p.ref_a}, {"b", p.ref_b}, {"c", p.features.c},
          {"u", p.features.u}, {"label", p.label}, {"split", split}};
}

inline std::string labels_to_jsonl(const std::map<RefId, std::string>& resolutions,
                                   const TrainTestSplit& split, const RequestLog& log,
                                   const std::string& hash) {
  std::vector<json> recs;
  for (const auto& [r, e] : resolutions) {
    recs.push_back({{"kind", "resolution"}, {"ref", r}, {"reference", log.reference(r)}, {"entity", e}});
  }
  for (const auto& p : split.train) recs.push_back(pair_to_json(p, "train"));
  for (const auto& p : split.test) recs.push_back(pair_to_json(p, "test"));
  json h = make_header("refdedup.labels", hash);
  h["resolutions"] = resolutions.size();
  h["train"] = split.train.size();
  h["test"] = split.test.size();
  return dump_jsonl(h, recs);
}

struct LabelFile {
  std::map<RefId, std::string> resolutions;
  TrainTestSplit split;
};

inline LabelFile labels_from_jsonl(const JsonLines& doc) {
  LabelFile f;
  for (const auto& r : doc.records) {
    const auto kind = r.at("kind").get<std::string>();
    if (kind == "resolution") {
      f.resolutions.emplace(r.at("ref").get<RefId>(), r.at("entity").get<std::string>());
    } else if (kind == "pair") {
      LabeledPair p{r.at("a").get<RefId>(), r.at("b").get<RefId>(),
                    {r.at("c").get<double>(), r.at("u").get<double>()}, r.at("label").get<int>()};
      (r.at("split").get<std::string>() == "train" ? f.split.train : f.split.test).push_back(p);
    } else {
      throw FormatError("labels: unknown record kind '" + kind + "'");
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Comparison model

/// {"kind", "parameters", "feature_names", "seed", "train_f1", "test_f1"}.
inline json model_to_json(const ComparisonModel& m, std::optional<double> train_f1 = std::nullopt,
                          std::optional<double> test_f1 = std::nullopt) {
  json params;
  switch (m.kind) {
    case ModelKind::threshold:
      params = {{"cut", m.cut}};
      break;
    case ModelKind::svm:
      params = {{"weights", m.weights}, {"bias", m.bias}, {"platt_a", m.platt_a}, {"platt_b", m.platt_b}};
      break;
    case ModelKind::linear:
      params = {{"weights", m.weights}, {"bias", m.bias}};
      break;
    case ModelKind::tree: {
      json tree = json::array();
      for (const auto& n : m.tree) {
        tree.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
                        {"right", n.right}, {"value", n.value}});
      }
      params = {{"nodes", tree}};
      break;
    }
  }
  json j{{"kind", to_string(m.kind)}, {"parameters", params}, {"feature_names", {"c", "u"}},
         {"seed", m.seed}};
  detail::put_optional(j, "train_f1", train_f1);
  detail::put_optional(j, "test_f1", test_f1);
  return j;
}

inline ComparisonModel model_from_json(const json& j) {
  ComparisonModel m;
  m.kind = parse_model_kind(j.at("kind").get<std::string>());
  const json& p = j.at("parameters");
  switch (m.kind) {
    case ModelKind::threshold:
      m.cut = p.at("cut").get<double>();
      break;
    case ModelKind::svm:
      m.platt_a = p.at("platt_a").get<double>();
      m.platt_b = p.at("platt_b").get<double>();
      [[fallthrough]];
    case ModelKind::linear:
      m.weights = p.at("weights").get<std::array<double, 2>>();
      m.bias = p.at("bias").get<double>();
      break;
    case ModelKind::tree:
      for (const auto& n : p.at("nodes")) {
        m.tree.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(),
                          n.at("left").get<int>(), n.at("right").get<int>(), n.at("value").get<double>()});
      }
      break;
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

// ---------------------------------------------------------------------------
// Clusters, distribution, biasing lists

/// Records {"cluster_id", "members", "member_ids", "canonical"}. The canonical
/// name is the highest-mass click-resolved member, or null when no member of
/// the cluster is resolved.
inline std::string clusters_to_jsonl(const ClusterSet& cs, const RequestLog& log, const std::string& model,
                                     const std::string& hash) {
  std::vector<json> recs;
  const auto resolutions = mine_click_resolutions(log);
  const auto p_r = log.empty() ? std::vector<double>{} : reference_probabilities(log);
  for (std::uint32_t c = 0; c < cs.size(); ++c) {
    std::vector<std::string> refs;
    bool resolved = false;
    for (auto r : cs.clusters[c]) {
      refs.push_back(log.reference(r));
      resolved = resolved || resolutions.count(r);
    }
    json canonical = nullptr;
    if (resolved) canonical = log.reference(select_canonical(cs.clusters[c], resolutions, p_r, log.references()));
    recs.push_back({{"cluster_id", c}, {"members", refs}, {"member_ids", cs.clusters[c]}, {"canonical", canonical}});
  }
  json h = make_header("refdedup.clusters", hash);
  h["model"] = model;
  h["dimension"] = cs.cluster_of.size();
  h["clusters"] = cs.size();
  return dump_jsonl(h, recs);
}

inline ClusterSet clusters_from_jsonl(const JsonLines& doc) {
  const auto dim = doc.header.at("dimension").get<std::size_t>();
  constexpr std::uint32_t unset = 0xffffffffu;
  std::vector<std::uint32_t> label(dim, unset);
  for (const auto& r : doc.records) {
    const auto id = r.at("cluster_id").get<std::uint32_t>();
    for (auto m : r.at("member_ids")) {
      const auto ref = m.get<RefId>();
      if (ref >= dim || label[ref] != unset) throw FormatError("clusters: bad or repeated member " + std::to_string(ref));
      label[ref] = id;
    }
  }
  for (RefId r = 0; r < dim; ++r) {
    if (label[r] == unset) throw FormatError("clusters: reference " + std::to_string(r) + " has no cluster");
  }
  return ClusterSet::from_labels(label);
}

inline std::string distribution_to_jsonl(const EntityDistribution& d, const ClusterSet& cs,
                                         const std::string& hash) {
  std::vector<json> recs;
  double total = 0.0;
  for (std::uint32_t c = 0; c < cs.size(); ++c) {
    json members = json::array();
    for (auto r : cs.clusters[c]) members.push_back({{"ref_id", r}, {"p_r", d.reference_mass[r]}});
    recs.push_back({{"cluster_id", c}, {"p_e", d.cluster_mass[c]}, {"members", members}});
    total += d.cluster_mass[c];
  }
  json h = make_header("refdedup.distribution", hash);
  h["dimension"] = d.reference_mass.size();
  h["total_mass"] = total;
  return dump_jsonl(h, recs);
}

inline EntityDistribution distribution_from_jsonl(const JsonLines& doc) {
  EntityDistribution d;
  d.reference_mass.assign(doc.header.at("dimension").get<std::size_t>(), 0.0);
  d.cluster_mass.resize(doc.records.size(), 0.0);
  for (const auto& r : doc.records) {
    const auto c = r.at("cluster_id").get<std::size_t>();
    if (c >= d.cluster_mass.size()) throw FormatError("distribution: cluster id out of range");
    d.cluster_mass[c] = r.at("p_e").get<double>();
    for (const auto& m : r.at("members")) d.reference_mass.at(m.at("ref_id").get<RefId>()) = m.at("p_r").get<double>();
  }
  return d;
}

inline std::string biasing_to_jsonl(const BiasingList& list, const std::string& source,
                                    const std::string& hash) {
  std::vector<json> recs;
  for (const auto& e : list.entries) {
    json j{{"canonical", e.canonical}, {"weight", e.weight}};
    detail::put_optional(j, "cluster_id", e.cluster_id);
    j["misrecognized_mass"] = e.misrecognized_mass;
    recs.push_back(std::move(j));
  }
  json h = make_header("refdedup.biasing", hash);
  h["source"] = source;
  h["budget"] = list.budget;
  return dump_jsonl(h, recs);
}

inline BiasingList biasing_from_jsonl(const JsonLines& doc) {
  BiasingList list;
  list.budget = doc.header.at("budget").get<std::size_t>();
  for (const auto& r : doc.records) {
    list.entries.push_back({r.at("canonical").get<std::string>(), r.at("weight").get<double>(),
                            detail::get_optional<std::uint32_t>(r, "cluster_id"),
                            r.at("misrecognized_mass").get<double>()});
  }
  return list;
}

/// One canonical form per line, for shallow-fusion consumers.
inline std::string biasing_to_text(const BiasingList& list) {
  std::string out;
  for (const auto& e : list.entries) {
    out += e.canonical;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct PairScore {
  std::string model;
  double recall = 0.0, precision = 0.0, f1 = 0.0;
  std::size_t train = 0, test = 0;
};

struct GateResult {
  std::string name;
  std::optional<double> value;  // nullopt when the quantity could not be measured
  std::string relation;         // ">=" or "<"
  double bound = 0.0;
  bool pass = false;
};

struct Report {
  std::string manifest_hash;
  std::string dataset;
  std::map<std::string, double> summary;  // counts and sizes
  std::vector<EvalReport> clusters;       // cluster-level rows
  std::vector<PairScore> pairs;           // held-out pair rows
  std::vector<WerReport> wer;
  std::vector<GateResult> gates;

  bool gates_pass() const {
    for (const auto& g : gates) {
      if (!g.pass) return false;
    }
    return true;
  }
};

inline json eval_to_json(const EvalReport& e) {
  json j{{"dataset", e.dataset}, {"model", e.model}};
  detail::put_optional(j, "recall", e.recall);
  detail::put_optional(j, "precision", e.precision);
  detail::put_optional(j, "f1", e.f1);
  j["tp"] = e.tp;
  j["fp"] = e.fp;
  j["fn"] = e.fn;
  j["evaluated"] = e.evaluated;
  return j;
}

inline json report_to_json(const Report& r) {
  json j{{"format", "refdedup.report"}, {"version", 1}, {"manifest_hash", r.manifest_hash},
         {"dataset", r.dataset}};
  j["summary"] = json::object();
  for (const auto& [k, v] : r.summary) j["summary"][k] = v;
  j["clusters"] = json::array();
  for (const auto& e : r.clusters) j["clusters"].push_back(eval_to_json(e));
  j["pairs"] = json::array();
  for (const auto& p : r.pairs) {
    j["pairs"].push_back({{"model", p.model}, {"recall", p.recall}, {"precision", p.precision},
                          {"f1", p.f1}, {"train", p.train}, {"test", p.test}});
  }
  j["wer"] = json::array();
  for (const auto& w : r.wer) {
    j["wer"].push_back({{"source", w.source}, {"scope", to_string(w.scope)},
                        {"relative_wer_percent", w.relative_wer_percent}, {"base_wer", w.base_wer},
                        {"biased_wer", w.biased_wer}, {"requests", w.requests},
                        {"reference_words", w.reference_words}, {"changed", w.changed}});
  }
  j["gates"] = json::array();
  for (const auto& g : r.gates) {
    json gj{{"name", g.name}};
    detail::put_optional(gj, "value", g.value);
    gj["relation"] = g.relation;
    gj["bound"] = g.bound;
    gj["pass"] = g.pass;
    j["gates"].push_back(std::move(gj));
  }
  j["gates_pass"] = r.gates_pass();
  return j;
}

namespace detail {

inline std::string fixed3(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  return buf;
}

inline std::string render_table(const std::vector<std::string>& head,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) w[c] = head[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += cells[c];
      if (c + 1 < cells.size()) out += std::string(w[c] - cells[c].size() + 2, ' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + '\n';
  };
  std::size_t total = 0;
  for (auto x : w) total += x + 2;
  std::string rule(total - 2, '-');
  std::string out = line(head) + rule + '\n';
  for (const auto& row : rows) out += line(row);
  return out;
}

}  // namespace detail

/// Plain-text tables: cluster-level deduplication, held-out pair
/// classification, relative WER, then gates.
inline std::string report_to_text(const Report& r) {
  std::ostringstream os;
  os << "manifest " << r.manifest_hash << "  dataset " << r.dataset << "\n\n";
  if (!r.summary.empty()) {
    for (const auto& [k, v] : r.summary) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6g", v);
      os << k << ": " << buf << '\n';
    }
    os << '\n';
  }
  if (!r.clusters.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : r.clusters) {
      rows.push_back({e.dataset, e.model, detail::fixed3(e.recall), detail::fixed3(e.precision),
                      detail::fixed3(e.f1)});
    }
    os << "Record deduplication\n"
       << detail::render_table({"Dataset", "Model", "Recall", "Precision", "F1"}, rows) << '\n';
  }
  if (!r.pairs.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : r.pairs) {
      rows.push_back({p.model, detail::fixed3(p.recall), detail::fixed3(p.precision), detail::fixed3(p.f1)});
    }
    os << "Held-out labeled pairs\n" << detail::render_table({"Model", "Recall", "Precision", "F1"}, rows) << '\n';
  }
  if (!r.wer.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& w : r.wer) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", w.relative_wer_percent);
      rows.push_back({w.source, to_string(w.scope), w.source == "base" ? "0" : buf});
    }
    os << "Relative WER\n" << detail::render_table({"Model", "Refs in Dataset", "rel. WER (%)"}, rows) << '\n';
  }
  if (!r.gates.empty()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& g : r.gates) {
      char bound[32], value[32];
      std::snprintf(bound, sizeof bound, "%.4g", g.bound);
      if (g.value) std::snprintf(value, sizeof value, "%.4f", *g.value);
      else std::snprintf(value, sizeof value, "n/a");
      rows.push_back({g.name, value, std::string(g.relation) + " " + bound, g.pass ? "pass" : "FAIL"});
    }
    os << "Gates\n" << detail::render_table({"Gate", "Value", "Bound", "Result"}, rows);
  }
  return os.str();
}

}  // namespace refdedup
