#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "refdedup/rng.hpp"
#include "refdedup/text.hpp"
#include "refdedup/vocabulary.hpp"

namespace refdedup {

using RefId = std::uint32_t;

struct Entity {
  std::string id;
  std::string canonical_title;
  std::string spoken_form;
  double popularity = 0.0;
};

class Catalog {
 public:
  Catalog() = default;

  explicit Catalog(std::vector<Entity> entities) : entities_(std::move(entities)) {
    std::unordered_set<std::string> forms;
    double total = 0.0;
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      const Entity& e = entities_[i];
      if (!by_id_.emplace(e.id, i).second)
        throw std::invalid_argument("catalog: duplicate entity id '" + e.id + "'");
      if (!is_spoken_form(e.spoken_form))
        throw std::invalid_argument("catalog: entity '" + e.id +
                                    "' has non-normalized spoken_form '" + e.spoken_form + "'");
      if (!forms.insert(e.spoken_form).second)
        throw std::invalid_argument("catalog: duplicate spoken_form '" + e.spoken_form + "'");
      if (!(e.popularity > 0.0))
        throw std::invalid_argument("catalog: entity '" + e.id + "' has non-positive popularity");
      total += e.popularity;
    }
    if (!entities_.empty() && std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("catalog: popularity sums to " + std::to_string(total) +
                                  ", expected 1");
  }

  const std::vector<Entity>& entities() const { return entities_; }
  std::size_t size() const { return entities_.size(); }
  bool empty() const { return entities_.empty(); }
  const Entity& operator[](std::size_t i) const { return entities_[i]; }

  const Entity* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &entities_[it->second];
  }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Token-level confusion channel for one simulated voice.
struct CorruptionProfile {
  std::string profile_id;
  double substitution_rate = 0.0;
  double deletion_rate = 0.0;
  double insertion_rate = 0.0;
  // Substitution only applies to tokens listed here. Values are spoken
  // forms and may span several tokens ("r kelly").
  std::map<std::string, std::vector<std::string>> homophone_table;
  std::vector<std::string> insertion_tokens = {"the", "a", "of", "and"};
  std::uint64_t seed = 0;

  void validate() const {
    for (double r : {substitution_rate, deletion_rate, insertion_rate}) {
      if (!(r >= 0.0 && r <= 1.0))
        throw std::invalid_argument("profile '" + profile_id + "': rate outside [0,1]");
    }
  }

  CorruptionProfile scaled(double factor) const {
    CorruptionProfile p = *this;
    p.substitution_rate = std::clamp(substitution_rate * factor, 0.0, 1.0);
    p.deletion_rate = std::clamp(deletion_rate * factor, 0.0, 1.0);
    p.insertion_rate = std::clamp(insertion_rate * factor, 0.0, 1.0);
    return p;
  }
};

struct Request {
  std::string user_id;
  std::int64_t timestamp = 0;
  std::vector<std::string> nbest;
  std::optional<std::string> clicked_entity;
  std::optional<std::size_t> repeat_of;  // index of an earlier request in the log
  // Generator annotation; absent in production logs.
  std::optional<std::string> true_entity;

  const std::string& top1() const { return nbest.front(); }
};

/// Requests plus a dense id for every distinct reference string that occurs
/// anywhere in an n-best list. Ids follow first appearance.
class RequestLog {
 public:
  RequestLog() = default;

  explicit RequestLog(std::vector<Request> requests) : requests_(std::move(requests)) {
    nbest_ids_.reserve(requests_.size());
    for (std::size_t i = 0; i < requests_.size(); ++i) {
      const Request& r = requests_[i];
      if (r.nbest.empty())
        throw std::invalid_argument("request " + std::to_string(i) + ": empty n-best");
      std::vector<RefId> ids;
      ids.reserve(r.nbest.size());
      for (const auto& h : r.nbest) {
        auto [it, inserted] = index_.try_emplace(h, static_cast<RefId>(references_.size()));
        if (inserted) references_.push_back(h);
        if (std::find(ids.begin(), ids.end(), it->second) != ids.end())
          throw std::invalid_argument("request " + std::to_string(i) +
                                      ": duplicate n-best entry '" + h + "'");
        ids.push_back(it->second);
      }
      nbest_ids_.push_back(std::move(ids));
      if (r.repeat_of) {
        const std::size_t p = *r.repeat_of;
        if (p >= i)
          throw std::invalid_argument("request " + std::to_string(i) +
                                      ": repeat_of must point to an earlier request");
        if (requests_[p].user_id != r.user_id || requests_[p].timestamp >= r.timestamp)
          throw std::invalid_argument("request " + std::to_string(i) +
                                      ": repeat_of must reference an earlier request of the same user");
      }
    }
  }

  const std::vector<Request>& requests() const { return requests_; }
  std::size_t size() const { return requests_.size(); }
  bool empty() const { return requests_.empty(); }

  std::size_t reference_count() const { return references_.size(); }
  const std::string& reference(RefId id) const { return references_[id]; }
  const std::vector<std::string>& references() const { return references_; }

  std::optional<RefId> find(std::string_view ref) const {
    auto it = index_.find(std::string(ref));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const RefId> nbest_ids(std::size_t request) const { return nbest_ids_[request]; }
  RefId top1(std::size_t request) const { return nbest_ids_[request].front(); }

 private:
  std::vector<Request> requests_;
  std::vector<std::string> references_;
  std::unordered_map<std::string, RefId> index_;
  std::vector<std::vector<RefId>> nbest_ids_;
};

// ---------------------------------------------------------------------------
// Confusion channel

namespace detail {

// Sound-alike spellings of one word: every applicable rewrite rule, plus a
// shift of the last vowel. Sorted, unique, never the input.
inline std::vector<std::string> sound_alikes(const std::string& w) {
  static constexpr std::pair<std::string_view, std::string_view> rules[] = {
      {"tion", "shun"}, {"ight", "ite"}, {"ph", "f"},  {"ck", "k"}, {"ee", "ea"},
      {"ea", "ee"},     {"ou", "ow"},    {"ai", "ay"}, {"qu", "kw"}, {"ce", "se"},
      {"wh", "w"},      {"kn", "n"},     {"er", "ur"}, {"y", "ie"}, {"c", "k"},
      {"s", "z"},       {"ll", "l"},     {"tt", "t"}};
  std::set<std::string> out;
  for (auto [from, to] : rules) {
    auto pos = w.find(from);
    if (pos != std::string::npos) {
      std::string v = w;
      v.replace(pos, from.size(), to);
      out.insert(std::move(v));
    }
  }
  static constexpr std::string_view from = "aeiou", to = "eiauo";
  if (auto pos = w.find_last_of(from); pos != std::string::npos && w.size() > 2) {
    std::string v = w;
    v[pos] = to[from.find(w[pos])];
    out.insert(std::move(v));
  }
  out.erase(w);
  return {out.begin(), out.end()};
}

// Random respelling by sound: each grapheme that belongs to a spelling class
// is rewritten with another member of its class with probability `rate`.
inline std::string respell_by_sound(const std::string& w, double rate, Rng& rng) {
  static const std::vector<std::vector<std::string_view>> classes = {
      {"tion", "shun", "sion"}, {"igh", "ie", "y", "i"}, {"ee", "ea", "ie", "ey"},
      {"ai", "ay", "ei", "ey"},  {"oo", "u", "ew", "ue"}, {"ou", "ow"},
      {"oa", "o", "ow", "oe"},   {"er", "ur", "ir", "ar"}, {"ph", "f", "gh"},
      {"ck", "k", "c", "q"},     {"ch", "tch", "sh"},      {"wh", "w"},
      {"kn", "n"},               {"wr", "r"},              {"x", "ks", "cks"},
      {"s", "z", "ss"},          {"ll", "l"},              {"tt", "t"},
      {"th", "d", "f"},          {"a", "e", "u"},          {"e", "i", "a"},
      {"i", "e", "y"},           {"o", "a", "u"},          {"u", "o", "a"},
      {"y", "ie", "i"},          {"c", "k", "s"},          {"g", "j"},
      {"v", "f"},                {"b", "p"},               {"d", "t"}};
  std::string out;
  for (std::size_t i = 0; i < w.size();) {
    const std::vector<std::string_view>* hit = nullptr;
    std::size_t len = 0;
    for (const auto& cls : classes) {
      for (auto g : cls) {
        if (g.size() > len && w.compare(i, g.size(), g) == 0) {
          hit = &cls;
          len = g.size();
        }
      }
    }
    if (!hit) {
      out += w[i++];
      continue;
    }
    const std::string_view here(w.data() + i, len);
    if (rng.bernoulli(rate)) {
      std::vector<std::string_view> others;
      for (auto g : *hit) {
        if (g != here) others.push_back(g);
      }
      out += others[rng.below(others.size())];
    } else {
      out += here;
    }
    i += len;
  }
  return out;
}

}  // namespace detail

/// Applies per-token deletion (inputs of three or more tokens only),
/// substitution and insertion. Profiles with all rates at zero return the
/// input and consume no draws.
inline std::string corrupt_reference(std::string_view spoken_form,
                                     const CorruptionProfile& profile, Rng& draw) {
  const auto tokens = tokenize(spoken_form);
  std::vector<std::string> out;
  out.reserve(tokens.size() + 2);
  for (const auto& tok : tokens) {
    if (profile.deletion_rate > 0.0 && tokens.size() > 2 &&
        draw.bernoulli(profile.deletion_rate)) {
      // dropped
    } else if (auto it = profile.homophone_table.find(tok);
               profile.substitution_rate > 0.0 && it != profile.homophone_table.end() &&
               !it->second.empty() && draw.bernoulli(profile.substitution_rate)) {
      const auto& alts = it->second;
      for (auto& t : tokenize(alts[draw.below(alts.size())])) out.push_back(std::move(t));
    } else {
      out.push_back(tok);
    }
    if (profile.insertion_rate > 0.0 && !profile.insertion_tokens.empty() &&
        draw.bernoulli(profile.insertion_rate)) {
      out.push_back(profile.insertion_tokens[draw.below(profile.insertion_tokens.size())]);
    }
  }
  if (out.empty()) return std::string(spoken_form);
  return join(out);
}

/// Exactly one edit for the lower n-best ranks: a swap from the profile's
/// table (or a sound-alike spelling for tokens it lacks), a token drop on
/// inputs of three or more tokens, or a filler insertion. Returns nullopt
/// when no edit applies.
inline std::optional<std::string> perturb_once(std::string_view spoken_form,
                                               const CorruptionProfile& profile, Rng& draw) {
  auto tokens = tokenize(spoken_form);
  std::vector<std::size_t> swappable;
  std::vector<std::vector<std::string>> alternatives(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = profile.homophone_table.find(tokens[i]);
    alternatives[i] = it != profile.homophone_table.end() ? it->second : detail::sound_alikes(tokens[i]);
    if (!alternatives[i].empty()) swappable.push_back(i);
  }
  const double w_sub = swappable.empty() ? 0.0 : std::max(profile.substitution_rate, 1e-3);
  const double w_del = tokens.size() > 2 ? std::max(profile.deletion_rate, 1e-3) : 0.0;
  const double w_ins = profile.insertion_tokens.empty() ? 0.0 : std::max(profile.insertion_rate, 1e-3);
  const double total = w_sub + w_del + w_ins;
  if (total <= 0.0) return std::nullopt;
  const double u = draw.uniform() * total;
  if (u < w_sub) {
    const std::size_t pos = swappable[draw.below(swappable.size())];
    const auto& alts = alternatives[pos];
    tokens[pos] = alts[draw.below(alts.size())];
  } else if (u < w_sub + w_del) {
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(draw.below(tokens.size())));
  } else {
    const auto& ins = profile.insertion_tokens[draw.below(profile.insertion_tokens.size())];
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(draw.below(tokens.size() + 1)), ins);
  }
  return join(tokens);
}

/// Simulated n-best: the corrupted top-1 first, the true form at a uniformly
/// drawn lower rank with probability `recovery_probability` (only when the
/// top-1 is wrong), remaining slots filled with single-edit variants of the
/// true form. Entries are unique; the list may be shorter than n.
inline std::vector<std::string> synthesize_nbest(const std::string& true_ref,
                                                 const std::string& corrupted, std::size_t n,
                                                 const CorruptionProfile& profile, Rng& draw,
                                                 double recovery_probability) {
  if (n == 0) throw std::invalid_argument("synthesize_nbest: n must be at least 1");
  std::vector<std::string> list{corrupted};
  if (n == 1) return list;
  const bool place_true = corrupted != true_ref && draw.bernoulli(recovery_probability);
  const std::size_t true_rank = place_true ? 1 + draw.below(n - 1) : 0;
  bool placed = false;
  std::size_t attempts = 0;
  while (list.size() < n) {
    if (place_true && !placed && list.size() == true_rank) {
      list.push_back(true_ref);
      placed = true;
      continue;
    }
    if (attempts++ >= 4 * n) break;
    auto cand = perturb_once(true_ref, profile, draw);
    if (!cand || *cand == true_ref) continue;
    if (std::find(list.begin(), list.end(), *cand) != list.end()) continue;
    list.push_back(std::move(*cand));
  }
  if (place_true && !placed) list.push_back(true_ref);
  return list;
}

// ---------------------------------------------------------------------------
// Synthetic catalog and voice profiles

struct CatalogConfig {
  std::size_t size = 900;
  double zipf_exponent = 0.0;  // 0 = uniform popularity
  double name_fraction = 0.0;  // share of title words that are invented names
  std::uint64_t seed = 7;
  std::vector<std::string> seed_titles = {"Archive 81", "Tiny Times III", "Bridgerton"};
};

namespace detail {

inline std::string title_case(std::string_view w) {
  std::string s(w);
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

// A pronounceable two- or three-syllable invented word.
inline std::string invented_name(Rng& rng) {
  static constexpr std::string_view onsets[] = {"b", "br", "c", "d", "dr", "f", "g", "gr", "h", "j",
                                                "k", "l", "m", "n", "p", "r", "s", "st", "t", "tr",
                                                "v", "w", "z", "sh", "ch", "th", "bl", "cl"};
  static constexpr std::string_view nuclei[] = {"a", "e", "i", "o", "u", "ai", "ee", "oo", "ou", "ia"};
  static constexpr std::string_view codas[] = {"", "", "", "n", "r", "l", "s", "m", "x", "nd", "rt", "ck"};
  std::string w;
  const std::size_t syllables = 2 + rng.below(2);
  for (std::size_t i = 0; i < syllables; ++i) {
    w += onsets[rng.below(std::size(onsets))];
    w += nuclei[rng.below(std::size(nuclei))];
    w += codas[rng.below(std::size(codas))];
  }
  return w;
}

inline std::string random_title(Rng& rng, double name_fraction) {
  static constexpr double kLengthCdf[] = {0.3, 0.75, 0.94, 1.0};
  const double u = rng.uniform();
  std::size_t len = 1;
  while (len < 4 && u >= kLengthCdf[len - 1]) ++len;
  std::string title = rng.bernoulli(0.08) ? "The" : "";
  for (std::size_t i = 0; i < len; ++i) {
    if (!title.empty()) title += ' ';
    title += title_case(rng.bernoulli(name_fraction)
                            ? invented_name(rng)
                            : std::string(kTitleVocabulary[rng.below(kTitleVocabulary.size())]));
  }
  const double s = rng.uniform();
  static constexpr const char* kRoman[] = {"II", "III", "IV", "V", "VI"};
  if (s < 0.07) {
    title += std::string(" ") + kRoman[rng.below(5)];
  } else if (s < 0.13) {
    title += " " + std::to_string(2 + rng.below(98));
  } else if (s < 0.16) {
    title += " " + std::to_string(1950 + rng.below(71));
  }
  return title;
}

}  // namespace detail

/// Titles are vocabulary phrases, partly made of invented names, with
/// occasional numerals. Popularity is Zipfian over a shuffled rank.
inline Catalog make_synthetic_catalog(const CatalogConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<Entity> entities;
  std::unordered_set<std::string> forms;
  auto add = [&](const std::string& title) {
    std::string spoken = normalize_title(title);
    if (!forms.insert(spoken).second) return;
    char id[16];
    std::snprintf(id, sizeof id, "e%05zu", entities.size());
    entities.push_back({id, title, std::move(spoken), 0.0});
  };
  for (const auto& t : cfg.seed_titles) {
    if (entities.size() < cfg.size) add(t);
  }
  while (entities.size() < cfg.size) add(detail::random_title(rng, cfg.name_fraction));

  std::vector<std::size_t> rank(entities.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  rng.shuffle(rank);
  double total = 0.0;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    entities[i].popularity = 1.0 / std::pow(static_cast<double>(rank[i] + 1), cfg.zipf_exponent);
    total += entities[i].popularity;
  }
  for (auto& e : entities) e.popularity /= total;
  return Catalog(std::move(entities));
}

struct ProfileConfig {
  std::size_t count = 9;
  double confusable_fraction = 0.35;  // share of tokens each voice confuses
  double known_word_confusable_fraction = 0.35;  // the same, for words in the ASR vocabulary
  std::size_t max_confusables = 2;
  double substitution_rate = 0.5;
  double deletion_rate = 0.03;
  double insertion_rate = 0.02;
  double real_word_rate = 0.1;   // share of confused tokens swapped for a near real word
  double misheard_rate = 0.0;    // share swapped for a two-word phrase of the same shape
  double respelling_rate = 0.5;  // per-grapheme rewrite rate of garbled spellings
  // Share of out-of-vocabulary tokens the recognizer itself gets wrong: every
  // voice confuses them, always with the same garbled spelling.
  double shared_confusable_fraction = 0.0;
  std::uint64_t seed = 11;
};

namespace detail {

// Attested confusions, present in every profile.
inline const std::map<std::string, std::vector<std::string>>& fixed_confusions() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"archive", {"arcade", "r kelly"}},
      {"one", {"won"}},
      {"two", {"to", "too"}},
      {"four", {"for"}},
      {"eight", {"ate"}},
      {"knight", {"night"}},
      {"night", {"knight"}},
  };
  return table;
}


}  // namespace detail

/// Builds `count` voices. Each voice confuses a random subset of the catalog's
/// tokens, mostly with garbled sound-alike spellings and sometimes with a
/// near-spelled real word. Out-of-vocabulary tokens picked as shared are
/// confused the same way by every voice.
inline std::vector<CorruptionProfile> make_voice_profiles(const Catalog& catalog,
                                                          const ProfileConfig& cfg) {
  const std::set<std::string> vocabulary(kTitleVocabulary.begin(), kTitleVocabulary.end());
  std::set<std::string> lexicon = vocabulary;
  std::set<std::string> catalog_tokens;
  for (const auto& e : catalog.entities()) {
    for (auto& t : tokenize(e.spoken_form)) catalog_tokens.insert(t);
  }
  lexicon.insert(catalog_tokens.begin(), catalog_tokens.end());
  const std::vector<std::string> words(lexicon.begin(), lexicon.end());

  std::map<std::string, std::vector<std::string>> near_words, garbles, misheard;
  for (const auto& w : catalog_tokens) {
    std::vector<std::string> c;
    const std::size_t radius = w.size() <= 4 ? 1 : 2;
    for (const auto& v : words) {
      if (v == w) continue;
      const std::size_t diff = v.size() > w.size() ? v.size() - w.size() : w.size() - v.size();
      if (diff <= radius && edit_distance(v, w) <= radius) c.push_back(v);
    }
    if (!c.empty()) near_words.emplace(w, std::move(c));
    std::vector<std::string> g;
    Rng spell(Rng::derive(cfg.seed, fnv1a(w)));
    for (std::size_t attempt = 0; attempt < 8 * cfg.max_confusables + 8 && g.size() < 4; ++attempt) {
      std::string v = detail::respell_by_sound(w, cfg.respelling_rate, spell);
      if (v == w || lexicon.count(v) || std::find(g.begin(), g.end(), v) != g.end()) continue;
      g.push_back(std::move(v));
    }
    if (!g.empty()) garbles.emplace(w, std::move(g));
    // Longer words misheard as a two-word phrase with the same first letter
    // and about the same length.
    std::vector<std::string> initial;
    for (auto v : kTitleVocabulary) {
      if (!w.empty() && v.front() == w.front()) initial.emplace_back(v);
    }
    if (w.size() >= 5 && !initial.empty()) {
      std::vector<std::string> m;
      for (std::size_t attempt = 0; attempt < 200 && m.size() < 4; ++attempt) {
        std::string phrase = initial[spell.below(initial.size())] + " " +
                             std::string(kTitleVocabulary[spell.below(kTitleVocabulary.size())]);
        const std::size_t diff = phrase.size() > w.size() ? phrase.size() - w.size() : w.size() - phrase.size();
        if (diff > 2 || std::find(m.begin(), m.end(), phrase) != m.end()) continue;
        m.push_back(std::move(phrase));
      }
      if (!m.empty()) misheard.emplace(w, std::move(m));
    }
  }

  std::map<std::string, std::vector<std::string>> shared;
  if (cfg.shared_confusable_fraction > 0.0) {
    Rng pick(Rng::derive(cfg.seed, 0x5a4eedULL));
    for (const auto& [w, g] : garbles) {
      if (!vocabulary.count(w) && pick.bernoulli(cfg.shared_confusable_fraction)) shared[w] = {g.front()};
    }
  }

  std::vector<CorruptionProfile> profiles;
  for (std::size_t p = 0; p < cfg.count; ++p) {
    CorruptionProfile prof;
    prof.profile_id = "voice" + std::to_string(p + 1);
    prof.substitution_rate = cfg.substitution_rate;
    prof.deletion_rate = cfg.deletion_rate;
    prof.insertion_rate = cfg.insertion_rate;
    prof.seed = Rng::mix(cfg.seed + 0x51ed27ULL * (p + 1));
    Rng rng(prof.seed);
    for (const auto& w : catalog_tokens) {
      const bool known = vocabulary.count(w) > 0;
      if (!rng.bernoulli(known ? cfg.known_word_confusable_fraction : cfg.confusable_fraction)) continue;
      const double u = rng.uniform();
      const auto& source = u < cfg.real_word_rate                        ? near_words
                           : u < cfg.real_word_rate + cfg.misheard_rate ? misheard
                                                                        : garbles;
      auto it = source.find(w);
      if (it == source.end()) continue;
      std::vector<std::string> pool = it->second;
      rng.shuffle(pool);
      pool.resize(std::min(pool.size(), std::max<std::size_t>(1, cfg.max_confusables)));
      prof.homophone_table.emplace(w, std::move(pool));
    }
    for (const auto& [w, alts] : shared) prof.homophone_table[w] = alts;
    for (const auto& [w, alts] : detail::fixed_confusions()) {
      if (catalog_tokens.count(w)) prof.homophone_table[w] = alts;
    }
    profiles.push_back(std::move(prof));
  }
  return profiles;
}

// ---------------------------------------------------------------------------
// Request synthesis

enum class SamplingMode {
  exhaustive,  // every voice speaks every entity once
  sampled,     // users draw entities by popularity, community and favorites
};

struct CorpusConfig {
  std::uint64_t seed = 1;
  SamplingMode mode = SamplingMode::sampled;
  std::size_t users = 100;
  std::size_t min_requests_per_user = 1;
  double mean_extra_requests = 9.0;  // geometric tail on top of the minimum
  std::size_t nbest_size = 5;
  double recovery_probability = 0.9;
  double click_rate_correct = 0.8;
  double click_rate_misrecognized = 0.3;
  double repeat_rate = 0.0;    // expected fraction of requests that are repeats
  double repeat_clarity = 0.5; // corruption-rate multiplier for a repeat
  std::size_t communities = 0;
  double community_affinity = 0.0;
  std::size_t favorites_per_user = 0;
  double favorite_affinity = 0.0;
};

/// Synthesizes a request log. Fully determined by the catalog, profiles and
/// config (including config.seed).
inline RequestLog generate_corpus(const Catalog& catalog,
                                  const std::vector<CorruptionProfile>& profiles,
                                  const CorpusConfig& cfg) {
  if (catalog.empty()) throw std::invalid_argument("generate_corpus: empty catalog");
  if (profiles.empty()) throw std::invalid_argument("generate_corpus: no corruption profiles");
  if (cfg.nbest_size == 0) throw std::invalid_argument("generate_corpus: nbest_size must be >= 1");
  if (!(cfg.repeat_rate >= 0.0 && cfg.repeat_rate < 1.0))
    throw std::invalid_argument("generate_corpus: repeat_rate must be in [0,1)");
  for (const auto& p : profiles) p.validate();

  std::vector<CorruptionProfile> clear;
  clear.reserve(profiles.size());
  for (const auto& p : profiles) clear.push_back(p.scaled(cfg.repeat_clarity));

  Rng rng(cfg.seed);
  std::vector<Request> out;
  std::int64_t clock = 0;
  // A repeat follows an original with probability q, so repeats make up
  // q / (1 + q) = repeat_rate of the log.
  const double follow = cfg.repeat_rate / (1.0 - cfg.repeat_rate);

  auto emit = [&](const std::string& user, const Entity& e, const CorruptionProfile& prof,
                  std::optional<std::size_t> repeat_of) {
    Request r;
    r.user_id = user;
    r.timestamp = clock++;
    const std::string top = corrupt_reference(e.spoken_form, prof, rng);
    r.nbest = synthesize_nbest(e.spoken_form, top, cfg.nbest_size, prof, rng,
                               cfg.recovery_probability);
    const double click_rate =
        top == e.spoken_form ? cfg.click_rate_correct : cfg.click_rate_misrecognized;
    if (rng.bernoulli(click_rate)) r.clicked_entity = e.id;
    r.repeat_of = repeat_of;
    r.true_entity = e.id;
    out.push_back(std::move(r));
  };
  auto emit_with_repeat = [&](const std::string& user, const Entity& e, std::size_t voice) {
    emit(user, e, profiles[voice], std::nullopt);
    if (follow > 0.0 && rng.bernoulli(follow)) emit(user, e, clear[voice], out.size() - 1);
  };

  if (cfg.mode == SamplingMode::exhaustive) {
    for (const auto& e : catalog.entities()) {
      for (std::size_t v = 0; v < profiles.size(); ++v) {
        emit_with_repeat("user-" + profiles[v].profile_id, e, v);
      }
    }
    return RequestLog(std::move(out));
  }

  std::vector<double> popularity;
  for (const auto& e : catalog.entities()) popularity.push_back(e.popularity);
  const auto global_cdf = cumulative_weights(popularity);

  // Entities dealt round-robin into communities after a shuffle.
  const std::size_t ncomm = std::max<std::size_t>(1, cfg.communities);
  std::vector<std::vector<std::size_t>> members(ncomm);
  {
    std::vector<std::size_t> order(catalog.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) members[i % ncomm].push_back(order[i]);
  }
  std::vector<std::vector<double>> community_cdf(ncomm);
  for (std::size_t c = 0; c < ncomm; ++c) {
    std::vector<double> w;
    for (auto i : members[c]) w.push_back(popularity[i]);
    community_cdf[c] = cumulative_weights(w);
  }
  auto draw_in_community = [&](std::size_t c) {
    return members[c][rng.pick_cumulative(community_cdf[c])];
  };

  const double extra_p = 1.0 / (1.0 + std::max(0.0, cfg.mean_extra_requests));
  for (std::size_t u = 0; u < cfg.users; ++u) {
    char uid[24];
    std::snprintf(uid, sizeof uid, "u%05zu", u);
    const std::string user = uid;
    const std::size_t community = rng.below(ncomm);
    const std::size_t voice = rng.below(profiles.size());
    std::vector<std::size_t> favorites;
    for (std::size_t f = 0; f < cfg.favorites_per_user; ++f) {
      favorites.push_back(cfg.communities > 0 ? draw_in_community(community)
                                              : rng.pick_cumulative(global_cdf));
    }
    const std::size_t nreq = cfg.min_requests_per_user + rng.geometric(extra_p);
    for (std::size_t k = 0; k < nreq; ++k) {
      const double a = rng.uniform();
      std::size_t ent;
      if (!favorites.empty() && a < cfg.favorite_affinity) {
        ent = favorites[rng.below(favorites.size())];
      } else if (cfg.communities > 0 && a < cfg.favorite_affinity + cfg.community_affinity) {
        ent = draw_in_community(community);
      } else {
        ent = rng.pick_cumulative(global_cdf);
      }
      emit_with_repeat(user, catalog[ent], voice);
    }
  }
  return RequestLog(std::move(out));
}

// ---------------------------------------------------------------------------
// Feedback mining

struct RefPair {
  RefId a = 0;  // a < b
  RefId b = 0;

  static RefPair of(RefId x, RefId y) { return x < y ? RefPair{x, y} : RefPair{y, x}; }
  std::uint64_t key() const { return (static_cast<std::uint64_t>(a) << 32) | b; }
  static RefPair from_key(std::uint64_t k) {
    return {static_cast<RefId>(k >> 32), static_cast<RefId>(k & 0xffffffffu)};
  }
  auto operator<=>(const RefPair&) const = default;
};

/// Unordered (request, repeat) top-1 pairs seen from at least `min_support`
/// distinct users.
inline std::set<RefPair> mine_repeat_pairs(const RequestLog& log, std::size_t min_support = 3) {
  std::map<RefPair, std::set<std::string>> support;
  const auto& reqs = log.requests();
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    if (!reqs[i].repeat_of) continue;
    const RefId a = log.top1(*reqs[i].repeat_of);
    const RefId b = log.top1(i);
    if (a == b) continue;
    support[RefPair::of(a, b)].insert(reqs[i].user_id);
  }
  std::set<RefPair> out;
  for (const auto& [pair, users] : support) {
    if (users.size() >= min_support) out.insert(pair);
  }
  return out;
}

/// reference -> entity for references whose most-clicked entity has a
/// clickthrough rate above 0.5 (clicks over impressions of the reference).
inline std::map<RefId, std::string> mine_click_resolutions(const RequestLog& log) {
  std::vector<std::size_t> impressions(log.reference_count(), 0);
  std::vector<std::map<std::string, std::size_t>> clicks(log.reference_count());
  const auto& reqs = log.requests();
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const RefId r = log.top1(i);
    ++impressions[r];
    if (reqs[i].clicked_entity) ++clicks[r][*reqs[i].clicked_entity];
  }
  std::map<RefId, std::string> out;
  for (RefId r = 0; r < log.reference_count(); ++r) {
    if (impressions[r] == 0 || clicks[r].empty()) continue;
    auto best = std::max_element(clicks[r].begin(), clicks[r].end(),
                                 [](const auto& x, const auto& y) { return x.second < y.second; });
    if (2 * best->second > impressions[r]) out.emplace(r, best->first);
  }
  return out;
}

}  // namespace refdedup
