#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace refdedup {

inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (t.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

/// Levenshtein distance over arbitrary sequences with unit costs.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  const std::size_t n = std::size(a), m = std::size(b);
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  auto ai = std::begin(a);
  for (std::size_t i = 1; i <= n; ++i, ++ai) {
    cur[0] = i;
    auto bj = std::begin(b);
    for (std::size_t j = 1; j <= m; ++j, ++bj) {
      const std::size_t sub = prev[j - 1] + (*ai == *bj ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Character-level edit distance.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  return levenshtein(a, b);
}

/// Word-level edit distance, used for WER.
inline std::size_t word_edit_distance(std::string_view a, std::string_view b) {
  return levenshtein(tokenize(a), tokenize(b));
}

namespace detail {

inline constexpr const char* kOnes[] = {
    "zero",    "one",     "two",       "three",    "four",
    "five",    "six",     "seven",     "eight",    "nine",
    "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
    "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
inline constexpr const char* kTens[] = {"",      "",      "twenty",  "thirty",
                                        "forty", "fifty", "sixty",   "seventy",
                                        "eighty", "ninety"};
inline constexpr const char* kOrdinalOnes[] = {
    "zeroth",     "first",      "second",     "third",        "fourth",
    "fifth",      "sixth",      "seventh",    "eighth",       "ninth",
    "tenth",      "eleventh",   "twelfth",    "thirteenth",   "fourteenth",
    "fifteenth",  "sixteenth",  "seventeenth", "eighteenth",  "nineteenth"};

inline void cardinal_below_thousand(std::uint64_t n, std::vector<std::string>& out) {
  if (n >= 100) {
    out.emplace_back(kOnes[n / 100]);
    out.emplace_back("hundred");
    n %= 100;
    if (n == 0) return;
  }
  if (n < 20) {
    out.emplace_back(kOnes[n]);
  } else {
    out.emplace_back(kTens[n / 10]);
    if (n % 10) out.emplace_back(kOnes[n % 10]);
  }
}

inline void cardinal(std::uint64_t n, std::vector<std::string>& out) {
  if (n == 0) {
    out.emplace_back("zero");
    return;
  }
  static constexpr std::pair<std::uint64_t, const char*> scales[] = {
      {1000000000000ULL, "trillion"},
      {1000000000ULL, "billion"},
      {1000000ULL, "million"},
      {1000ULL, "thousand"}};
  for (auto [value, name] : scales) {
    if (n >= value) {
      cardinal(n / value, out);
      out.emplace_back(name);
      n %= value;
    }
  }
  if (n) cardinal_below_thousand(n, out);
}

// Four-digit years read in pairs ("nineteen seventeen"); 2000-2009 read as
// cardinals.
inline bool year_like(std::string_view digits) {
  if (digits.size() != 4 || digits[0] == '0') return false;
  const int v = std::stoi(std::string(digits));
  return (v >= 1100 && v <= 1999) || (v >= 2010 && v <= 2099);
}

inline void verbalize_digits(std::string_view digits, std::vector<std::string>& out) {
  if (digits.size() > 1 && digits[0] == '0') {
    for (char d : digits) out.emplace_back(kOnes[d - '0']);
    return;
  }
  if (digits.size() > 15) {
    for (char d : digits) out.emplace_back(kOnes[d - '0']);
    return;
  }
  if (year_like(digits)) {
    const int v = std::stoi(std::string(digits));
    cardinal_below_thousand(static_cast<std::uint64_t>(v / 100), out);
    const int rest = v % 100;
    if (rest == 0) {
      out.emplace_back("hundred");
    } else if (rest < 10) {
      out.emplace_back("oh");
      out.emplace_back(kOnes[rest]);
    } else {
      cardinal_below_thousand(static_cast<std::uint64_t>(rest), out);
    }
    return;
  }
  cardinal(std::stoull(std::string(digits)), out);
}

inline void ordinal(std::uint64_t n, std::vector<std::string>& out) {
  cardinal(n, out);
  std::string& last = out.back();
  for (int i = 0; i < 20; ++i) {
    if (last == kOnes[i]) {
      last = kOrdinalOnes[i];
      return;
    }
  }
  if (last.back() == 'y') {
    last.pop_back();
    last += "ieth";
  } else {
    last += "th";  // hundredth, thousandth, millionth
  }
}

inline int roman_value(char c) {
  switch (c) {
    case 'I': return 1;
    case 'V': return 5;
    case 'X': return 10;
    case 'L': return 50;
    case 'C': return 100;
    default: return 0;
  }
}

// Sequel-style numerals only: uppercase, at least two letters, value <= 49,
// written in canonical form. "MIX" or "CIVIL" stay words.
inline int parse_roman(std::string_view tok) {
  if (tok.size() < 2) return 0;
  int total = 0;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const int v = roman_value(tok[i]);
    if (v == 0) return 0;
    const int next = i + 1 < tok.size() ? roman_value(tok[i + 1]) : 0;
    total += v < next ? -v : v;
  }
  if (total <= 0 || total > 49) return 0;
  // Canonical re-encoding check rejects forms like "IIII" or "VX".
  static constexpr std::pair<int, const char*> table[] = {
      {40, "XL"}, {10, "X"}, {9, "IX"}, {5, "V"}, {4, "IV"}, {1, "I"}};
  std::string enc;
  int rest = total;
  for (auto [v, s] : table) {
    while (rest >= v) {
      enc += s;
      rest -= v;
    }
  }
  return enc == tok ? total : 0;
}

inline bool is_ordinal_suffix(std::string_view s) {
  return s == "st" || s == "nd" || s == "rd" || s == "th";
}

}  // namespace detail

/// Canonical title -> spoken form: lowercase ASCII words, no punctuation or
/// digits, single spaces. Throws std::invalid_argument when nothing remains.
inline std::string normalize_title(std::string_view raw) {
  // Pass 1: split into raw chunks on anything that is not alphanumeric.
  // Apostrophes join ("don't" -> "dont"); a '.' between digits is "point";
  // '&' and '+' become words.
  std::vector<std::string> chunks;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) chunks.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const unsigned char ch = static_cast<unsigned char>(raw[i]);
    if (std::isalnum(ch) && ch < 0x80) {
      // Letter/digit boundaries split: "9to5" -> "9", "to", "5". Ordinal
      // suffixes stay attached so "2nd" can be read as "second".
      if (!cur.empty()) {
        const bool prev_digit = std::isdigit(static_cast<unsigned char>(cur.back()));
        const bool this_digit = std::isdigit(ch);
        if (prev_digit != this_digit) {
          const bool ordinal_tail =
              prev_digit && i + 1 < raw.size() &&
              detail::is_ordinal_suffix(
                  std::string{static_cast<char>(std::tolower(ch)),
                              static_cast<char>(std::tolower(
                                  static_cast<unsigned char>(raw[i + 1])))}) &&
              (i + 2 >= raw.size() ||
               !std::isalnum(static_cast<unsigned char>(raw[i + 2])));
          if (ordinal_tail) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
            cur.push_back(static_cast<char>(std::tolower(
                static_cast<unsigned char>(raw[i + 1]))));
            ++i;
            flush();
            continue;
          }
          flush();
        }
      }
      cur.push_back(static_cast<char>(ch));
    } else if (ch == '\'' ) {
      continue;
    } else if (ch == '.' && !cur.empty() &&
               std::isdigit(static_cast<unsigned char>(cur.back())) &&
               i + 1 < raw.size() &&
               std::isdigit(static_cast<unsigned char>(raw[i + 1]))) {
      flush();
      chunks.emplace_back("point");
    } else if (ch == '&') {
      flush();
      chunks.emplace_back("and");
    } else if (ch == '+') {
      flush();
      chunks.emplace_back("plus");
    } else {
      flush();
    }
  }
  flush();

  // Pass 2: verbalize numerals, lowercase words.
  std::vector<std::string> words;
  for (const auto& c : chunks) {
    if (std::isdigit(static_cast<unsigned char>(c[0]))) {
      std::size_t ndig = 0;
      while (ndig < c.size() && std::isdigit(static_cast<unsigned char>(c[ndig]))) ++ndig;
      if (ndig < c.size()) {
        const auto n = std::stoull(c.substr(0, std::min<std::size_t>(ndig, 15)));
        detail::ordinal(n, words);
      } else {
        detail::verbalize_digits(c, words);
      }
      continue;
    }
    if (const int r = detail::parse_roman(c); r > 0) {
      detail::cardinal(static_cast<std::uint64_t>(r), words);
      continue;
    }
    std::string w;
    w.reserve(c.size());
    for (char ch : c) w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    words.push_back(std::move(w));
  }
  std::string out = join(words);
  if (out.empty()) {
    throw std::invalid_argument("normalize_title: \"" + std::string(raw) +
                                "\" is empty after normalization");
  }
  return out;
}

/// True when `s` already satisfies the spoken-form invariant.
inline bool is_spoken_form(std::string_view s) {
  if (s.empty() || s.front() == ' ' || s.back() == ' ') return false;
  char prev = 'a';
  for (char ch : s) {
    if (ch == ' ') {
      if (prev == ' ') return false;
    } else if (ch < 'a' || ch > 'z') {
      return false;
    }
    prev = ch;
  }
  return true;
}

}  // namespace refdedup
