#include <gtest/gtest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "refdedup/rng.hpp"
#include "refdedup/text.hpp"

using namespace refdedup;

namespace {

// Full-table Levenshtein, written independently of the two-row version.
std::size_t dp_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

std::string random_string(Rng& rng, std::size_t max_len) {
  static const std::string alphabet = "abcde ";
  std::string s(rng.below(max_len + 1), 'a');
  for (auto& c : s) c = alphabet[rng.below(alphabet.size())];
  return s;
}

}  // namespace

TEST(NormalizeTitle, Examples) {
  EXPECT_EQ(normalize_title("Tiny Times III"), "tiny times three");
  EXPECT_EQ(normalize_title("archive 81"), "archive eighty one");
  EXPECT_EQ(normalize_title("abc"), "abc");
}

TEST(NormalizeTitle, Numerals) {
  EXPECT_EQ(normalize_title("Apollo 13"), "apollo thirteen");
  EXPECT_EQ(normalize_title("Blade Runner 2049"), "blade runner twenty forty nine");
  EXPECT_EQ(normalize_title("The 2nd Act"), "the second act");
  EXPECT_EQ(normalize_title("Rocky IV"), "rocky four");
  EXPECT_EQ(normalize_title("Tom & Jerry"), "tom and jerry");
  EXPECT_EQ(normalize_title("Don't Look Up!"), "dont look up");
}

TEST(NormalizeTitle, EmptyIsRejected) {
  EXPECT_THROW(normalize_title(""), std::invalid_argument);
  EXPECT_THROW(normalize_title("?!  --"), std::invalid_argument);
}

TEST(NormalizeTitle, IdempotentAndSpoken) {
  const std::vector<std::string> raw = {"Tiny Times III", "archive 81", "Ocean's 11",
                                        "Mission: Impossible II", "9to5", "1984",
                                        "Se7en", "Pi 3.14", "ALL CAPS TITLE", "  spaced   out "};
  for (const auto& r : raw) {
    const std::string once = normalize_title(r);
    EXPECT_TRUE(is_spoken_form(once)) << r << " -> " << once;
    EXPECT_EQ(normalize_title(once), once) << r;
  }
}

TEST(EditDistance, Examples) {
  EXPECT_EQ(edit_distance("abc", "abc"), 0u);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  // Substitute h->a, i->d, v->e and delete the trailing e: the DP finds 3.
  const std::size_t archive = edit_distance("archive eighty one", "arcade eighty one");
  EXPECT_EQ(archive, dp_oracle("archive eighty one", "arcade eighty one"));
  EXPECT_EQ(archive, 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
}

TEST(EditDistance, MatchesOracleAndMetricAxioms) {
  Rng rng(17);
  for (int t = 0; t < 2000; ++t) {
    const auto a = random_string(rng, 9), b = random_string(rng, 9), c = random_string(rng, 9);
    const auto ab = edit_distance(a, b);
    ASSERT_EQ(ab, dp_oracle(a, b)) << a << " | " << b;
    ASSERT_EQ(ab, edit_distance(b, a));
    ASSERT_LE(edit_distance(a, c), ab + edit_distance(b, c));
    ASSERT_EQ(ab == 0, a == b);
  }
}

TEST(WordEditDistance, CountsTokens) {
  EXPECT_EQ(word_edit_distance("archive eighty one", "arcade eighty one"), 1u);
  EXPECT_EQ(word_edit_distance("archive eighty one", "r kelly one"), 2u);
  EXPECT_EQ(word_edit_distance("a b c", ""), 3u);
  EXPECT_EQ(word_edit_distance("a  b", "a b"), 0u);
}
