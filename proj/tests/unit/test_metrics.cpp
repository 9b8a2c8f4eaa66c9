#include <doctest.h>

#include <algorithm>

#include "htr/core/rng.hpp"
#include "htr/metrics/cer.hpp"
#include "oracles.hpp"

using namespace htr;
using namespace htr::metrics;

namespace {

std::u32string random_string(RngStream& rng, std::size_t max_len, std::size_t alphabet) {
  std::u32string s;
  for (std::size_t i = 0, n = rng.uniform_below(max_len + 1); i < n; ++i) s.push_back(U'a' + rng.uniform_below(alphabet));
  return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("edit distance matches the recursive oracle") {
  RngStream rng(1, 1);
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_string(rng, 8, 3), b = random_string(rng, 8, 3);
    CHECK(edit_distance(a, b) == testing::edit_distance_oracle(a, b));
  }
  CHECK(edit_distance(U"kitten", U"sitting") == 3);
  CHECK(edit_distance_utf8("\xd8\xa8\xd8\xaa", "\xd8\xaa") == 1);
}

TEST_CASE("edit distance is a metric") {
  RngStream rng(2, 1);
  for (int i = 0; i < 3000; ++i) {
    const auto a = random_string(rng, 10, 4), b = random_string(rng, 10, 4), c = random_string(rng, 10, 4);
    CHECK(edit_distance(a, b) == edit_distance(b, a));
    CHECK((edit_distance(a, b) == 0) == (a == b));
    CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
  }
}

TEST_CASE("corpus cer examples") {
  CHECK(corpus_cer({{U"ab", U"ab"}, {U"cd", U"cd"}}).cer == 0.0);
  const auto r = corpus_cer({{U"ab", U"ab"}, {U"cd", U"ce"}});
  CHECK(r.cer == doctest::Approx(25.0));
  CHECK(r.total_edits == 1);
  CHECK(r.total_ref_chars == 4);
  CHECK_THROWS_AS(corpus_cer({{U"", U"x"}}), std::invalid_argument);
  CHECK_THROWS_AS(corpus_cer({}), std::invalid_argument);
}

TEST_CASE("pooled and per-line mean differ on unequal lengths") {
  // one error on a 1-char line, none on a 9-char line: pooled 10%, mean 50%
  const auto r = corpus_cer({{U"a", U"b"}, {U"abcdefghi", U"abcdefghi"}});
  CHECK(r.cer == doctest::Approx(10.0));
  CHECK(r.mean_line_cer == doctest::Approx(50.0));
  CHECK(r.cer != r.mean_line_cer);
  REQUIRE(r.lines.size() == 2);
  CHECK(r.lines[0].edits == 1);
}

TEST_CASE("corpus cer is invariant to pair order") {
  RngStream rng(3, 1);
  std::vector<TextPair> pairs;
  for (int i = 0; i < 50; ++i) pairs.push_back({U"x" + random_string(rng, 8, 3), random_string(rng, 8, 3)});
  const auto a = corpus_cer(pairs);
  std::reverse(pairs.begin(), pairs.end());
  std::rotate(pairs.begin(), pairs.begin() + 17, pairs.end());
  const auto b = corpus_cer(pairs);
  CHECK(a.cer == b.cer);
  CHECK(a.mean_line_cer == doctest::Approx(b.mean_line_cer).epsilon(1e-14));
}

TEST_CASE("delta cer") {
  CHECK(delta_cer(19.9, 26.7) == doctest::Approx(-6.8).epsilon(1e-12));
  CHECK(delta_cer(17.9, 25.9) == doctest::Approx(-8.0).epsilon(1e-12));
  CHECK(delta_cer(12.5, 12.5) == 0.0);
  RngStream rng(4, 1);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0, 100), b = rng.uniform(0, 100);
    CHECK(delta_cer(a, b) == -delta_cer(b, a));
  }
}

}
