#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "spamprop/error.hpp"
#include "spamprop/evalmetrics.hpp"
#include "spamprop/rng.hpp"

using namespace spamprop;

namespace {

Contingency table_of(std::vector<std::vector<std::size_t>> counts) {
  Contingency t;
  for (std::size_t r = 0; r < counts.size(); ++r) t.communities.push_back(r);
  for (std::size_t c = 0; c < (counts.empty() ? 0 : counts[0].size()); ++c) t.topics.push_back(c);
  t.counts = std::move(counts);
  return t;
}

std::vector<std::vector<std::size_t>> transpose(const std::vector<std::vector<std::size_t>>& m) {
  std::vector<std::vector<std::size_t>> t(m[0].size(), std::vector<std::size_t>(m.size()));
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[r].size(); ++c) t[c][r] = m[r][c];
  return t;
}

std::vector<std::vector<std::size_t>> random_table(Rng& rng) {
  const auto rows = 1 + rng.below(6), cols = 1 + rng.below(6);
  std::vector<std::vector<std::size_t>> m(rows, std::vector<std::size_t>(cols));
  for (auto& r : m)
    for (auto& v : r) v = rng.below(3) ? rng.below(12) : 0;
  m[rng.below(rows)][rng.below(cols)] += 1;  // N >= 1
  return m;
}

}  // namespace

TEST_CASE("contingency") {
  CHECK(contingency({{"a", 4}, {"b", 4}}, {{"a", 7}, {"b", 7}}).counts ==
        std::vector<std::vector<std::size_t>>{{2}});
  const auto t = contingency({{"a", 1}, {"b", 1}, {"c", 2}}, {{"a", 1}, {"b", 2}, {"c", 2}});
  CHECK(t.counts == std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}});
  CHECK(t.communities == std::vector<std::size_t>{1, 2});
  CHECK(t.total() == 3);
  CHECK(contingency({}, {}).counts.empty());
  CHECK_THROWS_AS(contingency({{"a", 1}}, {{"b", 1}}), DataError);
  CHECK_THROWS_AS(contingency({{"a", 1}, {"b", 1}}, {{"a", 1}}), DataError);
}

TEST_CASE("scores on small tables") {
  auto s = homogeneity_completeness_v(table_of({{5, 0}, {0, 5}}));
  CHECK(s.homogeneity == 1.0);
  CHECK(s.completeness == 1.0);
  CHECK(s.v_measure == 1.0);
  s = homogeneity_completeness_v(table_of({{5}, {5}}));
  CHECK(s.homogeneity == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.completeness == 1.0);
  CHECK(s.v_measure == 0.0);
  s = homogeneity_completeness_v(table_of({{5, 5}}));
  CHECK(s.homogeneity == 1.0);
  CHECK(s.completeness == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.v_measure == 0.0);
}

TEST_CASE("scores match the per-document oracle, swap roles and ignore relabeling") {
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const auto m = random_table(rng);
    const auto got = homogeneity_completeness_v(table_of(m));
    const auto want = oracle::v_measure(m);
    CHECK(std::abs(got.homogeneity - want.h) <= 1e-12);
    CHECK(std::abs(got.completeness - want.c) <= 1e-12);
    CHECK(std::abs(got.v_measure - want.v) <= 1e-12);
    for (double v : {got.homogeneity, got.completeness, got.v_measure}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK((got.v_measure == 0.0) == (got.homogeneity * got.completeness == 0.0));

    const auto swapped = homogeneity_completeness_v(table_of(transpose(m)));
    CHECK(swapped.homogeneity == got.completeness);
    CHECK(swapped.completeness == got.homogeneity);

    auto permuted = m;
    std::reverse(permuted.begin(), permuted.end());
    for (auto& r : permuted) std::rotate(r.begin(), r.begin() + 1, r.end());
    const auto p = homogeneity_completeness_v(table_of(permuted));
    CHECK(std::abs(p.homogeneity - got.homogeneity) <= 1e-12);
    CHECK(std::abs(p.completeness - got.completeness) <= 1e-12);
  }
}

TEST_CASE("two-sample Z test") {
  const std::vector<double> a{0.1, 0.4, 0.3, 0.7};
  auto z = two_sample_z(a, a);
  CHECK(z.z == 0.0);
  CHECK(z.p == 1.0);
  CHECK_FALSE(z.degenerate);

  const std::vector<double> c1{0.5, 0.5, 0.5}, c2{0.7, 0.7};
  CHECK(two_sample_z(c1, c2).degenerate);

  // Pooled variance and standard error by hand.
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6};
  const double mx = 2.5, my = 4.0;
  const double pooled = (5.0 + 8.0) / (4 + 3 - 2);
  const double se = std::sqrt(pooled * (1.0 / 4 + 1.0 / 3));
  z = two_sample_z(x, y);
  CHECK(z.z == doctest::Approx((mx - my) / se).epsilon(1e-12));
  CHECK(z.p == doctest::Approx(std::erfc(std::abs(z.z) / std::sqrt(2.0))).epsilon(1e-12));
  CHECK_THROWS(two_sample_z(std::vector<double>{1}, y));
}

TEST_CASE("compare_to_null") {
  const std::vector<Scores> actual{{0.9, 0.8, 0}, {0.85, 0.7, 0}, {0.95, 0.75, 0}};
  const std::vector<Scores> null_scores{{0.4, 0.3, 0}, {0.5, 0.35, 0}, {0.45, 0.2, 0}};
  const auto r = compare_to_null(actual, null_scores);
  CHECK(r.actual_mean.homogeneity == doctest::Approx(0.9));
  CHECK(r.null_mean.homogeneity == doctest::Approx(0.45));
  CHECK(r.homogeneity.z > 0);
  CHECK(r.homogeneity.p < 0.01);
  CHECK(r.completeness.z > 0);
}

TEST_CASE("normalized mutual information") {
  const std::vector<std::int64_t> a{0, 0, 1, 1}, b{5, 5, 9, 9}, c{0, 1, 0, 1}, one{3, 3, 3, 3};
  CHECK(normalized_mutual_information(a, b) == doctest::Approx(1.0));
  CHECK(normalized_mutual_information(a, c) == doctest::Approx(0.0));
  CHECK(normalized_mutual_information(one, one) == 1.0);
}
