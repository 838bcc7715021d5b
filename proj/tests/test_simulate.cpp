#include <doctest.h>

#include <algorithm>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"
#include "spamprop/simulate.hpp"

using namespace spamprop;

namespace {

GroupObservation obs(std::string id, std::vector<std::size_t> m, std::vector<std::size_t> a) {
  return GroupObservation{std::move(id), std::move(m), std::move(a), 0};
}

// Six communities, community c talks about topic c. Benign groups spread
// over communities 0-2 with many authors; spam over 3-5 with few.
ProbTable toy_table(std::size_t benign, std::size_t spam, std::uint64_t seed) {
  Rng rng(seed);
  ProbTable t;
  t.neighborhood_id = "toy";
  std::vector<CommunityTopics> cts;
  for (std::size_t c = 0; c < 6; ++c) cts.push_back({c, {{c, 1}}});
  t.topics = NeighborhoodTopics::from(cts, 6);
  auto add = [&](std::string id, std::size_t lo, double author_share) {
    std::vector<std::size_t> m(6, 0), a(6, 0);
    for (std::size_t c = lo; c < lo + 3; ++c) {
      m[c] = 2 + rng.below(10);
      a[c] = std::max<std::size_t>(1, static_cast<std::size_t>(author_share * m[c]));
    }
    t.observations.push_back(obs(id, m, a));
    t.rows.push_back(make_row(t.observations.back(), t.topics));
  };
  for (std::size_t i = 0; i < benign; ++i) add("b" + std::to_string(1000 + i), 0, 0.9);
  for (std::size_t i = 0; i < spam; ++i) add("s" + std::to_string(1000 + i), 3, 0.1);
  return t;
}

std::vector<int> toy_classes(std::size_t benign, std::size_t spam) {
  std::vector<int> c(benign, 0);
  c.resize(benign + spam, 1);
  return c;
}

}  // namespace

TEST_CASE("sample_communities picks ceil(f*h)") {
  Rng rng(1);
  for (auto [f, want] : std::vector<std::pair<double, int>>{{0.0, 0}, {0.1, 1}, {0.25, 3}, {0.3, 3}, {1.0, 10}}) {
    const auto s = sample_communities(10, f, rng);
    CHECK(std::count(s.begin(), s.end(), true) == want);
  }
  CHECK_THROWS_AS(sample_communities(4, 1.5, rng), ConfigError);
}

TEST_CASE("mask_spam_observation") {
  const auto o = obs("g", {3, 0, 5, 2}, {1, 0, 2, 2});
  CHECK(mask_spam_observation(o, {true, true, true, true}) == o);
  const auto none = mask_spam_observation(o, {false, false, false, false});
  CHECK(none.total_messages() == 0);
  CHECK(none.total_authors() == 0);
  const auto part = mask_spam_observation(o, {true, false, false, true});
  CHECK(part.messages == std::vector<std::size_t>{3, 0, 0, 2});
  CHECK(part.authors == std::vector<std::size_t>{1, 0, 0, 2});
  CHECK_THROWS_AS(mask_spam_observation(o, {true}), DataError);
}

TEST_CASE("poison_counts") {
  const auto spam = obs("s", {9, 8, 7, 6}, {1, 1, 1, 1});
  const auto mimic = obs("b", {1, 2, 3, 4}, {1, 2, 3, 4});
  CHECK(poison_counts(spam, mimic, {false, false, false, false}) == spam);
  const auto all = poison_counts(spam, mimic, {true, true, true, true});
  CHECK(all.messages == mimic.messages);
  CHECK(all.authors == mimic.authors);
  CHECK(all.group_id == "s");
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<bool> set(4);
    for (std::size_t c = 0; c < 4; ++c) set[c] = rng.below(2) == 1;
    const auto p = poison_counts(spam, mimic, set);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(p.messages[c] == (set[c] ? mimic : spam).messages[c]);
      CHECK(p.authors[c] == (set[c] ? mimic : spam).authors[c]);
    }
    CHECK(poison_counts(p, mimic, set) == p);
  }
}

TEST_CASE("evasion benign test rows") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> classes;
    const auto n = 5 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) classes.push_back(static_cast<int>(rng.below(3)) - 1);
    const auto test = evasion_benign_test_rows(classes, rng);
    const std::size_t spam = class_count(classes, 1), benign = class_count(classes, 0);
    std::size_t held = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (test[i]) {
        CHECK(classes[i] == 0);
        ++held;
      }
    }
    CHECK(held == std::min(spam, benign / 2));
    CHECK(benign - held >= held);  // training keeps at least as many benign rows
  }
}

TEST_CASE("simulations leave benign rows and labels alone and are reproducible") {
  const auto table = toy_table(30, 20, 3);
  const auto classes = toy_classes(30, 20);
  SimulationOptions opt;
  const std::vector<double> fractions{0.2, 1.0};
  const auto a = run_early_detection(table, classes, fractions, opt, 11);
  const auto b = run_early_detection(table, classes, fractions, opt, 11);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].metrics.f1 == b[i].metrics.f1);
    CHECK(a[i].metrics.precision == b[i].metrics.precision);
  }
  // Fully observed spam rows are the unmasked table: separable toy data.
  for (std::size_t i = 3; i < 6; ++i) CHECK(a[i].metrics.f1 == 1.0);
  const auto dataset = table_dataset(table, classes);
  CHECK(dataset.count(0) == 30);
  CHECK(dataset.count(1) == 20);

  const auto clean = run_poisoning(table, classes, 0.0, opt, 5);
  for (const auto& p : clean) CHECK(p.metrics.f1 == 1.0);
  const auto full = run_evasion(table, classes, 1.0, opt, 5);
  REQUIRE(full.size() == 3);
  // Every spam row is a benign copy at test time: nothing is caught.
  for (const auto& p : full) CHECK(p.metrics.recall <= 0.5);
  const auto none = run_evasion(table, classes, 0.0, opt, 5);
  for (const auto& p : none) CHECK(p.metrics.f1 == 1.0);
}

TEST_CASE("attack preconditions") {
  const auto table = toy_table(1, 5, 1);
  const auto classes = toy_classes(1, 5);
  CHECK_THROWS_AS(run_evasion(table, classes, 0.5, {}, 1), DataError);
  const auto spam_only = toy_table(0, 5, 1);
  CHECK_THROWS_AS(run_poisoning(spam_only, toy_classes(0, 5), 0.5, {}, 1), DataError);
}

TEST_CASE("row_classes and averaging") {
  const auto table = toy_table(2, 1, 2);
  const std::map<std::string, RawLabel> labels{{"b1000", RawLabel::app}, {"s1000", RawLabel::spam}};
  CHECK(row_classes(table, labels, Combination::comb3) == std::vector<int>{1, -1, 1});
  CHECK(row_classes(table, labels, Combination::comb1) == std::vector<int>{0, -1, 1});
  CHECK(row_classes(table, labels, Combination::comb2) == std::vector<int>{-1, -1, 1});
  const std::vector<SweepPoint> pts{{0.5, 0, {1, 1, 1, 1}}, {0.1, 0, {0, 0, 0, 0}}, {0.5, 1, {0, 0.5, 0, 0}}};
  const auto avg = average_by_fraction(pts);
  REQUIRE(avg.size() == 2);
  CHECK(avg[0].fraction == 0.1);
  CHECK(avg[1].metrics.precision == 0.75);
  CHECK(default_fraction_grid().size() == 11);
}
