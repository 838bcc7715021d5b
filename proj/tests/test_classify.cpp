#include <doctest.h>

#include <cmath>
#include <set>

#include "spamprop/classify.hpp"
#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"

using namespace spamprop;

namespace {

Dataset two_clusters(std::size_t per_class, double offset, double spread, std::uint64_t seed,
                     std::size_t dim = 2) {
  Rng rng(seed);
  Dataset d;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      FeatureRow r(dim);
      for (auto& v : r) v = (c ? offset : -offset) + spread * (rng.uniform() - 0.5);
      d.add(r, c);
    }
  }
  return d;
}

// Posterior P(spam | x) straight from the Gaussian densities, with the
// variance floor documented for the NB model.
double nb_posterior(const Dataset& d, const FeatureRow& x) {
  const std::size_t dim = x.size();
  double mean[2][8] = {}, var[2][8] = {}, n[2] = {};
  for (std::size_t i = 0; i < d.size(); ++i) {
    n[d.labels[i]] += 1;
    for (std::size_t f = 0; f < dim; ++f) mean[d.labels[i]][f] += d.rows[i][f];
  }
  for (int c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < dim; ++f) mean[c][f] /= n[c];
  double widest = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t f = 0; f < dim; ++f) var[d.labels[i]][f] += std::pow(d.rows[i][f] - mean[d.labels[i]][f], 2);
  for (int c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < dim; ++f) widest = std::max(widest, var[c][f] /= n[c]);
  double like[2];
  for (int c = 0; c < 2; ++c) {
    double log_like = std::log(n[c] / (n[0] + n[1]));
    for (std::size_t f = 0; f < dim; ++f) {
      const double v = var[c][f] + 1e-9 * widest + 1e-12;
      log_like += -0.5 * std::log(2 * M_PI * v) - (x[f] - mean[c][f]) * (x[f] - mean[c][f]) / (2 * v);
    }
    like[c] = log_like;
  }
  return 1.0 / (1.0 + std::exp(like[0] - like[1]));
}

}  // namespace

TEST_CASE("label combinations") {
  CHECK(apply_combination(RawLabel::app, Combination::comb3) == true);
  CHECK(apply_combination(RawLabel::quote, Combination::comb1) == false);
  CHECK(apply_combination(RawLabel::app, Combination::comb2) == std::nullopt);
  CHECK(apply_combination(RawLabel::quote, Combination::comb2) == std::nullopt);
  CHECK(apply_combination(RawLabel::unknown, Combination::comb1) == std::nullopt);
  for (auto c : {Combination::comb1, Combination::comb2, Combination::comb3}) {
    CHECK(apply_combination(RawLabel::spam, c) == true);
    CHECK(apply_combination(RawLabel::normal, c) == false);
  }
  CHECK(apply_combination(RawLabel::app, Combination::comb1) == false);
  CHECK(apply_combination(RawLabel::quote, Combination::comb3) == false);
  CHECK(parse_raw_label("quote") == RawLabel::quote);
  CHECK_THROWS_AS(parse_raw_label("ham"), DataError);
  CHECK_THROWS_AS(combination_from_int(4), ConfigError);
}

TEST_CASE("smote") {
  const std::vector<FeatureRow> two{{0, 0}, {1, 1}};
  CHECK(smote(two, 2, 1, 1).empty());
  CHECK(smote(two, 1, 1, 1).empty());
  const auto synth = smote(two, 102, 1, 7);
  REQUIRE(synth.size() == 100);
  for (const auto& p : synth) {
    CHECK(p[0] == p[1]);
    CHECK(p[0] >= 0.0);
    CHECK(p[0] <= 1.0);
  }
  const std::vector<FeatureRow> one{{3, -2}};
  for (const auto& p : smote(one, 5, 3, 1)) CHECK(p == one[0]);
  CHECK(smote(two, 50, 5, 9) == smote(two, 50, 5, 9));
}

TEST_CASE("smote points stay in the minority convex hull") {
  // Triangle (0,0),(4,0),(0,4): hull is x>=0, y>=0, x+y<=4.
  const std::vector<FeatureRow> tri{{0, 0}, {4, 0}, {0, 4}, {1, 1}, {2, 1}};
  for (const auto& p : smote(tri, 500, 3, 11)) {
    CHECK(p[0] >= -1e-12);
    CHECK(p[1] >= -1e-12);
    CHECK(p[0] + p[1] <= 4 + 1e-12);
  }
}

TEST_CASE("balance_with_smote equalizes classes") {
  Dataset d = two_clusters(30, 1, 1, 3);
  d.rows.resize(45);
  d.labels.resize(45);
  const auto b = balance_with_smote(d, 5, 2);
  CHECK(b.count(0) == 30);
  CHECK(b.count(1) == 30);
}

TEST_CASE("linear SVM separates a separable set and is deterministic") {
  const auto d = two_clusters(50, 2, 1.5, 5);
  const auto m = train(d, ClassifierKind::linear_svm, 4);
  const auto c = confusion(m, d);
  CHECK(c.tp + c.tn == d.size());
  CHECK(train(d, ClassifierKind::linear_svm, 4) == m);
  Dataset one;
  one.add({1.0}, 1);
  CHECK_THROWS_AS(train(one, ClassifierKind::linear_svm, 1), DataError);
  CHECK_THROWS_AS(train(one, ClassifierKind::gaussian_nb, 1), DataError);
}

TEST_CASE("gaussian NB boundary between clusters at -5 and +5") {
  Rng rng(17);
  Dataset d;
  // Symmetric unit-variance samples so the boundary is at the midpoint.
  for (int i = 0; i < 500; ++i) {
    const double z = std::sqrt(-2 * std::log(1 - rng.uniform())) * std::cos(2 * M_PI * rng.uniform());
    d.add({-5 + z}, 0);
    d.add({-5 - z}, 0);
    d.add({5 + z}, 1);
    d.add({5 - z}, 1);
  }
  const auto m = train(d, ClassifierKind::gaussian_nb, 1);
  // Bisect for the sign change of the decision function.
  double lo = -5, hi = 5;
  for (int i = 0; i < 100; ++i) {
    const double mid = (lo + hi) / 2;
    const std::vector<double> x{mid};
    (m.decision(x) > 0 ? hi : lo) = mid;
  }
  CHECK(std::abs(lo) <= 0.1);
}

TEST_CASE("gaussian NB matches a brute-force posterior") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::size_t dim = 1 + rng.below(5);
    Dataset d;
    const auto n = 6 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      FeatureRow r(dim);
      for (auto& v : r) v = rng.uniform() * (1 + i % 3);
      d.add(r, i < 3 ? 0 : (i < 6 ? 1 : static_cast<int>(rng.below(2))));
    }
    const auto m = train(d, ClassifierKind::gaussian_nb, seed);
    for (int q = 0; q < 20; ++q) {
      FeatureRow x(dim);
      for (auto& v : x) v = rng.uniform() * 3;
      const double expect = nb_posterior(d, x);
      const double got = 1.0 / (1.0 + std::exp(-m.decision(x)));
      CHECK(std::abs(got - expect) <= 1e-9);
      if (std::abs(expect - 0.5) > 1e-9) CHECK(m.predict(x) == (expect > 0.5 ? 1 : 0));
    }
  }
}

TEST_CASE("predictions ignore an appended all-zero column") {
  for (auto kind : {ClassifierKind::linear_svm, ClassifierKind::gaussian_nb}) {
    const auto d = two_clusters(40, 0.3, 2, 21, 3);
    Dataset padded = d;
    for (auto& r : padded.rows) r.push_back(0.0);
    const auto a = train(d, kind, 5), b = train(padded, kind, 5);
    Rng rng(8);
    for (int q = 0; q < 200; ++q) {
      FeatureRow x{rng.uniform() * 4 - 2, rng.uniform() * 4 - 2, rng.uniform() * 4 - 2};
      FeatureRow xp = x;
      xp.push_back(0.0);
      CHECK(a.predict(x) == b.predict(xp));
    }
  }
}

TEST_CASE("stratified folds partition the rows") {
  std::vector<int> labels;
  for (int i = 0; i < 57; ++i) labels.push_back(i % 4 == 0);
  const auto folds = stratified_folds(labels, 10, 3);
  REQUIRE(folds.size() == labels.size());
  std::vector<std::array<int, 2>> per(10, {0, 0});
  for (std::size_t i = 0; i < folds.size(); ++i) {
    REQUIRE(folds[i] < 10);
    ++per[folds[i]][labels[i]];
  }
  for (const auto& f : per) {
    CHECK(f[0] >= 4);
    CHECK(f[0] <= 5);
    CHECK(f[1] >= 1);
    CHECK(f[1] <= 2);
  }
  CHECK(stratified_folds(labels, 10, 3) == folds);
}

TEST_CASE("metrics") {
  const auto m = metrics_from({9, 1, 1, 9});
  CHECK(m.precision == doctest::Approx(0.9));
  CHECK(m.recall == doctest::Approx(0.9));
  CHECK(m.f1 == doctest::Approx(0.9));
  CHECK(m.accuracy == doctest::Approx(0.9));
  const auto perfect = metrics_from({5, 0, 0, 7});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);
  const auto none = metrics_from({0, 0, 4, 6});
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const Confusion c{rng.below(20), rng.below(20), rng.below(20), rng.below(20) + 1};
    const auto x = metrics_from(c);
    CHECK(x.accuracy == doctest::Approx(double(c.tp + c.tn) / double(c.tp + c.fp + c.fn + c.tn)));
    for (double v : {x.accuracy, x.precision, x.recall, x.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (x.precision + x.recall > 0)
      CHECK(x.f1 == doctest::Approx(2 * x.precision * x.recall / (x.precision + x.recall)));
  }
}

TEST_CASE("cross validation") {
  const auto d = two_clusters(30, 2, 1, 9);
  CvOptions opt;
  const auto r = cross_validate(d, opt, 1);
  CHECK(r.folds.size() == 10);
  CHECK(r.mean.f1 == 1.0);
  CHECK(r.std_error.f1 == 0.0);
  auto small = d;
  small.rows.resize(35);
  small.labels.resize(35);  // 30 benign, 5 spam
  try {
    cross_validate(small, opt, 1, "nb042");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("nb042") != std::string::npos);
  }
}

TEST_CASE("summarize") {
  const auto r = summarize({{1, 1, 1, 1}, {0, 0, 0, 0}});
  CHECK(r.mean.f1 == 0.5);
  CHECK(r.std_error.f1 == doctest::Approx(0.5));
}

TEST_CASE("label_accounts") {
  const auto out = label_accounts({{"a", {2, 5}}, {"b", {0, 10}}, {"c", {39, 100}}, {"d", {0, 0}}}, 0.4);
  CHECK(out.at("a") == true);
  CHECK(out.at("b") == false);
  CHECK(out.at("c") == false);
  CHECK(out.count("d") == 0);
}
