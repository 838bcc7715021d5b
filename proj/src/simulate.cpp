#include "spamprop/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"

namespace spamprop {

namespace {

std::uint64_t point_seed(std::uint64_t seed, std::string_view kind, std::size_t fraction_index,
                         std::size_t rep) {
  return derive_seed(derive_seed(derive_seed(seed, kind), fraction_index), rep);
}

std::vector<double> features_of(const GroupObservation& obs, const NeighborhoodTopics& topics) {
  return feature_vector(make_row(obs, topics), obs);
}

std::vector<std::size_t> rows_of(std::span<const int> classes, int cls) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == cls) out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<int> row_classes(const ProbTable& table, const std::map<std::string, RawLabel>& labels,
                             Combination combination) {
  std::vector<int> classes(table.rows.size(), -1);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto it = labels.find(table.rows[r].group_id);
    if (it == labels.end()) continue;
    if (auto cls = apply_combination(it->second, combination)) classes[r] = *cls ? 1 : 0;
  }
  return classes;
}

std::size_t class_count(std::span<const int> classes, int cls) {
  return static_cast<std::size_t>(std::count(classes.begin(), classes.end(), cls));
}

Dataset table_dataset(const ProbTable& table, std::span<const int> classes) {
  Dataset data;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (classes[r] >= 0) data.add(table.features(r), classes[r]);
  }
  return data;
}

std::vector<bool> sample_communities(std::size_t count, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0) throw ConfigError("fraction must lie in [0, 1]");
  const auto k = std::min<std::size_t>(
      count, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9)));
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<bool> chosen(count, false);
  for (std::size_t i = 0; i < k; ++i) chosen[idx[i]] = true;
  return chosen;
}

GroupObservation mask_spam_observation(const GroupObservation& obs, const std::vector<bool>& observed) {
  if (observed.size() != obs.messages.size()) throw DataError("community mask has the wrong size");
  GroupObservation out = obs;
  for (std::size_t c = 0; c < observed.size(); ++c) {
    if (!observed[c]) {
      out.messages[c] = 0;
      out.authors[c] = 0;
    }
  }
  return out;
}

GroupObservation poison_counts(const GroupObservation& spam, const GroupObservation& mimic,
                               const std::vector<bool>& compromised) {
  if (compromised.size() != spam.messages.size() || mimic.messages.size() != spam.messages.size()) {
    throw DataError("poisoning inputs use different community axes");
  }
  GroupObservation out = spam;
  for (std::size_t c = 0; c < compromised.size(); ++c) {
    if (compromised[c]) {
      out.messages[c] = mimic.messages[c];
      out.authors[c] = mimic.authors[c];
    }
  }
  return out;
}

std::vector<SweepPoint> run_early_detection(const ProbTable& table, std::span<const int> classes,
                                            std::span<const double> fractions,
                                            const SimulationOptions& options, std::uint64_t seed) {
  const auto h = table.topics.community_count();
  std::vector<SweepPoint> points;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
      const auto s = point_seed(seed, "early", fi, rep);
      Rng rng(s);
      Dataset data;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (classes[r] < 0) continue;
        if (classes[r] == 1) {
          const auto observed = sample_communities(h, fractions[fi], rng);
          data.add(features_of(mask_spam_observation(table.observations[r], observed), table.topics), 1);
        } else {
          data.add(table.features(r), 0);
        }
      }
      const auto report = cross_validate(data, options.cv, derive_seed(s, "cv"), table.neighborhood_id);
      points.push_back({fractions[fi], rep, report.mean});
    }
  }
  return points;
}

std::vector<SweepPoint> run_poisoning(const ProbTable& table, std::span<const int> classes,
                                      double fraction, const SimulationOptions& options,
                                      std::uint64_t seed) {
  const auto benign = rows_of(classes, 0);
  if (benign.empty()) throw DataError(table.neighborhood_id + ": no benign rows to mimic");
  const auto fraction_tag = static_cast<std::size_t>(std::llround(fraction * 1e6));
  std::vector<SweepPoint> points;
  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    const auto s = point_seed(seed, "poison", fraction_tag, rep);
    Rng rng(s);
    const auto compromised = sample_communities(table.topics.community_count(), fraction, rng);
    Dataset data;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (classes[r] < 0) continue;
      if (classes[r] == 1) {
        const auto& mimic = table.observations[benign[rng.below(benign.size())]];
        data.add(features_of(poison_counts(table.observations[r], mimic, compromised), table.topics), 1);
      } else {
        data.add(table.features(r), 0);
      }
    }
    const auto report = cross_validate(data, options.cv, derive_seed(s, "cv"), table.neighborhood_id);
    points.push_back({fraction, rep, report.mean});
  }
  return points;
}

std::vector<bool> evasion_benign_test_rows(std::span<const int> classes, Rng& rng) {
  auto benign = rows_of(classes, 0);
  const std::size_t x = std::min(class_count(classes, 1), benign.size() / 2);
  rng.shuffle(std::span<std::size_t>(benign));
  std::vector<bool> in_test(classes.size(), false);
  for (std::size_t i = 0; i < x; ++i) in_test[benign[i]] = true;
  return in_test;
}

std::vector<SweepPoint> run_evasion(const ProbTable& table, std::span<const int> classes,
                                    double fraction, const SimulationOptions& options,
                                    std::uint64_t seed) {
  const auto benign = rows_of(classes, 0);
  const auto spam = rows_of(classes, 1);
  if (benign.size() < 2) throw DataError(table.neighborhood_id + ": too few benign rows for evasion");
  if (spam.empty()) throw DataError(table.neighborhood_id + ": no spam rows for evasion");
  const auto fraction_tag = static_cast<std::size_t>(std::llround(fraction * 1e6));

  std::vector<SweepPoint> points;
  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    const auto s = point_seed(seed, "evasion", fraction_tag, rep);
    Rng rng(s);
    const auto compromised = sample_communities(table.topics.community_count(), fraction, rng);

    const auto benign_in_test = evasion_benign_test_rows(classes, rng);

    Dataset train_split;
    Dataset test_split;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      if (classes[r] == 1) {
        train_split.add(table.features(r), 1);
        const auto& mimic = table.observations[benign[rng.below(benign.size())]];
        test_split.add(features_of(poison_counts(table.observations[r], mimic, compromised), table.topics), 1);
      } else if (classes[r] == 0) {
        (benign_in_test[r] ? test_split : train_split).add(table.features(r), 0);
      }
    }
    const auto balanced =
        balance_with_smote(train_split, options.cv.smote_neighbors, derive_seed(s, "smote"));
    const auto model = train(balanced, options.cv.kind, derive_seed(s, "train"), options.cv.svm);
    points.push_back({fraction, rep, metrics_from(confusion(model, test_split))});
  }
  return points;
}

std::vector<SweepPoint> average_by_fraction(std::span<const SweepPoint> points) {
  std::map<double, std::pair<Metrics, std::size_t>> acc;
  for (const auto& p : points) {
    auto& [m, n] = acc[p.fraction];
    m.accuracy += p.metrics.accuracy;
    m.precision += p.metrics.precision;
    m.recall += p.metrics.recall;
    m.f1 += p.metrics.f1;
    ++n;
  }
  std::vector<SweepPoint> out;
  for (auto& [f, mn] : acc) {
    auto [m, n] = mn;
    const double d = static_cast<double>(n);
    out.push_back({f, 0, {m.accuracy / d, m.precision / d, m.recall / d, m.f1 / d}});
  }
  return out;
}

std::vector<double> default_fraction_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

}  // namespace spamprop
