#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spamprop/classify.hpp"
#include "spamprop/poi.hpp"
#include "spamprop/rng.hpp"

namespace spamprop {

/// Per-row class of a table: 1 spam, 0 benign, -1 not in the ground truth.
std::vector<int> row_classes(const ProbTable& table, const std::map<std::string, RawLabel>& labels,
                             Combination combination);

/// Counts of rows by class in `classes`.
std::size_t class_count(std::span<const int> classes, int cls);

/// Features of every labeled row, in table order.
Dataset table_dataset(const ProbTable& table, std::span<const int> classes);

/// Picks ceil(fraction * count) of `count` communities uniformly.
std::vector<bool> sample_communities(std::size_t count, double fraction, Rng& rng);

/// Zeroes the counts of communities that are not observed.
GroupObservation mask_spam_observation(const GroupObservation& obs, const std::vector<bool>& observed);

/// In compromised communities the spam group's message and author counts
/// are replaced with the mimicked benign group's.
GroupObservation poison_counts(const GroupObservation& spam, const GroupObservation& mimic,
                               const std::vector<bool>& compromised);

struct SweepPoint {
  double fraction = 0.0;
  std::size_t rep = 0;
  Metrics metrics;
};

struct SimulationOptions {
  std::size_t repetitions = 3;
  CvOptions cv;
};

/// For each fraction and repetition, masks every spam row to a fresh random
/// subset of communities and cross-validates.
std::vector<SweepPoint> run_early_detection(const ProbTable& table, std::span<const int> classes,
                                            std::span<const double> fractions,
                                            const SimulationOptions& options, std::uint64_t seed);

/// Training-time mimicry: every spam row copies a random benign row's
/// counts in the compromised communities, then cross-validation.
std::vector<SweepPoint> run_poisoning(const ProbTable& table, std::span<const int> classes,
                                      double fraction, const SimulationOptions& options,
                                      std::uint64_t seed);

/// Benign rows held out for an evasion test set: x random benign rows with
/// x = min(#spam, floor(#benign / 2)), as a per-row flag.
std::vector<bool> evasion_benign_test_rows(std::span<const int> classes, Rng& rng);

/// Test-time mimicry against a model trained on clean data. The test set
/// holds every mimicking spam row plus x random benign rows, with
/// x = min(#spam, floor(#benign / 2)); the rest of the benign rows and all
/// clean spam rows train the model.
std::vector<SweepPoint> run_evasion(const ProbTable& table, std::span<const int> classes,
                                    double fraction, const SimulationOptions& options,
                                    std::uint64_t seed);

/// Mean metrics per fraction, in ascending fraction order.
std::vector<SweepPoint> average_by_fraction(std::span<const SweepPoint> points);

/// 0, 0.1, ..., 1.0
std::vector<double> default_fraction_grid();

}  // namespace spamprop
