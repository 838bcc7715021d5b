#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spamprop {

/// Documents per (community, topic). Rows are communities, columns topics,
/// both in ascending id order.
struct Contingency {
  std::vector<std::size_t> communities;
  std::vector<std::size_t> topics;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
};

/// Both maps must cover the same documents.
Contingency contingency(const std::map<std::string, std::size_t>& doc_community,
                        const std::map<std::string, std::size_t>& doc_topic);

struct Scores {
  double homogeneity = 0.0;
  double completeness = 0.0;
  double v_measure = 0.0;
};

/// Classes are communities, clusters are topics (natural log):
///   h = 1 - H(C|T)/H(C)   (1 when H(C) = 0)
///   c = 1 - H(T|C)/H(T)   (1 when H(T) = 0)
///   V = 2hc/(h+c)         (0 when h + c = 0)
Scores homogeneity_completeness_v(const Contingency& table);

struct ZTest {
  double z = 0.0;
  double p = 1.0;
  bool degenerate = false;  // both samples have zero variance
};

/// Two-sample Z test on means with pooled variance, two-sided p-value.
ZTest two_sample_z(std::span<const double> a, std::span<const double> b);

struct ValidationReport {
  Scores actual_mean;
  Scores null_mean;
  ZTest homogeneity;
  ZTest completeness;
};

ValidationReport compare_to_null(std::span<const Scores> actual, std::span<const Scores> null_scores);

/// Normalized mutual information, I / mean(H_a, H_b); 1 when both are trivial.
double normalized_mutual_information(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

}  // namespace spamprop
