#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spamprop/grouping.hpp"
#include "spamprop/topics.hpp"

namespace spamprop {

using Membership = std::map<std::string, std::size_t>;

/// Unique topic set of every community in a neighborhood plus the ordered
/// union of those sets (the topic axis shared by all table rows).
struct NeighborhoodTopics {
  std::vector<std::vector<std::size_t>> community_topics;  // by community index
  std::vector<std::size_t> topic_axis;

  static NeighborhoodTopics from(std::span<const CommunityTopics> topics,
                                 std::size_t community_count);
  std::size_t community_count() const { return community_topics.size(); }
};

/// Per-community message and distinct-author counts of one group inside a
/// neighborhood.
struct GroupObservation {
  std::string group_id;
  std::vector<std::size_t> messages;
  std::vector<std::size_t> authors;
  std::size_t skipped = 0;  // messages whose author has no community

  std::size_t total_messages() const;
  std::size_t total_authors() const;
  friend bool operator==(const GroupObservation&, const GroupObservation&) = default;
};

/// Keeps the members whose author is in `users`.
MessageGroup restrict_group(const MessageGroup& group, const std::set<std::string>& users);

GroupObservation observe_group(const MessageGroup& group, const Membership& membership,
                               std::size_t community_count);

/// count_j = number of observed messages whose community lists topic_axis[j].
std::vector<std::size_t> topic_counts(const GroupObservation& obs, const NeighborhoodTopics& topics);

std::vector<std::size_t> poi_counts(const MessageGroup& group, const NeighborhoodTopics& topics,
                                    const Membership& membership);

/// counts / sum(counts); the zero vector maps to itself.
std::vector<double> normalize(std::span<const std::size_t> counts);

/// distinct authors / messages over the observed communities (0 if none).
double user_ratio(const GroupObservation& obs);

struct PoIVector {
  std::string group_id;
  std::vector<std::size_t> counts;
  std::vector<double> probs;
};

/// Topic probabilities with user_ratio appended as the last feature.
std::vector<double> feature_vector(const PoIVector& row, const GroupObservation& obs);

struct ProbTable {
  std::string neighborhood_id;
  NeighborhoodTopics topics;
  std::vector<PoIVector> rows;
  std::vector<GroupObservation> observations;  // parallel to rows
  std::size_t skipped_messages = 0;

  std::size_t find(const std::string& group_id) const;  // npos if absent
  std::vector<double> features(std::size_t row) const { return feature_vector(rows[row], observations[row]); }
};

/// One row per group with at least one message observed in a community of
/// this neighborhood. Groups should already be restricted to the
/// neighborhood's users.
ProbTable build_prob_table(std::span<const MessageGroup> groups, const NeighborhoodTopics& topics,
                           const Membership& membership, const std::string& neighborhood_id);

/// Rebuilds rows (counts, probs) from the observations.
PoIVector make_row(const GroupObservation& obs, const NeighborhoodTopics& topics);

/// "group_id,t_<k>...,user_ratio"
void write_prob_table_csv(const ProbTable& table, std::ostream& out);
/// "group_id,community,messages,authors"
void write_observations_csv(const ProbTable& table, std::ostream& out);
/// "community,topic,count"
void write_community_topics_csv(std::span<const CommunityTopics> topics, std::ostream& out);

std::vector<GroupObservation> read_observations_csv(std::istream& in, std::size_t community_count);
std::vector<CommunityTopics> read_community_topics_csv(std::istream& in);

/// Rebuilds a table from persisted community topics and observations.
ProbTable table_from_observations(std::string neighborhood_id, NeighborhoodTopics topics,
                                  std::vector<GroupObservation> observations);

}  // namespace spamprop
