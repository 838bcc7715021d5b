#include "spamprop/poi.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "spamprop/error.hpp"
#include "spamprop/text_io.hpp"

namespace spamprop {

NeighborhoodTopics NeighborhoodTopics::from(std::span<const CommunityTopics> topics,
                                            std::size_t community_count) {
  NeighborhoodTopics out;
  out.community_topics.resize(community_count);
  std::set<std::size_t> axis;
  for (const auto& ct : topics) {
    if (ct.community >= community_count) throw DataError("community index out of range");
    out.community_topics[ct.community] = ct.unique_topics();
    for (auto [t, n] : ct.topic_counts) axis.insert(t);
  }
  out.topic_axis.assign(axis.begin(), axis.end());
  return out;
}

std::size_t GroupObservation::total_messages() const {
  std::size_t n = 0;
  for (auto m : messages) n += m;
  return n;
}

std::size_t GroupObservation::total_authors() const {
  std::size_t n = 0;
  for (auto a : authors) n += a;
  return n;
}

MessageGroup restrict_group(const MessageGroup& group, const std::set<std::string>& users) {
  MessageGroup out;
  out.group_id = group.group_id;
  for (const auto& m : group.members) {
    if (users.contains(m.author)) out.members.push_back(m);
  }
  return out;
}

GroupObservation observe_group(const MessageGroup& group, const Membership& membership,
                               std::size_t community_count) {
  GroupObservation obs;
  obs.group_id = group.group_id;
  obs.messages.assign(community_count, 0);
  obs.authors.assign(community_count, 0);
  std::set<std::string> seen_authors;
  for (const auto& m : group.members) {
    const auto it = membership.find(m.author);
    if (it == membership.end()) {
      ++obs.skipped;
      continue;
    }
    if (it->second >= community_count) throw DataError("membership index out of range");
    ++obs.messages[it->second];
    if (seen_authors.insert(m.author).second) ++obs.authors[it->second];
  }
  return obs;
}

std::vector<std::size_t> topic_counts(const GroupObservation& obs, const NeighborhoodTopics& topics) {
  const auto& axis = topics.topic_axis;
  std::vector<std::size_t> counts(axis.size(), 0);
  for (std::size_t c = 0; c < obs.messages.size(); ++c) {
    if (obs.messages[c] == 0) continue;
    for (auto t : topics.community_topics.at(c)) {
      const auto pos = std::lower_bound(axis.begin(), axis.end(), t) - axis.begin();
      counts[static_cast<std::size_t>(pos)] += obs.messages[c];
    }
  }
  return counts;
}

std::vector<std::size_t> poi_counts(const MessageGroup& group, const NeighborhoodTopics& topics,
                                    const Membership& membership) {
  return topic_counts(observe_group(group, membership, topics.community_count()), topics);
}

std::vector<double> normalize(std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> probs(counts.size(), 0.0);
  if (total == 0) return probs;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    probs[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return probs;
}

double user_ratio(const GroupObservation& obs) {
  const auto messages = obs.total_messages();
  if (messages == 0) return 0.0;
  return static_cast<double>(obs.total_authors()) / static_cast<double>(messages);
}

std::vector<double> feature_vector(const PoIVector& row, const GroupObservation& obs) {
  std::vector<double> f = row.probs;
  f.push_back(user_ratio(obs));
  return f;
}

PoIVector make_row(const GroupObservation& obs, const NeighborhoodTopics& topics) {
  PoIVector row;
  row.group_id = obs.group_id;
  row.counts = topic_counts(obs, topics);
  row.probs = normalize(row.counts);
  return row;
}

std::size_t ProbTable::find(const std::string& group_id) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].group_id == group_id) return i;
  }
  return static_cast<std::size_t>(-1);
}

ProbTable table_from_observations(std::string neighborhood_id, NeighborhoodTopics topics,
                                  std::vector<GroupObservation> observations) {
  ProbTable table;
  table.neighborhood_id = std::move(neighborhood_id);
  table.topics = std::move(topics);
  std::sort(observations.begin(), observations.end(),
            [](const auto& a, const auto& b) { return a.group_id < b.group_id; });
  for (auto& obs : observations) {
    if (obs.total_messages() == 0) {
      table.skipped_messages += obs.skipped;
      continue;
    }
    table.rows.push_back(make_row(obs, table.topics));
    table.observations.push_back(std::move(obs));
  }
  for (const auto& obs : table.observations) table.skipped_messages += obs.skipped;
  return table;
}

ProbTable build_prob_table(std::span<const MessageGroup> groups, const NeighborhoodTopics& topics,
                           const Membership& membership, const std::string& neighborhood_id) {
  std::vector<GroupObservation> observations;
  observations.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.members.empty()) continue;
    observations.push_back(observe_group(g, membership, topics.community_count()));
  }
  return table_from_observations(neighborhood_id, topics, std::move(observations));
}

void write_prob_table_csv(const ProbTable& table, std::ostream& out) {
  out << "group_id";
  for (auto t : table.topics.topic_axis) out << ",t_" << t;
  out << ",user_ratio\n";
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    out << table.rows[r].group_id;
    for (double p : table.rows[r].probs) out << ',' << format_double(p);
    out << ',' << format_double(user_ratio(table.observations[r])) << '\n';
  }
}

void write_observations_csv(const ProbTable& table, std::ostream& out) {
  out << "group_id,community,messages,authors\n";
  for (const auto& obs : table.observations) {
    for (std::size_t c = 0; c < obs.messages.size(); ++c) {
      if (obs.messages[c] == 0) continue;
      out << obs.group_id << ',' << c << ',' << obs.messages[c] << ',' << obs.authors[c] << '\n';
    }
  }
}

void write_community_topics_csv(std::span<const CommunityTopics> topics, std::ostream& out) {
  out << "community,topic,count\n";
  for (const auto& ct : topics) {
    for (auto [t, n] : ct.topic_counts) out << ct.community << ',' << t << ',' << n << '\n';
  }
}

std::vector<GroupObservation> read_observations_csv(std::istream& in, std::size_t community_count) {
  std::map<std::string, GroupObservation> by_group;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line, ',');
    std::size_t c = 0, m = 0, a = 0;
    if (f.size() != 4 || !parse_number(f[1], c) || !parse_number(f[2], m) ||
        !parse_number(f[3], a) || c >= community_count) {
      throw DataError("observations line " + std::to_string(line_no) + " is malformed");
    }
    auto& obs = by_group[std::string(f[0])];
    if (obs.messages.empty()) {
      obs.group_id = std::string(f[0]);
      obs.messages.assign(community_count, 0);
      obs.authors.assign(community_count, 0);
    }
    obs.messages[c] = m;
    obs.authors[c] = a;
  }
  std::vector<GroupObservation> out;
  out.reserve(by_group.size());
  for (auto& [id, obs] : by_group) out.push_back(std::move(obs));
  return out;
}

std::vector<CommunityTopics> read_community_topics_csv(std::istream& in) {
  std::map<std::size_t, CommunityTopics> by_community;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line, ',');
    std::size_t c = 0, t = 0, n = 0;
    if (f.size() != 3 || !parse_number(f[0], c) || !parse_number(f[1], t) ||
        !parse_number(f[2], n)) {
      throw DataError("community topics line " + std::to_string(line_no) + " is malformed");
    }
    auto& ct = by_community[c];
    ct.community = c;
    ct.topic_counts[t] = n;
  }
  std::vector<CommunityTopics> out;
  for (auto& [c, ct] : by_community) out.push_back(std::move(ct));
  return out;
}

}  // namespace spamprop
