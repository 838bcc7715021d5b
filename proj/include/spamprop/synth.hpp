#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spamprop/classify.hpp"
#include "spamprop/graph.hpp"
#include "spamprop/ingest.hpp"

namespace spamprop {

struct SynthConfig {
  std::size_t neighborhoods = 2;

  // Planted-partition network.
  std::size_t n_communities = 8;
  std::size_t community_size = 30;
  double p_in = 0.25;
  double p_out = 0.01;

  // Topical background corpus.
  std::size_t n_topics = 12;
  std::size_t vocab_per_topic = 200;
  std::size_t docs_per_user = 2;
  std::size_t messages_per_doc = 20;
  std::size_t max_topics_per_community = 2;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 8;
  double focus = 0.9;  // probability a message follows the author's own topic

  // Campaigns.
  std::size_t n_benign_groups = 40;
  std::size_t n_spam_groups = 40;
  std::size_t group_size_min = 10;
  std::size_t group_size_max = 60;
  double benign_ratio_min = 0.5;
  double benign_ratio_max = 1.0;
  double spam_ratio_min = 0.08;
  double spam_ratio_max = 0.45;
  double app_share = 0.2;    // spam groups labeled "app"
  double quote_share = 0.2;  // benign groups labeled "quote"

  std::uint64_t seed = 1;

  /// Throws ConfigError on inconsistent parameters.
  void validate() const;
};

struct SynthNetwork {
  std::vector<std::pair<std::string, std::string>> edges;  // directed, reciprocal
  Partition planted;
};

/// Stochastic block model; every sampled pair is emitted in both directions.
SynthNetwork generate_network(const SynthConfig& cfg, const std::string& neighborhood_id,
                              std::uint64_t seed);

struct SynthCorpus {
  std::vector<std::vector<std::size_t>> community_topics;  // planted, per community
  std::vector<Timeline> timelines;                          // sorted by user
};

/// Assigns each community one or two planted topics (pairs of communities
/// share the second one) and draws every member's messages from them.
SynthCorpus generate_corpus(const SynthConfig& cfg, const Partition& planted,
                            const std::string& neighborhood_id, std::uint64_t seed);

struct PlantedGroup {
  std::string group_id;  // smallest member message id
  std::vector<std::string> message_ids;
  std::vector<std::string> authors;  // distinct
  std::vector<std::size_t> communities;
  RawLabel label = RawLabel::normal;
  bool spam = false;
};

/// Benign groups spread through communities sharing a planted topic with
/// many distinct authors; spam groups hit a random community subset posted
/// by few authors. Campaign messages are appended to the authors' timelines.
std::vector<PlantedGroup> generate_campaigns(const SynthConfig& cfg, const Partition& planted,
                                             const std::vector<std::vector<std::size_t>>& community_topics,
                                             std::vector<Timeline>& timelines,
                                             const std::string& neighborhood_id, std::uint64_t seed);

struct SynthNeighborhood {
  std::string id;
  SynthNetwork network;
  SynthCorpus corpus;
  std::vector<PlantedGroup> groups;
};

std::string synth_neighborhood_id(std::size_t index);

SynthNeighborhood generate_neighborhood(const SynthConfig& cfg, std::size_t index);

/// Writes <dir>/<nb>/edges.tsv, timelines.jsonl, planted_partition.csv,
/// <dir>/labels.csv and <dir>/config.json, a pipeline config with paths
/// relative to <dir> that writes to <dir>/out.
void write_synth_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace spamprop
