#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spamprop/ingest.hpp"

namespace spamprop {

struct LdaParams {
  std::size_t topics = 20;
  std::size_t iterations = 200;
  std::optional<double> alpha;  // defaults to 50 / topics
  double beta = 0.01;
  std::uint64_t seed = 0;

  double resolved_alpha() const { return alpha ? *alpha : 50.0 / static_cast<double>(topics); }
};

/// Collapsed-Gibbs LDA state. Counts are stored word-major
/// (word_topic[w * K + k]) so the sampler walks contiguous memory.
struct TopicModel {
  std::size_t topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;

  std::vector<std::string> vocabulary;  // sorted
  std::vector<std::string> doc_ids;
  std::vector<std::uint32_t> word_topic;  // V x K
  std::vector<std::uint32_t> doc_topic;   // N x K
  std::vector<std::uint32_t> topic_total; // K

  // Sampler state; empty for a model loaded from a dump.
  std::vector<std::vector<std::uint32_t>> words;
  std::vector<std::vector<std::uint32_t>> assignments;

  std::size_t vocab_size() const { return vocabulary.size(); }
  std::size_t doc_count() const { return doc_ids.size(); }
  std::uint32_t topic_word_count(std::size_t k, std::size_t w) const { return word_topic[w * topics + k]; }
  std::uint32_t doc_topic_count(std::size_t d, std::size_t k) const { return doc_topic[d * topics + k]; }
  std::span<const std::uint32_t> doc_row(std::size_t d) const {
    return {doc_topic.data() + d * topics, topics};
  }
};

using SweepObserver = std::function<void(const TopicModel&, std::size_t sweep)>;

/// Runs `params.iterations` full Gibbs sweeps. Throws DataError when the
/// corpus is empty, a document has no tokens, or K is zero.
TopicModel fit_lda(std::span<const Document> corpus, const LdaParams& params,
                   const SweepObserver& on_sweep = {});

/// Normalized full conditional of the token at (doc, position), computed
/// with that token's own assignment removed from the counts.
std::vector<double> token_conditional(const TopicModel& model, std::size_t doc,
                                      std::size_t position);

struct DocTopicLabel {
  std::string doc_id;
  std::size_t topic = 0;
  friend bool operator==(const DocTopicLabel&, const DocTopicLabel&) = default;
};

/// argmax_k (count_k + alpha); ties go to the lowest index.
std::size_t dominant_topic(std::span<const std::uint32_t> counts, double alpha);

std::vector<DocTopicLabel> label_documents(const TopicModel& model);

struct CommunityTopics {
  std::size_t community = 0;
  std::map<std::size_t, std::size_t> topic_counts;  // the topic multiset

  std::vector<std::size_t> unique_topics() const;
  std::size_t document_count() const;
};

struct CommunityTopicsResult {
  std::vector<CommunityTopics> communities;  // ordered by community index
  std::vector<std::string> unassigned_docs;
};

CommunityTopicsResult community_topics(std::span<const DocTopicLabel> labels,
                                       const std::map<std::string, std::size_t>& membership,
                                       const std::map<std::string, std::string>& doc_owner);

/// Text dump: header, vocabulary, then sparse "k,v,count" and "d,k,count".
void write_model(const TopicModel& model, std::ostream& out);
TopicModel read_model(std::istream& in);

}  // namespace spamprop
