#include "spamprop/topics.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"
#include "spamprop/text_io.hpp"

namespace spamprop {

namespace {

// Cumulative unnormalized conditional weights. `excluded` is the topic whose
// counts still include the token being resampled (K when already removed).
// Returns the total weight.
double fill_weights(const TopicModel& m, std::size_t doc, std::uint32_t word,
                    std::vector<double>& weights, std::size_t excluded) {
  const auto K = m.topics;
  const double vbeta = static_cast<double>(m.vocab_size()) * m.beta;
  const std::uint32_t* dt = m.doc_topic.data() + doc * K;
  const std::uint32_t* wt = m.word_topic.data() + static_cast<std::size_t>(word) * K;
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double own = k == excluded ? 1.0 : 0.0;
    const double w = (dt[k] - own + m.alpha) * (wt[k] - own + m.beta) /
                     (m.topic_total[k] - own + vbeta);
    sum += w;
    weights[k] = sum;
  }
  return sum;
}

void adjust(TopicModel& m, std::size_t doc, std::uint32_t word, std::size_t topic, int delta) {
  const auto K = m.topics;
  m.doc_topic[doc * K + topic] += delta;
  m.word_topic[static_cast<std::size_t>(word) * K + topic] += delta;
  m.topic_total[topic] += delta;
}

}  // namespace

TopicModel fit_lda(std::span<const Document> corpus, const LdaParams& params,
                   const SweepObserver& on_sweep) {
  if (params.topics == 0) throw DataError("LDA needs at least one topic");
  if (corpus.empty()) throw DataError("LDA corpus is empty");

  TopicModel m;
  m.topics = params.topics;
  m.alpha = params.resolved_alpha();
  m.beta = params.beta;
  m.seed = params.seed;
  m.iterations = params.iterations;
  if (m.alpha <= 0.0 || m.beta <= 0.0) throw DataError("LDA alpha and beta must be positive");

  std::set<std::string> vocab;
  for (const auto& doc : corpus) {
    if (doc.tokens.empty()) throw DataError("document '" + doc.doc_id + "' has no tokens");
    vocab.insert(doc.tokens.begin(), doc.tokens.end());
  }
  m.vocabulary.assign(vocab.begin(), vocab.end());
  std::unordered_map<std::string, std::uint32_t> index;
  index.reserve(m.vocabulary.size());
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i) {
    index.emplace(m.vocabulary[i], static_cast<std::uint32_t>(i));
  }

  const auto K = m.topics;
  const auto N = corpus.size();
  m.doc_ids.reserve(N);
  m.words.resize(N);
  m.assignments.resize(N);
  m.word_topic.assign(m.vocab_size() * K, 0);
  m.doc_topic.assign(N * K, 0);
  m.topic_total.assign(K, 0);

  Rng rng(params.seed);
  for (std::size_t d = 0; d < N; ++d) {
    m.doc_ids.push_back(corpus[d].doc_id);
    auto& words = m.words[d];
    auto& z = m.assignments[d];
    words.reserve(corpus[d].tokens.size());
    for (const auto& tok : corpus[d].tokens) words.push_back(index.at(tok));
    z.resize(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
      z[i] = static_cast<std::uint32_t>(rng.below(K));
      adjust(m, d, words[i], z[i], +1);
    }
  }

  std::vector<double> cumulative(K);
  for (std::size_t sweep = 0; sweep < params.iterations; ++sweep) {
    for (std::size_t d = 0; d < N; ++d) {
      const auto& words = m.words[d];
      auto& z = m.assignments[d];
      for (std::size_t i = 0; i < words.size(); ++i) {
        adjust(m, d, words[i], z[i], -1);
        const double total = fill_weights(m, d, words[i], cumulative, K);
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), K - 1);
        z[i] = static_cast<std::uint32_t>(k);
        adjust(m, d, words[i], k, +1);
      }
    }
    if (on_sweep) on_sweep(m, sweep);
  }
  return m;
}

std::vector<double> token_conditional(const TopicModel& model, std::size_t doc,
                                      std::size_t position) {
  const TopicModel& m = model;
  const auto word = m.words.at(doc).at(position);
  const auto topic = m.assignments[doc][position];
  std::vector<double> cumulative(m.topics);
  const double total = fill_weights(m, doc, word, cumulative, topic);

  std::vector<double> probs(m.topics);
  double prev = 0.0;
  for (std::size_t k = 0; k < m.topics; ++k) {
    probs[k] = (cumulative[k] - prev) / total;
    prev = cumulative[k];
  }
  return probs;
}

std::size_t dominant_topic(std::span<const std::uint32_t> counts, double alpha) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < counts.size(); ++k) {
    if (counts[k] + alpha > counts[best] + alpha) best = k;
  }
  return best;
}

std::vector<DocTopicLabel> label_documents(const TopicModel& model) {
  std::vector<DocTopicLabel> labels;
  labels.reserve(model.doc_count());
  for (std::size_t d = 0; d < model.doc_count(); ++d) {
    labels.push_back({model.doc_ids[d], dominant_topic(model.doc_row(d), model.alpha)});
  }
  return labels;
}

std::vector<std::size_t> CommunityTopics::unique_topics() const {
  std::vector<std::size_t> out;
  out.reserve(topic_counts.size());
  for (auto [t, n] : topic_counts) out.push_back(t);
  return out;
}

std::size_t CommunityTopics::document_count() const {
  std::size_t n = 0;
  for (auto [t, c] : topic_counts) n += c;
  return n;
}

CommunityTopicsResult community_topics(std::span<const DocTopicLabel> labels,
                                       const std::map<std::string, std::size_t>& membership,
                                       const std::map<std::string, std::string>& doc_owner) {
  std::map<std::size_t, CommunityTopics> by_community;
  CommunityTopicsResult result;
  for (const auto& label : labels) {
    const auto owner = doc_owner.find(label.doc_id);
    if (owner == doc_owner.end()) {
      throw DataError("document '" + label.doc_id + "' has no owner");
    }
    const auto member = membership.find(owner->second);
    if (member == membership.end()) {
      result.unassigned_docs.push_back(label.doc_id);
      continue;
    }
    auto& ct = by_community[member->second];
    ct.community = member->second;
    ++ct.topic_counts[label.topic];
  }
  for (auto& [c, ct] : by_community) result.communities.push_back(std::move(ct));
  return result;
}

void write_model(const TopicModel& m, std::ostream& out) {
  out << "# K,V,alpha,beta,seed\n";
  out << m.topics << ',' << m.vocab_size() << ',' << format_double(m.alpha) << ','
      << format_double(m.beta) << ',' << m.seed << '\n';
  out << "[vocabulary]\n";
  for (std::size_t v = 0; v < m.vocab_size(); ++v) out << v << ',' << m.vocabulary[v] << '\n';
  out << "[documents]\n";
  for (std::size_t d = 0; d < m.doc_count(); ++d) out << d << ',' << m.doc_ids[d] << '\n';
  out << "[topic_word]\n";
  for (std::size_t k = 0; k < m.topics; ++k) {
    for (std::size_t v = 0; v < m.vocab_size(); ++v) {
      if (auto c = m.topic_word_count(k, v)) out << k << ',' << v << ',' << c << '\n';
    }
  }
  out << "[doc_topic]\n";
  for (std::size_t d = 0; d < m.doc_count(); ++d) {
    for (std::size_t k = 0; k < m.topics; ++k) {
      if (auto c = m.doc_topic_count(d, k)) out << d << ',' << k << ',' << c << '\n';
    }
  }
}

TopicModel read_model(std::istream& in) {
  TopicModel m;
  std::string line;
  std::string section;
  bool have_header = false;
  std::size_t V = 0;
  auto fail = [](const std::string& why) { throw DataError("bad topic model dump: " + why); };
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      section = line;
      if (section == "[topic_word]") {
        m.word_topic.assign(V * m.topics, 0);
        m.topic_total.assign(m.topics, 0);
      } else if (section == "[doc_topic]") {
        m.doc_topic.assign(m.doc_ids.size() * m.topics, 0);
      }
      continue;
    }
    if (!have_header) {
      auto f = split(line, ',');
      if (f.size() != 5 || !parse_number(f[0], m.topics) || !parse_number(f[1], V) ||
          !parse_number(f[2], m.alpha) || !parse_number(f[3], m.beta) ||
          !parse_number(f[4], m.seed)) {
        fail("header");
      }
      have_header = true;
      continue;
    }
    if (section == "[vocabulary]" || section == "[documents]") {
      const auto comma = line.find(',');
      if (comma == std::string::npos) fail("entry");
      auto& target = section == "[vocabulary]" ? m.vocabulary : m.doc_ids;
      target.push_back(line.substr(comma + 1));
      continue;
    }
    auto f = split(line, ',');
    std::size_t a = 0, b = 0;
    std::uint32_t c = 0;
    if (f.size() != 3 || !parse_number(f[0], a) || !parse_number(f[1], b) ||
        !parse_number(f[2], c)) {
      fail("count triple");
    }
    if (section == "[topic_word]") {
      if (a >= m.topics || b >= V) fail("topic_word index");
      m.word_topic[b * m.topics + a] = c;
      m.topic_total[a] += c;
    } else if (section == "[doc_topic]") {
      if (a >= m.doc_ids.size() || b >= m.topics) fail("doc_topic index");
      m.doc_topic[a * m.topics + b] = c;
    } else {
      fail("unknown section");
    }
  }
  if (!have_header || m.vocabulary.size() != V) fail("truncated");
  if (m.doc_topic.empty()) m.doc_topic.assign(m.doc_ids.size() * m.topics, 0);
  return m;
}

}  // namespace spamprop
