#include "spamprop/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"
#include "spamprop/text_io.hpp"

namespace spamprop {

namespace {

constexpr std::int64_t kEpoch = 1420070400;  // 2015-01-01
constexpr std::int64_t kSpan = 180LL * 24 * 3600;

const char* const kFillers[] = {"the", "and", "of", "to", "is", "with", "for", "this"};

std::string pad(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

std::string user_name(const std::string& nb, std::size_t index) { return nb + "u" + pad(index, 4); }

std::string topic_word(std::size_t topic, std::size_t index) {
  return "t" + std::to_string(topic) + "w" + std::to_string(index);
}

class MessageIds {
 public:
  explicit MessageIds(std::string prefix) : prefix_(std::move(prefix)) {}
  std::string next() { return prefix_ + "m" + pad(counter_++, 7); }

 private:
  std::string prefix_;
  std::size_t counter_ = 0;
};

Timeline* find_timeline(std::vector<Timeline>& timelines, const std::string& user) {
  auto it = std::lower_bound(timelines.begin(), timelines.end(), user,
                             [](const Timeline& t, const std::string& u) { return t.user < u; });
  return it != timelines.end() && it->user == user ? &*it : nullptr;
}

}  // namespace

void SynthConfig::validate() const {
  if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0)) {
    throw ConfigError("synth requires 0 <= p_out < p_in <= 1");
  }
  for (auto v : {neighborhoods, n_communities, community_size, n_topics, vocab_per_topic,
                 docs_per_user, messages_per_doc, max_topics_per_community, min_tokens,
                 group_size_min}) {
    if (v == 0) throw ConfigError("synth counts must be at least 1");
  }
  if (group_size_min < 2 || group_size_max < group_size_min) {
    throw ConfigError("synth group sizes must satisfy 2 <= min <= max");
  }
  if (max_tokens < min_tokens) throw ConfigError("synth token range is empty");
  if (!(0.0 < benign_ratio_min && benign_ratio_min <= benign_ratio_max && benign_ratio_max <= 1.0 &&
        0.0 < spam_ratio_min && spam_ratio_min <= spam_ratio_max && spam_ratio_max <= 1.0)) {
    throw ConfigError("synth author ratios must lie in (0, 1]");
  }
}

std::string synth_neighborhood_id(std::size_t index) { return "nb" + pad(index, 3); }

SynthNetwork generate_network(const SynthConfig& cfg, const std::string& nb, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t n = cfg.n_communities * cfg.community_size;
  SynthNetwork net;
  std::vector<std::vector<std::string>> blocks(cfg.n_communities);
  for (std::size_t v = 0; v < n; ++v) blocks[v / cfg.community_size].push_back(user_name(nb, v));
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const bool same = u / cfg.community_size == v / cfg.community_size;
      if (rng.bernoulli(same ? cfg.p_in : cfg.p_out)) {
        net.edges.emplace_back(user_name(nb, u), user_name(nb, v));
        net.edges.emplace_back(user_name(nb, v), user_name(nb, u));
      }
    }
  }
  net.planted = Partition(std::move(blocks));
  return net;
}

SynthCorpus generate_corpus(const SynthConfig& cfg, const Partition& planted,
                            const std::string& nb, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto h = planted.size();
  SynthCorpus corpus;
  corpus.community_topics.resize(h);

  // Own topic per community (wrapping when topics run short), then shared
  // topics handed to consecutive pairs of a shuffled community order.
  const std::size_t own = std::min(h, cfg.n_topics);
  for (std::size_t c = 0; c < h; ++c) corpus.community_topics[c].push_back(c % cfg.n_topics);
  if (cfg.max_topics_per_community >= 2 && cfg.n_topics > own) {
    std::vector<std::size_t> order(h);
    for (std::size_t c = 0; c < h; ++c) order[c] = c;
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t shared = own;
    for (std::size_t i = 0; i + 1 < h && shared < cfg.n_topics; i += 2, ++shared) {
      corpus.community_topics[order[i]].push_back(shared);
      corpus.community_topics[order[i + 1]].push_back(shared);
    }
  }

  MessageIds ids(nb + "-");
  const std::size_t per_user = cfg.docs_per_user * cfg.messages_per_doc;
  for (std::size_t c = 0; c < h; ++c) {
    const auto& topics = corpus.community_topics[c];
    const auto& members = planted.communities()[c];
    for (std::size_t i = 0; i < members.size(); ++i) {
      Timeline tl;
      tl.user = members[i];
      // Two in three members mainly discuss the community's own topic, the
      // rest its shared one.
      const std::size_t main = topics.size() > 1 && i % 3 == 2 ? topics[1] : topics[0];
      std::int64_t ts = kEpoch + static_cast<std::int64_t>(rng.below(3600));
      for (std::size_t m = 0; m < per_user; ++m) {
        std::size_t topic = main;
        if (topics.size() > 1 && !rng.bernoulli(cfg.focus)) {
          topic = topics[rng.below(topics.size())];
        }
        const auto len = static_cast<std::size_t>(
            rng.between(static_cast<std::int64_t>(cfg.min_tokens), static_cast<std::int64_t>(cfg.max_tokens)));
        std::string text;
        for (std::size_t k = 0; k < len; ++k) {
          if (k) text.push_back(' ');
          if (k > 0 && rng.bernoulli(0.15)) {
            text += kFillers[rng.below(std::size(kFillers))];
            text.push_back(' ');
          }
          text += topic_word(topic, rng.below(cfg.vocab_per_topic));
        }
        if (rng.bernoulli(0.1)) text += "!";
        ts += 600 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(kSpan / per_user)));
        tl.messages.push_back(Message{ids.next(), tl.user, ts, std::move(text), false});
      }
      corpus.timelines.push_back(std::move(tl));
    }
  }
  std::sort(corpus.timelines.begin(), corpus.timelines.end(),
            [](const Timeline& a, const Timeline& b) { return a.user < b.user; });
  return corpus;
}

std::vector<PlantedGroup> generate_campaigns(const SynthConfig& cfg, const Partition& planted,
                                             const std::vector<std::vector<std::size_t>>& community_topics,
                                             std::vector<Timeline>& timelines, const std::string& nb,
                                             std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto h = planted.size();
  const auto& members = planted.communities();

  // Communities per topic; parties of interest are topics held by >= 2.
  std::map<std::size_t, std::vector<std::size_t>> holders;
  for (std::size_t c = 0; c < h; ++c) {
    for (auto t : community_topics[c]) holders[t].push_back(c);
  }
  std::vector<std::vector<std::size_t>> parties;
  for (auto& [t, cs] : holders) {
    if (cs.size() >= 2) parties.push_back(cs);
  }

  MessageIds ids(nb + "-c");
  std::vector<PlantedGroup> groups;
  const std::size_t total = cfg.n_benign_groups + cfg.n_spam_groups;
  for (std::size_t g = 0; g < total; ++g) {
    const bool spam = g >= cfg.n_benign_groups;
    PlantedGroup group;
    group.spam = spam;

    if (!spam && !parties.empty()) {
      group.communities = parties[rng.below(parties.size())];
    } else {
      const std::size_t lo = spam ? std::min<std::size_t>(h, std::max<std::size_t>(2, (h + 1) / 2)) : std::min<std::size_t>(h, 2);
      const std::size_t hi = spam ? h : std::min<std::size_t>(h, 3);
      const auto k = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
      std::vector<std::size_t> order(h);
      for (std::size_t c = 0; c < h; ++c) order[c] = c;
      rng.shuffle(std::span<std::size_t>(order));
      group.communities.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(group.communities.begin(), group.communities.end());
    }

    std::vector<std::string> pool;
    for (auto c : group.communities) pool.insert(pool.end(), members[c].begin(), members[c].end());
    const auto size = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(cfg.group_size_min),
                                                           static_cast<std::int64_t>(cfg.group_size_max)));
    const double ratio = spam ? rng.uniform(cfg.spam_ratio_min, cfg.spam_ratio_max)
                              : rng.uniform(cfg.benign_ratio_min, cfg.benign_ratio_max);
    std::size_t n_authors = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(size)));
    n_authors = std::clamp<std::size_t>(n_authors, 1, std::min(size, pool.size()));

    // Authors: at least one per community while possible, then random.
    rng.shuffle(std::span<std::string>(pool));
    std::vector<std::string> authors;
    std::set<std::string> chosen;
    for (auto c : group.communities) {
      if (authors.size() >= n_authors) break;
      const auto& m = members[c];
      const auto& pick = m[rng.below(m.size())];
      if (chosen.insert(pick).second) authors.push_back(pick);
    }
    for (const auto& u : pool) {
      if (authors.size() >= n_authors) break;
      if (chosen.insert(u).second) authors.push_back(u);
    }

    // Campaign text: a group-specific template, one varying trailing word.
    const std::string tag = nb + "g" + pad(g, 3);
    std::vector<std::string> words;
    for (int k = 0; k < 6; ++k) words.push_back(tag + "x" + std::to_string(k));
    std::string base;
    for (const auto& w : words) base += (base.empty() ? "" : " ") + w;
    if (spam) base += " http://s.ly/" + tag;

    for (std::size_t m = 0; m < size; ++m) {
      const auto& author = m < authors.size() ? authors[m] : authors[rng.below(authors.size())];
      std::string text = base + " " + tag + "v" + std::to_string(rng.below(1000));
      Timeline* tl = find_timeline(timelines, author);
      if (!tl) throw DataError("campaign author without timeline");
      const auto ts = kEpoch + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(kSpan)));
      Message msg{ids.next(), author, ts, std::move(text), !spam && rng.bernoulli(0.5)};
      group.message_ids.push_back(msg.id);
      tl->messages.push_back(std::move(msg));
    }
    group.authors = authors;
    std::sort(group.authors.begin(), group.authors.end());
    std::sort(group.message_ids.begin(), group.message_ids.end());
    group.group_id = group.message_ids.front();
    if (spam) {
      group.label = rng.bernoulli(cfg.app_share) ? RawLabel::app : RawLabel::spam;
    } else {
      group.label = rng.bernoulli(cfg.quote_share) ? RawLabel::quote : RawLabel::normal;
    }
    groups.push_back(std::move(group));
  }

  for (auto& tl : timelines) {
    std::sort(tl.messages.begin(), tl.messages.end(), [](const Message& a, const Message& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
    });
  }
  return groups;
}

SynthNeighborhood generate_neighborhood(const SynthConfig& cfg, std::size_t index) {
  SynthNeighborhood out;
  out.id = synth_neighborhood_id(index);
  const auto seed = derive_seed(cfg.seed, index);
  out.network = generate_network(cfg, out.id, derive_seed(seed, "network"));
  out.corpus = generate_corpus(cfg, out.network.planted, out.id, derive_seed(seed, "corpus"));
  out.groups = generate_campaigns(cfg, out.network.planted, out.corpus.community_topics,
                                  out.corpus.timelines, out.id, derive_seed(seed, "campaigns"));
  return out;
}

void write_synth_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  std::ostringstream labels;
  labels << "group_id,raw_label\n";
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < cfg.neighborhoods; ++i) {
    const auto nb = generate_neighborhood(cfg, i);
    ids.push_back(nb.id);

    std::ostringstream edges;
    for (const auto& [u, v] : nb.network.edges) edges << u << '\t' << v << '\n';
    write_file(dir / nb.id / "edges.tsv", edges.str());

    std::ostringstream timelines;
    for (const auto& tl : nb.corpus.timelines) {
      for (const auto& m : tl.messages) {
        nlohmann::json rec = {{"user", m.author}, {"id", m.id}, {"ts", m.timestamp}, {"text", m.text}};
        if (m.is_repost) rec["repost"] = true;
        timelines << rec.dump() << '\n';
      }
    }
    write_file(dir / nb.id / "timelines.jsonl", timelines.str());

    std::ostringstream planted;
    planted << "user_id,community_id\n";
    const auto& comms = nb.network.planted.communities();
    for (std::size_t c = 0; c < comms.size(); ++c) {
      for (const auto& u : comms[c]) planted << u << ',' << c << '\n';
    }
    write_file(dir / nb.id / "planted_partition.csv", planted.str());

    for (const auto& g : nb.groups) labels << g.group_id << ',' << to_string(g.label) << '\n';
  }
  write_file(dir / "labels.csv", labels.str());

  nlohmann::json config = {
      {"edges", "{nb}/edges.tsv"},
      {"timelines", "{nb}/timelines.jsonl"},
      {"labels", "labels.csv"},
      {"output", "out"},
      {"neighborhoods", ids},
      {"seed", cfg.seed},
  };
  write_file(dir / "config.json", config.dump(2) + "\n");
}

}  // namespace spamprop
