#include "spamprop/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"
#include "spamprop/text_io.hpp"

namespace spamprop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kNbToken = "{nb}";

std::string replace_nb(std::string pattern, const std::string& nb) {
  for (auto pos = pattern.find(kNbToken); pos != std::string::npos; pos = pattern.find(kNbToken, pos)) {
    pattern.replace(pos, std::string_view(kNbToken).size(), nb);
    pos += nb.size();
  }
  return pattern;
}

bool has_nb(const fs::path& p) { return p.string().find(kNbToken) != std::string::npos; }

std::string digest_of(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back(sep);
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  for (auto part : split(text, ' ')) out.emplace_back(part);
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

// Stage stamps: the parameters and input digests a stage ran with.
fs::path stamp_path(const fs::path& dir, std::string_view stage) {
  return dir / ".stamps" / (std::string(stage) + ".json");
}

bool stamp_matches(const PipelineConfig& cfg, const fs::path& dir, std::string_view stage,
                   const json& key, std::initializer_list<const char*> outputs) {
  if (!cfg.resume) return false;
  const auto p = stamp_path(dir, stage);
  if (!fs::exists(p)) return false;
  for (const auto* out : outputs) {
    if (!fs::exists(dir / out)) return false;
  }
  return read_file(p) == key.dump(2) + "\n";
}

void write_stamp(const fs::path& dir, std::string_view stage, const json& key) {
  write_file(stamp_path(dir, stage), key.dump(2) + "\n");
}

json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"accuracy", m.accuracy}};
}

json scores_json(const Scores& s) {
  return {{"homogeneity", s.homogeneity}, {"completeness", s.completeness}, {"v_measure", s.v_measure}};
}

json parse_report_json(const ParseReport& r) {
  json errors = json::array();
  for (const auto& e : r.errors) errors.push_back({{"line", e.line}, {"reason", e.reason}});
  return {{"records", r.records}, {"duplicates", r.duplicates}, {"truncated", r.truncated}, {"errors", errors}};
}

ParseReport parse_report_from(const json& j) {
  ParseReport r;
  r.records = j.at("records").get<std::size_t>();
  r.duplicates = j.at("duplicates").get<std::size_t>();
  r.truncated = j.at("truncated").get<std::size_t>();
  for (const auto& e : j.at("errors")) {
    r.errors.push_back({e.at("line").get<std::size_t>(), e.at("reason").get<std::string>()});
  }
  return r;
}

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

const char* graph_kind_name(GraphKind k) { return k == GraphKind::directed ? "directed" : "undirected"; }

const char* method_name(CommunityMethod m) {
  return m == CommunityMethod::map_equation ? "map-equation" : "modularity";
}

std::uint64_t nb_seed(const PipelineConfig& cfg, const std::string& nb, std::string_view stage) {
  return derive_seed(derive_seed(cfg.seed, nb), stage);
}

StopWords load_configured_stopwords(const PipelineConfig& cfg) {
  return cfg.stopwords ? load_stopwords(*cfg.stopwords) : default_stopwords();
}

void check_inputs(const PipelineConfig& cfg) {
  std::vector<fs::path> required;
  for (const auto& nb : cfg.neighborhoods) {
    required.push_back(cfg.edges_for(nb));
    required.push_back(cfg.timelines_for(nb));
  }
  required.push_back(cfg.labels);
  if (cfg.stopwords) required.push_back(*cfg.stopwords);
  for (const auto& p : required) {
    if (!fs::is_regular_file(p)) throw ConfigError("missing input file: " + p.string());
  }
}

bool trainable(const NeighborhoodRun& run, const PipelineConfig& cfg) {
  return run.prepared && run.benign >= cfg.min_class_rows && run.spam >= cfg.min_class_rows;
}

std::string too_few_reason(const NeighborhoodRun& run, const PipelineConfig& cfg) {
  return "fewer than " + std::to_string(cfg.min_class_rows) + " benign or spam rows (" +
         std::to_string(run.benign) + " benign, " + std::to_string(run.spam) + " spam)";
}

}  // namespace

// ---------------------------------------------------------------- config

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig cfg;
  auto resolve = [&](const json& v) {
    fs::path p = v.get<std::string>();
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  // Counts must be non-negative integers; get<size_t> would wrap or truncate.
  auto count = [](const json& v) {
    if (!v.is_number_unsigned()) throw json::type_error::create(302, "not a count", &v);
    return v.get<std::size_t>();
  };
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "edges") cfg.edges = resolve(v);
      else if (key == "timelines") cfg.timelines = resolve(v);
      else if (key == "labels") cfg.labels = resolve(v);
      else if (key == "output") cfg.output = resolve(v);
      else if (key == "stopwords") cfg.stopwords = v.is_null() ? std::nullopt : std::optional(resolve(v));
      else if (key == "neighborhoods") cfg.neighborhoods = v.get<std::vector<std::string>>();
      else if (key == "l") cfg.l = count(v);
      else if (key == "per_user_cap") cfg.per_user_cap = count(v);
      else if (key == "k_core") cfg.k_core = count(v);
      else if (key == "graph") {
        const auto s = v.get<std::string>();
        if (s == "directed") cfg.graph = GraphKind::directed;
        else if (s == "undirected") cfg.graph = GraphKind::undirected;
        else throw ConfigError("graph must be 'directed' or 'undirected'");
      } else if (key == "community_method") {
        const auto s = v.get<std::string>();
        if (s == "map-equation") cfg.method = CommunityMethod::map_equation;
        else if (s == "modularity") cfg.method = CommunityMethod::modularity;
        else throw ConfigError("community_method must be 'map-equation' or 'modularity'");
      } else if (key == "restarts") cfg.restarts = v.get<int>();
      else if (key == "topics") cfg.topics = count(v);
      else if (key == "lda_iterations") cfg.lda_iterations = count(v);
      else if (key == "alpha") cfg.alpha = v.is_null() ? std::nullopt : std::optional(v.get<double>());
      else if (key == "beta") cfg.beta = v.get<double>();
      else if (key == "combination") cfg.combination = combination_from_int(v.get<int>());
      else if (key == "classifier") cfg.classifier = parse_classifier_kind(v.get<std::string>());
      else if (key == "folds") cfg.folds = count(v);
      else if (key == "smote_neighbors") cfg.smote_neighbors = count(v);
      else if (key == "min_class_rows") cfg.min_class_rows = count(v);
      else if (key == "tau") cfg.tau = v.get<double>();
      else if (key == "repetitions") cfg.repetitions = count(v);
      else if (key == "seed") cfg.seed = count(v);
      else if (key == "workers") cfg.workers = count(v);
      else if (key == "resume") cfg.resume = v.get<bool>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    } catch (const DataError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

json PipelineConfig::to_json() const {
  json j = {
      {"edges", edges.string()},
      {"timelines", timelines.string()},
      {"labels", labels.string()},
      {"output", output.string()},
      {"stopwords", stopwords ? json(stopwords->string()) : json(nullptr)},
      {"neighborhoods", neighborhoods},
      {"l", l},
      {"per_user_cap", per_user_cap},
      {"k_core", k_core},
      {"graph", graph_kind_name(graph)},
      {"community_method", method_name(method)},
      {"restarts", restarts},
      {"topics", topics},
      {"lda_iterations", lda_iterations},
      {"alpha", alpha ? json(*alpha) : json(nullptr)},
      {"beta", beta},
      {"combination", static_cast<int>(combination)},
      {"classifier", std::string(to_string(classifier))},
      {"folds", folds},
      {"smote_neighbors", smote_neighbors},
      {"min_class_rows", min_class_rows},
      {"tau", tau},
      {"repetitions", repetitions},
      {"seed", seed},
      {"workers", workers},
      {"resume", resume},
  };
  return j;
}

void PipelineConfig::validate() const {
  if (edges.empty() || timelines.empty() || labels.empty() || output.empty()) {
    throw ConfigError("edges, timelines, labels and output paths are required");
  }
  if ((has_nb(edges) || has_nb(timelines)) && neighborhoods.empty()) {
    throw ConfigError("input paths use {nb} but no neighborhoods are listed");
  }
  if (neighborhoods.empty()) throw ConfigError("at least one neighborhood is required");
  if (std::set<std::string>(neighborhoods.begin(), neighborhoods.end()).size() != neighborhoods.size()) {
    throw ConfigError("neighborhood ids must be unique");
  }
  for (const auto& nb : neighborhoods) {
    if (nb.empty() || nb.find_first_of("/\\") != std::string::npos || nb == "." || nb == "..") {
      throw ConfigError("invalid neighborhood id '" + nb + "'");
    }
  }
  if (l == 0) throw ConfigError("l must be at least 1");
  if (per_user_cap == 0) throw ConfigError("per_user_cap must be at least 1");
  if (k_core == 0) throw ConfigError("k_core must be at least 1");
  if (restarts < 1) throw ConfigError("restarts must be at least 1");
  if (topics == 0 || lda_iterations == 0) throw ConfigError("topics and lda_iterations must be at least 1");
  if (!(beta > 0.0) || (alpha && !(*alpha > 0.0))) throw ConfigError("alpha and beta must be positive");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (smote_neighbors == 0) throw ConfigError("smote_neighbors must be at least 1");
  if (min_class_rows == 0) throw ConfigError("min_class_rows must be at least 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
  if (workers == 0) throw ConfigError("workers must be at least 1");
}

fs::path PipelineConfig::edges_for(const std::string& nb) const { return replace_nb(edges.string(), nb); }

fs::path PipelineConfig::timelines_for(const std::string& nb) const {
  return replace_nb(timelines.string(), nb);
}

CvOptions PipelineConfig::cv_options() const {
  CvOptions cv;
  cv.folds = folds;
  cv.smote_neighbors = smote_neighbors;
  cv.kind = classifier;
  return cv;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  auto base = path.parent_path();
  auto cfg = PipelineConfig::from_json(j, base);
  if (cfg.neighborhoods.empty() && !has_nb(cfg.edges) && !has_nb(cfg.timelines)) {
    cfg.neighborhoods = {"default"};
  }
  return cfg;
}

// ---------------------------------------------------------------- ingest

IngestResult ingest_timelines(const fs::path& timelines, std::size_t per_user_cap, std::size_t l,
                              const StopWords& stopwords) {
  auto in = open_input(timelines);
  auto parsed = parse_timelines(in, per_user_cap);
  IngestResult out;
  out.report = std::move(parsed.report);
  for (const auto& tl : parsed.timelines) {
    out.users.push_back(tl.user);
    for (auto& doc : build_documents(tl, l, stopwords)) out.documents.push_back(std::move(doc));
    for (const auto& m : tl.messages) {
      out.messages.push_back({m.id, m.author, clean_and_tokenize(m.text, stopwords, TokenizeMode::grouping)});
    }
  }
  return out;
}

void write_ingest(const IngestResult& r, const fs::path& dir) {
  std::ostringstream docs;
  for (const auto& d : r.documents) {
    docs << d.doc_id << '\t' << d.user << '\t' << join(d.source_message_ids, ' ') << '\t'
         << join(d.tokens, ' ') << '\n';
  }
  write_file(dir / "documents.tsv", docs.str());
  std::ostringstream msgs;
  for (const auto& m : r.messages) msgs << m.message_id << '\t' << m.author << '\t' << join(m.tokens, ' ') << '\n';
  write_file(dir / "messages.tsv", msgs.str());
  std::ostringstream users;
  for (const auto& u : r.users) users << u << '\n';
  write_file(dir / "users.txt", users.str());
  write_file(dir / "ingest_report.json", parse_report_json(r.report).dump(2) + "\n");
}

IngestResult read_ingest(const fs::path& dir) {
  IngestResult r;
  std::string line;
  auto docs = open_input(dir / "documents.tsv");
  for (std::size_t n = 1; std::getline(docs, line); ++n) {
    auto f = split(line, '\t');
    if (f.size() != 4) throw DataError("documents.tsv line " + std::to_string(n) + " is malformed");
    r.documents.push_back({std::string(f[0]), std::string(f[1]), split_words(f[3]), split_words(f[2])});
  }
  auto msgs = open_input(dir / "messages.tsv");
  for (std::size_t n = 1; std::getline(msgs, line); ++n) {
    auto f = split(line, '\t');
    if (f.size() != 3) throw DataError("messages.tsv line " + std::to_string(n) + " is malformed");
    r.messages.push_back({std::string(f[0]), std::string(f[1]), split_words(f[2])});
  }
  auto users = open_input(dir / "users.txt");
  while (std::getline(users, line)) {
    if (!line.empty()) r.users.push_back(line);
  }
  try {
    r.report = parse_report_from(json::parse(read_file(dir / "ingest_report.json")));
  } catch (const json::exception&) {
    throw DataError("ingest_report.json is malformed");
  }
  return r;
}

// ---------------------------------------------------------------- graph

std::vector<std::pair<std::string, std::string>> read_edge_list(const fs::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw DataError(path.string() + " line " + std::to_string(n) + ": expected 'src<TAB>dst'");
    }
    edges.emplace_back(std::string(f[0]), std::string(f[1]));
  }
  return edges;
}

GraphResult partition_network(std::span<const std::pair<std::string, std::string>> edges, GraphKind kind,
                              std::size_t k, CommunityMethod method, int restarts, std::uint64_t seed) {
  auto graphs = build_graphs(edges);
  const auto& g = kind == GraphKind::directed ? graphs.directed : graphs.undirected;
  GraphResult out;
  out.vertices = g.vertex_count();
  out.edges = g.edge_count();
  out.dropped_self_loops = graphs.dropped_self_loops;
  const auto core = k_core(g, k);
  out.core_vertices = core.vertex_count();
  if (core.empty()) throw DataError("the " + std::to_string(k) + "-core is empty");
  MapEquationOptions options;
  options.restarts = restarts;
  out.partition = detect_communities(core, method, seed, options);
  return out;
}

void write_partition_csv(const Partition& partition, const fs::path& path) {
  std::ostringstream out;
  out << "user_id,community_id\n";
  const auto& comms = partition.communities();
  for (std::size_t c = 0; c < comms.size(); ++c) {
    for (const auto& u : comms[c]) out << u << ',' << c << '\n';
  }
  write_file(path, out.str());
}

Partition read_partition_csv(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  std::map<std::size_t, std::vector<std::string>> by_id;
  std::set<std::string> seen;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    auto f = split(line, ',');
    std::size_t c = 0;
    if (f.size() != 2 || !parse_number(f[1], c) || !seen.insert(std::string(f[0])).second) {
      throw DataError(path.string() + " line " + std::to_string(n) + " is malformed");
    }
    by_id[c].emplace_back(f[0]);
  }
  std::vector<std::vector<std::string>> comms;
  for (auto& [c, members] : by_id) comms.push_back(std::move(members));
  return Partition(std::move(comms));
}

// ---------------------------------------------------------------- topics

TopicResult assign_topics(std::span<const Document> documents, const Partition& partition,
                          const LdaParams& params) {
  std::vector<Document> corpus;
  for (const auto& d : documents) {
    if (!d.tokens.empty()) corpus.push_back(d);
  }
  TopicResult out;
  out.model = fit_lda(corpus, params);
  out.labels = label_documents(out.model);
  std::map<std::string, std::string> owner;
  for (const auto& d : corpus) owner[d.doc_id] = d.user;
  out.communities = community_topics(out.labels, partition.membership(), owner);
  return out;
}

void write_doc_topics_csv(std::span<const DocTopicLabel> labels, const fs::path& path) {
  std::ostringstream out;
  out << "doc_id,topic\n";
  for (const auto& l : labels) out << l.doc_id << ',' << l.topic << '\n';
  write_file(path, out.str());
}

std::vector<DocTopicLabel> read_doc_topics_csv(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  std::vector<DocTopicLabel> out;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    auto f = split(line, ',');
    std::size_t t = 0;
    if (f.size() != 2 || !parse_number(f[1], t)) {
      throw DataError(path.string() + " line " + std::to_string(n) + " is malformed");
    }
    out.push_back({std::string(f[0]), t});
  }
  return out;
}

// ---------------------------------------------------------------- groups

void write_groups_csv(std::span<const MessageGroup> groups, const fs::path& path) {
  std::ostringstream out;
  out << "group_id,message_id\n";
  for (const auto& g : groups) {
    for (const auto& m : g.members) out << g.group_id << ',' << m.message_id << '\n';
  }
  write_file(path, out.str());
}

std::vector<MessageGroup> read_groups_csv(const fs::path& path, std::span<const GroupInput> messages,
                                          bool drop_unknown) {
  std::unordered_map<std::string, const GroupInput*> by_id;
  for (const auto& m : messages) by_id.emplace(m.message_id, &m);
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  std::map<std::string, MessageGroup> groups;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 2) throw DataError(path.string() + " line " + std::to_string(n) + " is malformed");
    const auto it = by_id.find(std::string(f[1]));
    if (it == by_id.end() && drop_unknown) continue;
    if (it == by_id.end()) throw DataError("group member '" + std::string(f[1]) + "' is not a known message");
    auto& g = groups[std::string(f[0])];
    g.group_id = std::string(f[0]);
    g.members.push_back({it->second->message_id, it->second->author});
  }
  std::vector<MessageGroup> out;
  for (auto& [id, g] : groups) {
    std::sort(g.members.begin(), g.members.end(),
              [](const GroupMember& a, const GroupMember& b) { return a.message_id < b.message_id; });
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<MessageGroup> group_messages(std::span<const std::vector<GroupInput>> sets) {
  std::vector<GroupInput> all;
  std::unordered_set<std::string> seen;
  for (const auto& set : sets) {
    for (const auto& m : set) {
      if (seen.insert(m.message_id).second) all.push_back(m);
    }
  }
  return group_similar(all);
}

std::map<std::string, RawLabel> read_labels_csv(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "group_id,raw_label") throw DataError(path.string() + ": expected header 'group_id,raw_label'");
  std::map<std::string, RawLabel> labels;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 2) throw DataError(path.string() + " line " + std::to_string(n) + " is malformed");
    labels[std::string(f[0])] = parse_raw_label(f[1]);
  }
  return labels;
}

// ---------------------------------------------------------------- poi

ProbTable neighborhood_table(std::span<const MessageGroup> groups, const IngestResult& ingest,
                             const Partition& partition, std::span<const CommunityTopics> community_topics,
                             const std::string& neighborhood_id) {
  std::unordered_set<std::string> local;
  for (const auto& m : ingest.messages) local.insert(m.message_id);
  std::vector<MessageGroup> restricted;
  for (const auto& g : groups) {
    MessageGroup r;
    for (const auto& m : g.members) {
      if (local.count(m.message_id)) r.members.push_back(m);
    }
    if (r.members.empty()) continue;
    r.group_id = g.group_id;
    restricted.push_back(std::move(r));
  }
  const auto topics = NeighborhoodTopics::from(community_topics, partition.size());
  return build_prob_table(restricted, topics, partition.membership(), neighborhood_id);
}

ProbTable read_table(const fs::path& dir, const std::string& neighborhood_id) {
  const auto partition = read_partition_csv(dir / "partition.csv");
  auto ct_in = open_input(dir / "community_topics.csv");
  const auto ct = read_community_topics_csv(ct_in);
  auto obs_in = open_input(dir / "observations.csv");
  auto obs = read_observations_csv(obs_in, partition.size());
  auto table = table_from_observations(neighborhood_id, NeighborhoodTopics::from(ct, partition.size()), std::move(obs));
  const auto stats = json::parse(read_file(dir / "poi.json"));
  table.skipped_messages = stats.at("skipped_messages").get<std::size_t>();
  return table;
}

// ---------------------------------------------------------------- H1

H1Scores h1_scores(std::span<const DocTopicLabel> labels, std::span<const Document> documents,
                   const Partition& partition, std::uint64_t seed) {
  const auto membership = partition.membership();
  std::map<std::string, std::string> owner;
  for (const auto& d : documents) owner[d.doc_id] = d.user;
  std::map<std::string, std::size_t> doc_community;
  std::map<std::string, std::size_t> doc_topic;
  for (const auto& l : labels) {
    const auto o = owner.find(l.doc_id);
    if (o == owner.end()) continue;
    const auto c = membership.find(o->second);
    if (c == membership.end()) continue;
    doc_community[l.doc_id] = c->second;
    doc_topic[l.doc_id] = l.topic;
  }
  H1Scores out;
  out.documents = doc_community.size();
  if (doc_community.empty()) throw DataError("no documents belong to a community");
  out.actual = homogeneity_completeness_v(contingency(doc_community, doc_topic));

  // Null model: the same documents regrouped at random into groups of the
  // communities' document counts.
  std::map<std::size_t, std::size_t> sizes_by_community;
  std::vector<std::string> docs;
  for (const auto& [d, c] : doc_community) {
    ++sizes_by_community[c];
    docs.push_back(d);
  }
  std::vector<std::size_t> sizes;
  for (auto [c, n] : sizes_by_community) sizes.push_back(n);
  const auto groups = null_partition<std::string>(sizes, docs, seed);
  std::map<std::string, std::size_t> null_community;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& d : groups[g]) null_community[d] = g;
  }
  out.null_model = homogeneity_completeness_v(contingency(null_community, doc_topic));
  return out;
}

// ---------------------------------------------------------------- runs

namespace {

struct PhaseA {
  IngestResult ingest;
  Partition partition;
  std::vector<CommunityTopics> community_topics;
};

PhaseA run_front_stages(const PipelineConfig& cfg, const std::string& nb, const StopWords& stopwords,
                        const std::string& stopwords_digest, NeighborhoodRun& run) {
  const auto dir = cfg.dir_for(nb);
  PhaseA a;

  const json ingest_key = {{"stage", "ingest"},
                           {"timelines", digest_of(cfg.timelines_for(nb))},
                           {"per_user_cap", cfg.per_user_cap},
                           {"l", cfg.l},
                           {"stopwords", stopwords_digest}};
  if (stamp_matches(cfg, dir, "ingest", ingest_key,
                    {"documents.tsv", "messages.tsv", "users.txt", "ingest_report.json"})) {
    a.ingest = read_ingest(dir);
  } else {
    a.ingest = ingest_timelines(cfg.timelines_for(nb), cfg.per_user_cap, cfg.l, stopwords);
    write_ingest(a.ingest, dir);
    write_stamp(dir, "ingest", ingest_key);
  }
  run.ingest = a.ingest.report;
  run.documents = a.ingest.documents.size();

  const json graph_key = {{"stage", "graph"},
                          {"edges", digest_of(cfg.edges_for(nb))},
                          {"graph", graph_kind_name(cfg.graph)},
                          {"k_core", cfg.k_core},
                          {"method", method_name(cfg.method)},
                          {"restarts", cfg.restarts},
                          {"seed", nb_seed(cfg, nb, "graph")}};
  if (stamp_matches(cfg, dir, "graph", graph_key, {"partition.csv", "graph.json"})) {
    const auto stats = json::parse(read_file(dir / "graph.json"));
    run.graph.partition = read_partition_csv(dir / "partition.csv");
    run.graph.vertices = stats.at("vertices").get<std::size_t>();
    run.graph.edges = stats.at("edges").get<std::size_t>();
    run.graph.core_vertices = stats.at("core_vertices").get<std::size_t>();
    run.graph.dropped_self_loops = stats.at("dropped_self_loops").get<std::size_t>();
  } else {
    const auto edges = read_edge_list(cfg.edges_for(nb));
    run.graph = partition_network(edges, cfg.graph, cfg.k_core, cfg.method, cfg.restarts,
                                  nb_seed(cfg, nb, "graph"));
    write_partition_csv(run.graph.partition, dir / "partition.csv");
    const json stats = {{"vertices", run.graph.vertices},
                        {"edges", run.graph.edges},
                        {"core_vertices", run.graph.core_vertices},
                        {"communities", run.graph.partition.size()},
                        {"dropped_self_loops", run.graph.dropped_self_loops}};
    write_file(dir / "graph.json", stats.dump(2) + "\n");
    write_stamp(dir, "graph", graph_key);
  }
  a.partition = run.graph.partition;

  LdaParams lda;
  lda.topics = cfg.topics;
  lda.iterations = cfg.lda_iterations;
  lda.alpha = cfg.alpha;
  lda.beta = cfg.beta;
  lda.seed = nb_seed(cfg, nb, "lda");
  const json topics_key = {{"stage", "topics"},
                           {"documents", digest_of(dir / "documents.tsv")},
                           {"partition", digest_of(dir / "partition.csv")},
                           {"topics", cfg.topics},
                           {"iterations", cfg.lda_iterations},
                           {"alpha", lda.resolved_alpha()},
                           {"beta", cfg.beta},
                           {"seed", lda.seed}};
  std::vector<DocTopicLabel> labels;
  if (stamp_matches(cfg, dir, "topics", topics_key,
                    {"model.txt", "doc_topics.csv", "community_topics.csv", "topics.json"})) {
    labels = read_doc_topics_csv(dir / "doc_topics.csv");
    auto in = open_input(dir / "community_topics.csv");
    a.community_topics = read_community_topics_csv(in);
    run.unassigned_docs = json::parse(read_file(dir / "topics.json")).at("unassigned_docs").get<std::size_t>();
  } else {
    auto topics = assign_topics(a.ingest.documents, a.partition, lda);
    std::ostringstream model;
    write_model(topics.model, model);
    write_file(dir / "model.txt", model.str());
    write_doc_topics_csv(topics.labels, dir / "doc_topics.csv");
    std::ostringstream ct;
    write_community_topics_csv(topics.communities.communities, ct);
    write_file(dir / "community_topics.csv", ct.str());
    run.unassigned_docs = topics.communities.unassigned_docs.size();
    const json stats = {{"documents", topics.labels.size()}, {"unassigned_docs", run.unassigned_docs}};
    write_file(dir / "topics.json", stats.dump(2) + "\n");
    write_stamp(dir, "topics", topics_key);
    labels = std::move(topics.labels);
    a.community_topics = std::move(topics.communities.communities);
  }
  run.h1 = h1_scores(labels, a.ingest.documents, a.partition, nb_seed(cfg, nb, "h1"));
  return a;
}

std::vector<MessageGroup> run_grouping(const PipelineConfig& cfg, const std::vector<PhaseA>& phases,
                                       const std::vector<NeighborhoodRun>& runs) {
  json key = {{"stage", "groups"}, {"messages", json::array()}};
  std::vector<std::vector<GroupInput>> sets;
  std::vector<GroupInput> all;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].skip_reason.empty()) continue;
    key["messages"].push_back({{"neighborhood", runs[i].id},
                               {"digest", digest_of(cfg.dir_for(runs[i].id) / "messages.tsv")}});
    sets.push_back(phases[i].ingest.messages);
    all.insert(all.end(), phases[i].ingest.messages.begin(), phases[i].ingest.messages.end());
  }
  if (stamp_matches(cfg, cfg.output, "groups", key, {"groups.csv"})) {
    return read_groups_csv(cfg.output / "groups.csv", all);
  }
  auto groups = group_messages(sets);
  write_groups_csv(groups, cfg.output / "groups.csv");
  write_stamp(cfg.output, "groups", key);
  return groups;
}

void run_poi_stage(const PipelineConfig& cfg, const PhaseA& a, std::span<const MessageGroup> groups,
                   const std::map<std::string, RawLabel>& labels, NeighborhoodRun& run) {
  const auto dir = cfg.dir_for(run.id);
  const json key = {{"stage", "poi"},
                    {"groups", digest_of(cfg.output / "groups.csv")},
                    {"messages", digest_of(dir / "messages.tsv")},
                    {"partition", digest_of(dir / "partition.csv")},
                    {"community_topics", digest_of(dir / "community_topics.csv")}};
  if (stamp_matches(cfg, dir, "poi", key, {"observations.csv", "prob_table.csv", "poi.json"})) {
    run.table = read_table(dir, run.id);
  } else {
    run.table = neighborhood_table(groups, a.ingest, a.partition, a.community_topics, run.id);
    std::ostringstream obs;
    write_observations_csv(run.table, obs);
    write_file(dir / "observations.csv", obs.str());
    std::ostringstream table;
    write_prob_table_csv(run.table, table);
    write_file(dir / "prob_table.csv", table.str());
    const json stats = {{"rows", run.table.rows.size()},
                        {"topics", run.table.topics.topic_axis.size()},
                        {"skipped_messages", run.table.skipped_messages}};
    write_file(dir / "poi.json", stats.dump(2) + "\n");
    write_stamp(dir, "poi", key);
  }
  run.classes = row_classes(run.table, labels, cfg.combination);
  run.benign = class_count(run.classes, 0);
  run.spam = class_count(run.classes, 1);
  run.prepared = true;
}

std::vector<NeighborhoodRun> prepare_impl(const PipelineConfig& cfg, std::vector<PhaseA>* keep) {
  cfg.validate();
  check_inputs(cfg);
  const auto stopwords = load_configured_stopwords(cfg);
  const std::string stopwords_digest = cfg.stopwords ? digest_of(*cfg.stopwords) : "builtin";
  const auto labels = read_labels_csv(cfg.labels);
  fs::create_directories(cfg.output);

  const auto n = cfg.neighborhoods.size();
  std::vector<NeighborhoodRun> runs(n);
  std::vector<PhaseA> phases(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    runs[i].id = cfg.neighborhoods[i];
    try {
      phases[i] = run_front_stages(cfg, runs[i].id, stopwords, stopwords_digest, runs[i]);
    } catch (const DataError& e) {
      runs[i].skip_reason = e.what();
    }
  });

  const auto groups = run_grouping(cfg, phases, runs);

  parallel_for(n, cfg.workers, [&](std::size_t i) {
    if (!runs[i].skip_reason.empty()) return;
    try {
      run_poi_stage(cfg, phases[i], groups, labels, runs[i]);
    } catch (const DataError& e) {
      runs[i].skip_reason = e.what();
    }
  });
  if (keep) *keep = std::move(phases);
  return runs;
}

void label_accounts_stage(const PipelineConfig& cfg, const PhaseA& a, NeighborhoodRun& run) {
  const auto data = table_dataset(run.table, run.classes);
  const auto seed = nb_seed(cfg, run.id, "accounts");
  const auto model = train(balance_with_smote(data, cfg.smote_neighbors, derive_seed(seed, "smote")),
                           cfg.classifier, derive_seed(seed, "train"));
  std::unordered_set<std::string> spam_groups;
  for (std::size_t r = 0; r < run.table.rows.size(); ++r) {
    if (model.predict(run.table.features(r)) == 1) spam_groups.insert(run.table.rows[r].group_id);
  }
  // Spam messages: members of predicted-spam groups, credited to authors.
  std::unordered_map<std::string, std::string> group_of;
  {
    auto in = open_input(cfg.output / "groups.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      auto f = split(line, ',');
      if (f.size() == 2 && spam_groups.count(std::string(f[0]))) group_of[std::string(f[1])] = f[0];
    }
  }
  std::map<std::string, AccountCounts> counts;
  for (const auto& u : a.ingest.users) counts[u];
  for (const auto& m : a.ingest.messages) {
    auto& c = counts[m.author];
    ++c.total;
    if (group_of.count(m.message_id)) ++c.spam;
  }
  const auto labels = label_accounts(counts, cfg.tau);
  std::ostringstream out;
  out << "user_id,spam_messages,total_messages,ratio,label\n";
  for (const auto& [user, is_spam] : labels) {
    const auto& c = counts.at(user);
    out << user << ',' << c.spam << ',' << c.total << ','
        << format_double(static_cast<double>(c.spam) / static_cast<double>(c.total)) << ','
        << (is_spam ? "spam" : "benign") << '\n';
    ++run.accounts;
    if (is_spam) ++run.spam_accounts;
  }
  write_file(cfg.dir_for(run.id) / "accounts.csv", out.str());
}

json neighborhood_json(const NeighborhoodRun& run) {
  json j = {{"id", run.id}, {"status", run.evaluated ? "evaluated" : "skipped"}};
  if (!run.skip_reason.empty()) j["reason"] = run.skip_reason;
  j["ingest"] = {{"records", run.ingest.records},
                 {"duplicates", run.ingest.duplicates},
                 {"truncated", run.ingest.truncated},
                 {"errors", run.ingest.errors.size()}};
  j["graph"] = {{"vertices", run.graph.vertices},
                {"edges", run.graph.edges},
                {"core_vertices", run.graph.core_vertices},
                {"communities", run.graph.partition.size()},
                {"dropped_self_loops", run.graph.dropped_self_loops}};
  j["documents"] = run.documents;
  j["unassigned_documents"] = run.unassigned_docs;
  if (run.prepared) {
    j["h1"] = {{"actual", scores_json(run.h1.actual)}, {"null", scores_json(run.h1.null_model)}};
    j["table"] = {{"rows", run.table.rows.size()},
                  {"topics", run.table.topics.topic_axis.size()},
                  {"benign", run.benign},
                  {"spam", run.spam},
                  {"skipped_messages", run.table.skipped_messages}};
  }
  if (run.evaluated) {
    j["metrics"] = metrics_json(run.cv.mean);
    j["std_error"] = metrics_json(run.cv.std_error);
    j["accounts"] = {{"labeled", run.accounts}, {"spam", run.spam_accounts}};
  }
  return j;
}

std::vector<NeighborhoodRun> trainable_tables(const PipelineConfig& cfg) {
  auto runs = prepare_tables(cfg);
  std::vector<NeighborhoodRun> out;
  for (auto& r : runs) {
    if (trainable(r, cfg)) out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError("no neighborhood has enough labeled rows to simulate");
  return out;
}

// Mean over neighborhoods for each (fraction, rep).
std::vector<SweepPoint> pool_points(const std::vector<std::vector<SweepPoint>>& per_nb) {
  std::map<std::pair<double, std::size_t>, std::pair<Metrics, std::size_t>> acc;
  for (const auto& pts : per_nb) {
    for (const auto& p : pts) {
      auto& [m, n] = acc[{p.fraction, p.rep}];
      m.precision += p.metrics.precision;
      m.recall += p.metrics.recall;
      m.f1 += p.metrics.f1;
      m.accuracy += p.metrics.accuracy;
      ++n;
    }
  }
  std::vector<SweepPoint> out;
  for (const auto& [k, v] : acc) {
    const double d = static_cast<double>(v.second);
    out.push_back({k.first, k.second,
                   {v.first.accuracy / d, v.first.precision / d, v.first.recall / d, v.first.f1 / d}});
  }
  return out;
}

void write_summary_csv(std::span<const SweepPoint> points, const fs::path& path) {
  std::ostringstream out;
  out << "fraction,precision,recall,f1,accuracy\n";
  for (const auto& p : average_by_fraction(points)) {
    out << format_double(p.fraction) << ',' << format_double(p.metrics.precision) << ','
        << format_double(p.metrics.recall) << ',' << format_double(p.metrics.f1) << ','
        << format_double(p.metrics.accuracy) << '\n';
  }
  write_file(path, out.str());
}

SimulationOptions simulation_options(const PipelineConfig& cfg) {
  SimulationOptions o;
  o.repetitions = cfg.repetitions;
  o.cv = cfg.cv_options();
  return o;
}

}  // namespace

std::vector<NeighborhoodRun> prepare_tables(const PipelineConfig& cfg) { return prepare_impl(cfg, nullptr); }

RunResult run_pipeline(const PipelineConfig& cfg) {
  std::vector<PhaseA> phases;
  RunResult result;
  result.neighborhoods = prepare_impl(cfg, &phases);
  auto& runs = result.neighborhoods;

  parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
    auto& run = runs[i];
    if (!run.prepared) return;
    if (!trainable(run, cfg)) {
      run.skip_reason = too_few_reason(run, cfg);
      return;
    }
    try {
      run.cv = cross_validate(table_dataset(run.table, run.classes), cfg.cv_options(),
                              nb_seed(cfg, run.id, "cv"), run.id);
      label_accounts_stage(cfg, phases[i], run);
      run.evaluated = true;
    } catch (const DataError& e) {
      run.skip_reason = e.what();
    }
  });

  json nbs = json::array();
  json skipped = json::array();
  Metrics total;
  std::size_t evaluated = 0;
  for (const auto& run : runs) {
    nbs.push_back(neighborhood_json(run));
    if (!run.evaluated) {
      skipped.push_back({{"id", run.id}, {"reason", run.skip_reason}});
      continue;
    }
    ++evaluated;
    total.precision += run.cv.mean.precision;
    total.recall += run.cv.mean.recall;
    total.f1 += run.cv.mean.f1;
    total.accuracy += run.cv.mean.accuracy;
  }
  json average = nullptr;
  if (evaluated) {
    const double d = static_cast<double>(evaluated);
    average = metrics_json({total.accuracy / d, total.precision / d, total.recall / d, total.f1 / d});
  }
  result.report = {{"combination", static_cast<int>(cfg.combination)},
                   {"classifier", std::string(to_string(cfg.classifier))},
                   {"seed", cfg.seed},
                   {"folds", cfg.folds},
                   {"tau", cfg.tau},
                   {"evaluated", evaluated},
                   {"average", average},
                   {"skipped", skipped},
                   {"neighborhoods", nbs}};
  write_file(cfg.output / "report.json", result.report.dump(2) + "\n");
  write_manifest(cfg, cfg.output / "manifest.json", "run");
  return result;
}

H1Result validate_h1(const PipelineConfig& cfg) {
  const auto runs = prepare_tables(cfg);
  H1Result result;
  std::vector<Scores> actual, null_scores;
  std::ostringstream csv;
  csv << "neighborhood_id,h_actual,c_actual,v_actual,h_null,c_null,v_null\n";
  for (const auto& run : runs) {
    if (!run.prepared) continue;
    result.rows.emplace_back(run.id, run.h1);
    actual.push_back(run.h1.actual);
    null_scores.push_back(run.h1.null_model);
    const auto& a = run.h1.actual;
    const auto& n = run.h1.null_model;
    csv << run.id << ',' << format_double(a.homogeneity) << ',' << format_double(a.completeness) << ','
        << format_double(a.v_measure) << ',' << format_double(n.homogeneity) << ','
        << format_double(n.completeness) << ',' << format_double(n.v_measure) << '\n';
  }
  if (actual.size() < 2) throw DataError("H1 validation needs at least two neighborhoods");
  result.report = compare_to_null(actual, null_scores);
  const auto& r = result.report;
  auto z_line = [](const char* name, const ZTest& t) {
    return std::string("# ") + name + " z=" + format_double(t.z) + " p=" + format_double(t.p) +
           (t.degenerate ? " degenerate" : "") + "\n";
  };
  csv << "# mean_actual h=" << format_double(r.actual_mean.homogeneity)
      << " c=" << format_double(r.actual_mean.completeness) << " v=" << format_double(r.actual_mean.v_measure) << '\n'
      << "# mean_null h=" << format_double(r.null_mean.homogeneity)
      << " c=" << format_double(r.null_mean.completeness) << " v=" << format_double(r.null_mean.v_measure) << '\n'
      << z_line("homogeneity", r.homogeneity) << z_line("completeness", r.completeness);
  write_file(cfg.output / "h1_validation.csv", csv.str());
  write_manifest(cfg, cfg.output / "manifest.json", "validate-h1");
  return result;
}

AttackKind parse_attack_kind(std::string_view text) {
  if (text == "poisoning") return AttackKind::poisoning;
  if (text == "evasion") return AttackKind::evasion;
  throw ConfigError("attack kind must be 'poisoning' or 'evasion'");
}

std::vector<SweepPoint> simulate_early(const PipelineConfig& cfg, std::span<const double> fractions) {
  const auto runs = trainable_tables(cfg);
  std::vector<std::vector<SweepPoint>> per_nb(runs.size());
  const auto options = simulation_options(cfg);
  parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
    per_nb[i] = run_early_detection(runs[i].table, runs[i].classes, fractions, options,
                                    nb_seed(cfg, runs[i].id, "early"));
  });
  auto points = pool_points(per_nb);
  write_curve_csv(points, cfg.output / "early_detection.csv");
  write_summary_csv(points, cfg.output / "early_detection_summary.csv");
  write_manifest(cfg, cfg.output / "manifest.json", "simulate-early");
  return points;
}

std::vector<SweepPoint> simulate_attack(const PipelineConfig& cfg, AttackKind kind,
                                        std::span<const double> fractions) {
  const auto runs = trainable_tables(cfg);
  const auto options = simulation_options(cfg);
  const std::string name = kind == AttackKind::poisoning ? "poisoning" : "evasion";
  std::vector<std::vector<SweepPoint>> per_nb(runs.size());
  parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
    const auto seed = nb_seed(cfg, runs[i].id, name);
    for (double f : fractions) {
      auto pts = kind == AttackKind::poisoning ? run_poisoning(runs[i].table, runs[i].classes, f, options, seed)
                                               : run_evasion(runs[i].table, runs[i].classes, f, options, seed);
      per_nb[i].insert(per_nb[i].end(), pts.begin(), pts.end());
    }
  });
  auto points = pool_points(per_nb);
  write_curve_csv(points, cfg.output / (name + ".csv"));
  write_summary_csv(points, cfg.output / (name + "_summary.csv"));
  write_manifest(cfg, cfg.output / "manifest.json", "simulate-attack");
  return points;
}

void write_curve_csv(std::span<const SweepPoint> points, const fs::path& path) {
  std::ostringstream out;
  out << "fraction,rep,precision,recall,f1,accuracy\n";
  for (const auto& p : points) {
    out << format_double(p.fraction) << ',' << p.rep << ',' << format_double(p.metrics.precision) << ','
        << format_double(p.metrics.recall) << ',' << format_double(p.metrics.f1) << ','
        << format_double(p.metrics.accuracy) << '\n';
  }
  write_file(path, out.str());
}

void write_manifest(const PipelineConfig& cfg, const fs::path& path, std::string_view command) {
  json inputs = json::array();
  auto add_input = [&](const fs::path& p) {
    inputs.push_back({{"path", p.string()}, {"sha256", digest_of(p)}});
  };
  for (const auto& nb : cfg.neighborhoods) {
    add_input(cfg.edges_for(nb));
    add_input(cfg.timelines_for(nb));
  }
  add_input(cfg.labels);
  if (cfg.stopwords) add_input(*cfg.stopwords);

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(cfg.output)) {
    if (!entry.is_regular_file() || entry.path() == path) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  json outputs = json::array();
  for (const auto& f : files) {
    outputs.push_back({{"path", fs::relative(f, cfg.output).generic_string()}, {"sha256", digest_of(f)}});
  }
  const json manifest = {{"command", std::string(command)},
                         {"seed", cfg.seed},
                         {"config", cfg.to_json()},
                         {"inputs", inputs},
                         {"outputs", outputs}};
  write_file(path, manifest.dump(2) + "\n");
}

}  // namespace spamprop
