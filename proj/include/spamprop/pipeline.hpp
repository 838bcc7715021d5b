#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spamprop/classify.hpp"
#include "spamprop/evalmetrics.hpp"
#include "spamprop/graph.hpp"
#include "spamprop/grouping.hpp"
#include "spamprop/ingest.hpp"
#include "spamprop/poi.hpp"
#include "spamprop/simulate.hpp"
#include "spamprop/topics.hpp"

namespace spamprop {

enum class GraphKind { directed, undirected };

struct PipelineConfig {
  // Input paths may contain "{nb}", replaced by the neighborhood id.
  std::filesystem::path edges;
  std::filesystem::path timelines;
  std::filesystem::path labels;
  std::filesystem::path output;
  std::optional<std::filesystem::path> stopwords;  // built-in list otherwise
  std::vector<std::string> neighborhoods;

  std::size_t l = 20;
  std::size_t per_user_cap = 300;
  std::size_t k_core = 2;
  GraphKind graph = GraphKind::directed;
  CommunityMethod method = CommunityMethod::map_equation;
  int restarts = 10;
  std::size_t topics = 20;
  std::size_t lda_iterations = 200;
  std::optional<double> alpha;
  double beta = 0.01;
  Combination combination = Combination::comb3;
  ClassifierKind classifier = ClassifierKind::linear_svm;
  std::size_t folds = 10;
  std::size_t smote_neighbors = 5;
  std::size_t min_class_rows = 10;
  double tau = 0.4;
  std::size_t repetitions = 3;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool resume = false;

  /// Unknown keys and ill-typed values raise ConfigError. Relative paths are
  /// resolved against `base`.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  nlohmann::json to_json() const;
  void validate() const;

  std::filesystem::path edges_for(const std::string& nb) const;
  std::filesystem::path timelines_for(const std::string& nb) const;
  std::filesystem::path dir_for(const std::string& nb) const { return output / nb; }
  CvOptions cv_options() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

// ---- Per-neighborhood intermediates (file names inside dir_for(nb)) ----
//   documents.tsv     doc_id \t user \t message ids \t tokens
//   messages.tsv      message_id \t author \t tokens (grouping mode)
//   users.txt         one user id per line (timeline owners)
//   partition.csv     user_id,community_id
//   model.txt         LDA dump
//   doc_topics.csv    doc_id,topic
//   community_topics.csv, observations.csv, prob_table.csv
//   accounts.csv      user_id,spam_messages,total_messages,ratio,label

struct IngestResult {
  std::vector<Document> documents;
  std::vector<GroupInput> messages;
  std::vector<std::string> users;
  ParseReport report;
};
IngestResult ingest_timelines(const std::filesystem::path& timelines, std::size_t per_user_cap,
                              std::size_t l, const StopWords& stopwords);
void write_ingest(const IngestResult& result, const std::filesystem::path& dir);
IngestResult read_ingest(const std::filesystem::path& dir);

struct GraphResult {
  Partition partition;
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t core_vertices = 0;
  std::size_t dropped_self_loops = 0;
};
std::vector<std::pair<std::string, std::string>> read_edge_list(const std::filesystem::path& path);
GraphResult partition_network(std::span<const std::pair<std::string, std::string>> edges,
                              GraphKind kind, std::size_t k, CommunityMethod method, int restarts,
                              std::uint64_t seed);
void write_partition_csv(const Partition& partition, const std::filesystem::path& path);
Partition read_partition_csv(const std::filesystem::path& path);

struct TopicResult {
  TopicModel model;
  std::vector<DocTopicLabel> labels;
  CommunityTopicsResult communities;
};
TopicResult assign_topics(std::span<const Document> documents, const Partition& partition,
                          const LdaParams& params);
void write_doc_topics_csv(std::span<const DocTopicLabel> labels, const std::filesystem::path& path);
std::vector<DocTopicLabel> read_doc_topics_csv(const std::filesystem::path& path);

void write_groups_csv(std::span<const MessageGroup> groups, const std::filesystem::path& path);
/// Authors come from `messages`. Unknown message ids raise DataError, or
/// are dropped when `drop_unknown` is set (reading a global file for one
/// neighborhood).
std::vector<MessageGroup> read_groups_csv(const std::filesystem::path& path,
                                          std::span<const GroupInput> messages,
                                          bool drop_unknown = false);
/// Groups the union of several message sets; repeated ids keep the first.
std::vector<MessageGroup> group_messages(std::span<const std::vector<GroupInput>> sets);

std::map<std::string, RawLabel> read_labels_csv(const std::filesystem::path& path);

ProbTable neighborhood_table(std::span<const MessageGroup> groups, const IngestResult& ingest,
                             const Partition& partition,
                             std::span<const CommunityTopics> community_topics,
                             const std::string& neighborhood_id);
ProbTable read_table(const std::filesystem::path& dir, const std::string& neighborhood_id);

/// H1 scores of one neighborhood: actual communities and a size-preserving
/// random regrouping of the same documents.
struct H1Scores {
  Scores actual;
  Scores null_model;
  std::size_t documents = 0;
};
H1Scores h1_scores(std::span<const DocTopicLabel> labels, std::span<const Document> documents,
                   const Partition& partition, std::uint64_t seed);

// ---- Whole runs ----

struct NeighborhoodRun {
  std::string id;
  bool prepared = false;  // table built
  bool evaluated = false;
  std::string skip_reason;
  ParseReport ingest;
  GraphResult graph;
  std::size_t documents = 0;
  std::size_t unassigned_docs = 0;
  ProbTable table;
  std::vector<int> classes;
  std::size_t benign = 0;
  std::size_t spam = 0;
  EvalReport cv;
  H1Scores h1;
  std::size_t accounts = 0;
  std::size_t spam_accounts = 0;
};

struct RunResult {
  std::vector<NeighborhoodRun> neighborhoods;
  nlohmann::json report;
};

/// Ingest, graph and topic stages per neighborhood, global grouping, then
/// PoI tables and labels. Stage outputs are persisted; with `resume`, a stage
/// whose stamp matches its parameters and input digests is loaded instead of
/// recomputed. Neighborhood failures are recorded, not thrown.
std::vector<NeighborhoodRun> prepare_tables(const PipelineConfig& cfg);

/// prepare_tables, cross-validation, account labels, report.json and
/// manifest.json.
RunResult run_pipeline(const PipelineConfig& cfg);

struct H1Result {
  std::vector<std::pair<std::string, H1Scores>> rows;
  ValidationReport report;
};
/// Writes <output>/h1_validation.csv.
H1Result validate_h1(const PipelineConfig& cfg);

enum class AttackKind { poisoning, evasion };
AttackKind parse_attack_kind(std::string_view text);

/// Points averaged over evaluated neighborhoods per (fraction, rep); also
/// writes the curve and its per-fraction summary under <output>.
std::vector<SweepPoint> simulate_early(const PipelineConfig& cfg, std::span<const double> fractions);
std::vector<SweepPoint> simulate_attack(const PipelineConfig& cfg, AttackKind kind,
                                        std::span<const double> fractions);

void write_curve_csv(std::span<const SweepPoint> points, const std::filesystem::path& path);

/// Config, seed and SHA-256 of every input and output file.
void write_manifest(const PipelineConfig& cfg, const std::filesystem::path& path,
                    std::string_view command);

}  // namespace spamprop
