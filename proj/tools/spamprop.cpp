// spamprop command-line interface.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spamprop/error.hpp"
#include "spamprop/pipeline.hpp"
#include "spamprop/synth.hpp"
#include "spamprop/text_io.hpp"

namespace fs = std::filesystem;
using namespace spamprop;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kInternal = 3 };

// Flags that override a config file; unset flags leave the file's values.
struct Overrides {
  std::optional<std::string> output;
  std::optional<std::vector<std::string>> neighborhoods;
  std::optional<std::size_t> l, k_core, topics, lda_iterations, folds, repetitions, workers;
  std::optional<double> alpha, beta, tau;
  std::optional<int> combination, restarts;
  std::optional<std::string> classifier, graph, method, stopwords;
  std::optional<std::uint64_t> seed;
  bool resume = false;

  void attach(CLI::App* app) {
    app->add_option("--output", output, "Output directory");
    app->add_option("--neighborhoods", neighborhoods, "Neighborhood ids");
    app->add_option("--l", l, "Messages per document");
    app->add_option("--k-core", k_core, "k for the k-core filter");
    app->add_option("--topics", topics, "Number of LDA topics");
    app->add_option("--lda-iterations", lda_iterations, "Gibbs sweeps");
    app->add_option("--alpha", alpha, "LDA alpha (default 50/K)");
    app->add_option("--beta", beta, "LDA beta");
    app->add_option("--combination", combination, "Label combination 1, 2 or 3");
    app->add_option("--classifier", classifier, "linear-svm or gaussian-nb");
    app->add_option("--folds", folds, "Cross-validation folds");
    app->add_option("--tau", tau, "Account spam threshold");
    app->add_option("--repetitions", repetitions, "Simulation repetitions");
    app->add_option("--graph", graph, "directed or undirected");
    app->add_option("--method", method, "map-equation or modularity");
    app->add_option("--restarts", restarts, "Map-equation restarts");
    app->add_option("--stopwords", stopwords, "Stop-word file");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--workers", workers, "Neighborhoods processed in parallel");
    app->add_flag("--resume", resume, "Reuse persisted stage outputs whose inputs are unchanged");
  }

  void apply(PipelineConfig& cfg) const {
    if (output) cfg.output = *output;
    if (neighborhoods) cfg.neighborhoods = *neighborhoods;
    if (l) cfg.l = *l;
    if (k_core) cfg.k_core = *k_core;
    if (topics) cfg.topics = *topics;
    if (lda_iterations) cfg.lda_iterations = *lda_iterations;
    if (alpha) cfg.alpha = *alpha;
    if (beta) cfg.beta = *beta;
    if (combination) cfg.combination = combination_from_int(*combination);
    if (classifier) cfg.classifier = parse_classifier_kind(*classifier);
    if (folds) cfg.folds = *folds;
    if (tau) cfg.tau = *tau;
    if (repetitions) cfg.repetitions = *repetitions;
    if (restarts) cfg.restarts = *restarts;
    if (stopwords) cfg.stopwords = fs::path(*stopwords);
    if (seed) cfg.seed = *seed;
    if (workers) cfg.workers = *workers;
    if (resume) cfg.resume = true;
    if (graph || method) {
      auto j = cfg.to_json();
      if (graph) j["graph"] = *graph;
      if (method) j["community_method"] = *method;
      cfg = PipelineConfig::from_json(j);
    }
  }
};

PipelineConfig configured(const std::string& path, const Overrides& o) {
  auto cfg = load_config(path);
  o.apply(cfg);
  cfg.validate();
  return cfg;
}

GraphKind parse_graph_kind(const std::string& s) {
  if (s == "directed") return GraphKind::directed;
  if (s == "undirected") return GraphKind::undirected;
  throw ConfigError("--graph must be 'directed' or 'undirected'");
}

CommunityMethod parse_method(const std::string& s) {
  if (s == "map-equation") return CommunityMethod::map_equation;
  if (s == "modularity") return CommunityMethod::modularity;
  throw ConfigError("--method must be 'map-equation' or 'modularity'");
}

void print_metrics(const char* name, const Metrics& m) {
  std::cout << name << " precision=" << format_double(m.precision) << " recall=" << format_double(m.recall)
            << " f1=" << format_double(m.f1) << " accuracy=" << format_double(m.accuracy) << '\n';
}

void print_summary(std::span<const SweepPoint> points) {
  std::cout << "fraction,precision,recall,f1,accuracy\n";
  for (const auto& p : average_by_fraction(points)) {
    std::cout << format_double(p.fraction) << ',' << format_double(p.metrics.precision) << ','
              << format_double(p.metrics.recall) << ',' << format_double(p.metrics.f1) << ','
              << format_double(p.metrics.accuracy) << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spam campaign detection from parties of interest"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and pipeline config");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Dataset directory")->required();
  synth->add_option("--seed", sc.seed);
  synth->add_option("--neighborhoods", sc.neighborhoods);
  synth->add_option("--communities", sc.n_communities);
  synth->add_option("--community-size", sc.community_size);
  synth->add_option("--p-in", sc.p_in);
  synth->add_option("--p-out", sc.p_out);
  synth->add_option("--topics", sc.n_topics);
  synth->add_option("--vocab", sc.vocab_per_topic);
  synth->add_option("--docs-per-user", sc.docs_per_user);
  synth->add_option("--messages-per-doc", sc.messages_per_doc);
  synth->add_option("--max-topics-per-community", sc.max_topics_per_community);
  synth->add_option("--benign-groups", sc.n_benign_groups);
  synth->add_option("--spam-groups", sc.n_spam_groups);
  synth->add_option("--group-size-min", sc.group_size_min);
  synth->add_option("--group-size-max", sc.group_size_max);

  // whole-pipeline commands
  std::string config;
  Overrides over;
  auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
  auto* h1 = app.add_subcommand("validate-h1", "Community vs. null-model topic homogeneity");
  auto* early = app.add_subcommand("simulate-early", "Early-detection sweep");
  auto* attack = app.add_subcommand("simulate-attack", "Poisoning or evasion sweep");
  for (auto* sub : {run, h1, early, attack}) {
    sub->add_option("--config", config, "Pipeline config (JSON)")->required();
    over.attach(sub);
  }
  std::vector<double> fractions;
  early->add_option("--fractions", fractions, "Observed community fractions (default 0,0.1,..,1)");
  std::string attack_kind;
  attack->add_option("--kind", attack_kind, "poisoning or evasion")->required();
  attack->add_option("--fraction", fractions, "Compromised fractions (default 0,0.1,..,1)");

  // single stages
  auto* ingest = app.add_subcommand("ingest", "Timelines -> documents.tsv, messages.tsv");
  std::string in_timelines, out_dir, stopwords_path;
  std::size_t l = 20, cap = 300;
  ingest->add_option("--timelines", in_timelines)->required();
  ingest->add_option("--out", out_dir, "Neighborhood directory")->required();
  ingest->add_option("--l", l);
  ingest->add_option("--cap", cap, "Messages kept per user");
  ingest->add_option("--stopwords", stopwords_path);

  auto* graph = app.add_subcommand("graph", "Edge list -> partition.csv");
  std::string in_edges, out_file, graph_kind = "directed", method = "map-equation";
  std::size_t k = 2;
  int restarts = 10;
  std::uint64_t seed = 1;
  graph->add_option("--edges", in_edges)->required();
  graph->add_option("--out", out_file, "Partition CSV")->required();
  graph->add_option("--graph", graph_kind);
  graph->add_option("--k-core", k);
  graph->add_option("--method", method);
  graph->add_option("--restarts", restarts);
  graph->add_option("--seed", seed);

  auto* topics = app.add_subcommand("topics", "documents.tsv + partition.csv -> topic files");
  std::string dir;
  LdaParams lda;
  topics->add_option("--dir", dir, "Neighborhood directory")->required();
  topics->add_option("--topics", lda.topics);
  topics->add_option("--iterations", lda.iterations);
  topics->add_option("--alpha", lda.alpha);
  topics->add_option("--beta", lda.beta);
  topics->add_option("--seed", lda.seed);

  auto* groups = app.add_subcommand("groups", "messages.tsv of one or more neighborhoods -> groups.csv");
  std::vector<std::string> dirs;
  groups->add_option("--dir", dirs, "Neighborhood directories")->required();
  groups->add_option("--out", out_file, "Groups CSV")->required();

  auto* poi = app.add_subcommand("poi", "groups.csv + topic files -> prob_table.csv");
  std::string groups_file, nb_id;
  poi->add_option("--dir", dir, "Neighborhood directory")->required();
  poi->add_option("--groups", groups_file)->required();
  poi->add_option("--neighborhood", nb_id, "Neighborhood id (default: directory name)");

  auto* trn = app.add_subcommand("train", "Cross-validate a neighborhood's table");
  std::string labels_file;
  int combination = 3;
  std::string classifier = "linear-svm";
  std::size_t folds = 10;
  trn->add_option("--dir", dir, "Neighborhood directory")->required();
  trn->add_option("--labels", labels_file)->required();
  trn->add_option("--combination", combination);
  trn->add_option("--classifier", classifier);
  trn->add_option("--folds", folds);
  trn->add_option("--seed", seed);
  trn->add_option("--out", out_file, "Report JSON (default <dir>/cv.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (synth->parsed()) {
      write_synth_dataset(sc, synth_out);
      std::cout << "wrote " << (fs::path(synth_out) / "config.json").string() << '\n';
    } else if (run->parsed()) {
      const auto result = run_pipeline(configured(config, over));
      for (const auto& nb : result.neighborhoods) {
        if (nb.evaluated) {
          print_metrics(nb.id.c_str(), nb.cv.mean);
        } else {
          std::cout << nb.id << " skipped: " << nb.skip_reason << '\n';
        }
      }
      if (!result.report["average"].is_null()) {
        const auto& a = result.report["average"];
        print_metrics("average", {a["accuracy"].get<double>(), a["precision"].get<double>(),
                                  a["recall"].get<double>(), a["f1"].get<double>()});
      }
    } else if (h1->parsed()) {
      const auto r = validate_h1(configured(config, over)).report;
      std::cout << "h actual=" << format_double(r.actual_mean.homogeneity)
                << " null=" << format_double(r.null_mean.homogeneity) << " z=" << format_double(r.homogeneity.z)
                << " p=" << format_double(r.homogeneity.p) << '\n'
                << "c actual=" << format_double(r.actual_mean.completeness)
                << " null=" << format_double(r.null_mean.completeness)
                << " z=" << format_double(r.completeness.z) << " p=" << format_double(r.completeness.p) << '\n';
    } else if (early->parsed()) {
      if (fractions.empty()) fractions = default_fraction_grid();
      print_summary(simulate_early(configured(config, over), fractions));
    } else if (attack->parsed()) {
      const auto kind = parse_attack_kind(attack_kind);
      if (fractions.empty()) fractions = default_fraction_grid();
      print_summary(simulate_attack(configured(config, over), kind, fractions));
    } else if (ingest->parsed()) {
      if (l == 0 || cap == 0) throw ConfigError("--l and --cap must be at least 1");
      const auto sw = stopwords_path.empty() ? default_stopwords() : load_stopwords(stopwords_path);
      const auto r = ingest_timelines(in_timelines, cap, l, sw);
      write_ingest(r, out_dir);
      std::cout << "records=" << r.report.records << " errors=" << r.report.errors.size()
                << " duplicates=" << r.report.duplicates << " truncated=" << r.report.truncated
                << " documents=" << r.documents.size() << '\n';
      for (const auto& e : r.report.errors) std::cerr << "line " << e.line << ": " << e.reason << '\n';
    } else if (graph->parsed()) {
      if (k == 0) throw ConfigError("--k-core must be at least 1");
      const auto edges = read_edge_list(in_edges);
      const auto r = partition_network(edges, parse_graph_kind(graph_kind), k, parse_method(method), restarts, seed);
      write_partition_csv(r.partition, out_file);
      std::cout << "vertices=" << r.vertices << " core=" << r.core_vertices
                << " communities=" << r.partition.size() << " self_loops=" << r.dropped_self_loops << '\n';
    } else if (topics->parsed()) {
      const fs::path d = dir;
      const auto docs = read_ingest(d).documents;
      const auto t = assign_topics(docs, read_partition_csv(d / "partition.csv"), lda);
      std::ostringstream model;
      write_model(t.model, model);
      write_file(d / "model.txt", model.str());
      write_doc_topics_csv(t.labels, d / "doc_topics.csv");
      std::ostringstream ct;
      write_community_topics_csv(t.communities.communities, ct);
      write_file(d / "community_topics.csv", ct.str());
      std::cout << "documents=" << t.labels.size() << " unassigned=" << t.communities.unassigned_docs.size() << '\n';
    } else if (groups->parsed()) {
      std::vector<std::vector<GroupInput>> sets;
      for (const auto& d : dirs) sets.push_back(read_ingest(d).messages);
      const auto g = group_messages(sets);
      write_groups_csv(g, out_file);
      std::cout << "groups=" << g.size() << '\n';
    } else if (poi->parsed()) {
      const fs::path d = dir;
      if (nb_id.empty()) nb_id = fs::absolute(d).lexically_normal().filename().string();
      const auto ing = read_ingest(d);
      const auto g = read_groups_csv(groups_file, ing.messages, true);
      auto ct_in = std::ifstream(d / "community_topics.csv");
      if (!ct_in) throw DataError("cannot open " + (d / "community_topics.csv").string());
      const auto ct = read_community_topics_csv(ct_in);
      const auto table = neighborhood_table(g, ing, read_partition_csv(d / "partition.csv"), ct, nb_id);
      std::ostringstream obs, tab;
      write_observations_csv(table, obs);
      write_prob_table_csv(table, tab);
      write_file(d / "observations.csv", obs.str());
      write_file(d / "prob_table.csv", tab.str());
      write_file(d / "poi.json", nlohmann::json{{"rows", table.rows.size()},
                                                {"topics", table.topics.topic_axis.size()},
                                                {"skipped_messages", table.skipped_messages}}
                                         .dump(2) + "\n");
      std::cout << "rows=" << table.rows.size() << " skipped_messages=" << table.skipped_messages << '\n';
    } else if (trn->parsed()) {
      const fs::path d = dir;
      const auto table = read_table(d, fs::absolute(d).lexically_normal().filename().string());
      const auto classes = row_classes(table, read_labels_csv(labels_file), combination_from_int(combination));
      CvOptions cv;
      cv.folds = folds;
      cv.kind = parse_classifier_kind(classifier);
      const auto data = table_dataset(table, classes);
      const auto report = cross_validate(data, cv, seed, table.neighborhood_id);
      const auto model = train(balance_with_smote(data, cv.smote_neighbors, seed), cv.kind, seed);
      nlohmann::json j = {
          {"neighborhood", table.neighborhood_id},
          {"combination", combination},
          {"classifier", std::string(to_string(cv.kind))},
          {"seed", seed},
          {"rows", data.size()},
          {"spam", data.count(1)},
          {"benign", data.count(0)},
          {"metrics", {{"precision", report.mean.precision}, {"recall", report.mean.recall},
                       {"f1", report.mean.f1}, {"accuracy", report.mean.accuracy}}},
          {"std_error", {{"precision", report.std_error.precision}, {"recall", report.std_error.recall},
                         {"f1", report.std_error.f1}, {"accuracy", report.std_error.accuracy}}},
      };
      if (cv.kind == ClassifierKind::linear_svm) {
        j["model"] = {{"weights", model.weights()}, {"bias", model.bias()}};
      }
      write_file(out_file.empty() ? d / "cv.json" : fs::path(out_file), j.dump(2) + "\n");
      print_metrics(table.neighborhood_id.c_str(), report.mean);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
