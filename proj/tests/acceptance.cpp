// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "spamprop/error.hpp"
#include "spamprop/evalmetrics.hpp"
#include "spamprop/graph.hpp"
#include "spamprop/grouping.hpp"
#include "spamprop/pipeline.hpp"
#include "spamprop/poi.hpp"
#include "spamprop/rng.hpp"
#include "spamprop/synth.hpp"
#include "spamprop/text_io.hpp"
#include "spamprop/topics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spamprop;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "failed: " << what << "; ";
    pass = pass && ok;
  }
};

std::string fmt(double x, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spamprop_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---- 1 ------------------------------------------------------------------

void golden(Outcome& o) {
  const std::vector<CommunityTopics> cts{{0, {{1, 1}, {2, 1}}}, {1, {{1, 1}, {3, 1}}}, {2, {{1, 1}, {4, 1}, {5, 1}}}};
  const auto topics = NeighborhoodTopics::from(cts, 3);
  MessageGroup g;
  g.group_id = "m1";
  g.members = {{"m1", "u1"}, {"m2", "u2"}, {"m3", "u3"}};
  const Membership membership{{"u1", 0}, {"u2", 0}, {"u3", 1}};
  const auto counts = poi_counts(g, topics, membership);
  const auto probs = normalize(counts);
  o.require(counts == std::vector<std::size_t>{3, 2, 1, 0, 0}, "counts");
  o.require(probs == std::vector<double>{3.0 / 6, 2.0 / 6, 1.0 / 6, 0.0, 0.0}, "probabilities");
  o.detail << "counts=(3,2,1,0,0) probs=(1/2,1/3,1/6,0,0)";
}

// ---- 2 ------------------------------------------------------------------

// Pairwise link rule on interned tokens: shared four-gram, or a short
// message occurring contiguously inside the other.
bool contains(const std::vector<int>& hay, const std::vector<int>& needle, std::size_t len, std::size_t from = 0) {
  for (std::size_t i = 0; i + len <= hay.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < len && eq; ++k) eq = hay[i + k] == needle[from + k];
    if (eq) return true;
  }
  return false;
}

bool linked(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || b.empty()) return false;
  if (a.size() < 4 || b.size() < 4) {
    return (a.size() <= b.size() && contains(b, a, a.size())) || (b.size() <= a.size() && contains(a, b, b.size()));
  }
  for (std::size_t i = 0; i + 4 <= a.size(); ++i) {
    if (contains(b, a, 4, i)) return true;
  }
  return false;
}

void grouping_oracle(Outcome& o) {
  Rng rng(20240501);
  std::size_t total = 0, groups_seen = 0;
  for (int corpus = 0; corpus < 50; ++corpus) {
    const std::size_t n = 200 + rng.below(1801);
    const std::size_t vocab = 30 + rng.below(500);
    std::vector<GroupInput> msgs;
    std::vector<std::vector<int>> ids;
    std::unordered_map<std::string, int> intern;
    for (std::size_t i = 0; i < n; ++i) {
      TokenList t;
      if (i > 0 && rng.bernoulli(0.35)) {
        t = msgs[rng.below(i)].tokens;  // near-duplicate of an earlier message
        if (!t.empty() && rng.bernoulli(0.5)) t[rng.below(t.size())] = "x" + std::to_string(rng.below(vocab));
        if (rng.bernoulli(0.3)) t.insert(t.begin(), "p" + std::to_string(rng.below(vocab)));
        if (rng.bernoulli(0.2) && t.size() > 2) t.resize(1 + rng.below(3));
      } else {
        const auto len = rng.below(13);
        for (std::size_t k = 0; k < len; ++k) t.push_back("w" + std::to_string(rng.below(vocab)));
      }
      std::vector<int> v;
      for (const auto& w : t) v.push_back(intern.emplace(w, static_cast<int>(intern.size())).first->second);
      ids.push_back(std::move(v));
      msgs.push_back({"m" + std::to_string(100000 + i), "u" + std::to_string(rng.below(50)), std::move(t)});
    }
    const auto expected = oracle::components(static_cast<int>(n), [&](int a, int b) { return linked(ids[a], ids[b]); });
    std::vector<std::vector<std::string>> expected_ids;
    for (const auto& c : expected) {
      std::vector<std::string> g;
      for (int i : c) g.push_back(msgs[i].message_id);
      expected_ids.push_back(std::move(g));
    }
    std::vector<std::vector<std::string>> got_ids;
    for (const auto& g : group_similar(msgs)) {
      std::vector<std::string> m;
      for (const auto& x : g.members) m.push_back(x.message_id);
      got_ids.push_back(std::move(m));
    }
    o.require(got_ids == expected_ids, "corpus " + std::to_string(corpus) + " differs from the oracle");
    total += n;
    groups_seen += expected_ids.size();
  }
  o.detail << "50 corpora, " << total << " messages, " << groups_seen << " groups, all equal";
}

// ---- 3 ------------------------------------------------------------------

void vmeasure(Outcome& o) {
  Rng rng(77);
  double worst = 0.0;
  bool swap_exact = true;
  for (int t = 0; t < 1000; ++t) {
    const auto rows = 1 + rng.below(8), cols = 1 + rng.below(8);
    std::vector<std::vector<std::size_t>> m(rows, std::vector<std::size_t>(cols, 0));
    for (auto& r : m)
      for (auto& v : r) v = rng.below(3) ? rng.below(20) : 0;
    if (rng.bernoulli(0.3)) {
      auto& row = m[rng.below(rows)];
      std::fill(row.begin(), row.end(), 0);  // empty row
    }
    if (rng.bernoulli(0.3)) {
      const auto c = rng.below(cols);
      for (auto& r : m) r[c] = 0;  // empty column
    }
    m[rng.below(rows)][rng.below(cols)] += 1;
    Contingency a, b;
    for (std::size_t i = 0; i < rows; ++i) a.communities.push_back(i), b.topics.push_back(i);
    for (std::size_t j = 0; j < cols; ++j) a.topics.push_back(j), b.communities.push_back(j);
    a.counts = m;
    b.counts.assign(cols, std::vector<std::size_t>(rows));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) b.counts[j][i] = m[i][j];
    const auto s = homogeneity_completeness_v(a);
    const auto want = oracle::v_measure(m);
    worst = std::max({worst, std::abs(s.homogeneity - want.h), std::abs(s.completeness - want.c),
                      std::abs(s.v_measure - want.v)});
    const auto r = homogeneity_completeness_v(b);
    swap_exact = swap_exact && r.homogeneity == s.completeness && r.completeness == s.homogeneity &&
                 r.v_measure == s.v_measure;
  }
  o.require(worst <= 1e-12, "max deviation " + std::to_string(worst));
  o.require(swap_exact, "role swap not exact");
  o.detail << "1000 tables, max |diff| = " << worst << ", role swap exact";
}

// ---- 4 ------------------------------------------------------------------

void map_equation(Outcome& o) {
  Rng rng(404);
  double worst_entropy = 0.0, worst_formula = 0.0;
  std::size_t moves = 0, recovered = 0, graphs = 0;
  bool decreasing = true, below = true;
  for (int t = 0; t < 20; ++t) {
    const int a = 4 + static_cast<int>(rng.below(6)), b = 4 + static_cast<int>(rng.below(6));
    const int n = a + b;
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if ((i < a) == (j < a)) e.emplace_back(i, j);
    e.emplace_back(static_cast<int>(rng.below(a)), a + static_cast<int>(rng.below(b)));  // bridge
    auto name = [](int i) { return "n" + std::string(i < 10 ? "0" : "") + std::to_string(i); };
    std::vector<std::pair<std::string, std::string>> named;
    std::vector<std::pair<int, int>> arcs;
    for (auto [u, v] : e) {
      named.emplace_back(name(u), name(v));
      arcs.emplace_back(u, v);
      arcs.emplace_back(v, u);
    }
    std::vector<std::pair<std::string, std::string>> reciprocal;
    for (auto [u, v] : arcs) reciprocal.emplace_back(name(u), name(v));
    std::vector<std::string> left, right;
    for (int i = 0; i < n; ++i) (i < a ? left : right).push_back(name(i));
    const Partition cliques({left, right});
    std::vector<int> clique_labels(n), one_labels(n, 0);
    for (int i = 0; i < n; ++i) clique_labels[i] = i < a ? 0 : 1;

    for (bool directed : {false, true}) {
      const auto g = directed ? SocialGraph::from_named_edges({}, reciprocal, true)
                              : SocialGraph::from_named_edges({}, named, false);
      const auto walk = directed ? oracle::directed_walk(n, arcs) : oracle::undirected_walk(n, e);
      const Partition one({g.vertices()});
      const double l_one = map_equation_codelength(g, one);
      const double l_cliques = map_equation_codelength(g, cliques);
      worst_entropy = std::max(worst_entropy, std::abs(l_one - oracle::entropy_bits(walk.node)));
      worst_formula = std::max({worst_formula, std::abs(l_one - oracle::codelength(walk, one_labels)),
                                std::abs(l_cliques - oracle::codelength(walk, clique_labels))});
      below = below && l_cliques < l_one;
      MapEquationOptions opt;
      opt.on_move = [&](double before, double after) {
        ++moves;
        decreasing = decreasing && after < before;
      };
      recovered += detect_communities(g, CommunityMethod::map_equation, static_cast<std::uint64_t>(t), opt) == cliques;
      ++graphs;
    }
  }
  o.require(worst_entropy <= 1e-9, "one-module codelength vs entropy");
  o.require(worst_formula <= 1e-9, "codelength vs oracle formula");
  o.require(decreasing && moves > 0, "accepted moves must strictly decrease the codelength");
  o.require(below, "clique partition not below one module");
  o.require(recovered == graphs, "clique partition not recovered");
  o.detail << "20 graphs x {undirected, directed}: entropy |diff| " << worst_entropy << ", " << moves
           << " moves all decreasing, cliques recovered " << recovered << "/" << graphs;
}

// ---- 5 ------------------------------------------------------------------

void lda(Outcome& o) {
  bool conserved = true;
  double worst_purity = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::vector<Document> docs;
    for (std::size_t d = 0; d < 40; ++d) {
      Document doc{"d" + std::to_string(d), "u", {}, {}};
      const char prefix = d % 2 ? 'b' : 'a';
      for (int i = 0; i < 30; ++i) doc.tokens.push_back(prefix + std::to_string(rng.below(30)));
      docs.push_back(std::move(doc));
    }
    std::size_t tokens = 40 * 30;
    LdaParams p;
    p.topics = 2;
    p.iterations = 200;
    p.alpha = 0.1;  // 50/K at K=500; see README
    p.seed = seed;
    const auto model = fit_lda(docs, p, [&](const TopicModel& m, std::size_t) {
      std::size_t dt = 0, wt = 0, tt = 0;
      for (auto x : m.doc_topic) dt += x;
      for (auto x : m.word_topic) wt += x;
      for (auto x : m.topic_total) tt += x;
      conserved = conserved && dt == tokens && wt == tokens && tt == tokens;
      for (std::size_t d = 0; d < m.doc_count(); ++d) {
        std::size_t row = 0;
        for (auto x : m.doc_row(d)) row += x;
        conserved = conserved && row == docs[d].tokens.size();
      }
    });
    const auto labels = label_documents(model);
    std::size_t same = 0;
    for (std::size_t d = 0; d < labels.size(); ++d) same += labels[d].topic == d % 2;
    worst_purity = std::min(worst_purity, std::max(same, labels.size() - same) / double(labels.size()));
  }
  o.require(conserved, "count sums changed during sampling");
  o.require(worst_purity >= 0.9, "purity " + fmt(worst_purity));
  o.detail << "counts conserved every sweep; min purity over 5 seeds " << fmt(worst_purity);
}

// ---- 6-9: synthetic pipeline runs ------------------------------------------

PipelineConfig synth_config(const fs::path& dir, const SynthConfig& sc) {
  write_synth_dataset(sc, dir);
  auto cfg = load_config(dir / "config.json");
  cfg.seed = sc.seed;
  return cfg;
}

void h1(Outcome& o) {
  SynthConfig sc;
  sc.neighborhoods = 20;
  auto cfg = synth_config(scratch("h1"), sc);
  const auto r = validate_h1(cfg);
  o.require(r.rows.size() >= 20, "only " + std::to_string(r.rows.size()) + " neighborhoods prepared");
  o.require(r.report.actual_mean.homogeneity > r.report.null_mean.homogeneity, "actual h not above null h");
  o.require(!r.report.homogeneity.degenerate && r.report.homogeneity.p < 0.01, "p >= 0.01");
  o.detail << r.rows.size() << " neighborhoods: h actual " << fmt(r.report.actual_mean.homogeneity) << " vs null "
           << fmt(r.report.null_mean.homogeneity) << ", z=" << fmt(r.report.homogeneity.z, 1)
           << ", p=" << r.report.homogeneity.p;
}

void h2(Outcome& o) {
  double p = 0, r = 0;
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    auto cfg = synth_config(scratch("h2"), sc);
    cfg.combination = Combination::comb3;
    cfg.folds = 10;
    const auto result = run_pipeline(cfg);
    const auto& avg = result.report.at("average");
    if (avg.is_null()) {
      o.require(false, "seed " + std::to_string(seed) + " evaluated no neighborhood");
      continue;
    }
    p += avg.at("precision").get<double>();
    r += avg.at("recall").get<double>();
    ++runs;
  }
  p /= std::max(runs, 1);
  r /= std::max(runs, 1);
  o.require(p >= 0.85, "precision " + fmt(p));
  o.require(r >= 0.85, "recall " + fmt(r));
  o.detail << "10 seeds: precision " << fmt(p) << ", recall " << fmt(r);
}

struct Curve {
  std::vector<double> fractions;
  std::vector<Metrics> metrics;
};

Curve summarize_curve(const std::vector<SweepPoint>& points) {
  Curve c;
  for (const auto& p : average_by_fraction(points)) {
    c.fractions.push_back(p.fraction);
    c.metrics.push_back(p.metrics);
  }
  return c;
}

// Every later point is within `slack` of every earlier one in the given
// direction (+1 non-decreasing, -1 non-increasing).
bool monotone(const Curve& c, int direction, double slack) {
  for (auto field : {&Metrics::accuracy, &Metrics::precision, &Metrics::recall, &Metrics::f1}) {
    for (std::size_t i = 0; i < c.metrics.size(); ++i)
      for (std::size_t j = i + 1; j < c.metrics.size(); ++j)
        if (direction * (c.metrics[j].*field - c.metrics[i].*field) < -slack) return false;
  }
  return true;
}

std::string curve_text(const Curve& c) {
  std::string s;
  for (std::size_t i = 0; i < c.fractions.size(); ++i) s += (i ? " " : "") + fmt(c.metrics[i].f1, 2);
  return s;
}

PipelineConfig simulation_data() {
  static const fs::path dir = [] {
    const auto d = scratch("sim");
    SynthConfig sc;
    sc.neighborhoods = 4;
    write_synth_dataset(sc, d);
    return d;
  }();
  auto cfg = load_config(dir / "config.json");
  cfg.resume = true;  // tables are computed once and shared by the sweeps
  return cfg;
}

std::vector<double> grid(double from) {
  std::vector<double> g;
  for (int i = static_cast<int>(std::lround(from * 10)); i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

void early(Outcome& o) {
  auto cfg = simulation_data();
  cfg.repetitions = 3;
  const auto fr = grid(0.1);
  const auto c = summarize_curve(simulate_early(cfg, fr));
  const auto& at20 = c.metrics[1];
  o.require(c.fractions[1] == 0.2, "grid");
  o.require(monotone(c, +1, 0.05), "not non-decreasing within 0.05");
  o.require(at20.precision >= 0.8, "precision at 0.2 is " + fmt(at20.precision));
  o.require(at20.recall >= 0.6, "recall at 0.2 is " + fmt(at20.recall));
  o.detail << "at 0.2: P=" << fmt(at20.precision) << " R=" << fmt(at20.recall) << "; F1 over 0.1..1.0: "
           << curve_text(c);
}

void attacks(Outcome& o) {
  auto cfg = simulation_data();
  cfg.repetitions = 3;
  const auto fr = grid(0.0);
  const auto poison = summarize_curve(simulate_attack(cfg, AttackKind::poisoning, fr));
  const auto evade = summarize_curve(simulate_attack(cfg, AttackKind::evasion, fr));
  const double p30 = poison.metrics[3].f1, p100 = poison.metrics.back().f1, e100 = evade.metrics.back().f1;
  o.require(p30 >= 0.7, "poisoning F1 at 0.3 is " + fmt(p30));
  o.require(e100 < p100, "evasion F1(1.0) not below poisoning F1(1.0)");
  o.require(monotone(poison, -1, 0.05), "poisoning curve not non-increasing within 0.05");
  o.require(monotone(evade, -1, 0.05), "evasion curve not non-increasing within 0.05");
  o.detail << "poisoning F1(0.3)=" << fmt(p30) << " F1(1.0)=" << fmt(p100) << ", evasion F1(1.0)=" << fmt(e100)
           << "; poisoning F1 0..1: " << curve_text(poison) << "; evasion: " << curve_text(evade);
}

// ---- 10 -----------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return files;
}

void determinism(Outcome& o) {
  const auto root = scratch("cli");
  const auto d = root / "data";
  const std::string cli = SPAMPROP_CLI;
  const std::string config = (d / "config.json").string();
  const std::string fast = " --topics 8 --lda-iterations 40 --restarts 3 --folds 5 --repetitions 2";
  const std::string nb = (d / "nb000").string(), solo = (d / "solo").string();
  const std::vector<std::string> commands{
      "synth --out " + d.string() + " --communities 4 --community-size 15 --benign-groups 14 --spam-groups 14 --group-size-max 30",
      "run --config " + config + fast,
      "validate-h1 --config " + config + fast,
      "simulate-early --config " + config + fast + " --fractions 0.2 1.0",
      "simulate-attack --config " + config + fast + " --kind poisoning --fraction 0.3 1.0",
      "simulate-attack --config " + config + fast + " --kind evasion --fraction 1.0",
      "ingest --timelines " + nb + "/timelines.jsonl --out " + solo,
      "graph --edges " + nb + "/edges.tsv --out " + solo + "/partition.csv --restarts 3",
      "topics --dir " + solo + " --topics 8 --iterations 40",
      "groups --dir " + solo + " --out " + solo + "/groups.csv",
      "poi --dir " + solo + " --groups " + solo + "/groups.csv",
      "train --dir " + solo + " --labels " + (d / "labels.csv").string() + " --folds 5",
  };
  auto execute = [&](std::size_t round) {
    fs::remove_all(d);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const auto log = root / ("stdout_" + std::to_string(i) + "_" + std::to_string(round));
      const int status = std::system((cli + " " + commands[i] + " >" + log.string() + " 2>&1").c_str());
      o.require(status == 0, "command failed: " + commands[i]);
    }
    auto snap = snapshot(d);
    for (std::size_t i = 0; i < commands.size(); ++i) {
      snap["<stdout " + std::to_string(i) + ">"] =
          read_file(root / ("stdout_" + std::to_string(i) + "_" + std::to_string(round)));
    }
    return snap;
  };
  const auto first = execute(0);
  const auto second = execute(1);
  std::size_t differing = 0;
  for (const auto& [path, bytes] : first) {
    const auto it = second.find(path);
    if (it == second.end() || it->second != bytes) {
      if (!differing) o.detail << "first difference: " << path << "; ";
      ++differing;
    }
  }
  o.require(differing == 0 && first.size() == second.size(), std::to_string(differing) + " files differ");
  o.detail << commands.size() << " commands, " << first.size() << " files and outputs byte-identical across two executions";
  fs::remove_all(root);
}

// ---- 11 -----------------------------------------------------------------

void performance(Outcome& o) {
  const auto dir = scratch("perf");
  SynthConfig sc;
  sc.neighborhoods = 5;
  sc.n_communities = 10;
  sc.community_size = 100;
  sc.docs_per_user = 1;
  sc.messages_per_doc = 20;
  write_synth_dataset(sc, dir);
  std::size_t messages = 0, users = 0;
  for (std::size_t i = 0; i < sc.neighborhoods; ++i) {
    const auto text = read_file(dir / synth_neighborhood_id(i) / "timelines.jsonl");
    messages += static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    users += sc.n_communities * sc.community_size;
  }
  const auto start = std::chrono::steady_clock::now();
  const int status = std::system((std::string(SPAMPROP_CLI) + " run --config " + (dir / "config.json").string() +
                                  " >" + (dir / "run.log").string() + " 2>&1")
                                     .c_str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(status == 0, "pipeline run failed");
  o.require(messages >= 100000 && users >= 5000, "corpus too small");
  o.require(secs < 300.0, "took " + fmt(secs, 1) + " s");
  o.detail << messages << " messages, " << users << " users: full pipeline in " << fmt(secs, 1) << " s (1 worker)";
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"worked-example PoI golden", golden},
      {"grouping equals brute-force oracle", grouping_oracle},
      {"V-measure vs brute force, role swap", vmeasure},
      {"map-equation sanity", map_equation},
      {"LDA conservation and recovery", lda},
      {"H1: communities vs null model", h1},
      {"H2: end-to-end classification", h2},
      {"early detection sweep", early},
      {"poisoning and evasion", attacks},
      {"CLI determinism", determinism},
      {"performance: 100K messages / 5K users", performance},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail.str() << " [" << fmt(secs, 1) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed ? 1 : 0;
}
