#include "spamprop/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

namespace spamprop {

// ---------------------------------------------------------------------------
// SocialGraph

SocialGraph::SocialGraph(std::vector<std::string> vertices,
                         std::vector<std::pair<VertexId, VertexId>> edges, bool directed)
    : directed_(directed), vertices_(std::move(vertices)) {
  if (!std::is_sorted(vertices_.begin(), vertices_.end()) ||
      std::adjacent_find(vertices_.begin(), vertices_.end()) != vertices_.end()) {
    throw DataError("graph vertices must be sorted and unique");
  }
  const auto n = static_cast<VertexId>(vertices_.size());
  for (auto& [u, v] : edges) {
    if (u >= n || v >= n) throw DataError("edge endpoint outside vertex set");
    if (u == v) throw DataError("self-loop in graph edges");
    if (!directed_ && v < u) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = std::move(edges);

  std::vector<std::size_t> out_deg(n, 0);
  std::vector<std::size_t> in_deg(n, 0);
  for (auto [u, v] : edges_) {
    ++out_deg[u];
    if (directed_) {
      ++in_deg[v];
    } else {
      ++out_deg[v];
    }
  }
  out_offsets_.assign(n + 1, 0);
  for (VertexId v = 0; v < n; ++v) out_offsets_[v + 1] = out_offsets_[v] + out_deg[v];
  out_adj_.assign(out_offsets_[n], 0);
  std::vector<std::size_t> cursor(out_offsets_.begin(), out_offsets_.end() - 1);
  for (auto [u, v] : edges_) {
    out_adj_[cursor[u]++] = v;
    if (!directed_) out_adj_[cursor[v]++] = u;
  }
  if (directed_) {
    in_offsets_.assign(n + 1, 0);
    for (VertexId v = 0; v < n; ++v) in_offsets_[v + 1] = in_offsets_[v] + in_deg[v];
    in_adj_.assign(in_offsets_[n], 0);
    std::vector<std::size_t> in_cursor(in_offsets_.begin(), in_offsets_.end() - 1);
    for (auto [u, v] : edges_) in_adj_[in_cursor[v]++] = u;
  }
  for (VertexId v = 0; v < n; ++v) {
    std::sort(out_adj_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[v]),
              out_adj_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[v + 1]));
  }
}

SocialGraph SocialGraph::from_named_edges(std::vector<std::string> vertices,
                                          std::span<const std::pair<std::string, std::string>> edges,
                                          bool directed) {
  for (const auto& [u, v] : edges) {
    vertices.push_back(u);
    vertices.push_back(v);
  }
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
  auto index = [&](const std::string& name) {
    return static_cast<VertexId>(std::lower_bound(vertices.begin(), vertices.end(), name) -
                                 vertices.begin());
  };
  std::vector<std::pair<VertexId, VertexId>> ids;
  ids.reserve(edges.size());
  for (const auto& [u, v] : edges) ids.emplace_back(index(u), index(v));
  return SocialGraph(std::move(vertices), std::move(ids), directed);
}

std::int64_t SocialGraph::find(const std::string& user) const {
  auto it = std::lower_bound(vertices_.begin(), vertices_.end(), user);
  if (it == vertices_.end() || *it != user) return -1;
  return it - vertices_.begin();
}

std::size_t SocialGraph::degree(VertexId v) const {
  std::size_t d = out_offsets_[v + 1] - out_offsets_[v];
  if (directed_) d += in_offsets_[v + 1] - in_offsets_[v];
  return d;
}

bool SocialGraph::has_edge(VertexId u, VertexId v) const {
  auto nb = out_neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

// ---------------------------------------------------------------------------
// Partition

Partition::Partition(std::vector<std::vector<std::string>> communities) {
  std::set<std::string> seen;
  for (auto& c : communities) {
    if (c.empty()) throw DataError("partition contains an empty community");
    std::sort(c.begin(), c.end());
    for (const auto& v : c) {
      if (!seen.insert(v).second) throw DataError("vertex '" + v + "' in two communities");
    }
  }
  std::sort(communities.begin(), communities.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  communities_ = std::move(communities);
}

Partition Partition::from_labels(const SocialGraph& graph, std::span<const std::int64_t> labels) {
  if (labels.size() != graph.vertex_count()) {
    throw DataError("label count does not match vertex count");
  }
  std::map<std::int64_t, std::vector<std::string>> groups;
  for (VertexId v = 0; v < graph.vertex_count(); ++v) groups[labels[v]].push_back(graph.name(v));
  std::vector<std::vector<std::string>> communities;
  communities.reserve(groups.size());
  for (auto& [label, members] : groups) communities.push_back(std::move(members));
  return Partition(std::move(communities));
}

std::vector<std::int64_t> Partition::labels_for(const SocialGraph& graph) const {
  std::vector<std::int64_t> labels(graph.vertex_count(), -1);
  std::size_t covered = 0;
  for (std::size_t c = 0; c < communities_.size(); ++c) {
    for (const auto& user : communities_[c]) {
      const auto v = graph.find(user);
      if (v < 0) throw DataError("partition vertex '" + user + "' not in graph");
      labels[static_cast<std::size_t>(v)] = static_cast<std::int64_t>(c);
      ++covered;
    }
  }
  if (covered != graph.vertex_count()) throw DataError("partition does not cover the graph");
  return labels;
}

std::map<std::string, std::size_t> Partition::membership() const {
  std::map<std::string, std::size_t> out;
  for (std::size_t c = 0; c < communities_.size(); ++c) {
    for (const auto& user : communities_[c]) out.emplace(user, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Construction and k-core

GraphPair build_graphs(std::span<const std::pair<std::string, std::string>> edges) {
  GraphPair out;
  std::vector<std::pair<std::string, std::string>> kept;
  kept.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.first == e.second) {
      ++out.dropped_self_loops;
      continue;
    }
    kept.push_back(e);
  }
  out.directed = SocialGraph::from_named_edges({}, kept, true);

  std::vector<std::pair<std::string, std::string>> mutual;
  const auto& d = out.directed;
  for (auto [u, v] : d.edges()) {
    if (u < v && d.has_edge(v, u)) mutual.emplace_back(d.name(u), d.name(v));
  }
  out.undirected = SocialGraph::from_named_edges({}, mutual, false);
  return out;
}

SocialGraph k_core(const SocialGraph& graph, std::size_t k) {
  if (k == 0) throw ConfigError("k-core requires k >= 1");
  const auto n = graph.vertex_count();
  std::vector<std::size_t> degree(n);
  std::vector<char> removed(n, 0);
  std::vector<VertexId> queue;
  for (VertexId v = 0; v < n; ++v) {
    degree[v] = graph.degree(v);
    if (degree[v] < k) {
      removed[v] = 1;
      queue.push_back(v);
    }
  }
  auto drop_neighbor = [&](VertexId w) {
    if (removed[w]) return;
    if (--degree[w] < k) {
      removed[w] = 1;
      queue.push_back(w);
    }
  };
  while (!queue.empty()) {
    const VertexId v = queue.back();
    queue.pop_back();
    for (auto w : graph.out_neighbors(v)) drop_neighbor(w);
    if (graph.directed()) {
      for (auto w : graph.in_neighbors(v)) drop_neighbor(w);
    }
  }

  std::vector<std::string> vertices;
  std::vector<VertexId> remap(n, 0);
  for (VertexId v = 0; v < n; ++v) {
    if (!removed[v]) {
      remap[v] = static_cast<VertexId>(vertices.size());
      vertices.push_back(graph.name(v));
    }
  }
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (auto [u, v] : graph.edges()) {
    if (!removed[u] && !removed[v]) edges.emplace_back(remap[u], remap[v]);
  }
  return SocialGraph(std::move(vertices), std::move(edges), graph.directed());
}

// ---------------------------------------------------------------------------
// Flow

Flow compute_flow(const SocialGraph& graph, const MapEquationOptions& options) {
  const auto n = graph.vertex_count();
  Flow flow;
  flow.node.assign(n, 0.0);
  flow.edge.assign(graph.edge_count(), 0.0);
  if (n == 0) return flow;

  if (graph.edge_count() == 0) {
    std::fill(flow.node.begin(), flow.node.end(), 1.0 / static_cast<double>(n));
    return flow;
  }

  if (!graph.directed()) {
    const double two_m = 2.0 * static_cast<double>(graph.edge_count());
    for (VertexId v = 0; v < n; ++v) flow.node[v] = static_cast<double>(graph.degree(v)) / two_m;
    std::fill(flow.edge.begin(), flow.edge.end(), 1.0 / two_m);
    return flow;
  }

  // PageRank with uniform teleportation; dangling nodes teleport.
  const double tau = options.teleportation;
  const double nd = static_cast<double>(n);
  std::vector<double> p(n, 1.0 / nd);
  std::vector<double> next(n);
  for (int it = 0; it < options.pagerank_max_iterations; ++it) {
    double dangling = 0.0;
    for (VertexId v = 0; v < n; ++v) {
      if (graph.out_neighbors(v).empty()) dangling += p[v];
    }
    const double base = (tau + (1.0 - tau) * dangling) / nd;
    std::fill(next.begin(), next.end(), base);
    for (VertexId v = 0; v < n; ++v) {
      auto out = graph.out_neighbors(v);
      if (out.empty()) continue;
      const double share = (1.0 - tau) * p[v] / static_cast<double>(out.size());
      for (auto w : out) next[w] += share;
    }
    const double sum = std::accumulate(next.begin(), next.end(), 0.0);
    double diff = 0.0;
    for (VertexId v = 0; v < n; ++v) {
      next[v] /= sum;
      diff += std::abs(next[v] - p[v]);
    }
    p.swap(next);
    if (diff < options.pagerank_tolerance) break;
  }
  flow.node = p;
  const auto& edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto u = edges[e].first;
    flow.edge[e] = (1.0 - tau) * p[u] / static_cast<double>(graph.out_neighbors(u).size());
  }
  return flow;
}

namespace {

double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// Weighted directed network at one aggregation level. Undirected input is
// represented with both link directions.
struct FlowNetwork {
  std::vector<double> flow;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> out;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> in;
  std::vector<double> out_total;
  std::vector<double> in_total;

  std::size_t size() const { return flow.size(); }

  void finalize() {
    const auto n = flow.size();
    out_total.assign(n, 0.0);
    in_total.assign(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (auto [w, f] : out[v]) out_total[v] += f;
      for (auto [w, f] : in[v]) in_total[v] += f;
    }
  }
};

FlowNetwork make_network(const SocialGraph& graph, const Flow& flow) {
  FlowNetwork net;
  const auto n = graph.vertex_count();
  net.flow = flow.node;
  net.out.resize(n);
  net.in.resize(n);
  const auto& edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto [u, v] = edges[e];
    net.out[u].emplace_back(v, flow.edge[e]);
    net.in[v].emplace_back(u, flow.edge[e]);
    if (!graph.directed()) {
      net.out[v].emplace_back(u, flow.edge[e]);
      net.in[u].emplace_back(v, flow.edge[e]);
    }
  }
  net.finalize();
  return net;
}

struct ModuleStats {
  double flow = 0.0;
  double exit = 0.0;
  double enter = 0.0;
  std::size_t members = 0;
};

// Map-equation state for one assignment of network nodes to modules.
class MapState {
 public:
  MapState(const FlowNetwork& net, double node_entropy_term)
      : net_(net), node_term_(node_entropy_term) {}

  void assign(std::vector<std::uint32_t> module_of) {
    module_of_ = std::move(module_of);
    modules_.assign(net_.size(), ModuleStats{});
    for (std::size_t v = 0; v < net_.size(); ++v) {
      auto& m = modules_[module_of_[v]];
      m.flow += net_.flow[v];
      ++m.members;
      for (auto [w, f] : net_.out[v]) {
        if (module_of_[w] != module_of_[v]) {
          m.exit += f;
          modules_[module_of_[w]].enter += f;
        }
      }
    }
    recompute_sums();
  }

  double codelength() const {
    return plogp(enter_sum_) - enter_log_sum_ - exit_log_sum_ - node_term_ + exit_flow_log_sum_;
  }

  const std::vector<std::uint32_t>& module_of() const { return module_of_; }

  // Greedy local moving; returns true if any node moved.
  bool move_nodes(Rng& rng, const std::function<void(double, double)>& on_move) {
    const auto n = net_.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> out_to(n, 0.0);
    std::vector<double> in_from(n, 0.0);
    std::vector<char> is_touched(n, 0);
    std::vector<std::uint32_t> touched;
    bool any_move = false;

    for (int pass = 0; pass < 100; ++pass) {
      rng.shuffle(std::span<std::uint32_t>(order));
      std::size_t moved = 0;
      for (auto v : order) {
        const std::uint32_t current = module_of_[v];
        touched.clear();
        auto touch = [&](std::uint32_t m) {
          if (!is_touched[m]) {
            is_touched[m] = 1;
            touched.push_back(m);
          }
        };
        touch(current);
        for (auto [w, f] : net_.out[v]) {
          if (w == v) continue;
          const auto m = module_of_[w];
          touch(m);
          out_to[m] += f;
        }
        for (auto [w, f] : net_.in[v]) {
          if (w == v) continue;
          const auto m = module_of_[w];
          touch(m);
          in_from[m] += f;
        }

        const double before = codelength();
        double best_delta = 0.0;
        std::uint32_t best_module = current;
        Candidate best_candidate{};
        for (auto m : touched) {
          if (m == current) continue;
          const auto cand = evaluate_move(v, current, m, out_to, in_from);
          const double delta = cand.codelength - before;
          if (delta < best_delta - 1e-12 ||
              (delta < best_delta + 1e-15 && delta < -1e-12 && m < best_module)) {
            best_delta = delta;
            best_module = m;
            best_candidate = cand;
          }
        }
        if (best_module != current && best_delta < -1e-10) {
          apply_move(v, current, best_module, best_candidate);
          ++moved;
          any_move = true;
          if (on_move) on_move(before, codelength());
        }
        for (auto m : touched) {
          out_to[m] = 0.0;
          in_from[m] = 0.0;
          is_touched[m] = 0;
        }
      }
      if (moved == 0) break;
    }
    return any_move;
  }

 private:
  struct Candidate {
    ModuleStats old_module;
    ModuleStats new_module;
    double codelength = 0.0;
  };

  Candidate evaluate_move(std::uint32_t v, std::uint32_t from, std::uint32_t to,
                          const std::vector<double>& out_to, const std::vector<double>& in_from) const {
    const double o = net_.out_total[v];
    const double i = net_.in_total[v];
    const double self_out = self_flow(v);
    const double out_from_mod = out_to[from];
    const double in_from_mod = in_from[from];
    const double out_to_mod = out_to[to];
    const double in_to_mod = in_from[to];
    const double o_ext = o - self_out;
    const double i_ext = i - self_out;

    Candidate c;
    const auto& a = modules_[from];
    const auto& b = modules_[to];
    c.old_module = a;
    c.old_module.flow -= net_.flow[v];
    c.old_module.exit = a.exit - (o_ext - out_from_mod) + in_from_mod;
    c.old_module.enter = a.enter - (i_ext - in_from_mod) + out_from_mod;
    c.old_module.members -= 1;
    c.new_module = b;
    c.new_module.flow += net_.flow[v];
    c.new_module.exit = b.exit + (o_ext - out_to_mod) - in_to_mod;
    c.new_module.enter = b.enter + (i_ext - in_to_mod) - out_to_mod;
    c.new_module.members += 1;
    for (auto* m : {&c.old_module, &c.new_module}) {
      if (m->exit < 0.0) m->exit = 0.0;
      if (m->enter < 0.0) m->enter = 0.0;
      if (m->members == 0) m->exit = m->enter = m->flow = 0.0;
    }

    const double enter_sum = enter_sum_ - a.enter - b.enter + c.old_module.enter + c.new_module.enter;
    const double enter_log = enter_log_sum_ - plogp(a.enter) - plogp(b.enter) +
                             plogp(c.old_module.enter) + plogp(c.new_module.enter);
    const double exit_log = exit_log_sum_ - plogp(a.exit) - plogp(b.exit) +
                            plogp(c.old_module.exit) + plogp(c.new_module.exit);
    const double exit_flow_log = exit_flow_log_sum_ - plogp(a.exit + a.flow) -
                                 plogp(b.exit + b.flow) +
                                 plogp(c.old_module.exit + c.old_module.flow) +
                                 plogp(c.new_module.exit + c.new_module.flow);
    c.codelength = plogp(enter_sum) - enter_log - exit_log - node_term_ + exit_flow_log;
    return c;
  }

  void apply_move(std::uint32_t v, std::uint32_t from, std::uint32_t to, const Candidate& c) {
    modules_[from] = c.old_module;
    modules_[to] = c.new_module;
    module_of_[v] = to;
    recompute_sums();
  }

  double self_flow(std::uint32_t v) const {
    double s = 0.0;
    for (auto [w, f] : net_.out[v]) {
      if (w == v) s += f;
    }
    return s;
  }

  void recompute_sums() {
    enter_sum_ = enter_log_sum_ = exit_log_sum_ = exit_flow_log_sum_ = 0.0;
    for (const auto& m : modules_) {
      if (m.members == 0) continue;
      enter_sum_ += m.enter;
      enter_log_sum_ += plogp(m.enter);
      exit_log_sum_ += plogp(m.exit);
      exit_flow_log_sum_ += plogp(m.exit + m.flow);
    }
  }

  const FlowNetwork& net_;
  double node_term_;
  std::vector<std::uint32_t> module_of_;
  std::vector<ModuleStats> modules_;
  double enter_sum_ = 0.0;
  double enter_log_sum_ = 0.0;
  double exit_log_sum_ = 0.0;
  double exit_flow_log_sum_ = 0.0;
};

// Relabels to 0..k-1 in order of first appearance; returns k.
std::uint32_t compact(std::vector<std::uint32_t>& labels) {
  std::unordered_map<std::uint32_t, std::uint32_t> ids;
  for (auto& l : labels) {
    auto [it, inserted] = ids.emplace(l, static_cast<std::uint32_t>(ids.size()));
    l = it->second;
  }
  return static_cast<std::uint32_t>(ids.size());
}

FlowNetwork aggregate(const FlowNetwork& net, const std::vector<std::uint32_t>& module_of,
                      std::uint32_t modules) {
  FlowNetwork agg;
  agg.flow.assign(modules, 0.0);
  agg.out.resize(modules);
  agg.in.resize(modules);
  std::vector<std::map<std::uint32_t, double>> links(modules);
  for (std::size_t v = 0; v < net.size(); ++v) {
    const auto mv = module_of[v];
    agg.flow[mv] += net.flow[v];
    for (auto [w, f] : net.out[v]) {
      const auto mw = module_of[w];
      if (mw != mv) links[mv][mw] += f;
    }
  }
  for (std::uint32_t m = 0; m < modules; ++m) {
    for (auto [w, f] : links[m]) {
      agg.out[m].emplace_back(w, f);
      agg.in[w].emplace_back(m, f);
    }
  }
  agg.finalize();
  return agg;
}

double node_entropy_term(const std::vector<double>& flow) {
  double s = 0.0;
  for (double p : flow) s += plogp(p);
  return s;
}

// One multilevel optimization from singletons; returns labels on the
// original nodes and the resulting codelength.
std::pair<std::vector<std::uint32_t>, double> optimize_map_equation(
    const FlowNetwork& base, double node_term, Rng& rng,
    const std::function<void(double, double)>& on_move) {
  const auto n = base.size();
  std::vector<std::uint32_t> labels(n);
  std::iota(labels.begin(), labels.end(), 0);

  for (int outer = 0; outer < 20; ++outer) {
    // Fine-tune original nodes against the current modules.
    MapState fine(base, node_term);
    fine.assign(labels);
    const bool fine_moved = fine.move_nodes(rng, on_move);
    labels = fine.module_of();
    auto modules = compact(labels);
    if (!fine_moved && outer > 0) break;

    // Coarse levels.
    FlowNetwork level = aggregate(base, labels, modules);
    while (true) {
      MapState coarse(level, node_term);
      std::vector<std::uint32_t> init(level.size());
      std::iota(init.begin(), init.end(), 0);
      coarse.assign(init);
      if (!coarse.move_nodes(rng, on_move)) break;
      auto level_labels = coarse.module_of();
      const auto next_modules = compact(level_labels);
      for (auto& l : labels) l = level_labels[l];
      level = aggregate(level, level_labels, next_modules);
      modules = next_modules;
    }
  }
  MapState final_state(base, node_term);
  final_state.assign(labels);
  return {labels, final_state.codelength()};
}

// ---- modularity (Louvain) over the symmetrized graph -----------------------

struct WeightedNet {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;  // no self entries
  std::vector<double> self;
  std::vector<double> strength;  // includes 2*self
  double total = 0.0;            // sum of strengths (2m)
};

WeightedNet symmetrized(const SocialGraph& graph) {
  const auto n = graph.vertex_count();
  std::vector<std::map<std::uint32_t, double>> w(n);
  for (auto [u, v] : graph.edges()) {
    w[u][v] += 1.0;
    w[v][u] += 1.0;
  }
  WeightedNet net;
  net.adj.resize(n);
  net.self.assign(n, 0.0);
  net.strength.assign(n, 0.0);
  for (std::uint32_t v = 0; v < n; ++v) {
    for (auto [u, x] : w[v]) {
      net.adj[v].emplace_back(u, x);
      net.strength[v] += x;
    }
    net.total += net.strength[v];
  }
  return net;
}

bool louvain_level(const WeightedNet& net, std::vector<std::uint32_t>& comm, Rng& rng) {
  const auto n = net.adj.size();
  std::vector<double> tot(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) tot[comm[v]] += net.strength[v];
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> link(n, 0.0);
  std::vector<std::uint32_t> touched;
  bool any = false;
  const double m2 = net.total;
  for (int pass = 0; pass < 100; ++pass) {
    rng.shuffle(std::span<std::uint32_t>(order));
    std::size_t moved = 0;
    for (auto v : order) {
      const auto current = comm[v];
      touched.clear();
      for (auto [u, x] : net.adj[v]) {
        const auto c = comm[u];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += x;
      }
      const double k = net.strength[v];
      tot[current] -= k;
      double best_gain = link[current] - tot[current] * k / m2;
      auto best = current;
      for (auto c : touched) {
        const double gain = link[c] - tot[c] * k / m2;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[best] += k;
      if (best != current) {
        comm[v] = best;
        ++moved;
        any = true;
      }
      for (auto c : touched) link[c] = 0.0;
    }
    if (moved == 0) break;
  }
  return any;
}

WeightedNet aggregate(const WeightedNet& net, const std::vector<std::uint32_t>& comm,
                      std::uint32_t k) {
  WeightedNet agg;
  agg.adj.resize(k);
  agg.self.assign(k, 0.0);
  agg.strength.assign(k, 0.0);
  agg.total = net.total;
  std::vector<std::map<std::uint32_t, double>> w(k);
  for (std::size_t v = 0; v < net.adj.size(); ++v) {
    agg.self[comm[v]] += net.self[v];
    agg.strength[comm[v]] += net.strength[v];
    for (auto [u, x] : net.adj[v]) {
      if (comm[u] == comm[v]) {
        agg.self[comm[v]] += x / 2.0;
      } else {
        w[comm[v]][comm[u]] += x;
      }
    }
  }
  for (std::uint32_t c = 0; c < k; ++c) {
    for (auto [u, x] : w[c]) agg.adj[c].emplace_back(u, x);
  }
  return agg;
}

std::vector<std::uint32_t> louvain(const WeightedNet& base, Rng& rng) {
  std::vector<std::uint32_t> labels(base.adj.size());
  std::iota(labels.begin(), labels.end(), 0);
  WeightedNet level = base;
  while (true) {
    std::vector<std::uint32_t> comm(level.adj.size());
    std::iota(comm.begin(), comm.end(), 0);
    if (!louvain_level(level, comm, rng)) break;
    const auto k = compact(comm);
    for (auto& l : labels) l = comm[l];
    level = aggregate(level, comm, k);
  }
  return labels;
}

std::vector<std::int64_t> widen(const std::vector<std::uint32_t>& labels) {
  return {labels.begin(), labels.end()};
}

}  // namespace

double map_equation_codelength(const SocialGraph& graph, const Partition& partition,
                               const MapEquationOptions& options) {
  if (graph.empty()) throw DataError("map equation of an empty graph");
  const auto labels = partition.labels_for(graph);
  const Flow flow = compute_flow(graph, options);
  const FlowNetwork net = make_network(graph, flow);
  MapState state(net, node_entropy_term(net.flow));
  state.assign({labels.begin(), labels.end()});
  return state.codelength();
}

double modularity(const SocialGraph& graph, const Partition& partition) {
  const auto labels = partition.labels_for(graph);
  const WeightedNet net = symmetrized(graph);
  if (net.total == 0.0) return 0.0;
  std::map<std::int64_t, double> internal;
  std::map<std::int64_t, double> tot;
  for (std::uint32_t v = 0; v < net.adj.size(); ++v) {
    tot[labels[v]] += net.strength[v];
    for (auto [u, x] : net.adj[v]) {
      if (labels[u] == labels[v]) internal[labels[v]] += x;
    }
  }
  double q = 0.0;
  for (auto [c, t] : tot) q += internal[c] / net.total - (t / net.total) * (t / net.total);
  return q;
}

Partition detect_communities(const SocialGraph& graph, CommunityMethod method, std::uint64_t seed,
                             const MapEquationOptions& options) {
  if (graph.empty()) throw DataError("community detection on an empty graph");
  const auto n = graph.vertex_count();
  const int restarts = std::max(1, options.restarts);

  std::vector<std::uint32_t> best;
  if (method == CommunityMethod::map_equation) {
    const Flow flow = compute_flow(graph, options);
    const FlowNetwork net = make_network(graph, flow);
    const double node_term = node_entropy_term(net.flow);

    // Start from the one-module solution; a restart must beat it strictly.
    MapState one(net, node_term);
    best.assign(n, 0);
    one.assign(best);
    double best_length = one.codelength();
    for (int r = 0; r < restarts; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      auto [labels, length] = optimize_map_equation(net, node_term, rng, options.on_move);
      if (length < best_length - 1e-10) {
        best_length = length;
        best = std::move(labels);
      }
    }
  } else {
    const WeightedNet net = symmetrized(graph);
    double best_q = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      auto labels = louvain(net, rng);
      const double q = modularity(graph, Partition::from_labels(graph, widen(labels)));
      if (q > best_q + 1e-12) {
        best_q = q;
        best = std::move(labels);
      }
    }
  }

  // Vertices without any edge form their own communities.
  std::vector<std::int64_t> labels = widen(best);
  for (VertexId v = 0; v < n; ++v) {
    if (graph.degree(v) == 0) labels[v] = static_cast<std::int64_t>(n) + v;
  }
  return Partition::from_labels(graph, labels);
}

}  // namespace spamprop
