#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spamprop/error.hpp"
#include "spamprop/rng.hpp"

namespace spamprop {

using VertexId = std::uint32_t;

/// Immutable social graph over string user ids. Vertices are kept sorted;
/// undirected edges are stored once with the smaller index first.
class SocialGraph {
 public:
  SocialGraph() = default;
  SocialGraph(std::vector<std::string> vertices, std::vector<std::pair<VertexId, VertexId>> edges,
              bool directed);

  /// Builds from named edges; endpoints not listed in `vertices` are added.
  static SocialGraph from_named_edges(std::vector<std::string> vertices,
                                      std::span<const std::pair<std::string, std::string>> edges,
                                      bool directed);

  bool directed() const { return directed_; }
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return vertices_.empty(); }

  const std::vector<std::string>& vertices() const { return vertices_; }
  const std::vector<std::pair<VertexId, VertexId>>& edges() const { return edges_; }
  const std::string& name(VertexId v) const { return vertices_[v]; }

  /// Index of a user id, or -1.
  std::int64_t find(const std::string& user) const;

  /// Out-neighbors (all neighbors when undirected).
  std::span<const VertexId> out_neighbors(VertexId v) const {
    return {out_adj_.data() + out_offsets_[v], out_adj_.data() + out_offsets_[v + 1]};
  }
  std::span<const VertexId> in_neighbors(VertexId v) const {
    if (!directed_) return out_neighbors(v);
    return {in_adj_.data() + in_offsets_[v], in_adj_.data() + in_offsets_[v + 1]};
  }

  /// in+out degree for directed graphs, plain degree otherwise.
  std::size_t degree(VertexId v) const;

  bool has_edge(VertexId u, VertexId v) const;

 private:
  bool directed_ = false;
  std::vector<std::string> vertices_;
  std::vector<std::pair<VertexId, VertexId>> edges_;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<VertexId> out_adj_;
  std::vector<std::size_t> in_offsets_{0};
  std::vector<VertexId> in_adj_;
};

/// Disjoint, non-empty communities covering a graph's vertices. Stored in
/// canonical form: members sorted, communities ordered by first member.
class Partition {
 public:
  Partition() = default;
  explicit Partition(std::vector<std::vector<std::string>> communities);

  /// Groups vertices by label (any integer labels).
  static Partition from_labels(const SocialGraph& graph, std::span<const std::int64_t> labels);

  const std::vector<std::vector<std::string>>& communities() const { return communities_; }
  std::size_t size() const { return communities_.size(); }

  /// Community index per graph vertex; throws if the partition does not
  /// cover exactly the graph's vertex set.
  std::vector<std::int64_t> labels_for(const SocialGraph& graph) const;

  /// user -> community index.
  std::map<std::string, std::size_t> membership() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<std::vector<std::string>> communities_;
};

struct GraphPair {
  SocialGraph directed;
  SocialGraph undirected;  // reciprocal pairs only
  std::size_t dropped_self_loops = 0;
};

GraphPair build_graphs(std::span<const std::pair<std::string, std::string>> edges);

/// Maximal subgraph with every vertex of degree >= k.
SocialGraph k_core(const SocialGraph& graph, std::size_t k);

enum class CommunityMethod { map_equation, modularity };

struct MapEquationOptions {
  int restarts = 10;
  double teleportation = 0.15;
  double pagerank_tolerance = 1e-12;
  int pagerank_max_iterations = 1000;
  /// Called after each accepted move with the codelength before and after.
  std::function<void(double, double)> on_move;
};

/// Random-walk flow on a graph: node visit rates and per-edge link flow.
struct Flow {
  std::vector<double> node;
  // Parallel to graph.edges(); for undirected graphs the flow of each
  // direction.
  std::vector<double> edge;
};

Flow compute_flow(const SocialGraph& graph, const MapEquationOptions& options = {});

/// Two-level map equation in bits.
double map_equation_codelength(const SocialGraph& graph, const Partition& partition,
                               const MapEquationOptions& options = {});

Partition detect_communities(const SocialGraph& graph, CommunityMethod method, std::uint64_t seed,
                             const MapEquationOptions& options = {});

/// Modularity Q of a partition over the symmetrized graph.
double modularity(const SocialGraph& graph, const Partition& partition);

/// Shuffles `items` and cuts them into consecutive groups of the given sizes.
template <typename T>
std::vector<std::vector<T>> null_partition(std::span<const std::size_t> sizes,
                                           std::vector<T> items, std::uint64_t seed) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  if (total != items.size()) {
    throw DataError("null partition sizes sum to " + std::to_string(total) + " but there are " +
                    std::to_string(items.size()) + " items");
  }
  Rng rng(seed);
  rng.shuffle(std::span<T>(items));
  std::vector<std::vector<T>> groups;
  groups.reserve(sizes.size());
  std::size_t pos = 0;
  for (auto s : sizes) {
    groups.emplace_back(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(pos)),
                        std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(pos + s)));
    pos += s;
  }
  return groups;
}

}  // namespace spamprop
