#pragma once

#include "sgc/ingest.hpp"
#include "sgc/rng.hpp"
#include "sgc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sgc {

// One click edge (query, item); used for neighbor masking.
struct MaskEdge {
  std::uint32_t query = 0;
  std::uint32_t item = 0;

  friend bool operator==(const MaskEdge&, const MaskEdge&) = default;
};

// CSR adjacency for one direction. Each node's slice is sorted by weight
// descending, ties by neighbor index ascending.
struct CsrSide {
  std::vector<std::uint64_t> offsets;  // size = node count + 1
  std::vector<std::uint32_t> neighbors;
  std::vector<float> weights;

  std::uint32_t num_nodes() const { return static_cast<std::uint32_t>(offsets.size()) - 1; }
  std::span<const std::uint32_t> neighbor_span(std::uint32_t node) const {
    return {neighbors.data() + offsets[node], neighbors.data() + offsets[node + 1]};
  }
  std::span<const float> weight_span(std::uint32_t node) const {
    return {weights.data() + offsets[node], weights.data() + offsets[node + 1]};
  }
};

// Weighted bipartite click graph. Immutable after construction; safe for
// concurrent readers.
struct BipartiteGraph {
  CsrSide query_to_item;
  CsrSide item_to_query;
  std::uint32_t num_queries = 0;
  std::uint32_t num_items = 0;

  const CsrSide& side_of(Side s) const {
    return s == Side::Query ? query_to_item : item_to_query;
  }
  std::uint64_t degree(NodeRef node) const {
    const CsrSide& side = side_of(node.side);
    return side.offsets[node.index + 1] - side.offsets[node.index];
  }
};

// Layered sampled neighborhood rooted at one node. Nodes are stored level by
// level; each node's children occupy a contiguous range.
struct SampledTree {
  struct Node {
    NodeRef ref;
    std::int32_t parent = -1;
    std::uint32_t child_begin = 0;
    std::uint32_t child_end = 0;

    std::uint32_t num_children() const { return child_end - child_begin; }
  };

  std::vector<Node> nodes;                 // nodes[0] is the target
  std::vector<std::uint32_t> level_begin;  // size depth + 2; level l = [begin[l], begin[l+1])
  int depth = 0;
  std::optional<MaskEdge> mask;

  NodeRef target() const { return nodes[0].ref; }
  int level_of(std::uint32_t node) const {
    int l = 0;
    while (node >= level_begin[l + 1]) ++l;
    return l;
  }
};

// One undirected weighted edge per aggregated record; both directions hold
// the sort invariant. Throws on an empty log.
BipartiteGraph build_graph(const ClickLog& log);

// Truncates every neighbor list to its heaviest max_neighbors entries; each
// direction pruned independently, so symmetry may break.
BipartiteGraph prune_neighbors(const BipartiteGraph& graph, std::uint32_t max_neighbors = 50);

// Weighted sampling without replacement: up to k distinct neighbors, each
// successive draw proportional to weight among the remaining candidates.
// The masked counterpart (if any) is removed before drawing. When the
// masked list has at most k entries it is returned whole, order preserved.
std::vector<std::uint32_t> sample_neighbors(const BipartiteGraph& graph, NodeRef node, int k,
                                            Rng& rng, std::optional<MaskEdge> mask = {});

// Top-k by weight of the masked neighbor list; pure and deterministic.
std::vector<std::uint32_t> deterministic_neighbors(const BipartiteGraph& graph, NodeRef node,
                                                   int k, std::optional<MaskEdge> mask = {});

// depth = 0 yields the single-node tree. The same fanout and mask apply at
// every level; sides alternate between levels.
SampledTree sample_tree(const BipartiteGraph& graph, NodeRef target, int depth, int fanout,
                        Rng& rng, std::optional<MaskEdge> mask = {});
SampledTree deterministic_tree(const BipartiteGraph& graph, NodeRef target, int depth,
                               int fanout, std::optional<MaskEdge> mask = {});

// Binary graph file, magic "SGCG"; see README for the layout.
void save_graph(const BipartiteGraph& graph, const std::filesystem::path& path);
BipartiteGraph load_graph(const std::filesystem::path& path);

}  // namespace sgc
