#include "sgc/graph.hpp"

#include "sgc/binio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace sgc {

namespace {

constexpr char kGraphMagic[5] = "SGCG";
constexpr std::uint32_t kGraphVersion = 1;

// Sorts each node's slice by weight descending, neighbor index ascending.
void sort_adjacency(CsrSide& side) {
  std::vector<std::uint32_t> perm;
  for (std::uint32_t node = 0; node < side.num_nodes(); ++node) {
    const auto begin = side.offsets[node];
    const auto len = side.offsets[node + 1] - begin;
    perm.resize(len);
    std::iota(perm.begin(), perm.end(), 0u);
    std::sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
      const float wa = side.weights[begin + a], wb = side.weights[begin + b];
      if (wa != wb) return wa > wb;
      return side.neighbors[begin + a] < side.neighbors[begin + b];
    });
    std::vector<std::uint32_t> n(len);
    std::vector<float> w(len);
    for (std::uint64_t i = 0; i < len; ++i) {
      n[i] = side.neighbors[begin + perm[i]];
      w[i] = side.weights[begin + perm[i]];
    }
    std::copy(n.begin(), n.end(), side.neighbors.begin() + static_cast<std::ptrdiff_t>(begin));
    std::copy(w.begin(), w.end(), side.weights.begin() + static_cast<std::ptrdiff_t>(begin));
  }
}

// The neighbor to drop from `node`'s list under the mask, if any.
std::optional<std::uint32_t> masked_neighbor(NodeRef node, const std::optional<MaskEdge>& mask) {
  if (!mask) return std::nullopt;
  if (node.side == Side::Query && node.index == mask->query) return mask->item;
  if (node.side == Side::Item && node.index == mask->item) return mask->query;
  return std::nullopt;
}

void write_side(std::ostream& out, const CsrSide& side) {
  for (std::uint64_t v : side.offsets) write_u64(out, v);
  for (std::uint32_t v : side.neighbors) write_u32(out, v);
  for (float v : side.weights) write_f32(out, v);
}

CsrSide read_side(std::istream& in, std::uint32_t num_nodes) {
  CsrSide side;
  side.offsets.resize(num_nodes + 1);
  for (auto& v : side.offsets) v = read_u64(in);
  const std::uint64_t nnz = side.offsets.back();
  side.neighbors.resize(nnz);
  for (auto& v : side.neighbors) v = read_u32(in);
  side.weights.resize(nnz);
  for (auto& v : side.weights) v = read_f32(in);
  return side;
}

}  // namespace

BipartiteGraph build_graph(const ClickLog& log) {
  if (log.records.empty()) throw std::invalid_argument("cannot build a graph from an empty log");

  BipartiteGraph g;
  g.num_queries = log.num_queries();
  std::uint32_t max_item = 0;
  for (const auto& rec : log.records) max_item = std::max(max_item, rec.item);
  g.num_items = max_item + 1;

  auto fill = [&](CsrSide& side, std::uint32_t nodes, auto key, auto value) {
    side.offsets.assign(nodes + 1, 0);
    for (const auto& rec : log.records) ++side.offsets[key(rec) + 1];
    for (std::uint32_t i = 0; i < nodes; ++i) side.offsets[i + 1] += side.offsets[i];
    side.neighbors.resize(log.records.size());
    side.weights.resize(log.records.size());
    std::vector<std::uint64_t> cursor(side.offsets.begin(), side.offsets.end() - 1);
    for (const auto& rec : log.records) {
      const auto at = cursor[key(rec)]++;
      side.neighbors[at] = value(rec);
      side.weights[at] = static_cast<float>(rec.count);
    }
    sort_adjacency(side);
  };
  fill(g.query_to_item, g.num_queries, [](const ClickRecord& r) { return r.query; },
       [](const ClickRecord& r) { return r.item; });
  fill(g.item_to_query, g.num_items, [](const ClickRecord& r) { return r.item; },
       [](const ClickRecord& r) { return r.query; });
  return g;
}

BipartiteGraph prune_neighbors(const BipartiteGraph& graph, std::uint32_t max_neighbors) {
  if (max_neighbors < 1) throw std::invalid_argument("max_neighbors must be >= 1");

  auto prune_side = [&](const CsrSide& side) {
    CsrSide out;
    out.offsets.resize(side.offsets.size());
    out.offsets[0] = 0;
    for (std::uint32_t node = 0; node < side.num_nodes(); ++node) {
      const auto len = std::min<std::uint64_t>(side.offsets[node + 1] - side.offsets[node],
                                               max_neighbors);
      out.offsets[node + 1] = out.offsets[node] + len;
      const auto begin = side.offsets[node];
      out.neighbors.insert(out.neighbors.end(), side.neighbors.begin() + static_cast<std::ptrdiff_t>(begin),
                           side.neighbors.begin() + static_cast<std::ptrdiff_t>(begin + len));
      out.weights.insert(out.weights.end(), side.weights.begin() + static_cast<std::ptrdiff_t>(begin),
                         side.weights.begin() + static_cast<std::ptrdiff_t>(begin + len));
    }
    return out;
  };

  BipartiteGraph out;
  out.num_queries = graph.num_queries;
  out.num_items = graph.num_items;
  out.query_to_item = prune_side(graph.query_to_item);
  out.item_to_query = prune_side(graph.item_to_query);
  return out;
}

std::vector<std::uint32_t> sample_neighbors(const BipartiteGraph& graph, NodeRef node, int k,
                                            Rng& rng, std::optional<MaskEdge> mask) {
  if (k < 1) throw std::invalid_argument("fanout k must be >= 1");
  const CsrSide& side = graph.side_of(node.side);
  if (node.index >= side.num_nodes()) return {};  // node never clicked: isolated
  const auto neighbors = side.neighbor_span(node.index);
  const auto weights = side.weight_span(node.index);
  const auto dropped = masked_neighbor(node, mask);

  std::vector<std::uint32_t> candidates;
  std::vector<double> cand_weights;
  candidates.reserve(neighbors.size());
  cand_weights.reserve(neighbors.size());
  double total = 0.0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (dropped && neighbors[i] == *dropped) continue;
    candidates.push_back(neighbors[i]);
    cand_weights.push_back(weights[i]);
    total += weights[i];
  }
  if (candidates.size() <= static_cast<std::size_t>(k)) return candidates;

  std::vector<std::uint32_t> out;
  out.reserve(k);
  std::size_t remaining = candidates.size();
  for (int draw = 0; draw < k; ++draw) {
    double u = rng.next_double() * total;
    std::size_t pick = remaining - 1;  // guards against accumulated rounding
    double acc = 0.0;
    for (std::size_t i = 0; i < remaining; ++i) {
      acc += cand_weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(candidates[pick]);
    total -= cand_weights[pick];
    candidates[pick] = candidates[remaining - 1];
    cand_weights[pick] = cand_weights[remaining - 1];
    --remaining;
  }
  return out;
}

std::vector<std::uint32_t> deterministic_neighbors(const BipartiteGraph& graph, NodeRef node,
                                                   int k, std::optional<MaskEdge> mask) {
  if (k < 1) throw std::invalid_argument("fanout k must be >= 1");
  const CsrSide& side = graph.side_of(node.side);
  if (node.index >= side.num_nodes()) return {};  // node never clicked: isolated
  const auto neighbors = side.neighbor_span(node.index);
  const auto dropped = masked_neighbor(node, mask);

  std::vector<std::uint32_t> out;
  out.reserve(std::min<std::size_t>(neighbors.size(), static_cast<std::size_t>(k)));
  for (std::uint32_t n : neighbors) {
    if (dropped && n == *dropped) continue;
    out.push_back(n);
    if (out.size() == static_cast<std::size_t>(k)) break;
  }
  return out;
}

namespace {

template <class Sampler>
SampledTree build_tree(NodeRef target, int depth, std::optional<MaskEdge> mask,
                       Sampler&& sample) {
  if (depth < 0) throw std::invalid_argument("tree depth must be >= 0");

  SampledTree tree;
  tree.depth = depth;
  tree.mask = mask;
  tree.nodes.push_back({target, -1, 0, 0});
  tree.level_begin = {0, 1};
  std::uint32_t level_start = 0, level_end = 1;
  for (int l = 1; l <= depth; ++l) {
    for (std::uint32_t p = level_start; p < level_end; ++p) {
      const auto children = sample(tree.nodes[p].ref);
      tree.nodes[p].child_begin = static_cast<std::uint32_t>(tree.nodes.size());
      const Side child_side = other_side(tree.nodes[p].ref.side);
      for (std::uint32_t child : children)
        tree.nodes.push_back({{child_side, child}, static_cast<std::int32_t>(p), 0, 0});
      tree.nodes[p].child_end = static_cast<std::uint32_t>(tree.nodes.size());
    }
    level_start = level_end;
    level_end = static_cast<std::uint32_t>(tree.nodes.size());
    tree.level_begin.push_back(level_end);
  }
  return tree;
}

}  // namespace

SampledTree sample_tree(const BipartiteGraph& graph, NodeRef target, int depth, int fanout,
                        Rng& rng, std::optional<MaskEdge> mask) {
  return build_tree(target, depth, mask, [&](NodeRef node) {
    return sample_neighbors(graph, node, fanout, rng, mask);
  });
}

SampledTree deterministic_tree(const BipartiteGraph& graph, NodeRef target, int depth,
                               int fanout, std::optional<MaskEdge> mask) {
  return build_tree(target, depth, mask, [&](NodeRef node) {
    return deterministic_neighbors(graph, node, fanout, mask);
  });
}

void save_graph(const BipartiteGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_magic(out, kGraphMagic);
  write_u32(out, kGraphVersion);
  write_u32(out, graph.num_queries);
  write_u32(out, graph.num_items);
  write_side(out, graph.query_to_item);
  write_side(out, graph.item_to_query);
  if (!out) throw IoError("failed writing " + path.string());
}

BipartiteGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  expect_magic(in, kGraphMagic, "graph");
  const auto version = read_u32(in);
  if (version != kGraphVersion)
    throw IoError("graph format version " + std::to_string(version) + " is not supported");
  BipartiteGraph graph;
  graph.num_queries = read_u32(in);
  graph.num_items = read_u32(in);
  graph.query_to_item = read_side(in, graph.num_queries);
  graph.item_to_query = read_side(in, graph.num_items);
  return graph;
}

}  // namespace sgc
