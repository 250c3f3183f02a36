#pragma once

#include "sgc/graph.hpp"
#include "sgc/math.hpp"
#include "sgc/types.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace sgc {

// Learnable state: one embedding row per vocab token, plus one attention
// vector of length 2d per layer for the attention and mask variants.
template <class S>
struct ModelParams {
  Mat<S> token_embeddings;  // V x d
  std::vector<Vec<S>> attention;
  int dim = 32;
  int layers = 2;
  Variant variant = Variant::Mean;
  S leaky_slope = S(0.2);

  bool uses_attention() const { return variant != Variant::Mean; }
  std::uint32_t vocab_size() const {
    return static_cast<std::uint32_t>(token_embeddings.rows());
  }
};

// Uniform U(-scale, scale) over every parameter.
template <class S>
ModelParams<S> random_params(std::uint32_t vocab_size, int dim, int layers, Variant variant,
                             std::uint64_t seed, double scale, S leaky_slope = S(0.2)) {
  ModelParams<S> params;
  params.dim = dim;
  params.layers = layers;
  params.variant = variant;
  params.leaky_slope = leaky_slope;
  Rng rng(seed);
  params.token_embeddings.resize(vocab_size, dim);
  for (std::uint32_t r = 0; r < vocab_size; ++r)
    for (int c = 0; c < dim; ++c)
      params.token_embeddings(r, c) = static_cast<S>(rng.next_uniform(-scale, scale));
  if (params.uses_attention()) {
    params.attention.resize(layers);
    for (auto& w : params.attention) {
      w.resize(2 * dim);
      for (int c = 0; c < 2 * dim; ++c) w[c] = static_cast<S>(rng.next_uniform(-scale, scale));
    }
  }
  return params;
}

// Training initialization: U(-0.5/d, 0.5/d) keeps initial scores near zero.
template <class S>
ModelParams<S> init_params(std::uint32_t vocab_size, int dim, int layers, Variant variant,
                           std::uint64_t seed, S leaky_slope = S(0.2)) {
  return random_params(vocab_size, dim, layers, variant, seed, 0.5 / dim, leaky_slope);
}

// Token-id sequences backing each graph node; queries come from the click
// log, items from the catalog.
struct CorpusTokens {
  const std::vector<std::vector<std::uint32_t>>* query_tokens = nullptr;
  const std::vector<std::vector<std::uint32_t>>* item_tokens = nullptr;

  std::span<const std::uint32_t> tokens(NodeRef node) const {
    const auto& table = node.side == Side::Query ? *query_tokens : *item_tokens;
    return table[node.index];
  }
};

// h^0: arithmetic mean of the token rows; an empty sequence gives the zero
// vector.
template <class S>
Vec<S> base_embedding(std::span<const std::uint32_t> tokens, const Mat<S>& table) {
  Vec<S> h = Vec<S>::Zero(table.cols());
  if (tokens.empty()) return h;
  for (std::uint32_t t : tokens) h += table.row(t).transpose();
  h /= static_cast<S>(tokens.size());
  return h;
}

// w^T [h_v || h_u] per neighbor column, before the LeakyReLU.
template <class S>
Vec<S> attention_pre_activations(const Vec<S>& h_v, const Cols<S>& neighbors, const Vec<S>& w) {
  const auto d = h_v.size();
  const S self_term = w.head(d).dot(h_v);
  Vec<S> t = neighbors.transpose() * w.tail(d);
  t.array() += self_term;
  return t;
}

// Softmax over neighbors of LeakyReLU(w^T [h_v || h_u]). neighbors must be
// non-empty; columns hold the neighbor embeddings.
template <class S>
Vec<S> attention_weights(const Vec<S>& h_v, const Cols<S>& neighbors, const Vec<S>& w,
                         S leaky_slope) {
  if (neighbors.cols() < 1) throw std::invalid_argument("attention needs at least one neighbor");
  if (w.size() != 2 * h_v.size())
    throw std::invalid_argument("attention vector must have length 2d");
  Vec<S> t = attention_pre_activations(h_v, neighbors, w);
  Vec<S> logits = t.unaryExpr([=](S x) { return leaky_relu(x, leaky_slope); });
  return softmax(logits);
}

// Equal weights 1/n for the mean aggregator.
template <class S>
Vec<S> mean_weights(int n) {
  if (n < 1) throw std::invalid_argument("mean_weights needs n >= 1");
  return Vec<S>::Constant(n, S(1) / static_cast<S>(n));
}

// Weighted sum of neighbor columns (the neighbors-only aggregation; self
// information enters through the layer combination).
template <class S>
Vec<S> aggregate(const Cols<S>& neighbors, const Vec<S>& weights) {
  return neighbors * weights;
}

// Every intermediate of one tree evaluation, retained for the backward
// pass. Node n at tree level lv carries h^0..h^(L-lv); alphas[n][l-1] and
// pre_acts[n][l-1] describe its layer-l aggregation over its children.
template <class S>
struct ForwardTrace {
  std::vector<std::vector<Vec<S>>> layer_values;
  std::vector<std::vector<Vec<S>>> alphas;
  std::vector<std::vector<Vec<S>>> pre_acts;  // attention variants only
  Vec<S> target_embedding;                    // z = sum of the target's h^l
};

namespace detail {

template <class S>
Cols<S> stack_children(const SampledTree& tree, const ForwardTrace<S>& trace,
                       std::uint32_t node, int layer, int dim) {
  const auto& n = tree.nodes[node];
  Cols<S> cols(dim, n.num_children());
  for (std::uint32_t c = n.child_begin; c < n.child_end; ++c)
    cols.col(c - n.child_begin) = trace.layer_values[c][layer];
  return cols;
}

}  // namespace detail

// Bottom-up evaluation over a sampled tree: level-L nodes contribute h^0
// only, each internal node aggregates its children per variant, and the
// target's z sums h^0..h^L.
template <class S>
ForwardTrace<S> forward(const SampledTree& tree, const ModelParams<S>& params,
                        const CorpusTokens& texts) {
  if (tree.depth != params.layers)
    throw std::invalid_argument("tree depth does not match the model's layer count");

  const int L = params.layers;
  const auto n_nodes = tree.nodes.size();
  ForwardTrace<S> trace;
  trace.layer_values.resize(n_nodes);
  trace.alphas.resize(n_nodes);
  trace.pre_acts.resize(n_nodes);

  for (std::size_t n = 0; n < n_nodes; ++n) {
    const int budget = L - tree.level_of(static_cast<std::uint32_t>(n));
    trace.layer_values[n].reserve(budget + 1);
    trace.layer_values[n].push_back(
        base_embedding<S>(texts.tokens(tree.nodes[n].ref), params.token_embeddings));
  }

  for (int l = 1; l <= L; ++l) {
    // Nodes at levels 0 .. L-l aggregate their children's h^(l-1).
    const std::uint32_t last = tree.level_begin[L - l + 1];
    for (std::uint32_t n = 0; n < last; ++n) {
      const auto& node = tree.nodes[n];
      if (node.num_children() == 0) {
        trace.layer_values[n].push_back(Vec<S>::Zero(params.dim));
        continue;
      }
      Cols<S> children = detail::stack_children(tree, trace, n, l - 1, params.dim);
      Vec<S> weights;
      if (params.uses_attention()) {
        const Vec<S>& h_v = trace.layer_values[n][l - 1];
        const Vec<S>& w = params.attention[l - 1];
        Vec<S> t = attention_pre_activations(h_v, children, w);
        Vec<S> logits =
            t.unaryExpr([&](S x) { return leaky_relu(x, params.leaky_slope); });
        weights = softmax(logits);
        trace.pre_acts[n].push_back(std::move(t));
      } else {
        weights = mean_weights<S>(static_cast<int>(node.num_children()));
      }
      trace.layer_values[n].push_back(aggregate(children, weights));
      trace.alphas[n].push_back(std::move(weights));
    }
  }

  trace.target_embedding = Vec<S>::Zero(params.dim);
  for (const auto& h : trace.layer_values[0]) trace.target_embedding += h;
  return trace;
}

// Two-tower similarity: plain inner product.
template <class S>
S score(const Vec<S>& z_query, const Vec<S>& z_item) {
  if (z_query.size() != z_item.size())
    throw std::invalid_argument("score: embedding lengths differ");
  return z_query.dot(z_item);
}

}  // namespace sgc
