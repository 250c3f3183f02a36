#pragma once

#include "sgc/model.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <span>

namespace sgc {

enum class Negatives : std::uint8_t { InBatch = 0 };

struct TrainConfig {
  int batch_size = 64;
  int epochs = 5;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int dim = 32;
  int layers = 2;
  int fanout = 10;
  std::uint32_t max_neighbors = 50;
  Variant variant = Variant::Mean;
  std::uint64_t seed = 42;
  Negatives negatives = Negatives::InBatch;
  int eval_cadence = 0;  // epochs between monitoring callbacks; 0 = off
};

// Gradients for every touched parameter; token rows are kept sparse by row,
// semantically equal to a dense table of zeros elsewhere.
template <class S>
struct GradientSet {
  std::map<std::uint32_t, Vec<S>> token_rows;
  std::vector<Vec<S>> attention;

  Vec<S>& row(std::uint32_t token, int dim) {
    auto [it, inserted] = token_rows.try_emplace(token);
    if (inserted) it->second = Vec<S>::Zero(dim);
    return it->second;
  }
};

template <class S>
struct OptState {
  Mat<S> m_tokens, v_tokens;
  std::vector<Vec<S>> m_attention, v_attention;
  std::int64_t step = 0;
};

template <class S>
OptState<S> init_opt_state(const ModelParams<S>& params) {
  OptState<S> opt;
  opt.m_tokens = Mat<S>::Zero(params.token_embeddings.rows(), params.token_embeddings.cols());
  opt.v_tokens = opt.m_tokens;
  opt.m_attention.assign(params.attention.size(), Vec<S>());
  opt.v_attention.assign(params.attention.size(), Vec<S>());
  for (std::size_t l = 0; l < params.attention.size(); ++l) {
    opt.m_attention[l] = Vec<S>::Zero(params.attention[l].size());
    opt.v_attention[l] = Vec<S>::Zero(params.attention[l].size());
  }
  return opt;
}

template <class S>
struct LossResult {
  S loss;
  Vec<S> dscores;
};

// Cross entropy of the batch softmax against the positive column:
// loss = -log softmax(scores)[pos], gradient = softmax(scores) - onehot.
template <class S>
LossResult<S> sampled_softmax_loss(const Vec<S>& scores, int pos_index) {
  if (scores.size() < 2) throw std::invalid_argument("softmax loss needs at least 2 scores");
  if (pos_index < 0 || pos_index >= scores.size())
    throw std::invalid_argument("pos_index out of range");
  LossResult<S> out;
  out.loss = log_sum_exp(scores) - scores[pos_index];
  out.dscores = softmax(scores);
  out.dscores[pos_index] -= S(1);
  return out;
}

template <class S>
struct TowerPass {
  SampledTree tree;
  ForwardTrace<S> trace;
};

template <class S>
struct BatchForwardResult {
  std::vector<TowerPass<S>> queries;
  std::vector<TowerPass<S>> items;
  Mat<S> scores;  // scores(a, b) = z_q[a] . z_i[b]
};

// Samples one query tree and one item tree per pair (masking the pair's own
// edge under the mask variant) and scores all pairs against all items.
template <class S>
BatchForwardResult<S> batch_forward(std::span<const ClickRecord> batch,
                                    const BipartiteGraph& graph, const ModelParams<S>& params,
                                    const CorpusTokens& texts, int fanout, Rng& rng) {
  const auto b = static_cast<int>(batch.size());
  if (b < 2) throw std::invalid_argument("batch needs at least 2 pairs for in-batch negatives");

  BatchForwardResult<S> out;
  out.queries.reserve(b);
  out.items.reserve(b);
  for (const auto& rec : batch) {
    std::optional<MaskEdge> mask;
    if (params.variant == Variant::Mask) mask = MaskEdge{rec.query, rec.item};
    TowerPass<S> q;
    q.tree = sample_tree(graph, query_node(rec.query), params.layers, fanout, rng, mask);
    q.trace = forward(q.tree, params, texts);
    out.queries.push_back(std::move(q));
    TowerPass<S> i;
    i.tree = sample_tree(graph, item_node(rec.item), params.layers, fanout, rng, mask);
    i.trace = forward(i.tree, params, texts);
    out.items.push_back(std::move(i));
  }

  out.scores.resize(b, b);
  for (int a = 0; a < b; ++a)
    for (int c = 0; c < b; ++c)
      out.scores(a, c) =
          score(out.queries[a].trace.target_embedding, out.items[c].trace.target_embedding);
  return out;
}

template <class S>
struct BatchLoss {
  S loss;        // mean over rows
  Mat<S> dscores;  // d(mean loss)/d(scores)
};

template <class S>
BatchLoss<S> batch_softmax_loss(const Mat<S>& scores) {
  const auto b = static_cast<int>(scores.rows());
  BatchLoss<S> out;
  out.loss = S(0);
  out.dscores.resize(b, b);
  for (int a = 0; a < b; ++a) {
    Vec<S> row = scores.row(a).transpose();
    auto r = sampled_softmax_loss(row, a);
    out.loss += r.loss;
    out.dscores.row(a) = r.dscores.transpose() / static_cast<S>(b);
  }
  out.loss /= static_cast<S>(b);
  return out;
}

namespace detail {

// Reverse pass over one tree; dz is the gradient at the target's z.
template <class S>
void tree_backward(const TowerPass<S>& pass, const Vec<S>& dz, const ModelParams<S>& params,
                   const CorpusTokens& texts, GradientSet<S>& grads) {
  const SampledTree& tree = pass.tree;
  const ForwardTrace<S>& trace = pass.trace;
  const int L = params.layers;
  const int d = params.dim;

  std::vector<std::vector<Vec<S>>> dh(tree.nodes.size());
  for (std::size_t n = 0; n < tree.nodes.size(); ++n)
    dh[n].assign(trace.layer_values[n].size(), Vec<S>::Zero(d));

  // z sums every layer of the target.
  for (auto& g : dh[0]) g = dz;

  for (int l = L; l >= 1; --l) {
    const std::uint32_t last = tree.level_begin[L - l + 1];
    for (std::uint32_t n = 0; n < last; ++n) {
      const auto& node = tree.nodes[n];
      const auto m = node.num_children();
      if (m == 0) continue;
      const Vec<S>& g = dh[n][l];
      const Vec<S>& alpha = trace.alphas[n][l - 1];

      for (std::uint32_t c = 0; c < m; ++c)
        dh[node.child_begin + c][l - 1] += alpha[c] * g;

      if (params.uses_attention()) {
        Cols<S> children = detail::stack_children(tree, trace, n, l - 1, d);
        Vec<S> dalpha = children.transpose() * g;
        const S s = alpha.dot(dalpha);
        Vec<S> dlogits = (alpha.array() * (dalpha.array() - s)).matrix();
        const Vec<S>& t = trace.pre_acts[n][l - 1];
        Vec<S> dt(m);
        for (std::uint32_t c = 0; c < m; ++c)
          dt[c] = dlogits[c] * leaky_relu_grad(t[c], params.leaky_slope);

        const S dt_sum = dt.sum();
        const Vec<S>& w = params.attention[l - 1];
        const Vec<S>& h_v = trace.layer_values[n][l - 1];
        if (grads.attention.empty()) grads.attention.assign(L, Vec<S>::Zero(2 * d));
        grads.attention[l - 1].head(d) += dt_sum * h_v;
        grads.attention[l - 1].tail(d) += children * dt;

        dh[n][l - 1] += dt_sum * w.head(d);
        for (std::uint32_t c = 0; c < m; ++c)
          dh[node.child_begin + c][l - 1] += dt[c] * w.tail(d);
      }
    }
  }

  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    const auto tokens = texts.tokens(tree.nodes[n].ref);
    if (tokens.empty()) continue;
    const Vec<S> g0 = dh[n][0] / static_cast<S>(tokens.size());
    for (std::uint32_t t : tokens) grads.row(t, d) += g0;
  }
}

}  // namespace detail

// Exact gradients of the batch mean loss with respect to every touched
// token row and every attention vector.
template <class S>
GradientSet<S> backward(const BatchForwardResult<S>& batch, const Mat<S>& dscores,
                        const ModelParams<S>& params, const CorpusTokens& texts) {
  const auto b = static_cast<int>(batch.queries.size());
  GradientSet<S> grads;
  if (params.uses_attention())
    grads.attention.assign(params.layers, Vec<S>::Zero(2 * params.dim));

  for (int a = 0; a < b; ++a) {
    Vec<S> dz = Vec<S>::Zero(params.dim);
    for (int c = 0; c < b; ++c) dz += dscores(a, c) * batch.items[c].trace.target_embedding;
    detail::tree_backward(batch.queries[a], dz, params, texts, grads);
  }
  for (int c = 0; c < b; ++c) {
    Vec<S> dz = Vec<S>::Zero(params.dim);
    for (int a = 0; a < b; ++a) dz += dscores(a, c) * batch.queries[a].trace.target_embedding;
    detail::tree_backward(batch.items[c], dz, params, texts, grads);
  }
  return grads;
}

// Bias-corrected Adam over the touched rows only; untouched rows and their
// moments stay as they are.
template <class S>
void adam_step(ModelParams<S>& params, const GradientSet<S>& grads, OptState<S>& opt,
               double lr, double beta1, double beta2, double eps) {
  opt.step += 1;
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(opt.step));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(opt.step));

  auto update = [&](S& theta, S& m, S& v, S g) {
    m = static_cast<S>(beta1 * m + (1.0 - beta1) * g);
    v = static_cast<S>(beta2 * v + (1.0 - beta2) * g * g);
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    theta -= static_cast<S>(lr * m_hat / (std::sqrt(v_hat) + eps));
  };

  for (const auto& [row, g] : grads.token_rows)
    for (int c = 0; c < params.dim; ++c)
      update(params.token_embeddings(row, c), opt.m_tokens(row, c), opt.v_tokens(row, c), g[c]);

  for (std::size_t l = 0; l < grads.attention.size(); ++l)
    for (int c = 0; c < grads.attention[l].size(); ++c)
      update(params.attention[l][c], opt.m_attention[l][c], opt.v_attention[l][c],
             grads.attention[l][c]);
}

// Central-difference check of the analytic gradients, replaying the tree
// sampling stream identically for every perturbation. Returns the max over
// touched coordinates of |analytic - numeric| / max(1e-8, |a| + |n|).
double grad_check(const ModelParams<double>& params, std::span<const ClickRecord> batch,
                  const BipartiteGraph& graph, const CorpusTokens& texts, int fanout,
                  std::uint64_t tree_seed, double eps = 1e-5);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double mean_sec_per_step = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochStats> epochs;
};

// Shuffled mini-batch training with in-batch softmax negatives. Writes one
// `epoch<TAB>step<TAB>loss<TAB>sec_per_step` line per step to metrics_log
// when given. on_epoch fires every eval_cadence epochs (and after the last).
TrainResult train(const TrainConfig& cfg, const BipartiteGraph& graph, const ClickLog& log,
                  const Catalog& catalog, const Vocab& vocab,
                  std::ostream* metrics_log = nullptr,
                  const std::function<void(int, const ModelParams<float>&)>& on_epoch = {});

}  // namespace sgc
