#include "sgc/training.hpp"

#include <cstdio>
#include <numeric>

namespace sgc {

double grad_check(const ModelParams<double>& params, std::span<const ClickRecord> batch,
                  const BipartiteGraph& graph, const CorpusTokens& texts, int fanout,
                  std::uint64_t tree_seed, double eps) {
  auto loss_at = [&](const ModelParams<double>& p) {
    Rng rng(tree_seed);  // replayed stream: identical trees for every probe
    auto bf = batch_forward<double>(batch, graph, p, texts, fanout, rng);
    return batch_softmax_loss<double>(bf.scores).loss;
  };

  Rng rng(tree_seed);
  auto bf = batch_forward<double>(batch, graph, params, texts, fanout, rng);
  auto bl = batch_softmax_loss<double>(bf.scores);
  auto grads = backward(bf, bl.dscores, params, texts);

  ModelParams<double> probe_params = params;
  double max_rel = 0.0;
  auto probe = [&](double& coord, double analytic) {
    const double saved = coord;
    coord = saved + eps;
    const double loss_plus = loss_at(probe_params);
    coord = saved - eps;
    const double loss_minus = loss_at(probe_params);
    coord = saved;
    const double numeric = (loss_plus - loss_minus) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic) + std::abs(numeric));
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  };

  for (const auto& [row, g] : grads.token_rows)
    for (int c = 0; c < params.dim; ++c) probe(probe_params.token_embeddings(row, c), g[c]);
  for (std::size_t l = 0; l < grads.attention.size(); ++l)
    for (int c = 0; c < grads.attention[l].size(); ++c)
      probe(probe_params.attention[l][c], grads.attention[l][c]);
  return max_rel;
}

TrainResult train(const TrainConfig& cfg, const BipartiteGraph& graph, const ClickLog& log,
                  const Catalog& catalog, const Vocab& vocab, std::ostream* metrics_log,
                  const std::function<void(int, const ModelParams<float>&)>& on_epoch) {
  if (cfg.batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
  if (log.records.size() < 2) throw std::invalid_argument("need at least 2 training records");

  TrainResult result;
  result.params = init_params<float>(vocab.size(), cfg.dim, cfg.layers, cfg.variant, cfg.seed,
                                     0.2f);
  auto opt = init_opt_state(result.params);
  const CorpusTokens texts{&log.query_tokens, &catalog.title_tokens};

  Rng rng(mix_seed(cfg.seed, 1));
  std::vector<std::uint32_t> order(log.records.size());
  std::iota(order.begin(), order.end(), 0u);

  std::vector<ClickRecord> batch;
  std::int64_t global_step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0, sec_sum = 0.0;
    int steps = 0;
    for (std::size_t at = 0; at + 2 <= order.size(); at += cfg.batch_size) {
      const auto take = std::min<std::size_t>(cfg.batch_size, order.size() - at);
      if (take < 2) break;
      batch.clear();
      for (std::size_t i = 0; i < take; ++i) batch.push_back(log.records[order[at + i]]);

      const auto t0 = std::chrono::steady_clock::now();
      auto bf = batch_forward<float>(batch, graph, result.params, texts, cfg.fanout, rng);
      auto bl = batch_softmax_loss<float>(bf.scores);
      ++global_step;
      if (!std::isfinite(bl.loss))
        throw std::runtime_error("non-finite loss at step " + std::to_string(global_step));
      auto grads = backward(bf, bl.dscores, result.params, texts);
      adam_step(result.params, grads, opt, cfg.learning_rate, cfg.beta1, cfg.beta2,
                cfg.adam_eps);
      const auto t1 = std::chrono::steady_clock::now();
      const double sec = std::chrono::duration<double>(t1 - t0).count();

      loss_sum += bl.loss;
      sec_sum += sec;
      ++steps;
      if (metrics_log) {
        char line[128];
        std::snprintf(line, sizeof(line), "%d\t%lld\t%.6f\t%.6f\n", epoch,
                      static_cast<long long>(global_step), static_cast<double>(bl.loss), sec);
        *metrics_log << line;
      }
    }
    if (steps == 0) throw std::runtime_error("no full batch fits the training log");
    result.epochs.push_back({epoch, loss_sum / steps, sec_sum / steps});
    if (on_epoch && cfg.eval_cadence > 0 &&
        (epoch % cfg.eval_cadence == 0 || epoch == cfg.epochs))
      on_epoch(epoch, result.params);
  }
  return result;
}

}  // namespace sgc
