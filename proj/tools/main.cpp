#include "sgc/checkpoint.hpp"
#include "sgc/eval.hpp"
#include "sgc/graph.hpp"
#include "sgc/ingest.hpp"
#include "sgc/retrieval.hpp"
#include "sgc/training.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace sgc;

struct CommonFlags {
  std::uint64_t seed = 42;
  int dim = 32;
  int layers = 2;
  int fanout = 10;
  std::uint32_t max_neighbors = 50;
  std::string variant = "mean";
  int epochs = 5;
  double lr = 1e-2;
  int batch = 64;
  int pool = 100;
  bool deterministic = false;
};

// All execution is single-threaded, so --deterministic is always honored;
// the flag is accepted for pipeline compatibility.
void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--seed", f.seed, "Seed for data splits, init and sampling");
  cmd->add_option("--d", f.dim, "Embedding dimension");
  cmd->add_option("--layers", f.layers, "Graph convolution layers (L)");
  cmd->add_option("--fanout", f.fanout, "Neighbors sampled per node (k)");
  cmd->add_option("--max-neighbors", f.max_neighbors, "Neighborhood prune cap");
  cmd->add_option("--variant", f.variant, "Aggregator variant")
      ->check(CLI::IsMember({"mean", "attention", "mask"}));
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--batch", f.batch, "Mini-batch size");
  cmd->add_option("--pool", f.pool, "Negative pool size per eval pair");
  cmd->add_flag("--deterministic", f.deterministic, "Single-threaded deterministic mode");
}

struct LoadedData {
  Catalog catalog;
  ClickLog log;
};

LoadedData load_corpus(const std::string& catalog_path, const std::string& clicks_path,
                       const Vocab& vocab) {
  LoadedData data;
  data.catalog = parse_catalog(catalog_path);
  tokenize_catalog(data.catalog, vocab);
  data.log = parse_clicks(clicks_path, data.catalog, vocab);
  if (data.log.dropped_rows > 0)
    std::cerr << "warning: dropped " << data.log.dropped_rows
              << " click rows referencing unknown items\n";
  return data;
}

int run_synth(const SyntheticConfig& cfg, const std::string& out_catalog,
              const std::string& out_clicks) {
  auto data = generate_synthetic(cfg);
  write_catalog(data.catalog, out_catalog);
  write_clicks(data.log, data.catalog, out_clicks);
  std::cerr << "wrote " << data.catalog.size() << " items to " << out_catalog << ", "
            << data.log.records.size() << " click records (" << data.log.num_queries()
            << " queries) to " << out_clicks << "\n";
  return 0;
}

int run_build(const std::string& catalog_path, const std::string& clicks_path,
              const std::string& out_graph, std::uint32_t max_neighbors) {
  Vocab empty_vocab = build_vocab({}, 1);  // tokens are irrelevant to the graph
  auto data = load_corpus(catalog_path, clicks_path, empty_vocab);
  auto graph = prune_neighbors(build_graph(data.log), max_neighbors);
  save_graph(graph, out_graph);
  std::cerr << "wrote graph (" << graph.num_queries << " queries, " << graph.num_items
            << " items, " << graph.query_to_item.neighbors.size() << " edges per side cap "
            << max_neighbors << ") to " << out_graph << "\n";
  return 0;
}

int run_train(const CommonFlags& flags, const std::string& catalog_path,
              const std::string& clicks_path, const std::string& out_checkpoint,
              const std::string& metrics_path, double eval_fraction,
              std::uint64_t min_count, int eval_cadence) {
  Catalog catalog = parse_catalog(catalog_path);
  std::vector<std::string> texts = catalog.titles;
  for (auto& q : read_click_query_texts(clicks_path)) texts.push_back(std::move(q));
  const Vocab vocab = build_vocab(texts, min_count);
  tokenize_catalog(catalog, vocab);
  ClickLog log = parse_clicks(clicks_path, catalog, vocab);
  if (log.dropped_rows > 0)
    std::cerr << "warning: dropped " << log.dropped_rows
              << " click rows referencing unknown items\n";

  auto split = split_train_eval(log, eval_fraction, flags.seed);
  auto graph = prune_neighbors(build_graph(split.train), flags.max_neighbors);

  TrainConfig cfg;
  cfg.batch_size = flags.batch;
  cfg.epochs = flags.epochs;
  cfg.learning_rate = flags.lr;
  cfg.dim = flags.dim;
  cfg.layers = flags.layers;
  cfg.fanout = flags.fanout;
  cfg.max_neighbors = flags.max_neighbors;
  cfg.variant = parse_variant(flags.variant);
  cfg.seed = flags.seed;
  cfg.eval_cadence = eval_cadence;

  std::ofstream metrics;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path, std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot open " + metrics_path + " for writing");
  }

  const EvalData eval_data{&split.train, &catalog};
  auto monitor = [&](int epoch, const ModelParams<float>& params) {
    if (split.eval_pairs.empty()) return;
    const int ks[] = {1, 10};
    auto acc = topk_accuracy(params, graph, eval_data, split.eval_pairs, flags.pool, ks,
                             EvalConfig{}.pool_seed);
    std::cerr << "epoch " << epoch << ": held-out top1=" << acc[0] << " top10=" << acc[1]
              << "\n";
  };

  auto result = train(cfg, graph, split.train, catalog, vocab,
                      metrics.is_open() ? &metrics : nullptr, monitor);
  for (const auto& e : result.epochs)
    std::cerr << "epoch " << e.epoch << ": mean loss " << e.mean_loss << ", "
              << e.mean_sec_per_step << " s/step\n";

  save_checkpoint({std::move(result.params), vocab, flags.seed, render_config_echo(cfg)},
                  out_checkpoint);
  std::cerr << "wrote checkpoint to " << out_checkpoint << "\n";
  return 0;
}

int run_eval(const CommonFlags& flags, const std::string& catalog_path,
             const std::string& clicks_path, const std::string& graph_path,
             const std::string& checkpoint_path, const std::string& baseline_path,
             double eval_fraction, const std::string& metrics_path,
             const std::string& report_path) {
  auto ckpt = load_checkpoint(checkpoint_path);
  auto data = load_corpus(catalog_path, clicks_path, ckpt.vocab);
  auto split = split_train_eval(data.log, eval_fraction, flags.seed);
  auto graph = load_graph(graph_path);

  std::optional<Checkpoint> baseline;
  if (!baseline_path.empty()) baseline = load_checkpoint(baseline_path);

  EvalConfig cfg;
  cfg.pool_size = flags.pool;
  cfg.negatives_per_pos = flags.pool;
  cfg.fanout = flags.fanout;
  auto report = evaluate(ckpt.params, baseline ? &baseline->params : nullptr, graph,
                         split.train, data.catalog, split.eval_pairs, cfg);
  if (!metrics_path.empty()) report.sec_per_step = mean_sec_per_step(metrics_path);

  const std::string text = render_report(report);
  if (report_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + report_path + " for writing");
    out << text;
    std::cerr << "wrote report to " << report_path << "\n";
  }
  return 0;
}

int run_search(const CommonFlags& flags, const std::string& catalog_path,
               const std::string& clicks_path, const std::string& graph_path,
               const std::string& checkpoint_path, const std::string& index_path,
               bool rebuild, const std::string& query, int topk) {
  auto ckpt = load_checkpoint(checkpoint_path);
  auto data = load_corpus(catalog_path, clicks_path, ckpt.vocab);
  auto graph = load_graph(graph_path);
  const auto fingerprint = fingerprint_files({checkpoint_path, graph_path});

  ItemIndex index;
  if (rebuild || !std::filesystem::exists(index_path)) {
    index = build_index(ckpt.params, graph, data.catalog, data.log, ckpt.vocab, flags.fanout,
                        fingerprint);
    save_index(index, index_path);
    std::cerr << "wrote index (" << index.size() << " items) to " << index_path << "\n";
  } else {
    index = load_index(index_path);
    if (index.fingerprint != fingerprint)
      throw std::runtime_error(index_path +
                               " was built from different artifacts; rerun with --rebuild");
  }

  if (!query.empty()) {
    auto results = search(index, ckpt.params, graph, data.log, data.catalog, ckpt.vocab, query,
                          topk, flags.fanout);
    for (std::size_t i = 0; i < results.size(); ++i) {
      char line[256];
      std::snprintf(line, sizeof(line), "%zu\t%s\t%.6f\n", i + 1,
                    results[i].external_id.c_str(), static_cast<double>(results[i].score));
      std::cout << line;
    }
  }
  return 0;
}

int run_gradcheck(const CommonFlags& flags, int batch_size) {
  SyntheticConfig synth;
  synth.n_clusters = 3;
  synth.n_queries = 8;
  synth.n_items = 6;
  synth.n_clicks = 60;
  synth.noise_eps = 0.2;
  synth.seed = flags.seed;
  auto data = generate_synthetic(synth);

  std::vector<std::string> texts = data.catalog.titles;
  texts.insert(texts.end(), data.log.query_texts.begin(), data.log.query_texts.end());
  const Vocab vocab = build_vocab(texts, 1);
  tokenize_catalog(data.catalog, vocab);
  tokenize_log(data.log, vocab);

  auto graph = prune_neighbors(build_graph(data.log), flags.max_neighbors);
  const int dim = std::min(flags.dim, 8);  // f64 checker contract: small instances
  // O(1) scale keeps gradients above the finite-difference noise floor.
  auto params = random_params<double>(vocab.size(), dim, flags.layers,
                                      parse_variant(flags.variant), mix_seed(flags.seed, 7), 1.5);

  std::vector<ClickRecord> batch(data.log.records.begin(),
                                 data.log.records.begin() +
                                     std::min<std::size_t>(batch_size, data.log.records.size()));
  const CorpusTokens tokens{&data.log.query_tokens, &data.catalog.title_tokens};
  const double err = grad_check(params, batch, graph, tokens, flags.fanout,
                                mix_seed(flags.seed, 11));

  const double threshold = parse_variant(flags.variant) == Variant::Mean ? 1e-6 : 1e-4;
  char line[64];
  std::snprintf(line, sizeof(line), "max_rel_err=%.3e\n", err);
  std::cout << line;
  return err < threshold ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-tower query/item embeddings with click-graph convolution"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override it");

  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic catalog and click log");
  SyntheticConfig synth_cfg;
  std::string out_catalog, out_clicks;
  synth->add_option("--out-catalog", out_catalog, "Catalog TSV to write")->required();
  synth->add_option("--out-clicks", out_clicks, "Clicks TSV to write")->required();
  synth->add_option("--clusters", synth_cfg.n_clusters, "Latent clusters");
  synth->add_option("--queries", synth_cfg.n_queries, "Distinct queries");
  synth->add_option("--items", synth_cfg.n_items, "Catalog items");
  synth->add_option("--clicks", synth_cfg.n_clicks, "Click events to draw");
  synth->add_option("--zipf-s", synth_cfg.zipf_s, "Zipf exponent over query rank");
  synth->add_option("--noise", synth_cfg.noise_eps, "Cross-cluster click probability");
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");

  auto* build = app.add_subcommand("build", "Build the pruned click graph file");
  std::string catalog_path, clicks_path, graph_path;
  build->add_option("--catalog", catalog_path, "Catalog TSV")->required();
  build->add_option("--clicks", clicks_path, "Clicks TSV")->required();
  build->add_option("--out-graph", graph_path, "Graph file to write")->required();
  build->add_option("--max-neighbors", flags.max_neighbors, "Neighborhood prune cap");

  auto* train_cmd = app.add_subcommand("train", "Train a checkpoint on the click log");
  std::string checkpoint_path, metrics_path;
  double eval_fraction = 0.1;
  std::uint64_t min_count = 1;
  int eval_cadence = 0;
  train_cmd->add_option("--catalog", catalog_path, "Catalog TSV")->required();
  train_cmd->add_option("--clicks", clicks_path, "Clicks TSV")->required();
  train_cmd->add_option("--out-checkpoint", checkpoint_path, "Checkpoint to write")->required();
  train_cmd->add_option("--metrics-log", metrics_path, "Per-step metrics TSV to write");
  train_cmd->add_option("--eval-fraction", eval_fraction, "Held-out record fraction");
  train_cmd->add_option("--min-count", min_count, "Vocab min corpus count");
  train_cmd->add_option("--eval-cadence", eval_cadence,
                        "Epochs between held-out accuracy reports (0 = off)");
  add_common_flags(train_cmd, flags);

  auto* eval_cmd = app.add_subcommand("eval", "Offline metrics on the held-out split");
  std::string baseline_path, report_path;
  eval_cmd->add_option("--catalog", catalog_path, "Catalog TSV")->required();
  eval_cmd->add_option("--clicks", clicks_path, "Clicks TSV")->required();
  eval_cmd->add_option("--graph", graph_path, "Serving graph file")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint to evaluate")->required();
  eval_cmd->add_option("--baseline", baseline_path, "Baseline checkpoint for error reduction");
  eval_cmd->add_option("--eval-fraction", eval_fraction, "Held-out record fraction");
  eval_cmd->add_option("--metrics-log", metrics_path, "Training metrics TSV for sec/step");
  eval_cmd->add_option("--report", report_path, "Report file (stdout when omitted)");
  add_common_flags(eval_cmd, flags);

  auto* search_cmd = app.add_subcommand("search", "Build/query the brute-force item index");
  std::string index_path, query_text;
  int topk = 10;
  bool rebuild = false;
  search_cmd->add_option("--catalog", catalog_path, "Catalog TSV")->required();
  search_cmd->add_option("--clicks", clicks_path, "Clicks TSV")->required();
  search_cmd->add_option("--graph", graph_path, "Serving graph file")->required();
  search_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint")->required();
  search_cmd->add_option("--index", index_path, "Index file (built when missing)")->required();
  search_cmd->add_flag("--rebuild", rebuild, "Rebuild the index file");
  search_cmd->add_option("--query", query_text, "Free-text query to answer");
  search_cmd->add_option("--topk", topk, "Results to return");
  add_common_flags(search_cmd, flags);

  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  int gradcheck_batch = 4;
  gradcheck_cmd->add_option("--batch-pairs", gradcheck_batch, "Pairs in the checked batch");
  add_common_flags(gradcheck_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0 through CLI11; real parse errors are usage
    // errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_cfg, out_catalog, out_clicks);
    if (build->parsed()) return run_build(catalog_path, clicks_path, graph_path,
                                          flags.max_neighbors);
    if (train_cmd->parsed())
      return run_train(flags, catalog_path, clicks_path, checkpoint_path, metrics_path,
                       eval_fraction, min_count, eval_cadence);
    if (eval_cmd->parsed())
      return run_eval(flags, catalog_path, clicks_path, graph_path, checkpoint_path,
                      baseline_path, eval_fraction, metrics_path, report_path);
    if (search_cmd->parsed())
      return run_search(flags, catalog_path, clicks_path, graph_path, checkpoint_path,
                        index_path, rebuild, query_text, topk);
    if (gradcheck_cmd->parsed()) return run_gradcheck(flags, gradcheck_batch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
