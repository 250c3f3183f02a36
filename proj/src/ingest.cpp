#include "sgc/ingest.hpp"

#include "sgc/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

namespace sgc {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  return out;
}

// Reads one line, stripping a trailing carriage return.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::vector<std::string_view> split_fields(const std::string& line) {
  std::vector<std::string_view> fields;
  std::string_view rest = line;
  while (true) {
    auto tab = rest.find('\t');
    if (tab == std::string_view::npos) {
      fields.push_back(rest);
      break;
    }
    fields.push_back(rest.substr(0, tab));
    rest.remove_prefix(tab + 1);
  }
  return fields;
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t lineno,
                            const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + what);
}

}  // namespace

Catalog parse_catalog(const std::filesystem::path& path) {
  auto in = open_input(path);
  Catalog catalog;
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) fail_line(path, lineno, "expected 2 tab-separated columns");
    if (fields[0].empty()) fail_line(path, lineno, "empty external id");
    std::string id(fields[0]);
    if (catalog.index_of.contains(id)) fail_line(path, lineno, "duplicate external id '" + id + "'");
    catalog.index_of.emplace(id, catalog.size());
    catalog.external_ids.push_back(std::move(id));
    catalog.titles.emplace_back(fields[1]);
  }
  catalog.title_tokens.resize(catalog.size());
  return catalog;
}

std::vector<std::string> read_click_query_texts(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> texts;
  std::string line;
  while (next_line(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    texts.emplace_back(line.substr(0, tab == std::string::npos ? line.size() : tab));
  }
  return texts;
}

ClickLog parse_clicks(const std::filesystem::path& path, const Catalog& catalog,
                      const Vocab& vocab) {
  auto in = open_input(path);
  ClickLog log;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> counts;
  std::string line;
  std::size_t lineno = 0;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 3) fail_line(path, lineno, "expected 3 tab-separated columns");

    std::int64_t count = 0;
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), count);
    if (ec != std::errc() || ptr != fields[2].data() + fields[2].size())
      fail_line(path, lineno, "count is not an integer: '" + std::string(fields[2]) + "'");
    if (count <= 0) fail_line(path, lineno, "count must be positive");

    auto item_it = catalog.index_of.find(std::string(fields[1]));
    if (item_it == catalog.index_of.end()) {
      ++log.dropped_rows;
      continue;
    }

    std::string query_text(fields[0]);
    auto [query_it, inserted] =
        log.query_index.try_emplace(std::move(query_text), log.num_queries());
    if (inserted) {
      log.query_texts.push_back(query_it->first);
      log.query_freq.push_back(0);
    }
    counts[{query_it->second, item_it->second}] += static_cast<std::uint64_t>(count);
  }

  log.records.reserve(counts.size());
  for (const auto& [pair, count] : counts) {
    log.records.push_back({pair.first, pair.second, count});
    log.query_freq[pair.first] += count;
  }
  log.query_tokens.resize(log.num_queries());
  tokenize_log(log, vocab);
  return log;
}

void tokenize_catalog(Catalog& catalog, const Vocab& vocab) {
  catalog.title_tokens.resize(catalog.size());
  for (std::uint32_t i = 0; i < catalog.size(); ++i)
    catalog.title_tokens[i] = tokenize(catalog.titles[i], vocab);
}

void tokenize_log(ClickLog& log, const Vocab& vocab) {
  log.query_tokens.resize(log.num_queries());
  for (std::uint32_t q = 0; q < log.num_queries(); ++q)
    log.query_tokens[q] = tokenize(log.query_texts[q], vocab);
}

void write_catalog(const Catalog& catalog, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (std::uint32_t i = 0; i < catalog.size(); ++i)
    out << catalog.external_ids[i] << '\t' << catalog.titles[i] << '\n';
}

void write_clicks(const ClickLog& log, const Catalog& catalog,
                  const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& rec : log.records)
    out << log.query_texts[rec.query] << '\t' << catalog.external_ids[rec.item] << '\t'
        << rec.count << '\n';
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.n_clusters < 1) throw std::invalid_argument("n_clusters must be >= 1");
  if (cfg.noise_eps < 0.0 || cfg.noise_eps > 1.0)
    throw std::invalid_argument("noise_eps must lie in [0, 1]");
  if (cfg.zipf_s <= 0.0) throw std::invalid_argument("zipf_s must be > 0");
  if (cfg.n_queries < 1 || cfg.n_items < 1)
    throw std::invalid_argument("need at least one query and one item");

  SyntheticData data;
  data.catalog.external_ids.reserve(cfg.n_items);
  data.catalog.titles.reserve(cfg.n_items);
  for (std::uint32_t i = 0; i < cfg.n_items; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "I%06u", i);
    data.catalog.index_of.emplace(id, i);
    data.catalog.external_ids.emplace_back(id);
    data.catalog.titles.push_back("c" + std::to_string(synthetic_cluster(i, cfg.n_clusters)) +
                                  " i" + std::to_string(i));
  }
  data.catalog.title_tokens.resize(cfg.n_items);

  ClickLog& log = data.log;
  log.query_texts.reserve(cfg.n_queries);
  for (std::uint32_t q = 0; q < cfg.n_queries; ++q) {
    std::string text = "c" + std::to_string(synthetic_cluster(q, cfg.n_clusters)) + " q" +
                       std::to_string(q);
    log.query_index.emplace(text, q);
    log.query_texts.push_back(std::move(text));
  }
  log.query_freq.assign(cfg.n_queries, 0);
  log.query_tokens.resize(cfg.n_queries);

  // Zipf over query rank: P(rank r) proportional to r^-s, rank = index + 1.
  std::vector<double> cum(cfg.n_queries);
  double total = 0.0;
  for (std::uint32_t r = 0; r < cfg.n_queries; ++r) {
    total += std::pow(static_cast<double>(r) + 1.0, -cfg.zipf_s);
    cum[r] = total;
  }

  Rng rng(cfg.seed);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> counts;
  for (std::uint64_t e = 0; e < cfg.n_clicks; ++e) {
    const double u = rng.next_double() * total;
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    const auto q = static_cast<std::uint32_t>(it - cum.begin());

    std::uint32_t item;
    if (rng.next_double() < cfg.noise_eps) {
      item = static_cast<std::uint32_t>(rng.next_below(cfg.n_items));
    } else {
      const std::uint32_t c = synthetic_cluster(q, cfg.n_clusters);
      const std::uint32_t in_cluster =
          cfg.n_items / cfg.n_clusters + (c < cfg.n_items % cfg.n_clusters ? 1 : 0);
      if (in_cluster == 0) {
        item = static_cast<std::uint32_t>(rng.next_below(cfg.n_items));
      } else {
        const auto j = static_cast<std::uint32_t>(rng.next_below(in_cluster));
        item = c + j * cfg.n_clusters;
      }
    }
    ++counts[{q, item}];
  }

  log.records.reserve(counts.size());
  for (const auto& [pair, count] : counts) {
    log.records.push_back({pair.first, pair.second, count});
    log.query_freq[pair.first] += count;
  }
  return data;
}

TrainEvalSplit split_train_eval(const ClickLog& log, double eval_fraction, std::uint64_t seed) {
  if (eval_fraction <= 0.0 || eval_fraction >= 1.0)
    throw std::invalid_argument("eval_fraction must lie in (0, 1)");

  std::vector<std::uint32_t> order(log.records.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n_eval = static_cast<std::size_t>(
      std::floor(eval_fraction * static_cast<double>(log.records.size())));

  TrainEvalSplit split;
  std::vector<bool> held_out(log.records.size(), false);
  split.eval_pairs.reserve(n_eval);
  for (std::size_t i = 0; i < n_eval; ++i) {
    const auto& rec = log.records[order[i]];
    split.eval_pairs.push_back({rec.query, rec.item});
    held_out[order[i]] = true;
  }

  ClickLog& train = split.train;
  train.query_texts = log.query_texts;
  train.query_tokens = log.query_tokens;
  train.query_index = log.query_index;
  train.dropped_rows = log.dropped_rows;
  train.query_freq.assign(log.num_queries(), 0);
  train.records.reserve(log.records.size() - n_eval);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    if (held_out[i]) continue;
    train.records.push_back(log.records[i]);
    train.query_freq[log.records[i].query] += log.records[i].count;
  }
  return split;
}

}  // namespace sgc
