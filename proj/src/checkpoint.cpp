#include "sgc/checkpoint.hpp"

#include "sgc/binio.hpp"

#include <fstream>
#include <sstream>

namespace sgc {

namespace {

constexpr char kCheckpointMagic[5] = "SGCN";
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

std::string render_config_echo(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "batch=" << cfg.batch_size << "\n"
      << "epochs=" << cfg.epochs << "\n"
      << "lr=" << cfg.learning_rate << "\n"
      << "beta1=" << cfg.beta1 << "\n"
      << "beta2=" << cfg.beta2 << "\n"
      << "adam_eps=" << cfg.adam_eps << "\n"
      << "d=" << cfg.dim << "\n"
      << "layers=" << cfg.layers << "\n"
      << "fanout=" << cfg.fanout << "\n"
      << "max_neighbors=" << cfg.max_neighbors << "\n"
      << "variant=" << to_string(cfg.variant) << "\n"
      << "seed=" << cfg.seed << "\n"
      << "negatives=in_batch\n"
      << "eval_cadence=" << cfg.eval_cadence << "\n";
  return out.str();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto& params = ckpt.params;
  if (params.vocab_size() != ckpt.vocab.size())
    throw std::invalid_argument("checkpoint vocab size does not match the embedding table");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_magic(out, kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(params.variant));
  write_u32(out, static_cast<std::uint32_t>(params.dim));
  write_u32(out, static_cast<std::uint32_t>(params.layers));
  write_f32(out, params.leaky_slope);

  write_u32(out, ckpt.vocab.size());
  for (std::uint32_t t = 1; t < ckpt.vocab.size(); ++t) {
    write_string(out, ckpt.vocab.tokens[t]);
    write_u64(out, ckpt.vocab.counts[t]);
  }

  for (std::uint32_t r = 0; r < params.vocab_size(); ++r)
    for (int c = 0; c < params.dim; ++c) write_f32(out, params.token_embeddings(r, c));
  for (const auto& w : params.attention)
    for (int c = 0; c < w.size(); ++c) write_f32(out, w[c]);

  write_u64(out, ckpt.seed);
  write_string(out, ckpt.config_echo);
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  expect_magic(in, kCheckpointMagic, "checkpoint");
  const auto version = read_u32(in);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint format version " + std::to_string(version) + " is not supported");

  Checkpoint ckpt;
  const auto variant_tag = read_u32(in);
  if (variant_tag > 2) throw IoError("checkpoint has an unknown variant tag");
  ckpt.params.variant = static_cast<Variant>(variant_tag);
  ckpt.params.dim = static_cast<int>(read_u32(in));
  ckpt.params.layers = static_cast<int>(read_u32(in));
  ckpt.params.leaky_slope = read_f32(in);
  if (ckpt.params.dim < 1 || ckpt.params.layers < 0)
    throw IoError("checkpoint has inconsistent shape fields");

  const auto vocab_size = read_u32(in);
  if (vocab_size < 1) throw IoError("checkpoint has an empty vocab");
  ckpt.vocab.tokens.reserve(vocab_size);
  ckpt.vocab.counts.reserve(vocab_size);
  ckpt.vocab.tokens.emplace_back();
  ckpt.vocab.counts.push_back(0);
  for (std::uint32_t t = 1; t < vocab_size; ++t) {
    std::string token = read_string(in);
    const auto count = read_u64(in);
    ckpt.vocab.ids.emplace(token, t);
    ckpt.vocab.tokens.push_back(std::move(token));
    ckpt.vocab.counts.push_back(count);
  }

  ckpt.params.token_embeddings.resize(vocab_size, ckpt.params.dim);
  for (std::uint32_t r = 0; r < vocab_size; ++r)
    for (int c = 0; c < ckpt.params.dim; ++c) ckpt.params.token_embeddings(r, c) = read_f32(in);
  if (ckpt.params.uses_attention()) {
    ckpt.params.attention.resize(ckpt.params.layers);
    for (auto& w : ckpt.params.attention) {
      w.resize(2 * ckpt.params.dim);
      for (int c = 0; c < w.size(); ++c) w[c] = read_f32(in);
    }
  }

  ckpt.seed = read_u64(in);
  ckpt.config_echo = read_string(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw IoError("checkpoint has trailing bytes");
  return ckpt;
}

}  // namespace sgc
