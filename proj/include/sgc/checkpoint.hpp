#pragma once

#include "sgc/model.hpp"
#include "sgc/training.hpp"

#include <filesystem>
#include <string>

namespace sgc {

// Model artifact: everything needed to embed at serving time, plus the
// training seed and a key=value echo of the config for provenance.
struct Checkpoint {
  ModelParams<float> params;
  Vocab vocab;
  std::uint64_t seed = 0;
  std::string config_echo;
};

std::string render_config_echo(const TrainConfig& cfg);

// Binary "SGCN" file; save/load round-trips parameters bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sgc
