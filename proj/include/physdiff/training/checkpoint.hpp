#pragma once

#include "physdiff/model.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace physdiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Contents of a PDCK file. Layout, all little-endian:
///   "PDCK" | u32 version | u64 config hash | u32 len, model config text |
///   NormStats (5 f64, u32 C, C means, C stds) | u32 param count |
///   per param: u32 len, name | u32 rows | u32 cols | rows*cols f64
struct Checkpoint
{
  ModelConfig config;
  NormStats stats;
  std::vector<std::pair<std::string, Tensor>> params;
};

/// Parses the text written by ModelConfig::canonical().
ModelConfig parse_model_config(std::string const &canonical);

void save_checkpoint(std::filesystem::path const &path, PhysDiffModel const &model, NormStats const &stats);
/// Throws CheckpointError on bad magic, version, hash, truncation or trailing bytes.
Checkpoint read_checkpoint(std::filesystem::path const &path);
/// Copies parameters into a model built with the same configuration.
void load_parameters(PhysDiffModel &model, Checkpoint const &ckpt);
/// Builds the model described by the checkpoint and loads its parameters.
std::unique_ptr<PhysDiffModel> load_model(std::filesystem::path const &path, NormStats *stats = nullptr);

} // namespace physdiff
