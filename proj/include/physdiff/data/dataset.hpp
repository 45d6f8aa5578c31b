#pragma once

#include "synth.hpp"
#include "track.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace physdiff {

/// Environment blob: magic "PDEF", then little-endian u32 version, C, H, W,
/// count, followed by count * C*H*W little-endian float32 values.
inline constexpr std::uint32_t kEnvBlobVersion = 1;

void write_env_blob(std::filesystem::path const &path, std::vector<EnvField> const &fields);

struct EnvBlob
{
  Index channels = 0, height = 0, width = 0;
  std::vector<Tensor> grids;
};

EnvBlob read_env_blob(std::filesystem::path const &path);

/// Dataset directory layout:
///   tracks.csv       best-track rows, tracks in split-key order
///   env_hist.pdef    one historical field per CSV row, same order
///   env_fut.pdef     one forecast field per CSV row, same order
///   manifest.json    generator config, seed, counts, split boundaries
void save_dataset(std::filesystem::path const &dir, std::vector<Track> const &tracks, nlohmann::json const &manifest);

/// Loads tracks.csv and, when present, both env blobs. Without blobs the
/// tracks carry no environment and windows fall back to zero fields.
std::vector<Track> load_dataset(std::filesystem::path const &dir);

nlohmann::json synth_manifest(SynthConfig const &cfg, std::uint64_t seed, std::vector<Track> const &tracks,
                              double train_frac, double val_frac);

std::string read_text_file(std::filesystem::path const &path);
void write_text_file(std::filesystem::path const &path, std::string const &text);

} // namespace physdiff
