#pragma once

#include "physdiff/data/synth.hpp"
#include "physdiff/model.hpp"
#include "physdiff/training/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace physdiff {

/// Everything a run depends on besides the data files: generator settings,
/// split fractions, model shape, diffusion schedule, optimizer settings,
/// evaluation settings and the seed.
///
/// The text form is INI with sections [run], [data], [model], [diffusion],
/// [train] and [eval]. Every key is addressable as "section.key".
struct RunConfig
{
  std::uint64_t seed = 0;
  std::string data_dir; // dataset directory; empty means synthesize from [data]

  SynthConfig synth;
  double train_frac = 0.7;
  double val_frac = 0.15;

  ModelConfig model;
  TrainConfig train = desk_train_defaults();

  std::size_t members = 50;
  int leads = 0; // 0 means the full horizon

  /// Batch 16, lr 3e-3, 2000 steps: the budget the desk-scale model is tuned for.
  static TrainConfig desk_train_defaults();

  /// Sets one field from text; throws ConfigError for unknown keys or bad values.
  void set(std::string const &key, std::string const &value);
  /// Applies "section.key=value".
  void apply_override(std::string const &assignment);
  std::string get(std::string const &key) const;

  /// All keys in canonical order.
  static std::vector<std::string> keys();

  void validate() const;
  std::string to_ini() const;
};

RunConfig parse_run_config(std::string const &ini_text);
RunConfig load_run_config(std::filesystem::path const &path);

} // namespace physdiff
