#pragma once

#include "physdiff/training/objective.hpp"
#include "physdiff/training/optim.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace physdiff {

struct TrainConfig
{
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-4;
  double lr_min = 0.0;
  /// Caps the number of optimizer steps; 0 means epochs * batches per epoch.
  long max_steps = 0;
  double clip_norm = 1.0;
  bool routing = true;
  bool latent_stop_grad = true;
  /// Governs batch order and noise draws only, so models with different
  /// architectures see identical batches in identical order.
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepMetrics
{
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  double grad_norm = 0.0;
  BatchLoss loss;
  double s_diff = 0.0;
  double s_recon = 0.0;
};

/// One JSON object per line.
void write_metrics_line(std::ostream &out, StepMetrics const &m);

/// Shuffled order of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

class Trainer
{
public:
  Trainer(PhysDiffModel &model, TrainConfig cfg);

  /// Noise draws for the next step, taken from the trainer's step counter.
  std::vector<NoiseDraw> draws_for(std::size_t batch_size) const;

  /// Gradient of the batch, clipping, one Adam update at the given rate.
  StepMetrics step(std::vector<Sample const *> const &batch, double lr);

  long steps_taken() const { return step_; }
  ObjectiveOptions const &options() const { return opts_; }
  ObjectiveOptions &options() { return opts_; }

private:
  PhysDiffModel &model_;
  TrainConfig cfg_;
  ObjectiveOptions opts_;
  Adam adam_;
  long step_ = 0;
};

struct TrainResult
{
  long steps = 0;
  std::vector<double> val_losses; // one per epoch when validation data is given
  int best_epoch = -1;
  StepMetrics last;
};

using StepCallback = std::function<void(StepMetrics const &)>;
using EpochCallback = std::function<void(int epoch, double val_loss, bool best)>;

/// Trains with cosine-annealed Adam. Validation loss uses fixed noise draws so
/// epochs are comparable.
TrainResult train(PhysDiffModel &model, std::vector<Sample> const &train_set, std::vector<Sample> const &val_set,
                  TrainConfig const &cfg, std::ostream *metrics_log = nullptr, StepCallback const &on_step = {},
                  EpochCallback const &on_epoch = {});

/// Mean uncertainty weighted loss over a set with noise drawn from seed.
double validation_loss(PhysDiffModel const &model, std::vector<Sample> const &set, std::uint64_t seed);

/// Fits only the latent codec on decode(encode(x0)) = x0 and returns the final
/// mean squared error over the whole set.
double train_autoencoder(PhysDiffModel &model, std::vector<Sample> const &set, long steps, int batch_size, double lr,
                         std::uint64_t seed);

} // namespace physdiff
