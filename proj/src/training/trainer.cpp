#include "physdiff/training/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace physdiff {

void TrainConfig::validate() const
{
  auto fail = [](std::string const &m) { throw ConfigError("train config: " + m); };
  if (epochs < 1) { fail("epochs must be >= 1"); }
  if (batch_size < 1) { fail("batch_size must be >= 1"); }
  if (!(lr > 0.0) || !std::isfinite(lr)) { fail("lr must be positive"); }
  if (lr_min < 0.0 || lr_min > lr) { fail("lr_min must lie in [0, lr]"); }
  if (max_steps < 0) { fail("max_steps must be >= 0"); }
  if (!(clip_norm > 0.0)) { fail("clip_norm must be positive"); }
}

void write_metrics_line(std::ostream &out, StepMetrics const &m)
{
  nlohmann::json j = {{"step", m.step},
                      {"epoch", m.epoch},
                      {"lr", m.lr},
                      {"grad_norm", m.grad_norm},
                      {"L_total", m.loss.total},
                      {"L_diff", m.loss.diff},
                      {"L_traj", m.loss.traj},
                      {"L_wind", m.loss.wind},
                      {"L_pres", m.loss.pres},
                      {"log_sigma_diff", m.s_diff},
                      {"log_sigma_recon", m.s_recon}};
  out << j.dump() << '\n';
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch)
{
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).derive(static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    auto const j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;
constexpr std::uint64_t kValStream = 0x76616cULL;
} // namespace

Trainer::Trainer(PhysDiffModel &model, TrainConfig cfg)
  : model_(model)
  , cfg_(cfg)
  , adam_(model.params())
{
  cfg_.validate();
  opts_.routing = cfg_.routing;
  opts_.latent_stop_grad = cfg_.latent_stop_grad;
}

std::vector<NoiseDraw> Trainer::draws_for(std::size_t batch_size) const
{
  Rng rng = Rng(cfg_.seed).derive(kNoiseStream).derive(static_cast<std::uint64_t>(step_));
  std::vector<NoiseDraw> draws;
  draws.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    draws.push_back(draw_noise(model_, rng));
  }
  return draws;
}

StepMetrics Trainer::step(std::vector<Sample const *> const &batch, double lr)
{
  StepMetrics m;
  m.step = step_;
  m.lr = lr;
  m.loss = batch_gradient(model_, batch, draws_for(batch.size()), opts_);
  m.grad_norm = clip_grad_norm(model_.params(), cfg_.clip_norm);
  if (!std::isfinite(m.grad_norm)) {
    throw DivergenceError("non-finite gradient norm at step " + std::to_string(step_));
  }
  adam_.step(model_.params(), lr);
  m.s_diff = model_.log_sigma_diff().value(0, 0);
  m.s_recon = model_.log_sigma_recon().value(0, 0);
  ++step_;
  return m;
}

double validation_loss(PhysDiffModel const &model, std::vector<Sample> const &set, std::uint64_t seed)
{
  if (set.empty()) { throw ContractError("validation set is empty"); }
  Rng rng = Rng(seed).derive(kValStream);
  std::vector<Sample const *> all;
  std::vector<NoiseDraw> draws;
  for (auto const &s : set) {
    all.push_back(&s);
    draws.push_back(draw_noise(model, rng));
  }
  return batch_loss(model, all, draws).total;
}

TrainResult train(PhysDiffModel &model, std::vector<Sample> const &train_set, std::vector<Sample> const &val_set,
                  TrainConfig const &cfg, std::ostream *metrics_log, StepCallback const &on_step,
                  EpochCallback const &on_epoch)
{
  cfg.validate();
  if (train_set.empty()) { throw ContractError("training set is empty"); }
  std::size_t const bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train_set.size());
  long const per_epoch = static_cast<long>((train_set.size() + bs - 1) / bs);
  long total = per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) { total = std::min(total, cfg.max_steps); }

  Trainer trainer(model, cfg);
  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < cfg.epochs && trainer.steps_taken() < total; ++epoch) {
    auto const order = epoch_order(train_set.size(), cfg.seed, epoch);
    for (std::size_t start = 0; start < order.size() && trainer.steps_taken() < total; start += bs) {
      std::vector<Sample const *> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      double const lr = cosine_lr(trainer.steps_taken(), total, cfg.lr, cfg.lr_min);
      StepMetrics m = trainer.step(batch, lr);
      m.epoch = epoch;
      if (metrics_log != nullptr) { write_metrics_line(*metrics_log, m); }
      if (on_step) { on_step(m); }
      result.last = m;
    }
    if (!val_set.empty()) {
      double const v = validation_loss(model, val_set, cfg.seed);
      result.val_losses.push_back(v);
      bool const improved = v < best;
      if (improved) {
        best = v;
        result.best_epoch = epoch;
      }
      if (on_epoch) { on_epoch(epoch, v, improved); }
    }
  }
  result.steps = trainer.steps_taken();
  return result;
}

double train_autoencoder(PhysDiffModel &model, std::vector<Sample> const &set, long steps, int batch_size, double lr,
                         std::uint64_t seed)
{
  if (set.empty()) { throw ContractError("autoencoder set is empty"); }
  if (steps < 1 || batch_size < 1) { throw ConfigError("autoencoder: steps and batch_size must be >= 1"); }
  LatentCodec const &codec = model.codec();
  Adam adam(model.params());
  std::size_t const bs = std::min<std::size_t>(static_cast<std::size_t>(batch_size), set.size());
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  int epoch = 0;
  for (long step = 0; step < steps; ++step) {
    model.params().zero_grad();
    for (std::size_t b = 0; b < bs; ++b) {
      if (cursor == order.size()) {
        order = epoch_order(set.size(), seed, epoch++);
        cursor = 0;
      }
      Tensor const &x0 = set[order[cursor++]].target;
      LatentCodec::EncodeCache ec;
      LatentCodec::DecodeCache dc;
      Tensor const x_hat = codec.decode(codec.encode(x0, ec), dc);
      Tensor const dx = (2.0 / static_cast<double>(x0.size() * bs)) * (x_hat - x0);
      codec.encode_backward(ec, codec.decode_backward(dc, dx));
    }
    clip_grad_norm(model.params(), 1.0);
    adam.step(model.params(), cosine_lr(step, steps, lr, 0.0));
  }
  double mse = 0.0;
  for (auto const &s : set) {
    mse += (codec.decode(codec.encode(s.target)) - s.target).squaredNorm() / static_cast<double>(s.target.size());
  }
  return mse / static_cast<double>(set.size());
}

} // namespace physdiff
