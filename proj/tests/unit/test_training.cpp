#include "helpers.hpp"

#include "physdiff/data/synth.hpp"
#include "physdiff/sampler.hpp"
#include "physdiff/training/checkpoint.hpp"
#include "physdiff/training/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace physdiff;
using physdiff::test::mat;

namespace {

struct SmallData
{
  NormStats stats;
  std::vector<Sample> samples;
};

SmallData const &small_data()
{
  static SmallData const data = [] {
    SynthConfig cfg;
    cfg.n_tracks = 20;
    auto const tracks = synth_dataset(cfg, 2);
    SmallData d;
    d.stats = compute_norm_stats(tracks);
    d.samples = make_samples(tracks, 4, 4, d.stats);
    return d;
  }();
  return data;
}

std::vector<Sample const *> first(std::size_t n)
{
  std::vector<Sample const *> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(&small_data().samples[i]);
  }
  return out;
}

bool same_params(PhysDiffModel const &a, PhysDiffModel const &b)
{
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    if (a.params()[i].name != b.params()[i].name) { return false; }
    if (!(a.params()[i].value.array() == b.params()[i].value.array()).all()) { return false; }
  }
  return true;
}

std::filesystem::path temp_file(std::string const &name)
{
  return std::filesystem::temp_directory_path() / ("physdiff_unit_" + name);
}

} // namespace

TEST_CASE("loss functions")
{
  CHECK(diffusion_loss(mat({{1, 2}}), mat({{1, 4}})) == 2.0);
  Tensor const g = diffusion_loss_grad(mat({{1, 2}}), mat({{1, 4}}));
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 2.0);

  Tensor const x0 = mat({{0, 0, 0, 0}, {0, 0, 0, 0}});
  Tensor const xh = mat({{1, 3, 2, -1}, {1, -1, 0, 2}});
  ReconLoss const r = recon_loss(xh, x0);
  CHECK(r.traj == doctest::Approx(12.0 / 4.0));
  CHECK(r.wind == doctest::Approx(4.0 / 2.0));
  CHECK(r.pres == doctest::Approx(5.0 / 2.0));
  CHECK(r.total() == doctest::Approx(7.5));

  Tensor const gw = recon_component_grad(xh, x0, 1);
  CHECK(gw.col(0).isZero(0));
  CHECK(gw.col(3).isZero(0));
  CHECK(gw(0, 2) == doctest::Approx(2.0 * 2.0 / 2.0));

  CHECK(total_loss(3.0, 5.0, 0.0, 0.0) == 4.0);
  CHECK(total_loss(0.0, 0.0, 0.3, -0.7) == doctest::Approx(-0.4));

  // gradient w.r.t. the log sigmas against central differences
  for (auto const &[ld, lr, sd, sr] : std::vector<std::array<double, 4>>{{4, 1, 0.1, -0.2}, {0.3, 2.5, -1.0, 0.7}}) {
    UncertaintyGrad const ug = total_loss_grad(ld, lr, sd, sr);
    double const h = 1e-6;
    double const fd_d = (total_loss(ld, lr, sd + h, sr) - total_loss(ld, lr, sd - h, sr)) / (2 * h);
    double const fd_r = (total_loss(ld, lr, sd, sr + h) - total_loss(ld, lr, sd, sr - h)) / (2 * h);
    CHECK(std::abs(ug.s_diff - fd_d) < 1e-6);
    CHECK(std::abs(ug.s_recon - fd_r) < 1e-6);
    CHECK(ug.s_diff == doctest::Approx(1.0 - ld * std::exp(-2 * sd)).epsilon(1e-14));
  }
  // stationary at sigma^2 = L
  CHECK(std::abs(total_loss_grad(4.0, 1.0, 0.5 * std::log(4.0), 0.0).s_diff) < 1e-15);
}

TEST_CASE("uncertainty weights converge to the constant losses")
{
  double sd = 0.0, sr = 0.0;
  for (int i = 0; i < 2000; ++i) {
    UncertaintyGrad const g = total_loss_grad(4.0, 1.0, sd, sr);
    sd -= 0.05 * g.s_diff;
    sr -= 0.05 * g.s_recon;
  }
  CHECK(std::abs(std::exp(2 * sd) / 4.0 - 1.0) < 0.01);
  CHECK(std::abs(std::exp(2 * sr) / 1.0 - 1.0) < 0.01);
}

TEST_CASE("cosine schedule")
{
  CHECK(cosine_lr(0, 100, 1e-4, 0.0) == 1e-4);
  CHECK(cosine_lr(100, 100, 1e-4, 1e-6) == doctest::Approx(1e-6).epsilon(1e-12));
  CHECK(cosine_lr(50, 100, 1e-4, 0.0) == doctest::Approx(0.5e-4).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(101, 100, 1e-4, 0.0), ContractError);
  CHECK_THROWS_AS(cosine_lr(-1, 100, 1e-4, 0.0), ContractError);
}

TEST_CASE("adam matches a scalar reference")
{
  ParamStore store;
  Param &p = store.add("x", 1, 1);
  p.value(0, 0) = 0.5;
  Adam adam(store);
  double x = 0.5, m = 0.0, v = 0.0;
  double const b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.01;
  for (int t = 1; t <= 300; ++t) {
    store.zero_grad();
    p.grad(0, 0) = 2.0 * (p.value(0, 0) - 3.0) + std::sin(t);
    adam.step(store, lr);

    double const g = 2.0 * (x - 3.0) + std::sin(t);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double const mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    REQUIRE(std::abs(p.value(0, 0) - x) < 1e-12);
  }
  CHECK(adam.steps_taken() == 300);

  store.zero_grad();
  p.grad(0, 0) = 3.0;
  CHECK(clip_grad_norm(store, 1.0) == 3.0);
  CHECK(p.grad(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("gradient routing")
{
  ModelConfig cfg;
  PhysDiffModel model(cfg, 1);
  Rng rng(3);
  auto const batch = first(4);
  std::vector<NoiseDraw> draws;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    draws.push_back(draw_noise(model, rng));
  }
  auto proj_grad = [&](std::size_t block, std::size_t task) -> Tensor const & {
    return model.epsilon().blocks()[block].piga().proj(task).weight().grad;
  };

  for (std::size_t task = 0; task < kNumTasks; ++task) {
    ObjectiveOptions opts;
    opts.terms = {false, false, false, false};
    opts.terms[1 + task] = true;
    batch_gradient(model, batch, draws, opts);
    for (std::size_t b = 0; b < model.epsilon().blocks().size(); ++b) {
      for (std::size_t other = 0; other < kNumTasks; ++other) {
        if (other == task) {
          CHECK(!proj_grad(b, other).isZero(0));
        } else {
          CHECK(proj_grad(b, other).isZero(0));
          CHECK(model.epsilon().blocks()[b].piga().proj(other).bias().grad.isZero(0));
        }
      }
    }
  }

  ObjectiveOptions off;
  off.routing = false;
  off.terms = {false, true, false, false};
  batch_gradient(model, batch, draws, off);
  CHECK(!proj_grad(0, kTraj).isZero(0));
  CHECK(!proj_grad(0, kWindTask).isZero(0));
  CHECK(!proj_grad(0, kPresTask).isZero(0));
}

TEST_CASE("analytic gradient of the whole objective")
{
  ModelConfig cfg;
  cfg.d_model = 12;
  cfg.heads = 2;
  cfg.d_embedding = 6;
  cfg.latent_hidden = 8;
  cfg.steps = 10;
  PhysDiffModel model(cfg, 5);
  Rng rng(4);
  auto const batch = first(2);
  std::vector<NoiseDraw> draws{draw_noise(model, rng), draw_noise(model, rng)};
  ObjectiveOptions opts;
  opts.routing = false;
  opts.latent_stop_grad = false;
  batch_gradient(model, batch, draws, opts);
  auto loss = [&] { return batch_loss(model, batch, draws).total; };
  CHECK(test::check_all(loss, test::all_params(model.params()), 300, 9) < 1e-4);
}

TEST_CASE("training is deterministic")
{
  ModelConfig cfg;
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.seed = 4;
  PhysDiffModel a(cfg, 7), b(cfg, 7);
  CHECK(same_params(a, b));
  Trainer ta(a, tc), tb(b, tc);
  auto const batch = first(4);
  for (int i = 0; i < 2; ++i) {
    StepMetrics const ma = ta.step(batch, tc.lr);
    StepMetrics const mb = tb.step(batch, tc.lr);
    CHECK(ma.loss.total == mb.loss.total);
    CHECK(ma.grad_norm == mb.grad_norm);
  }
  CHECK(same_params(a, b));
  PhysDiffModel c(cfg, 8);
  CHECK(!same_params(a, c));
}

TEST_CASE("overfitting one batch")
{
  ModelConfig cfg;
  PhysDiffModel model(cfg, 2);
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.seed = 1;
  Trainer trainer(model, tc);
  auto const batch = first(8);
  std::vector<double> losses;
  for (int i = 0; i < 200; ++i) {
    losses.push_back(trainer.step(batch, tc.lr).loss.total);
  }
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 10; ++i) {
    early += losses[static_cast<std::size_t>(i)] / 10.0;
    late += losses[losses.size() - 1 - static_cast<std::size_t>(i)] / 10.0;
  }
  MESSAGE("first-10 mean " << early << ", last-10 mean " << late);
  CHECK(early - late >= 0.5 * std::abs(early));
}

TEST_CASE("smoke run keeps the gradient norm finite")
{
  ModelConfig cfg;
  PhysDiffModel model(cfg, 3);
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.batch_size = 4;
  tc.max_steps = 500;
  tc.epochs = 1000;
  bool finite = true;
  long steps = 0;
  std::ostringstream log;
  auto const result = train(model, small_data().samples, {}, tc, &log, [&](StepMetrics const &m) {
    finite = finite && std::isfinite(m.grad_norm) && std::isfinite(m.loss.total);
    ++steps;
  });
  CHECK(result.steps == 500);
  CHECK(steps == 500);
  CHECK(finite);
  std::string first_line;
  std::istringstream in(log.str());
  std::getline(in, first_line);
  CHECK(first_line.find("\"L_total\"") != std::string::npos);
  CHECK(first_line.find("\"grad_norm\"") != std::string::npos);
}

TEST_CASE("autoencoder reconstruction after 500 steps")
{
  SynthConfig sc;
  auto const tracks = synth_dataset(sc, 1);
  auto const stats = compute_norm_stats(tracks);
  auto const samples = make_samples(tracks, 4, 4, stats);
  PhysDiffModel model(ModelConfig{}, 1);
  double const mse = train_autoencoder(model, samples, 500, 16, 1e-2, 1);
  MESSAGE("autoencoder mse " << mse);
  CHECK(mse < 0.05);
}

TEST_CASE("checkpoints")
{
  ModelConfig cfg;
  PhysDiffModel model(cfg, 11);
  TrainConfig tc;
  tc.lr = 3e-3;
  Trainer trainer(model, tc);
  trainer.step(first(2), tc.lr);
  auto const path = temp_file("model.pdck");
  save_checkpoint(path, model, small_data().stats);

  SUBCASE("round trip restores parameters, stats and forecasts")
  {
    NormStats stats;
    auto const loaded = load_model(path, &stats);
    CHECK(same_params(model, *loaded));
    CHECK(loaded->config().hash() == cfg.hash());
    CHECK(stats.pres_std == small_data().stats.pres_std);
    CHECK(stats.env_std == small_data().stats.env_std);
    Sample const &s = small_data().samples[0];
    Tensor const a = sample(model, s, member_rng(3, 0));
    Tensor const b = sample(*loaded, s, member_rng(3, 0));
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("truncated file is a load error")
  {
    auto const cut = temp_file("cut.pdck");
    std::filesystem::copy_file(path, cut, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(cut, std::filesystem::file_size(cut) / 2);
    CHECK_THROWS_AS(read_checkpoint(cut), CheckpointError);
    std::filesystem::resize_file(cut, 3);
    CHECK_THROWS_AS(read_checkpoint(cut), CheckpointError);
    std::filesystem::remove(cut);
  }
  SUBCASE("configuration mismatch is rejected")
  {
    ModelConfig other = cfg;
    other.ablation = Ablation::no_piga;
    PhysDiffModel target(other, 11);
    CHECK_THROWS_AS(load_parameters(target, read_checkpoint(path)), CheckpointError);
  }
  SUBCASE("canonical config text round-trips")
  {
    ModelConfig odd = cfg;
    odd.beta_start = 0.1 / 3.0;
    odd.ablation = Ablation::no_future;
    CHECK(parse_model_config(odd.canonical()).hash() == odd.hash());
  }
  std::filesystem::remove(path);
}
