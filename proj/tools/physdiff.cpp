#include "physdiff/config.hpp"
#include "physdiff/evaluation/ablation.hpp"
#include "physdiff/evaluation/forecast.hpp"
#include "physdiff/evaluation/metrics.hpp"
#include "physdiff/pipeline.hpp"
#include "physdiff/sampler.hpp"
#include "physdiff/training/checkpoint.hpp"
#include "physdiff/training/objective.hpp"
#include "physdiff/training/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace physdiff;

namespace {

/// Flags shared by every subcommand. Optional values stay empty unless given.
struct Flags
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::string> ablate;
  std::optional<std::size_t> members;
  std::optional<int> leads;
  std::optional<std::string> data;
  std::string run;
  std::string checkpoint;
  std::size_t samples = 200;
};

/// Resolution order: defaults, then the config file (or the run's echoed
/// config), then --seed / --data / --ablate / --members / --leads, then --set.
RunConfig resolve(Flags const &f)
{
  RunConfig cfg;
  if (!f.config.empty()) {
    cfg = load_run_config(f.config);
  } else if (!f.run.empty()) {
    cfg = load_run_config(fs::path(f.run) / "config" / "config.ini");
  }
  if (f.seed) { cfg.seed = *f.seed; }
  if (f.data) { cfg.data_dir = *f.data; }
  if (f.ablate) { cfg.set("model.ablation", *f.ablate); }
  if (f.members) { cfg.members = *f.members; }
  if (f.leads) { cfg.leads = *f.leads; }
  for (auto const &o : f.overrides) {
    cfg.apply_override(o);
  }
  cfg.validate();
  return cfg;
}

std::string utc_stamp()
{
  auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
  return os.str();
}

/// Creates <root>/<timestamp>[-k] with its four subdirectories and echoes the
/// resolved config into it.
fs::path make_run_dir(fs::path const &root, RunConfig const &cfg)
{
  std::string const stamp = utc_stamp();
  fs::path dir = root / stamp;
  for (int k = 1; fs::exists(dir); ++k) {
    dir = root / (stamp + "-" + std::to_string(k));
  }
  for (char const *sub : {"config", "checkpoints", "metrics", "forecasts"}) {
    fs::create_directories(dir / sub);
  }
  write_text_file(dir / "config" / "config.ini", cfg.to_ini());
  return dir;
}

fs::path checkpoint_path(Flags const &f)
{
  if (!f.checkpoint.empty()) { return f.checkpoint; }
  if (!f.run.empty()) { return fs::path(f.run) / "checkpoints" / "model.pdck"; }
  throw ConfigError("give --run or --checkpoint");
}

/// Ensures the checkpoint was trained with the model section of `cfg`.
std::unique_ptr<PhysDiffModel> load_for(RunConfig &cfg, Flags const &f, NormStats &stats)
{
  auto model = load_model(checkpoint_path(f), &stats);
  if (model->config().hash() != cfg.model.hash()) {
    throw ConfigError("checkpoint model config does not match the resolved [model]/[diffusion] settings");
  }
  return model;
}

std::vector<ForecastRecord> within_leads(std::vector<ForecastRecord> records, int leads)
{
  if (leads > 0) { std::erase_if(records, [leads](ForecastRecord const &r) { return r.lead > leads; }); }
  return records;
}

void write_csv(fs::path const &path, std::vector<ForecastRecord> const &records)
{
  std::ostringstream os;
  write_forecast_csv(os, records);
  write_text_file(path, os.str());
}

std::vector<ForecastRecord> read_csv(fs::path const &path) { return parse_forecast_csv(read_text_file(path)); }

void write_json(fs::path const &path, nlohmann::json const &j) { write_text_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------

int cmd_synth(Flags const &f)
{
  if (f.out.empty()) { throw ConfigError("synth-data needs --out DIR"); }
  RunConfig const cfg = resolve(f);
  auto const tracks = synthesize(cfg);
  save_dataset(f.out, tracks, synth_manifest(cfg.synth, cfg.seed, tracks, cfg.train_frac, cfg.val_frac));
  std::cout << "wrote " << tracks.size() << " tracks to " << f.out << "\n";
  return 0;
}

int cmd_train(Flags const &f)
{
  RunConfig cfg = resolve(f);
  if (!cfg.data_dir.empty()) { cfg.data_dir = fs::absolute(cfg.data_dir).string(); }
  auto const data = prepare(cfg);
  fs::path const dir = make_run_dir(f.out.empty() ? "run" : f.out, cfg);

  PhysDiffModel model(cfg.model, cfg.seed);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  std::ofstream log(dir / "metrics" / "train.jsonl");
  auto const result = train(model, data.train, data.val, tc, &log, {}, [](int epoch, double val, bool best) {
    std::cerr << "epoch " << epoch << " val_loss " << val << (best ? " *" : "") << "\n";
  });
  save_checkpoint(dir / "checkpoints" / "model.pdck", model, data.stats);
  std::cout << "run " << dir.string() << "\nsteps " << result.steps << "\nfinal_loss " << result.last.loss.total
            << "\n";
  return 0;
}

int cmd_forecast(Flags const &f)
{
  RunConfig cfg = resolve(f);
  NormStats stats;
  auto const model = load_for(cfg, f, stats);
  auto const data = prepare(cfg, &stats);
  fs::path const dir = f.out.empty() ? (f.run.empty() ? fs::path("forecasts") : fs::path(f.run) / "forecasts")
                                     : fs::path(f.out);
  fs::create_directories(dir);

  auto const run = forecast_all(*model, data.test, stats, cfg.members, cfg.seed);
  write_csv(dir / "forecast.csv", within_leads(run.mean, cfg.leads));
  write_csv(dir / "members.csv", within_leads(run.members, cfg.leads));
  write_csv(dir / "truth.csv", within_leads(truths_all(data.test, stats), cfg.leads));
  write_csv(dir / "persistence.csv", within_leads(persistence_all(data.test, stats), cfg.leads));
  std::cout << "forecast " << data.test.size() << " windows x " << cfg.members << " members to " << dir.string()
            << "\n";
  return 0;
}

int cmd_evaluate(Flags const &f)
{
  if (f.run.empty()) { throw ConfigError("evaluate needs --run DIR"); }
  RunConfig const cfg = resolve(f);
  fs::path const fc = fs::path(f.run) / "forecasts";
  if (!fs::exists(fc / "forecast.csv")) { cmd_forecast(f); }

  auto const truth = within_leads(read_csv(fc / "truth.csv"), cfg.leads);
  std::string const tag = to_string(cfg.model.ablation);
  auto const model_table = evaluate(within_leads(read_csv(fc / "forecast.csv"), cfg.leads), truth, tag);
  auto const persist = evaluate(within_leads(read_csv(fc / "persistence.csv"), cfg.leads), truth, "persistence");
  auto const single = single_member_metrics(within_leads(read_csv(fc / "members.csv"), cfg.leads), truth,
                                            tag + "/single-member");

  fs::create_directories(fs::path(f.run) / "metrics");
  write_json(fs::path(f.run) / "metrics" / "metrics.json",
             {{"model", model_table.to_json()}, {"single_member", single.to_json()}, {"persistence", persist.to_json()}});
  std::cout << model_table.to_text() << "\n" << single.to_text() << "\n" << persist.to_text();
  return 0;
}

int cmd_ablate(Flags const &f)
{
  RunConfig cfg = resolve(f);
  if (!cfg.data_dir.empty()) { cfg.data_dir = fs::absolute(cfg.data_dir).string(); }
  auto const data = prepare(cfg);
  fs::path const dir = make_run_dir(f.out.empty() ? "run" : f.out, cfg);

  AblationSetup setup;
  setup.model = cfg.model;
  setup.train = cfg.train;
  setup.train.seed = cfg.seed;
  setup.model_seed = cfg.seed;
  setup.members = cfg.members;
  setup.root_seed = cfg.seed;
  std::vector<Ablation> const variants = {Ablation::none, Ablation::no_piga, Ablation::no_future, Ablation::no_both};
  auto const outcomes = run_ablation(setup, variants, data.train, data.val, data.test, data.stats);

  nlohmann::json j = nlohmann::json::object();
  for (auto const &o : outcomes) {
    j[to_string(o.variant)] = o.metrics.to_json();
    std::cout << o.metrics.to_text() << "\n";
  }
  auto const persist = evaluate(persistence_all(data.test, data.stats), truths_all(data.test, data.stats), "persistence");
  j["persistence"] = persist.to_json();
  std::cout << persist.to_text();
  write_json(dir / "metrics" / "ablation.json", j);
  std::cout << "run " << dir.string() << "\n";
  return 0;
}

int cmd_grad_check(Flags const &f)
{
  RunConfig const cfg = resolve(f);
  auto const data = prepare(cfg);
  PhysDiffModel model(cfg.model, cfg.seed);
  Rng rng = Rng(cfg.seed).derive(0x67726164);
  std::vector<Sample const *> batch;
  std::vector<NoiseDraw> draws;
  for (std::size_t i = 0; i < std::min<std::size_t>(2, data.train.size()); ++i) {
    batch.push_back(&data.train[i]);
    draws.push_back(draw_noise(model, rng));
  }
  auto const r = objective_gradient_check(model, batch, draws, f.samples, 1e-5, rng);
  std::cout << "checked " << r.checked << "\nmax_rel_error " << std::scientific << std::setprecision(3)
            << r.max_rel_error << "\nworst " << r.worst_param << "[" << r.worst_index << "]\n";
  if (r.max_rel_error > 1e-4) {
    std::cerr << "error: gradient check failed: max relative error " << r.max_rel_error << " > 1e-4\n";
    return 1;
  }
  return 0;
}

int cmd_export_features(Flags const &f)
{
  RunConfig cfg = resolve(f);
  if (!cfg.model.piga_enabled()) {
    throw ConfigError("export-features needs a model with PIGA (ablation none or no-future)");
  }
  NormStats stats;
  auto const model = load_for(cfg, f, stats);
  auto const data = prepare(cfg, &stats);
  fs::path const out = f.out.empty() ? fs::path("features.csv") : fs::path(f.out);
  if (out.has_parent_path()) { fs::create_directories(out.parent_path()); }

  std::ofstream os(out);
  os << "sample_id,task";
  Index const dims = model->epsilon().blocks().back().piga().sub_dim();
  for (Index k = 0; k < dims; ++k) {
    os << ",dim" << k;
  }
  os << "\n" << std::setprecision(17);
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    std::vector<TaskFeatures> feats;
    sample_members(*model, data.test[i], {member_rng(cfg.seed, 0)}, SampleOptions{&feats});
    for (std::size_t task = 0; task < kNumTasks; ++task) {
      os << i << ',' << task_name(task);
      for (Index k = 0; k < dims; ++k) {
        os << ',' << feats[0][task](k);
      }
      os << "\n";
    }
  }
  if (!os) { throw std::runtime_error("cannot write " + out.string()); }
  std::cout << "wrote " << data.test.size() * kNumTasks << " feature rows to " << out.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Phys-Diff tropical cyclone forecaster: latent diffusion over track and intensity with "
               "physics-inspired gated attention"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  Flags f;

  auto common = [&f](CLI::App *cmd) {
    cmd->add_option("--config", f.config, "Run config file (INI sections [run] [data] [model] [diffusion] [train] [eval])")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Root seed (unsigned 64-bit integer) for data, weights, batches and sampling");
    cmd->add_option("--set", f.overrides, "Override one config key, section.key=value (repeatable)");
  };
  auto data_flag = [&f](CLI::App *cmd) {
    cmd->add_option("--data", f.data, "Dataset directory written by synth-data (default: synthesize in memory)")
        ->check(CLI::ExistingDirectory);
  };
  auto ablate_flag = [&f](CLI::App *cmd) {
    cmd->add_option("--ablate", f.ablate, "Model variant")
        ->check(CLI::IsMember({"none", "no-piga", "no-future", "no-both"}));
  };
  auto ensemble_flags = [&f](CLI::App *cmd) {
    cmd->add_option("--members", f.members, "Ensemble members sampled per window (count)")->check(CLI::PositiveNumber);
    cmd->add_option("--leads", f.leads, "Evaluate leads 1..N only, in 6 h steps (0 = full horizon)")
        ->check(CLI::NonNegativeNumber);
  };
  auto model_source = [&f](CLI::App *cmd) {
    cmd->add_option("--run", f.run, "Run directory created by train (config/, checkpoints/, metrics/, forecasts/)")
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint file (.pdck); overrides the run's checkpoint")
        ->check(CLI::ExistingFile);
  };

  auto *synth = app.add_subcommand("synth-data", "Generate a synthetic dataset (tracks.csv, env blobs, manifest.json)");
  common(synth);
  synth->add_option("--out", f.out, "Output directory")->required();

  auto *tr = app.add_subcommand("train", "Train a model; creates <out>/<UTC timestamp>/ with the resolved config");
  common(tr);
  data_flag(tr);
  ablate_flag(tr);
  tr->add_option("--out", f.out, "Root directory for run directories (default: run)");

  auto *fc = app.add_subcommand("forecast", "Ensemble forecasts for every test window, written as CSV (km, m/s, hPa)");
  common(fc);
  data_flag(fc);
  model_source(fc);
  ensemble_flags(fc);
  fc->add_option("--out", f.out, "Output directory (default: <run>/forecasts)");

  auto *ev = app.add_subcommand("evaluate", "Per-lead MAE (trajectory km, pressure hPa, wind m/s) tagged by variant");
  common(ev);
  data_flag(ev);
  model_source(ev);
  ensemble_flags(ev);

  auto *ab = app.add_subcommand("ablate", "Train and evaluate none, no-piga, no-future and no-both on identical data");
  common(ab);
  data_flag(ab);
  ensemble_flags(ab);
  ab->add_option("--out", f.out, "Root directory for run directories (default: run)");

  auto *gc = app.add_subcommand("grad-check", "Compare analytic and central-difference gradients (eps 1e-5)");
  common(gc);
  data_flag(gc);
  ablate_flag(gc);
  gc->add_option("--samples", f.samples, "Parameters sampled uniformly at random (count)")->check(CLI::PositiveNumber);

  auto *ex = app.add_subcommand("export-features", "Write post-gating task-stream features of test windows to CSV");
  common(ex);
  data_flag(ex);
  model_source(ex);
  ex->add_option("--out", f.out, "Output CSV path (default: features.csv)");

  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const &e) {
    return app.exit(e);
  } catch (CLI::CallForAllHelp const &e) {
    return app.exit(e);
  } catch (CLI::ParseError const &e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) { return cmd_synth(f); }
    if (tr->parsed()) { return cmd_train(f); }
    if (fc->parsed()) { return cmd_forecast(f); }
    if (ev->parsed()) { return cmd_evaluate(f); }
    if (ab->parsed()) { return cmd_ablate(f); }
    if (gc->parsed()) { return cmd_grad_check(f); }
    if (ex->parsed()) { return cmd_export_features(f); }
  } catch (ConfigError const &e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (std::exception const &e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
