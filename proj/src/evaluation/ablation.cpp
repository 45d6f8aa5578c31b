#include "physdiff/evaluation/ablation.hpp"

namespace physdiff {

std::vector<AblationOutcome> run_ablation(AblationSetup const &setup, std::vector<Ablation> const &variants,
                                          std::vector<Sample> const &train_set, std::vector<Sample> const &val_set,
                                          std::vector<Sample> const &test_set, NormStats const &stats)
{
  auto const truths = truths_all(test_set, stats);
  std::vector<AblationOutcome> out;
  for (Ablation v : variants) {
    ModelConfig cfg = setup.model;
    cfg.ablation = v;
    PhysDiffModel model(cfg, setup.model_seed);
    train(model, train_set, val_set, setup.train);
    auto const run = forecast_all(model, test_set, stats, setup.members, setup.root_seed);
    out.push_back({v, evaluate(run.mean, truths, to_string(v))});
  }
  return out;
}

} // namespace physdiff
