#include "physdiff/model.hpp"

#include <iomanip>
#include <sstream>

namespace physdiff {

std::string to_string(Ablation a)
{
  switch (a) {
  case Ablation::none: return "none";
  case Ablation::no_piga: return "no-piga";
  case Ablation::no_future: return "no-future";
  case Ablation::no_both: return "no-both";
  }
  return "none";
}

Ablation parse_ablation(std::string const &s)
{
  if (s == "none" || s == "full") { return Ablation::none; }
  if (s == "no-piga") { return Ablation::no_piga; }
  if (s == "no-future") { return Ablation::no_future; }
  if (s == "no-both") { return Ablation::no_both; }
  throw ConfigError("unknown ablation '" + s + "' (expected none, no-piga, no-future, no-both)");
}

EnvMask ModelConfig::env_mask() const
{
  switch (ablation) {
  case Ablation::no_future: return {true, false};
  case Ablation::no_both: return {false, false};
  default: return {true, true};
  }
}

void ModelConfig::validate() const
{
  auto fail = [](std::string const &m) { throw ConfigError("model config: " + m); };
  if (history < 1) { fail("history M must be >= 1"); }
  if (horizon < 1 || horizon > 20) { fail("horizon N must lie in [1, 20]"); }
  if (channels < 1 || height < 1 || width < 1) { fail("env grid must be non-empty"); }
  if (patch < 1 || height % patch != 0 || width % patch != 0) { fail("grid not divisible by patch size"); }
  if (d_model % 3 != 0) { fail("d_model must be divisible by 3"); }
  if (heads < 1 || d_model % heads != 0) { fail("d_model must be divisible by heads"); }
  if (d_embedding < 2 || latent_hidden < 1) { fail("latent widths too small"); }
  if (enc_blocks < 0 || dec_blocks < 1 || ffn_mult < 1) { fail("block counts out of range"); }
  build_schedule(steps, beta_start, beta_end);
}

std::string ModelConfig::canonical() const
{
  std::ostringstream os;
  os << std::setprecision(17);
  os << "history=" << history << ";horizon=" << horizon << ";channels=" << channels << ";height=" << height
     << ";width=" << width << ";patch=" << patch << ";d_model=" << d_model << ";heads=" << heads
     << ";d_embedding=" << d_embedding << ";latent_hidden=" << latent_hidden << ";enc_blocks=" << enc_blocks
     << ";dec_blocks=" << dec_blocks << ";ffn_mult=" << ffn_mult << ";steps=" << steps
     << ";beta_start=" << beta_start << ";beta_end=" << beta_end << ";ablation=" << to_string(ablation);
  return os.str();
}

std::uint64_t fnv1a(std::string const &s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ModelConfig::hash() const { return fnv1a(canonical()); }

namespace {
ModelConfig const &checked(ModelConfig const &cfg)
{
  cfg.validate();
  return cfg;
}
} // namespace

PhysDiffModel::PhysDiffModel(ModelConfig const &cfg, std::uint64_t seed)
  : cfg_(checked(cfg))
  , schedule_(build_schedule(cfg.steps, cfg.beta_start, cfg.beta_end))
{
  Rng rng(seed);
  Index const ffn = cfg.ffn_mult * cfg.d_model;
  codec_ = LatentCodec(store_, "latent", kNumAttrs, cfg.latent_hidden, cfg.d_embedding, rng);
  context_ = ContextEncoder(store_, "encoder", kNumAttrs, cfg.history + cfg.horizon, cfg.channels, cfg.height,
                            cfg.width, cfg.patch, cfg.d_model, cfg.heads, ffn, cfg.enc_blocks, rng);
  eps_ = EpsilonNet(store_, "decoder", cfg.horizon, cfg.d_embedding, cfg.d_model, cfg.heads, ffn, cfg.dec_blocks,
                    cfg.piga_enabled(), rng);
  s_diff_ = &store_.add("uncertainty.log_sigma_diff", 1, 1);
  s_recon_ = &store_.add("uncertainty.log_sigma_recon", 1, 1);
}

Tensor PhysDiffModel::static_tokens(Sample const &s, ContextEncoder::StaticCache *cache) const
{
  if (s.history.rows() != cfg_.history || s.target.rows() != cfg_.horizon) {
    throw DimensionError("sample has M=" + std::to_string(s.history.rows()) + ", N=" +
                         std::to_string(s.target.rows()) + "; model expects M=" + std::to_string(cfg_.history) +
                         ", N=" + std::to_string(cfg_.horizon));
  }
  return context_.encode_static(s.history, s.env, s.kinds, cfg_.env_mask(), cache);
}

Tensor PhysDiffModel::context_memory(Sample const &s, int t) const
{
  return context_.fuse(static_tokens(s), t, nullptr);
}

Tensor PhysDiffModel::predict_noise(Tensor const &zt, Tensor const &context) const
{
  EpsilonNet::Cache cache;
  return eps_.forward(zt, eps_.project_memories(context), cache);
}

} // namespace physdiff
