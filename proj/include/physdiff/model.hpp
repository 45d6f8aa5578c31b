#pragma once

#include "physdiff/conditioning/context.hpp"
#include "physdiff/data/window.hpp"
#include "physdiff/decoder/epsilon_net.hpp"
#include "physdiff/diffusion/latent.hpp"
#include "physdiff/diffusion/schedule.hpp"

#include <cstdint>
#include <string>

namespace physdiff {

enum class Ablation
{
  none,      // full model
  no_piga,   // PIGA sublayer replaced by the residual identity
  no_future, // future-field tokens replaced by the null token
  no_both    // no PIGA and every env token nulled
};

std::string to_string(Ablation a);
Ablation parse_ablation(std::string const &s);

/// Architecture, data shape and diffusion schedule of one model.
struct ModelConfig
{
  int history = 4; // M
  int horizon = 4; // N
  Index channels = 4;
  Index height = 16;
  Index width = 16;
  Index patch = 4; // patch side in pixels

  Index d_model = 48;
  Index heads = 4;
  Index d_embedding = 16;
  Index latent_hidden = 32;
  Index enc_blocks = 2;
  Index dec_blocks = 2;
  Index ffn_mult = 2;

  int steps = 50;
  double beta_start = 2e-3;
  double beta_end = 0.4;

  Ablation ablation = Ablation::none;

  bool piga_enabled() const { return ablation == Ablation::none || ablation == Ablation::no_future; }
  EnvMask env_mask() const;

  void validate() const;
  /// Stable text form of every field; the checkpoint hash is computed over it.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// FNV-1a over the bytes of s.
std::uint64_t fnv1a(std::string const &s);

/// Every learnable piece of the forecaster, owned by one ParamStore:
/// the latent codec, the conditioning encoder, the denoising network and the
/// two log-uncertainty scalars of the composite loss.
class PhysDiffModel
{
public:
  PhysDiffModel(ModelConfig const &cfg, std::uint64_t seed);

  PhysDiffModel(PhysDiffModel const &) = delete;
  PhysDiffModel &operator=(PhysDiffModel const &) = delete;

  ModelConfig const &config() const { return cfg_; }
  NoiseSchedule const &schedule() const { return schedule_; }
  ParamStore &params() { return store_; }
  ParamStore const &params() const { return store_; }

  LatentCodec const &codec() const { return codec_; }
  ContextEncoder const &context() const { return context_; }
  EpsilonNet const &epsilon() const { return eps_; }
  EpsilonNet &epsilon() { return eps_; }

  Param &log_sigma_diff() { return *s_diff_; }
  Param &log_sigma_recon() { return *s_recon_; }
  double log_sigma_diff() const { return s_diff_->value(0, 0); }
  double log_sigma_recon() const { return s_recon_->value(0, 0); }

  /// Static (step-independent) context tokens for one sample.
  Tensor static_tokens(Sample const &s, ContextEncoder::StaticCache *cache = nullptr) const;
  /// Full context memory at step t.
  Tensor context_memory(Sample const &s, int t) const;

  /// epsilon_theta(z_t, t, c) without caching for backward.
  Tensor predict_noise(Tensor const &zt, Tensor const &context) const;

private:
  ModelConfig cfg_;
  NoiseSchedule schedule_;
  ParamStore store_;
  LatentCodec codec_;
  ContextEncoder context_;
  EpsilonNet eps_;
  Param *s_diff_ = nullptr;
  Param *s_recon_ = nullptr;
};

} // namespace physdiff
