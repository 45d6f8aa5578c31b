#pragma once

#include "physdiff/core/layers.hpp"

namespace physdiff {

/// Maps N x 4 attribute sequences to N x D latents and back.
///
/// encode: conv1d(k=3) -> tanh -> dense -> parameter-free row normalization
/// decode: dense -> tanh -> conv1d(k=3)
///
/// The row normalization pins every latent row to zero mean and unit variance,
/// matching the scale of the N(0, I) prior the sampler starts from.
class LatentCodec
{
public:
  struct EncodeCache
  {
    Tensor x, pre, act, u;
    LayerNormCache<double> norm;
  };
  struct DecodeCache
  {
    Tensor z, pre, act;
  };

  LatentCodec() = default;
  LatentCodec(ParamStore &store, std::string const &name, Index attrs, Index hidden, Index latent, Rng &rng);

  Tensor encode(Tensor const &x0, EncodeCache &cache) const;
  Tensor encode(Tensor const &x0) const;
  /// Accumulates parameter gradients; the input is data so no dx is returned.
  void encode_backward(EncodeCache const &cache, Tensor const &dz) const;

  Tensor decode(Tensor const &z, DecodeCache &cache) const;
  Tensor decode(Tensor const &z) const;
  Tensor decode_backward(DecodeCache const &cache, Tensor const &dx) const;

  Index latent_dim() const { return enc_out_.out_dim(); }

private:
  Conv1d enc_conv_;
  Linear enc_out_;
  Linear dec_in_;
  Conv1d dec_conv_;
};

} // namespace physdiff
