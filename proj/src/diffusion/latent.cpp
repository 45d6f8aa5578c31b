#include "physdiff/diffusion/latent.hpp"

namespace physdiff {

namespace {
Tensor const kNoAffine;

Tensor tanh_of(Tensor const &x) { return x.array().tanh().matrix(); }

Tensor tanh_backward(Tensor const &y, Tensor const &dy)
{
  return dy.cwiseProduct((1.0 - y.array().square()).matrix());
}
} // namespace

LatentCodec::LatentCodec(ParamStore &store, std::string const &name, Index attrs, Index hidden, Index latent, Rng &rng)
  : enc_conv_(store, name + ".enc_conv", attrs, hidden, rng)
  , enc_out_(store, name + ".enc_out", hidden, latent, rng)
  , dec_in_(store, name + ".dec_in", latent, hidden, rng)
  , dec_conv_(store, name + ".dec_conv", hidden, attrs, rng)
{
}

Tensor LatentCodec::encode(Tensor const &x0, EncodeCache &c) const
{
  c.x = x0;
  c.pre = enc_conv_.forward(x0);
  c.act = tanh_of(c.pre);
  c.u = enc_out_.forward(c.act);
  return layer_norm(c.u, kNoAffine, kNoAffine, 1e-5, &c.norm);
}

Tensor LatentCodec::encode(Tensor const &x0) const
{
  EncodeCache c;
  return encode(x0, c);
}

void LatentCodec::encode_backward(EncodeCache const &c, Tensor const &dz) const
{
  Tensor const du = layer_norm_backward<double>(c.norm, kNoAffine, dz, nullptr, nullptr);
  Tensor const dact = enc_out_.backward(c.act, du);
  enc_conv_.backward(c.x, tanh_backward(c.act, dact));
}

Tensor LatentCodec::decode(Tensor const &z, DecodeCache &c) const
{
  c.z = z;
  c.pre = dec_in_.forward(z);
  c.act = tanh_of(c.pre);
  return dec_conv_.forward(c.act);
}

Tensor LatentCodec::decode(Tensor const &z) const
{
  DecodeCache c;
  return decode(z, c);
}

Tensor LatentCodec::decode_backward(DecodeCache const &c, Tensor const &dx) const
{
  Tensor const dact = dec_conv_.backward(c.act, dx);
  return dec_in_.backward(c.z, tanh_backward(c.act, dact));
}

} // namespace physdiff
