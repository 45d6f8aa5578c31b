#pragma once

#include "physdiff/core/layers.hpp"

#include <array>

namespace physdiff {

/// Task streams inside the PIGA sublayer, in concatenation order.
enum Task : std::size_t
{
  kTraj = 0,
  kWindTask = 1,
  kPresTask = 2,
  kNumTasks = 3
};

char const *task_name(std::size_t task);

/// Streams whose projection acts as a stop-gradient barrier during a backward
/// pass. A barred stream's features are treated as constants: nothing flows
/// into its projection parameters or through it to the sublayer input.
using TaskMask = std::array<bool, kNumTasks>;
inline constexpr TaskMask kNoBarrier = {false, false, false};

/// Barrier set for the reconstruction component of `task`: every other stream.
TaskMask routing_barrier(std::size_t task);

/// (1 - g) * f + g * a, elementwise.
Tensor gated_fuse(Tensor const &f, Tensor const &a, Tensor const &g);

/// Physics-inspired gated attention: decompose the input into trajectory,
/// wind and pressure streams, let each stream attend to the other two,
/// gate between the original and attended features, and fuse the three
/// updated streams back to the model width with a per-position dense map.
class Piga
{
public:
  struct StreamCache
  {
    Tensor f, kv, q, k, v, a, gate_in, gate_pre, gate_act, g, fused;
    AttentionCache<double> attn;
  };
  struct Cache
  {
    Tensor x;
    std::array<StreamCache, kNumTasks> s;
    Tensor concat;
  };

  Piga() = default;
  Piga(ParamStore &store, std::string const &name, Index dim, Rng &rng);

  Tensor forward(Tensor const &x, Cache &cache) const;
  /// Cache-free forward over independent sequences of `group` rows stacked
  /// vertically. Writes the gated streams into `fused` when given.
  Tensor infer(Tensor const &x, Index group, std::array<Tensor, kNumTasks> *fused = nullptr) const;
  Tensor backward(Cache const &cache, Tensor const &dout, TaskMask const &barred) const;

  /// The three task projections of x (N x D_sub each).
  std::array<Tensor, kNumTasks> decompose(Tensor const &x) const;
  /// Attention of stream `task` (queries from fq) over the row-stacked [fa; fb].
  Tensor cross_task_attend(std::size_t task, Tensor const &fq, Tensor const &fa, Tensor const &fb) const;
  /// sigmoid(MLP([f, a])) for stream `task`.
  Tensor gate(std::size_t task, Tensor const &f, Tensor const &a) const;
  /// Dense map of the concatenated streams (traj, wind, pres) to D_model.
  Tensor fuse_streams(Tensor const &traj, Tensor const &wind, Tensor const &pres) const;

  Linear &proj(std::size_t task) { return proj_[task]; }
  Linear &query(std::size_t task) { return wq_[task]; }
  Linear &key(std::size_t task) { return wk_[task]; }
  Linear &value(std::size_t task) { return wv_[task]; }
  Linear &gate_hidden(std::size_t task) { return gate1_[task]; }
  Linear &gate_out(std::size_t task) { return gate2_[task]; }
  Linear &fuse() { return fuse_; }
  Index sub_dim() const { return sub_; }

private:
  static std::array<std::size_t, 2> others(std::size_t task);

  std::array<Linear, kNumTasks> proj_, wq_, wk_, wv_, gate1_, gate2_;
  Linear fuse_;
  Index sub_ = 0;
};

} // namespace physdiff
