#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "deus/archive.hpp"
#include "deus/model_config.hpp"
#include "deus/sinkhorn.hpp"

namespace deus {

// Blocks of one decoder layer in fixed processing order; the order encodes
// the flow dependencies (PostNorm/Gate/Up consume O's outgoing plan).
enum class BlockId { PreNorm, Q, K, V, O, PostNorm, Gate, Up, Down };

inline constexpr std::array<BlockId, 9> kBlockOrder = {
    BlockId::PreNorm, BlockId::Q,  BlockId::K,    BlockId::V,   BlockId::O,
    BlockId::PostNorm, BlockId::Gate, BlockId::Up, BlockId::Down};

std::string_view block_name(BlockId id);

// Solver and flow options for one fusion.
struct OtParams {
  double epsilon = 0.06;
  std::size_t max_iter = 2000;
  double tol = 1e-9;
  bool normalize_cost = true;
  // Restrict Q/K/V transport to within-head blocks (+inf off-block costs),
  // keeping head semantics intact under rotary embeddings.
  bool head_blocked = false;
  // Force every plan to the identity and skip all solves; fusion then
  // reduces to plain averaging plus zero-initialization.
  bool disable_alignment = false;

  SinkhornParams sinkhorn_params() const {
    return SinkhornParams{epsilon, max_iter, tol, normalize_cost, false};
  }
};

// Plan wiring for one fused layer. Input-space plans are assigned per the
// flow rules; output-space plans come from the OT solves (norm blocks pass
// their input plan through).
struct FlowState {
  ScaledPlan t_entrance;                 // identity, hidden x hidden
  std::map<BlockId, ScaledPlan> t_in;    // ordered; deterministic iteration
  std::map<BlockId, ScaledPlan> t_out;

  const ScaledPlan& in(BlockId b) const { return t_in.at(b); }
  const ScaledPlan& out(BlockId b) const { return t_out.at(b); }
};

// A new layer built from two adjacent base layers. w_o and w_down are
// exactly zero, which makes the layer an identity on the residual stream.
struct FusedLayer {
  LayerWeights weights;
  FlowState plans;  // retained for diagnostics
};

// Aligns f_i to f_next block by block (input space via the flow's t_in,
// output space via an OT solve on row distances), averages the aligned
// blocks, then zero-initializes O and Down.
FusedLayer fuse_layers(const LayerWeights& f_i, const LayerWeights& f_next,
                       const ModelConfig& cfg, const OtParams& params = {});

// Plain arithmetic mean of every block and norm vector; no alignment, no
// zeroing.
LayerWeights fuse_avg(const LayerWeights& f_i, const LayerWeights& f_next);

// Copies a layer and zeroes O/Down (stacking-style function-preserving
// duplicate).
LayerWeights zeroed_copy(const LayerWeights& layer);

struct BlockDiagnostics {
  std::string block;
  double plan_entropy = 0.0;
  // Fraction of distinct row-argmax columns; 1.0 means the scaled plan
  // hardens to a permutation.
  double perm_agreement = 0.0;
};

std::vector<BlockDiagnostics> plan_diagnostics(const FusedLayer& fused);

}  // namespace deus
