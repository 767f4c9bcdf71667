#include "deus/fuse.hpp"

#include <cmath>
#include <set>

#include "deus/errors.hpp"

namespace deus {

namespace {

void check_layer_shapes(const LayerWeights& w, const ModelConfig& cfg, const std::string& which) {
  const std::size_t h = cfg.hidden;
  const std::size_t kv = cfg.kv_dim();
  auto expect = [&](const Matrix2D& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows != r || m.cols != c) {
      throw ShapeError("fuse: " + which + " block " + name + " is " + shape_string(m) +
                       ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  expect(w.w_q, h, h, "attn.q");
  expect(w.w_k, kv, h, "attn.k");
  expect(w.w_v, kv, h, "attn.v");
  expect(w.w_o, h, h, "attn.o");
  expect(w.w_gate, cfg.d_ff, h, "mlp.gate");
  expect(w.w_up, cfg.d_ff, h, "mlp.up");
  expect(w.w_down, h, cfg.d_ff, "mlp.down");
  if (w.norm_attn.len() != h || w.norm_mlp.len() != h) {
    throw ShapeError("fuse: " + which + " norm vectors have wrong length");
  }
}

}  // namespace

std::string_view block_name(BlockId id) {
  switch (id) {
    case BlockId::PreNorm: return "norm.attn";
    case BlockId::Q: return "attn.q";
    case BlockId::K: return "attn.k";
    case BlockId::V: return "attn.v";
    case BlockId::O: return "attn.o";
    case BlockId::PostNorm: return "norm.mlp";
    case BlockId::Gate: return "mlp.gate";
    case BlockId::Up: return "mlp.up";
    case BlockId::Down: return "mlp.down";
  }
  return "?";
}

FusedLayer fuse_layers(const LayerWeights& f_i, const LayerWeights& f_next,
                       const ModelConfig& cfg, const OtParams& params) {
  check_layer_shapes(f_i, cfg, "f_i");
  check_layer_shapes(f_next, cfg, "f_next");

  const std::size_t h = cfg.hidden;
  FusedLayer fused;
  FlowState& flow = fused.plans;
  flow.t_entrance = ScaledPlan::identity(h);

  // Output-space plan for one matrix block: OT between the rows of the
  // within-layer-aligned block and its counterpart in f_next. In identity
  // mode no solve runs.
  auto solve_out = [&](const Matrix2D& aligned, const Matrix2D& counterpart, BlockId id,
                       std::size_t head_block) -> ScaledPlan {
    if (params.disable_alignment) return ScaledPlan::identity(aligned.rows);
    const std::string src = "f_i." + std::string(block_name(id));
    const std::string dst = "f_next." + std::string(block_name(id));
    const CostMatrix cost =
        head_block > 0
            ? build_cost_head_blocked(aligned, counterpart, head_block, src, dst)
            : build_cost(aligned, counterpart, src, dst);
    return scale_plan(sinkhorn(cost, params.sinkhorn_params()));
  };

  // Matrix block pipeline: align input space, solve, align output space,
  // average with the counterpart.
  auto fuse_block = [&](const Matrix2D& w, const Matrix2D& w_next, BlockId id,
                        const ScaledPlan& t_in, std::size_t head_block) -> Matrix2D {
    flow.t_in.emplace(id, t_in);
    Matrix2D aligned = params.disable_alignment ? w : matmul(w, t_in.t_scaled);
    const ScaledPlan t_out = solve_out(aligned, w_next, id, head_block);
    if (!params.disable_alignment) {
      aligned = matmul(transpose(t_out.t_scaled), aligned);
    }
    flow.t_out.emplace(id, t_out);
    return elementwise_average(aligned, w_next);
  };

  // Norm block: no OT solve on 1-D weights; the plan passes through.
  auto fuse_norm = [&](const Vector1D& g, const Vector1D& g_next, BlockId id,
                       const ScaledPlan& t_in) -> Vector1D {
    flow.t_in.emplace(id, t_in);
    flow.t_out.emplace(id, t_in);
    const Vector1D aligned =
        params.disable_alignment ? g : transposed_matvec(t_in.t_scaled, g);
    return elementwise_average(aligned, g_next);
  };

  const ScaledPlan identity_h = ScaledPlan::identity(h);
  const std::size_t qkv_block = params.head_blocked ? cfg.head_dim : 0;

  fused.weights.norm_attn = fuse_norm(f_i.norm_attn, f_next.norm_attn, BlockId::PreNorm,
                                      identity_h);
  const ScaledPlan& pre_out = flow.out(BlockId::PreNorm);
  fused.weights.w_q = fuse_block(f_i.w_q, f_next.w_q, BlockId::Q, pre_out, qkv_block);
  fused.weights.w_k = fuse_block(f_i.w_k, f_next.w_k, BlockId::K, pre_out, qkv_block);
  fused.weights.w_v = fuse_block(f_i.w_v, f_next.w_v, BlockId::V, pre_out, qkv_block);
  fused.weights.w_o = fuse_block(f_i.w_o, f_next.w_o, BlockId::O, identity_h, 0);

  const ScaledPlan& o_out = flow.out(BlockId::O);
  const ScaledPlan post_in{
      elementwise_average(flow.t_entrance.t_scaled, o_out.t_scaled)};
  fused.weights.norm_mlp = fuse_norm(f_i.norm_mlp, f_next.norm_mlp, BlockId::PostNorm, post_in);

  fused.weights.w_gate = fuse_block(f_i.w_gate, f_next.w_gate, BlockId::Gate, o_out, 0);
  fused.weights.w_up = fuse_block(f_i.w_up, f_next.w_up, BlockId::Up, o_out, 0);
  fused.weights.w_down = fuse_block(f_i.w_down, f_next.w_down, BlockId::Down,
                                    ScaledPlan::identity(cfg.d_ff), 0);

  // Zero-initialization, applied after averaging: the residual paths see an
  // exact identity regardless of how O/Down aligned.
  fused.weights.w_o = Matrix2D::zeros(h, h);
  fused.weights.w_down = Matrix2D::zeros(h, cfg.d_ff);
  return fused;
}

LayerWeights fuse_avg(const LayerWeights& f_i, const LayerWeights& f_next) {
  LayerWeights out;
  out.w_q = elementwise_average(f_i.w_q, f_next.w_q);
  out.w_k = elementwise_average(f_i.w_k, f_next.w_k);
  out.w_v = elementwise_average(f_i.w_v, f_next.w_v);
  out.w_o = elementwise_average(f_i.w_o, f_next.w_o);
  out.w_gate = elementwise_average(f_i.w_gate, f_next.w_gate);
  out.w_up = elementwise_average(f_i.w_up, f_next.w_up);
  out.w_down = elementwise_average(f_i.w_down, f_next.w_down);
  out.norm_attn = elementwise_average(f_i.norm_attn, f_next.norm_attn);
  out.norm_mlp = elementwise_average(f_i.norm_mlp, f_next.norm_mlp);
  return out;
}

LayerWeights zeroed_copy(const LayerWeights& layer) {
  LayerWeights out = layer;
  out.w_o = Matrix2D::zeros(layer.w_o.rows, layer.w_o.cols);
  out.w_down = Matrix2D::zeros(layer.w_down.rows, layer.w_down.cols);
  return out;
}

std::vector<BlockDiagnostics> plan_diagnostics(const FusedLayer& fused) {
  std::vector<BlockDiagnostics> out;
  for (BlockId id : kBlockOrder) {
    const auto it = fused.plans.t_out.find(id);
    if (it == fused.plans.t_out.end()) continue;
    const Matrix2D& t = it->second.t_scaled;
    BlockDiagnostics d;
    d.block = std::string(block_name(id));
    d.plan_entropy = plan_entropy(t);
    std::set<std::size_t> cols;
    for (std::size_t k = 0; k < t.rows; ++k) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < t.cols; ++j) {
        if (t(k, j) > t(k, best)) best = j;
      }
      cols.insert(best);
    }
    d.perm_agreement =
        t.rows == 0 ? 0.0 : static_cast<double>(cols.size()) / static_cast<double>(t.rows);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace deus
