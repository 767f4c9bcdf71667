#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "deus/archive.hpp"
#include "deus/fuse.hpp"

namespace deus {

// Where interpolation methods insert new layers (1-based base indices i,
// each new layer placed immediately after f_i):
//   Btm: i <= n/2        Mid: n/4 < i <= 3n/4
//   Top: n/2 <= i < n    TB:  i <= n/4 or 3n/4 <= i < n
// Cutpoints floor for n not divisible by 4.
enum class PositionStrategy { Btm, Mid, Top, TB };

enum class Method { OptDeus, AvgDeus, LlamaPro, Solar, Lesa };

std::string_view strategy_name(PositionStrategy s);
std::string_view method_name(Method m);

// Per-new-layer provenance in the expanded ordering.
struct NewLayerProvenance {
  std::size_t expanded_index = 0;        // 1-based position in the expanded model
  std::vector<std::size_t> source_layers;  // 1-based base indices it was built from
};

struct ExpansionPlan {
  Method method = Method::OptDeus;
  std::optional<PositionStrategy> strategy;  // interpolation methods only
  std::size_t n_base = 0;
  std::size_t k = 0;        // number of new layers
  std::size_t m_total = 0;  // n_base + k
  std::vector<std::size_t> insert_after;  // sorted base indices (interpolation)
  std::vector<std::size_t> trainable;     // 1-based expanded indices of new layers
  std::vector<NewLayerProvenance> new_layers;

  // LLaMA-PRO group arithmetic / SOLAR stack depth, kept for the sidecar.
  std::size_t group_count = 0, group_size = 0, copies_per_group = 0, solar_m = 0;
};

std::vector<std::size_t> strategy_index_set(std::size_t n, PositionStrategy strategy);

// k = round(ratio*n) new layers; the full strategy index set when k matches
// its size, else k evenly spaced members (stride = set_size/k, first element
// first). Requires 0 < ratio <= 0.5.
ExpansionPlan plan_interpolation(std::size_t n, double ratio, PositionStrategy strategy,
                                 Method method = Method::OptDeus);

// g groups of m layers; p copies of each group's top-p layers appended per
// group. Requires g*m == n and p <= m.
ExpansionPlan plan_llama_pro(std::size_t n, std::size_t g, std::size_t m, std::size_t p);

// Bottom m plus top m layers; all 2m layers trainable. Requires m <= n and
// 2m >= n.
ExpansionPlan plan_solar(std::size_t n, std::size_t m);

// Interpolation execution (OptDeus via fuse_layers, AvgDeus via fuse_avg).
// Base layers keep their order; each new layer lands right after its source.
TensorArchive expand(const TensorArchive& archive, const ExpansionPlan& plan,
                     const OtParams& params = {});

TensorArchive expand_llama_pro(const TensorArchive& archive, std::size_t g, std::size_t m,
                               std::size_t p);
TensorArchive expand_solar(const TensorArchive& archive, std::size_t m);

// {"trainable":[...],"frozen":[...],"convention":"1-based-expanded"}
// Layer indices only; for interpolation methods embeddings/final-norm/head
// are always frozen, for SOLAR everything trains.
std::string freeze_mask_json(const ExpansionPlan& plan);

// Reproducibility sidecar: method, strategy, insert positions, provenance,
// solver parameters.
std::string plan_json(const ExpansionPlan& plan, const OtParams& params);

}  // namespace deus
