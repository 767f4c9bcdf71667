#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deus/matrix.hpp"
#include "deus/model_config.hpp"

namespace deus {

// One named tensor. On disk the payload is little-endian f32; in memory we
// keep f64 (loads are exact, stores round to nearest).
struct TensorEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t element_count() const;
  bool operator==(const TensorEntry&) const = default;
};

// One decoder layer's named blocks.
struct LayerWeights {
  Matrix2D w_q;        // hidden x hidden (n_heads*head_dim rows)
  Matrix2D w_k;        // kv_dim x hidden
  Matrix2D w_v;        // kv_dim x hidden
  Matrix2D w_o;        // hidden x hidden
  Matrix2D w_gate;     // d_ff x hidden
  Matrix2D w_up;       // d_ff x hidden
  Matrix2D w_down;     // hidden x d_ff
  Vector1D norm_attn;  // hidden
  Vector1D norm_mlp;   // hidden

  bool operator==(const LayerWeights&) const = default;
};

// Named tensor store plus config: the unit of exchange between all CLI
// commands. Immutable after load; concurrent readers are safe.
struct TensorArchive {
  ModelConfig config;
  std::vector<TensorEntry> entries;  // canonical order, see assemble()

  bool contains(std::string_view name) const;
  const TensorEntry& find(std::string_view name) const;  // MissingTensor if absent

  // Layer accessors use 1-based indices throughout, matching the on-disk
  // names layers.{i}.{...}.
  LayerWeights layer_view(std::size_t i) const;
  Matrix2D embed() const;
  Vector1D final_norm() const;
  Matrix2D lm_head() const;

  // Structural validation: config, exact tensor-name set for n_layers,
  // shape consistency, finiteness, uniqueness. Throws on violation.
  void validate() const;

  // Builds an archive in canonical entry order: model.embed, per-layer
  // blocks, model.final_norm, model.lm_head.
  static TensorArchive assemble(const ModelConfig& config, const Matrix2D& embed,
                                const std::vector<LayerWeights>& layers,
                                const Vector1D& final_norm, const Matrix2D& lm_head);

  bool operator==(const TensorArchive&) const = default;
};

// layers.{i}.{block}, i 1-based.
std::string layer_tensor_name(std::size_t i, std::string_view block);

inline constexpr std::string_view kEmbedName = "model.embed";
inline constexpr std::string_view kFinalNormName = "model.final_norm";
inline constexpr std::string_view kLmHeadName = "model.lm_head";
inline constexpr std::string_view kLayerBlockNames[] = {
    "attn.q", "attn.k", "attn.v", "attn.o", "mlp.gate",
    "mlp.up", "mlp.down", "norm.attn", "norm.mlp"};

// DEUS1 container: magic "DEUS1", u32-LE length-prefixed JSON header
// (config + tensor table), then f32-LE payloads; the payload base and every
// tensor offset (relative to that base) are 64-byte aligned.
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

// FNV-1a over the tensor's on-disk f32-LE byte image. Used by `inspect`.
std::uint64_t payload_checksum(const TensorEntry& entry);

}  // namespace deus
