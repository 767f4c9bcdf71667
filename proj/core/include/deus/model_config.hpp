#pragma once

#include <cstddef>

namespace deus {

// Architecture hyper-parameters of a toy Llama-style decoder.
struct ModelConfig {
  std::size_t n_layers = 0;
  std::size_t hidden = 0;
  std::size_t n_heads = 0;
  std::size_t n_kv_heads = 0;
  std::size_t head_dim = 0;
  std::size_t d_ff = 0;
  std::size_t vocab = 0;
  double rope_theta = 10000.0;
  double rms_eps = 1e-5;

  std::size_t kv_dim() const { return n_kv_heads * head_dim; }

  // Throws ShapeError on: any count < 1, n_heads*head_dim != hidden,
  // n_kv_heads not dividing n_heads, odd head_dim (rotary pairs).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace deus
