#pragma once

#include <cstdint>

#include "deus/archive.hpp"
#include "deus/model_config.hpp"

namespace deus {

// Seeded random toy model: weight matrices ~ N(0, (0.02/sqrt(n_layers))^2),
// norm vectors 1 + 0.1*N(0,1). Values are rounded through f32 on generation
// so the in-memory archive equals its on-disk image exactly. Fill order is
// fixed (embed, layers 1..n block by block, final norm, head) and part of
// the determinism contract.
TensorArchive generate_toy_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace deus
