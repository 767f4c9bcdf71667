#include "deus/model_config.hpp"

#include <string>

#include "deus/errors.hpp"

namespace deus {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ShapeError("invalid config: " + msg);
  };
  require(n_layers >= 1, "n_layers must be >= 1");
  require(hidden >= 1, "hidden must be >= 1");
  require(n_heads >= 1, "n_heads must be >= 1");
  require(n_kv_heads >= 1, "n_kv_heads must be >= 1");
  require(head_dim >= 1, "head_dim must be >= 1");
  require(d_ff >= 1, "d_ff must be >= 1");
  require(vocab >= 1, "vocab must be >= 1");
  require(n_heads * head_dim == hidden,
          "n_heads*head_dim (" + std::to_string(n_heads * head_dim) + ") != hidden (" +
              std::to_string(hidden) + ")");
  require(n_heads % n_kv_heads == 0, "n_kv_heads must divide n_heads");
  require(head_dim % 2 == 0, "head_dim must be even (rotary pairs)");
  require(rope_theta > 0.0, "rope_theta must be positive");
  require(rms_eps > 0.0, "rms_eps must be positive");
}

}  // namespace deus
