#pragma once

#include <vector>

#include "deus/archive.hpp"
#include "deus/matrix.hpp"
#include "deus/tokens.hpp"

namespace deus {

// Evidence object for function-preservation checks.
struct ForwardTrace {
  Matrix2D logits;  // seq_len x vocab

  // Populated only when tracing: hidden state after the embedding and after
  // each layer (layer_hiddens.size() == n_layers), each seq_len x hidden.
  Matrix2D embed_hidden;
  std::vector<Matrix2D> layer_hiddens;
};

// Full-sequence teacher-forced causal decoder pass, all arithmetic in f64:
// embed -> per layer {x + Attn(RMSNorm(x)); x + MLP(RMSNorm(x))} -> final
// RMSNorm -> lm-head logits. Attention applies interleaved-pair RoPE to q/k,
// replicates k/v heads for grouped-query attention, masks causally and takes
// softmax with max subtraction. MLP is SiLU(gate(x)) * up(x) -> down.
ForwardTrace forward(const TensorArchive& archive, const TokenSequence& tokens,
                     bool trace = false);

// exp of mean next-token cross-entropy (natural log) over positions
// 1..len-1. Requires at least 2 tokens.
double perplexity(const TensorArchive& archive, const TokenSequence& tokens);

}  // namespace deus
