#include "deus/modelgen.hpp"

#include <cmath>

#include "deus/rng.hpp"

namespace deus {

namespace {

double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

Matrix2D random_matrix(SeededRng& rng, std::size_t r, std::size_t c, double sigma) {
  Matrix2D m(r, c);
  for (double& v : m.data) v = f32_round(sigma * rng.next_gaussian());
  return m;
}

Vector1D random_norm(SeededRng& rng, std::size_t n) {
  Vector1D v(n);
  for (double& x : v.data) x = f32_round(1.0 + 0.1 * rng.next_gaussian());
  return v;
}

}  // namespace

TensorArchive generate_toy_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SeededRng rng(seed);
  const double sigma = 0.02 / std::sqrt(static_cast<double>(config.n_layers));
  const std::size_t h = config.hidden;
  const std::size_t kv = config.kv_dim();

  const Matrix2D embed = random_matrix(rng, config.vocab, h, sigma);
  std::vector<LayerWeights> layers;
  layers.reserve(config.n_layers);
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    LayerWeights w;
    w.w_q = random_matrix(rng, h, h, sigma);
    w.w_k = random_matrix(rng, kv, h, sigma);
    w.w_v = random_matrix(rng, kv, h, sigma);
    w.w_o = random_matrix(rng, h, h, sigma);
    w.w_gate = random_matrix(rng, config.d_ff, h, sigma);
    w.w_up = random_matrix(rng, config.d_ff, h, sigma);
    w.w_down = random_matrix(rng, h, config.d_ff, sigma);
    w.norm_attn = random_norm(rng, h);
    w.norm_mlp = random_norm(rng, h);
    layers.push_back(std::move(w));
  }
  const Vector1D final_norm = random_norm(rng, h);
  const Matrix2D lm_head = random_matrix(rng, config.vocab, h, sigma);
  return TensorArchive::assemble(config, embed, layers, final_norm, lm_head);
}

}  // namespace deus
