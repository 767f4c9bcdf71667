#include "deus/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "deus/errors.hpp"

namespace deus {

namespace {

// y = RMSNorm(x) * g, row-wise over seq positions.
Matrix2D rmsnorm(const Matrix2D& x, const Vector1D& g, double eps) {
  Matrix2D out(x.rows, x.cols);
  for (std::size_t t = 0; t < x.rows; ++t) {
    const double* row = x.row_ptr(t);
    double ms = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) ms += row[c] * row[c];
    ms /= static_cast<double>(x.cols);
    const double inv = 1.0 / std::sqrt(ms + eps);
    for (std::size_t c = 0; c < x.cols; ++c) out(t, c) = row[c] * inv * g[c];
  }
  return out;
}

// In-place rotary embedding over interleaved pairs, one (seq x n*head_dim)
// matrix laid out head-major.
void apply_rope(Matrix2D& x, std::size_t n_heads, std::size_t head_dim, double theta) {
  const std::size_t half = head_dim / 2;
  for (std::size_t t = 0; t < x.rows; ++t) {
    const double pos = static_cast<double>(t);
    for (std::size_t h = 0; h < n_heads; ++h) {
      double* head = x.data.data() + t * x.cols + h * head_dim;
      for (std::size_t i = 0; i < half; ++i) {
        const double freq = std::pow(theta, -2.0 * static_cast<double>(i) /
                                                static_cast<double>(head_dim));
        const double ang = pos * freq;
        const double c = std::cos(ang);
        const double s = std::sin(ang);
        const double x0 = head[2 * i];
        const double x1 = head[2 * i + 1];
        head[2 * i] = x0 * c - x1 * s;
        head[2 * i + 1] = x0 * s + x1 * c;
      }
    }
  }
}

// x = x + delta
void add_inplace(Matrix2D& x, const Matrix2D& delta) {
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += delta.data[i];
}

Matrix2D attention(const Matrix2D& x_norm, const LayerWeights& w, const ModelConfig& cfg) {
  const std::size_t seq = x_norm.rows;
  const std::size_t hd = cfg.head_dim;

  Matrix2D q = matmul(x_norm, transpose(w.w_q));  // seq x hidden
  Matrix2D k = matmul(x_norm, transpose(w.w_k));  // seq x kv_dim
  Matrix2D v = matmul(x_norm, transpose(w.w_v));  // seq x kv_dim
  apply_rope(q, cfg.n_heads, hd, cfg.rope_theta);
  apply_rope(k, cfg.n_kv_heads, hd, cfg.rope_theta);

  const std::size_t group = cfg.n_heads / cfg.n_kv_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Matrix2D ctx(seq, cfg.hidden);
  std::vector<double> scores;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const std::size_t kvh = h / group;
    for (std::size_t t = 0; t < seq; ++t) {
      const double* qv = q.row_ptr(t) + h * hd;
      scores.assign(t + 1, 0.0);
      double maxs = -std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u <= t; ++u) {
        const double* kv = k.row_ptr(u) + kvh * hd;
        double dot = 0.0;
        for (std::size_t d = 0; d < hd; ++d) dot += qv[d] * kv[d];
        scores[u] = dot * scale;
        maxs = std::max(maxs, scores[u]);
      }
      double denom = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        scores[u] = std::exp(scores[u] - maxs);
        denom += scores[u];
      }
      double* out = ctx.data.data() + t * ctx.cols + h * hd;
      for (std::size_t u = 0; u <= t; ++u) {
        const double p = scores[u] / denom;
        const double* vv = v.row_ptr(u) + kvh * hd;
        for (std::size_t d = 0; d < hd; ++d) out[d] += p * vv[d];
      }
    }
  }
  return matmul(ctx, transpose(w.w_o));
}

Matrix2D mlp(const Matrix2D& x_norm, const LayerWeights& w) {
  Matrix2D gate = matmul(x_norm, transpose(w.w_gate));  // seq x d_ff
  const Matrix2D up = matmul(x_norm, transpose(w.w_up));
  for (std::size_t i = 0; i < gate.data.size(); ++i) {
    const double g = gate.data[i];
    gate.data[i] = g / (1.0 + std::exp(-g)) * up.data[i];  // SiLU(g)*up
  }
  return matmul(gate, transpose(w.w_down));
}

}  // namespace

ForwardTrace forward(const TensorArchive& archive, const TokenSequence& tokens, bool trace) {
  const ModelConfig& cfg = archive.config;
  for (std::uint32_t id : tokens.ids) {
    if (id >= cfg.vocab) {
      throw FormatError(FormatError::Fault::TokenOutOfRange,
                        "token " + std::to_string(id) + " out of vocab range " +
                            std::to_string(cfg.vocab));
    }
  }
  if (tokens.ids.empty()) {
    throw ShapeError("forward requires a non-empty token sequence");
  }

  const Matrix2D embed = archive.embed();
  const std::size_t seq = tokens.size();
  Matrix2D x(seq, cfg.hidden);
  for (std::size_t t = 0; t < seq; ++t) {
    const double* row = embed.row_ptr(tokens.ids[t]);
    for (std::size_t c = 0; c < cfg.hidden; ++c) x(t, c) = row[c];
  }

  ForwardTrace result;
  if (trace) result.embed_hidden = x;

  for (std::size_t i = 1; i <= cfg.n_layers; ++i) {
    const LayerWeights w = archive.layer_view(i);
    add_inplace(x, attention(rmsnorm(x, w.norm_attn, cfg.rms_eps), w, cfg));
    add_inplace(x, mlp(rmsnorm(x, w.norm_mlp, cfg.rms_eps), w));
    if (trace) result.layer_hiddens.push_back(x);
  }

  const Matrix2D normed = rmsnorm(x, archive.final_norm(), cfg.rms_eps);
  result.logits = matmul(normed, transpose(archive.lm_head()));
  result.logits.ensure_finite("logits");
  return result;
}

double perplexity(const TensorArchive& archive, const TokenSequence& tokens) {
  if (tokens.size() < 2) {
    throw ShapeError("perplexity needs at least 2 tokens (one next-token target)");
  }
  const Matrix2D logits = forward(archive, tokens).logits;
  const std::size_t vocab = archive.config.vocab;
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    const double* row = logits.row_ptr(t);
    double maxv = row[0];
    for (std::size_t c = 1; c < vocab; ++c) maxv = std::max(maxv, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) denom += std::exp(row[c] - maxv);
    const double target = row[tokens.ids[t + 1]];
    total += std::log(denom) - (target - maxv);  // -log softmax(target)
  }
  return std::exp(total / static_cast<double>(tokens.size() - 1));
}

}  // namespace deus
