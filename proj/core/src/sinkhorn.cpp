#include "deus/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "deus/errors.hpp"

namespace deus {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// LSE over {values[i] : i in [0,n)} read through `get`, ignoring -inf.
template <typename Get>
double log_sum_exp(std::size_t n, Get get) {
  double maxv = -kInf;
  for (std::size_t i = 0; i < n; ++i) maxv = std::max(maxv, get(i));
  if (maxv == -kInf) return -kInf;  // fully blocked row/column
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = get(i);
    if (v != -kInf) acc += std::exp(v - maxv);
  }
  return maxv + std::log(acc);
}

double mean_finite(const Matrix2D& c) {
  double acc = 0.0;
  std::size_t count = 0;
  for (double v : c.data) {
    if (std::isfinite(v)) {
      acc += v;
      ++count;
    }
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

}  // namespace

CostMatrix build_cost(const Matrix2D& w_src, const Matrix2D& w_dst, std::string src_name,
                      std::string dst_name) {
  if (w_src.cols != w_dst.cols) {
    throw ShapeError("build_cost column mismatch: " + shape_string(w_src) + " vs " +
                     shape_string(w_dst));
  }
  CostMatrix cost;
  cost.c = Matrix2D(w_src.rows, w_dst.rows);
  for (std::size_t k = 0; k < w_src.rows; ++k) {
    for (std::size_t j = 0; j < w_dst.rows; ++j) {
      cost.c(k, j) = row_l2_distance(w_src, w_dst, k, j);
    }
  }
  cost.src_name = std::move(src_name);
  cost.dst_name = std::move(dst_name);
  return cost;
}

CostMatrix build_cost_head_blocked(const Matrix2D& w_src, const Matrix2D& w_dst,
                                   std::size_t block, std::string src_name,
                                   std::string dst_name) {
  if (w_src.rows != w_dst.rows) {
    throw ShapeError("head-blocked cost needs equal row counts, got " + shape_string(w_src) +
                     " vs " + shape_string(w_dst));
  }
  if (block == 0 || w_src.rows % block != 0) {
    throw ShapeError("head block " + std::to_string(block) + " does not partition " +
                     std::to_string(w_src.rows) + " rows");
  }
  CostMatrix cost = build_cost(w_src, w_dst, std::move(src_name), std::move(dst_name));
  for (std::size_t k = 0; k < cost.c.rows; ++k) {
    for (std::size_t j = 0; j < cost.c.cols; ++j) {
      if (k / block != j / block) cost.c(k, j) = kInf;
    }
  }
  return cost;
}

TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornParams& params) {
  if (params.epsilon <= 0.0) {
    throw SolverError("sinkhorn epsilon must be positive, got " +
                      std::to_string(params.epsilon));
  }
  const Matrix2D& c = cost.c;
  const std::size_t n = c.rows;
  const std::size_t m = c.cols;
  if (n == 0 || m == 0) throw ShapeError("sinkhorn on empty cost matrix");

  double eps_hat = params.epsilon;
  if (params.normalize_cost) {
    const double scale = mean_finite(c);
    if (scale > 0.0) eps_hat = params.epsilon * scale;
  }
  if (!(eps_hat > 0.0) || !std::isfinite(eps_hat)) {
    throw SolverError("epsilon too small: effective regularization underflowed");
  }

  TransportPlan plan;
  plan.alpha = Vector1D(n, 1.0 / static_cast<double>(n));
  plan.beta = Vector1D(m, 1.0 / static_cast<double>(m));
  plan.epsilon = params.epsilon;
  plan.epsilon_effective = eps_hat;

  const double log_a = std::log(1.0 / static_cast<double>(n));
  const double log_b = std::log(1.0 / static_cast<double>(m));
  std::vector<double> f(n, 0.0), g(m, 0.0), row_lse(n);

  auto assemble = [&](Matrix2D& t) {
    t = Matrix2D(n, m);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        const double e = c(k, j);
        t(k, j) = (e == kInf) ? 0.0 : std::exp((f[k] + g[j] - e) / eps_hat);
      }
    }
  };

  for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
    // Row potentials. The pre-update row sums are the true row residual of
    // the current plan (columns are exact right after each g update).
    double row_res = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double lse =
          log_sum_exp(m, [&](std::size_t j) { return (g[j] - c(k, j)) / eps_hat; });
      if (lse == -kInf) {
        throw SolverError("sinkhorn infeasible: row " + std::to_string(k) +
                          " of the cost matrix is fully blocked");
      }
      row_lse[k] = lse;
      row_res += std::fabs(std::exp(f[k] / eps_hat + lse) - plan.alpha[k]);
    }
    if (iter > 0 && row_res < params.tol) break;
    for (std::size_t k = 0; k < n; ++k) f[k] = eps_hat * (log_a - row_lse[k]);

    // Column potentials.
    for (std::size_t j = 0; j < m; ++j) {
      const double lse =
          log_sum_exp(n, [&](std::size_t k) { return (f[k] - c(k, j)) / eps_hat; });
      if (lse == -kInf) {
        throw SolverError("sinkhorn infeasible: column " + std::to_string(j) +
                          " of the cost matrix is fully blocked");
      }
      g[j] = eps_hat * (log_b - lse);
    }
    plan.iterations_used = iter + 1;

    if (params.record_trace) {
      Matrix2D t;
      assemble(t);
      plan.sweep_transport_cost.push_back(transport_cost(t, c));
      double mass = std::accumulate(t.data.begin(), t.data.end(), 0.0);
      double dual = 0.0;
      for (std::size_t k = 0; k < n; ++k) dual += f[k] * plan.alpha[k];
      for (std::size_t j = 0; j < m; ++j) dual += g[j] * plan.beta[j];
      plan.sweep_dual_objective.push_back(dual - eps_hat * mass);
    }
  }

  assemble(plan.t_raw);
  plan.t_raw.ensure_finite("transport plan");

  // Convergence is reported against the plan actually returned.
  double row_res = 0.0, col_res = 0.0;
  std::vector<double> col_sums(m, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double rs = 0.0;
    const double* row = plan.t_raw.row_ptr(k);
    for (std::size_t j = 0; j < m; ++j) {
      rs += row[j];
      col_sums[j] += row[j];
    }
    if (rs <= 0.0) {
      throw SolverError("epsilon too small: transport kernel underflowed to an all-zero row");
    }
    row_res += std::fabs(rs - plan.alpha[k]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (col_sums[j] <= 0.0) {
      throw SolverError("epsilon too small: transport kernel underflowed to an all-zero column");
    }
    col_res += std::fabs(col_sums[j] - plan.beta[j]);
  }
  plan.converged = row_res < params.tol && col_res < params.tol;
  return plan;
}

ScaledPlan scale_plan(const TransportPlan& plan) {
  const Matrix2D& t = plan.t_raw;
  if (t.rows != t.cols) {
    throw ShapeError("scale_plan needs a square plan, got " + shape_string(t));
  }
  ScaledPlan scaled{Matrix2D(t.rows, t.cols)};
  const double n = static_cast<double>(t.rows);
  for (std::size_t i = 0; i < t.data.size(); ++i) scaled.t_scaled.data[i] = n * t.data[i];
  return scaled;
}

std::vector<std::size_t> harden(const TransportPlan& plan) {
  const Matrix2D& t = plan.t_raw;
  if (t.rows != t.cols) {
    throw ShapeError("harden needs a square plan, got " + shape_string(t));
  }
  std::vector<std::size_t> perm(t.rows);
  std::vector<std::size_t> owner(t.cols, t.rows);  // rows claiming each column
  for (std::size_t k = 0; k < t.rows; ++k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < t.cols; ++j) {
      if (t(k, j) > t(k, best)) best = j;  // first-wins tie-break
    }
    if (owner[best] != t.rows) {
      throw SolverError("non-permutation plan: rows " + std::to_string(owner[best]) + " and " +
                        std::to_string(k) + " share argmax column " + std::to_string(best));
    }
    owner[best] = k;
    perm[k] = best;
  }
  return perm;
}

Assignment exact_ot_small(const CostMatrix& cost) {
  const Matrix2D& c = cost.c;
  if (c.rows != c.cols) {
    throw ShapeError("exact_ot_small needs a square cost, got " + shape_string(c));
  }
  const std::size_t n = c.rows;
  if (n > 8) {
    throw SolverError("exact_ot_small refuses n=" + std::to_string(n) +
                      " (> 8, combinatorial guard)");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best;
  best.total_cost = kInf;
  do {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      total += c(k, perm[k]);
      if (total == kInf) break;
    }
    if (total < best.total_cost) {
      best.total_cost = total;
      best.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (!std::isfinite(best.total_cost)) {
    throw SolverError("exact_ot_small: all assignments blocked");
  }
  best.total_cost /= static_cast<double>(n);
  return best;
}

double transport_cost(const Matrix2D& t, const Matrix2D& c) {
  if (!t.same_shape(c)) {
    throw ShapeError("transport_cost shape mismatch: " + shape_string(t) + " vs " +
                     shape_string(c));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (t.data[i] > 0.0) acc += t.data[i] * c.data[i];
  }
  return acc;
}

double plan_entropy(const Matrix2D& t) {
  double acc = 0.0;
  for (double v : t.data) {
    if (v > 0.0) acc -= v * std::log(v);
  }
  return acc;
}

}  // namespace deus
