#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "deus/matrix.hpp"

namespace deus {

// Pairwise row-distance matrix between the output neurons of two weight
// matrices. Entries are >= 0 and vanish exactly where rows coincide.
// Head-blocked costs carry +inf off the within-head diagonal blocks.
struct CostMatrix {
  Matrix2D c;            // n_src x n_dst
  std::string src_name;  // provenance of the two blocks
  std::string dst_name;
};

struct SinkhornParams {
  double epsilon = 0.06;
  std::size_t max_iter = 2000;
  double tol = 1e-9;  // L1 residual on each marginal
  // When set, epsilon is interpreted relative to the mean finite cost
  // (eps_hat = epsilon * mean(C)), so the default behaves consistently
  // across weight scales. Raw mode uses epsilon as-is.
  bool normalize_cost = true;
  // Record <T,C> and the dual objective after every sweep (diagnostics;
  // doubles the per-sweep work).
  bool record_trace = false;
};

// Entropic OT coupling with its marginals.
struct TransportPlan {
  Matrix2D t_raw;  // n x m, entries >= 0
  Vector1D alpha;  // uniform 1/n
  Vector1D beta;   // uniform 1/m
  double epsilon = 0.0;            // as requested
  double epsilon_effective = 0.0;  // after mean-cost scaling
  std::size_t iterations_used = 0;
  bool converged = false;

  // Per-sweep series, filled when record_trace is set. The dual objective
  // <f,alpha>+<g,beta>-eps*sum(T) ascends monotonically (exact block
  // coordinate ascent); the raw transport cost does not.
  std::vector<double> sweep_transport_cost;
  std::vector<double> sweep_dual_objective;
};

// Doubly stochastic form: n * t_raw for the square uniform case, so that
// t_scaled^T * W is a convex recombination of rows.
struct ScaledPlan {
  Matrix2D t_scaled;

  static ScaledPlan identity(std::size_t n) { return ScaledPlan{Matrix2D::identity(n)}; }
  bool operator==(const ScaledPlan&) const = default;
};

// c[k][j] = ||row_k(w_src) - row_j(w_dst)||_2; marginals are uniform
// (each neuron weighted equally). Requires matching column counts.
CostMatrix build_cost(const Matrix2D& w_src, const Matrix2D& w_dst,
                      std::string src_name = "src", std::string dst_name = "dst");

// Same, but +inf outside the contiguous diagonal blocks of `block` rows
// (rows must be square-partitionable: n_src == n_dst, block | n_src).
CostMatrix build_cost_head_blocked(const Matrix2D& w_src, const Matrix2D& w_dst,
                                   std::size_t block, std::string src_name = "src",
                                   std::string dst_name = "dst");

// Log-domain stabilized Sinkhorn-Knopp for OT(alpha, beta, C) with uniform
// marginals. Alternates potential updates until both L1 marginal residuals
// drop below tol or max_iter sweeps elapse; non-convergence is reported via
// the flag, not an error.
TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornParams& params = {});

// Requires a square plan with uniform marginals.
ScaledPlan scale_plan(const TransportPlan& plan);

// Per-row argmax (lowest column index wins ties). SolverError if the argmax
// map is not a bijection.
std::vector<std::size_t> harden(const TransportPlan& plan);

struct Assignment {
  std::vector<std::size_t> perm;
  double total_cost = 0.0;  // (1/n) * sum_k c[k][perm[k]]
};

// Brute-force enumeration of all n! row->column assignments, n <= 8.
// Ground-truth oracle for the entropic solver.
Assignment exact_ot_small(const CostMatrix& cost);

// <T,C> with the convention 0 * inf = 0 (blocked cells carry no mass).
double transport_cost(const Matrix2D& t, const Matrix2D& c);

// -sum T log T over positive entries.
double plan_entropy(const Matrix2D& t);

}  // namespace deus
