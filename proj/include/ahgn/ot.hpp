#pragma once

#include <span>
#include <vector>

#include "ahgn/autodiff.hpp"
#include "ahgn/tensor.hpp"

namespace ahgn {

struct OTConfig {
  double lambda = 0.5;      // node-cost weight
  double alpha = 0.1;       // weight of the cross-modal loss
  double eps_reg = 0.05;    // entropic regularization
  int sinkhorn_iters = 200;
  int gw_outer_iters = 10;
  double tol = 1e-6;        // marginal residual target
};

struct SinkhornResult {
  Tensor plan;
  int iterations = 0;
  double row_residual = 0.0;  // ||T 1 - p||_inf
  double col_residual = 0.0;  // ||T^T 1 - q||_inf
  bool converged = false;
};

// Log-domain Sinkhorn scaling for min <T, C> - eps H(T) subject to T 1 = p,
// T^T 1 = q. Throws NumericalError if the dual potentials become non-finite.
SinkhornResult sinkhorn(const Tensor& cost, std::span<const double> p, std::span<const double> q, double eps_reg,
                        int iters, double tol);

std::vector<double> uniform_marginal(std::size_t n);

// Plan, marginals, costs and the resulting distance for one sub-graph pair.
struct Coupling {
  Tensor plan;
  std::vector<double> p_s, p_v;
  Tensor node_cost;  // n x m, c(s_i, v_j)
  Tensor cost_s;     // n x n
  Tensor cost_v;     // m x m
  double distance = 0.0;
  double row_residual = 0.0;
  double col_residual = 0.0;
  int outer_iterations = 0;
  bool converged = false;  // last Sinkhorn solve met tol; residuals are only bounded then
};

// (L (x) T)_ij = sum_{i'j'} |C_s(i,i') - C_v(j,j')| T_{i'j'}
Tensor gw_linearization(const Tensor& cost_s, const Tensor& cost_v, const Tensor& plan);

// sum_ij T_ij [lambda C_ij + (L (x) T)_ij]
double fused_objective(const Tensor& node_cost, const Tensor& cost_s, const Tensor& cost_v, const Tensor& plan,
                       double lambda);

// Fused Wasserstein / Gromov-Wasserstein solve on explicit cost matrices with
// uniform marginals: repeated Sinkhorn on the linearized cost, starting from
// the product coupling.
Coupling fused_gw(const Tensor& node_cost, const Tensor& cost_s, const Tensor& cost_v, const OTConfig& cfg);

// Distance between subtitle nodes (n x d) and visual nodes (m x d) with
// cosine node and edge costs.
Coupling got_distance(const Tensor& subtitle, const Tensor& visual, const OTConfig& cfg);

// Differentiable distance at a fixed plan: gradients reach the node features
// through the cosine cost matrices only.
Var got_energy(Var subtitle, Var visual, const Tensor& plan, double lambda);

struct SegmentPair {
  Var subtitle;
  Var visual;
};

struct CrossModalLoss {
  Var loss;  // alpha * mean_i D_i
  std::vector<Coupling> couplings;
};

// When `frozen_plans` is given, its plans are reused instead of re-solving
// (one per segment, in order).
CrossModalLoss loss_cm(std::span<const SegmentPair> segments, const OTConfig& cfg,
                       const std::vector<Tensor>* frozen_plans = nullptr);

// Exact assignment cost for square costs with uniform marginals: minimum over
// all n! permutations of the mean matched cost. n must be <= 6.
double brute_force_wd(const Tensor& cost);

}  // namespace ahgn
