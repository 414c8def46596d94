#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pglearn/graph.hpp"
#include "pglearn/propagation.hpp"

namespace pglearn {

/// Pairwise ranking loss over the validation set.
struct RankLoss {
    double value = 0.0;
    Index pair_count = 0;
};

/// Logistic sigmoid and -log(sigmoid(x)), both overflow-free.
double sigmoid(double x) noexcept;
double neg_log_sigmoid(double x) noexcept;

/// Sum over classes c' and ordered pairs (v in V_c', v' in V \ V_c') of
/// -log sigmoid(F_vc' - F_v'c'). Throws Error("degenerate_validation_set")
/// when no such pair exists.
RankLoss rank_loss(const Eigen::MatrixXd &f, std::span<const Index> validation, std::span<const int> truth);

/// dW/da on W's pattern: Omega_e = -W_e * dX_e.
EdgeTensor compute_omega(const SparseMatrix &w, const EdgeTensor &delta_x);

/// dP/da on W's pattern, tensor form:
///   Omega (P / W) - 1/2 P^3 / W^2 (W 1 (Omega 1)^T + (W 1 (Omega 1)^T)^T)
/// with the row sums W 1 and Omega 1 accumulated once.
EdgeTensor grad_P(const SparseGraph &graph, const EdgeTensor &omega);

/// Result of the per-dimension dF/da_m solves.
struct GradFResult {
    std::vector<Eigen::MatrixXd> dF;  // d matrices, each n x c
    int iterations = 0;
    double residual = 0.0;  // worst relative update over dimensions at exit
    bool converged = false;
};

/// Solves (I + alpha L) dF_m = alpha (dP_m) F for every m with the damped
/// iteration G <- mu (P G + (dP_m) F) started from zero. Convergence is per
/// dimension: ||update||_inf <= tol * ||G_m||_inf. Dimensions are split into
/// `threads` contiguous batches.
GradFResult grad_F(const SparseMatrix &p, const Eigen::MatrixXd &f, const EdgeTensor &dp,
                   const SolverOptions &options, int threads = 1);

/// Chain rule: sum over the same pairs as rank_loss of
/// (o - 1)(dF_m[v, c'] - dF_m[v', c']) with o = sigmoid(F_vc' - F_v'c').
Eigen::VectorXd grad_loss(const Eigen::MatrixXd &f, std::span<const Eigen::MatrixXd> df,
                          std::span<const Index> validation, std::span<const int> truth);

/// Work accounting for one gradient evaluation.
struct GradientStats {
    Index edge_count = 0;
    Index dims = 0;
    Index tensor_entries = 0;      // entries in each of dX, Omega, dP/da
    Index peak_aux_entries = 0;    // edge tensors plus row-sum buffers alive at once
    int df_iterations = 0;
    double df_residual = 0.0;
    bool df_converged = false;
};

struct GradientResult {
    RankLoss loss;
    Eigen::VectorXd gradient;  // dg/da, size d
    GradientStats stats;
};

/// Full pipeline for one fixed graph and its converged LGC solution F.
GradientResult loss_gradient(const Eigen::MatrixXd &features, const SparseGraph &graph, const Eigen::MatrixXd &f,
                             std::span<const Index> validation, std::span<const int> truth,
                             const SolverOptions &options, int threads = 1);

}  // namespace pglearn
