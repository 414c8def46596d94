#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pglearn/graph.hpp"

namespace pglearn {

/// Damped fixed-point iteration settings. mu = alpha / (1 + alpha).
struct SolverOptions {
    double mu = 0.99;
    double tol = 1e-6;  // infinity norm of the last update
    int max_iter = 1000;
};

constexpr double mu_from_alpha(double alpha) noexcept { return alpha / (1.0 + alpha); }
constexpr double alpha_from_mu(double mu) noexcept { return mu / (1.0 - mu); }

/// LGC diffusion output.
struct SolutionMatrix {
    Eigen::MatrixXd F;  // n x c
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
};

/// Iterates F <- mu P F + (1 - mu) Y from zero (or from `initial`) until the
/// update's infinity norm drops to tol or max_iter is reached. Throws on
/// non-finite iterates.
SolutionMatrix lgc_power_solve(const SparseMatrix &p, const Eigen::MatrixXd &y, const SolverOptions &options);
SolutionMatrix lgc_power_solve(const SparseMatrix &p, const Eigen::MatrixXd &y, const SolverOptions &options,
                               const Eigen::MatrixXd &initial);

/// Dense reference: solves (I + alpha L) F = Y with L = I - P built from W.
/// Limited to n <= 2000.
SolutionMatrix lgc_direct_solve(const SparseMatrix &w, const Eigen::MatrixXd &y, double alpha);

inline constexpr Index kDirectSolveLimit = 2000;

struct Prediction {
    std::vector<int> labels;      // argmax class per row, 0-based
    std::vector<bool> unreached;  // row was all zero
    [[nodiscard]] Index unreached_count() const;
};

/// Row-wise argmax; ties go to the lowest class, all-zero rows map to class 0
/// and are flagged.
Prediction predict(const Eigen::MatrixXd &f);

/// Fraction of `subset` where predicted == truth. Throws on an empty subset.
double accuracy(std::span<const int> predicted, std::span<const int> truth, std::span<const Index> subset);

}  // namespace pglearn
