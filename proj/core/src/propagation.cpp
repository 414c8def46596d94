#include "pglearn/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pglearn/error.hpp"

namespace pglearn {
namespace {

void check_shapes(const SparseMatrix &p, const Eigen::MatrixXd &y) {
    if (p.rows() != p.cols() || p.rows() != y.rows())
        throw Error("shape_mismatch", "P is " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                                          " but Y has " + std::to_string(y.rows()) + " rows");
}

}  // namespace

SolutionMatrix lgc_power_solve(const SparseMatrix &p, const Eigen::MatrixXd &y, const SolverOptions &options) {
    return lgc_power_solve(p, y, options, Eigen::MatrixXd::Zero(y.rows(), y.cols()));
}

SolutionMatrix lgc_power_solve(const SparseMatrix &p, const Eigen::MatrixXd &y, const SolverOptions &options,
                               const Eigen::MatrixXd &initial) {
    check_shapes(p, y);
    if (!(options.mu > 0.0 && options.mu < 1.0)) throw Error("bad_argument", "mu must lie in (0,1)");
    if (initial.rows() != y.rows() || initial.cols() != y.cols())
        throw Error("shape_mismatch", "warm start does not match Y");

    const double mu = options.mu;
    const Eigen::MatrixXd source = (1.0 - mu) * y;
    SolutionMatrix out;
    out.F = initial;
    Eigen::MatrixXd next(y.rows(), y.cols());
    for (int t = 0; t < options.max_iter; ++t) {
        next.noalias() = p * out.F;
        next = mu * next + source;
        out.residual = (next - out.F).cwiseAbs().maxCoeff();
        out.iterations = t + 1;
        if (!std::isfinite(out.residual)) throw Error("non_finite", "non-finite value in LGC iteration");
        // keep the iterate the residual was measured at, so the returned F
        // itself satisfies ||F - (mu P F + (1 - mu) Y)|| <= tol
        if (out.residual <= options.tol) {
            out.converged = true;
            break;
        }
        out.F.swap(next);
    }
    if (y.size() == 0) out.converged = true;
    return out;
}

SolutionMatrix lgc_direct_solve(const SparseMatrix &w, const Eigen::MatrixXd &y, double alpha) {
    if (!(alpha > 0.0)) throw Error("bad_argument", "alpha must be positive");
    const Index n = w.rows();
    if (n > kDirectSolveLimit) throw Error("bad_argument", "direct solve limited to n <= 2000");
    check_shapes(w, y);

    const Eigen::MatrixXd dense_w = Eigen::MatrixXd(w);
    const Eigen::VectorXd deg = dense_w.rowwise().sum();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (deg(i) > 0.0 && deg(j) > 0.0) p(i, j) = dense_w(i, j) / std::sqrt(deg(i) * deg(j));

    // I + alpha (I - P) is symmetric positive definite for alpha > 0
    const Eigen::MatrixXd system = (1.0 + alpha) * Eigen::MatrixXd::Identity(n, n) - alpha * p;
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) throw Error("internal_error", "LGC system is not positive definite");
    SolutionMatrix out;
    out.F = llt.solve(y);
    out.iterations = 1;
    out.residual = (system * out.F - y).cwiseAbs().maxCoeff();
    out.converged = true;
    return out;
}

Index Prediction::unreached_count() const {
    return static_cast<Index>(std::count(unreached.begin(), unreached.end(), true));
}

Prediction predict(const Eigen::MatrixXd &f) {
    Prediction out;
    out.labels.resize(static_cast<std::size_t>(f.rows()));
    out.unreached.resize(static_cast<std::size_t>(f.rows()));
    for (Index i = 0; i < f.rows(); ++i) {
        Index best = 0;
        for (Index j = 1; j < f.cols(); ++j)
            if (f(i, j) > f(i, best)) best = j;
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        out.unreached[static_cast<std::size_t>(i)] = (f.row(i).array() == 0.0).all();
    }
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth, std::span<const Index> subset) {
    if (subset.empty()) throw Error("empty_subset", "accuracy over an empty index set");
    Index hits = 0;
    for (const Index i : subset) {
        const auto u = static_cast<std::size_t>(i);
        if (u >= predicted.size() || u >= truth.size()) throw Error("bad_argument", "accuracy index out of range");
        if (predicted[u] == truth[u]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(subset.size());
}

}  // namespace pglearn
