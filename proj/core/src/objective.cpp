#include "pglearn/objective.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "pglearn/error.hpp"

namespace pglearn {
namespace {

// Calls fn(v, v', c') for every ordered cross-class validation pair.
template <class Fn>
Index for_each_pair(std::span<const Index> validation, std::span<const int> truth, int classes, Fn &&fn) {
    Index pairs = 0;
    for (int cls = 0; cls < classes; ++cls) {
        for (const Index v : validation) {
            if (truth[static_cast<std::size_t>(v)] != cls) continue;
            for (const Index w : validation) {
                if (truth[static_cast<std::size_t>(w)] == cls) continue;
                fn(v, w, cls);
                ++pairs;
            }
        }
    }
    return pairs;
}

void check_validation(std::span<const Index> validation, std::span<const int> truth, Index n) {
    for (const Index v : validation) {
        if (v < 0 || v >= n || static_cast<std::size_t>(v) >= truth.size())
            throw Error("bad_argument", "validation index out of range");
        if (truth[static_cast<std::size_t>(v)] == kUnlabeled)
            throw Error("bad_argument", "validation point without a label");
    }
}

void solve_dimension_range(const SparseMatrix &p, const Eigen::MatrixXd &f, const EdgeTensor &dp,
                           const SolverOptions &options, Index first, Index last, GradFResult &out) {
    const Index n = f.rows();
    const Index c = f.cols();
    const Index dims = last - first;
    if (dims <= 0) return;
    const double mu = options.mu;

    // forcing term mu * (dP_m F), stacked as n x (dims * c)
    Eigen::MatrixXd forcing = Eigen::MatrixXd::Zero(n, dims * c);
    Index e = 0;
    for (Index i = 0; i < p.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(p, i); it; ++it, ++e) {
            const Index j = it.col();
            for (Index m = 0; m < dims; ++m) {
                const double v = dp(e, first + m);
                if (v == 0.0) continue;
                for (Index k = 0; k < c; ++k) forcing(i, m * c + k) += v * f(j, k);
            }
        }
    }
    forcing *= mu;

    using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const RowMajorMatrix source = forcing;
    RowMajorMatrix g = RowMajorMatrix::Zero(n, dims * c);
    RowMajorMatrix next(n, dims * c);
    Eigen::VectorXd upd(dims), scale(dims);
    // a dimension stops updating once it converges, so its result does not
    // depend on which other dimensions share the batch
    std::vector<char> done(static_cast<std::size_t>(dims), 0);
    Index remaining = dims;
    int iterations = 0;
    double worst = 0.0;
    for (int t = 0; t < options.max_iter && remaining > 0; ++t) {
        next.noalias() = p * g;
        upd.setZero();
        scale.setZero();
        for (Index i = 0; i < n; ++i) {
            double *row = next.row(i).data();
            const double *src = source.row(i).data();
            const double *old = g.row(i).data();
            for (Index m = 0; m < dims; ++m) {
                if (done[static_cast<std::size_t>(m)]) {
                    std::copy(old + m * c, old + (m + 1) * c, row + m * c);
                    continue;
                }
                double u = 0.0, s = 0.0;
                for (Index k = m * c; k < (m + 1) * c; ++k) {
                    row[k] = mu * row[k] + src[k];
                    u = std::max(u, std::abs(row[k] - old[k]));
                    s = std::max(s, std::abs(row[k]));
                }
                upd(m) = std::max(upd(m), u);
                scale(m) = std::max(scale(m), s);
            }
        }
        iterations = t + 1;
        worst = 0.0;
        for (Index m = 0; m < dims; ++m) {
            if (done[static_cast<std::size_t>(m)]) continue;
            if (!std::isfinite(upd(m)) || !std::isfinite(scale(m)))
                throw Error("non_finite", "non-finite value in dF/da iteration");
            const double rel = scale(m) > 0.0 ? upd(m) / scale(m) : (upd(m) == 0.0 ? 0.0 : 1.0);
            worst = std::max(worst, rel);
            if (rel <= options.tol) {
                done[static_cast<std::size_t>(m)] = 1;
                --remaining;
            }
        }
        g.swap(next);
    }
    const bool converged = remaining == 0;
    for (Index m = 0; m < dims; ++m) out.dF[static_cast<std::size_t>(first + m)] = g(Eigen::all, Eigen::seqN(m * c, c));
    out.iterations = std::max(out.iterations, iterations);
    out.residual = std::max(out.residual, worst);
    out.converged = converged;
}

}  // namespace

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double neg_log_sigmoid(double x) noexcept {
    return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

RankLoss rank_loss(const Eigen::MatrixXd &f, std::span<const Index> validation, std::span<const int> truth) {
    check_validation(validation, truth, f.rows());
    RankLoss out;
    out.pair_count = for_each_pair(validation, truth, static_cast<int>(f.cols()), [&](Index v, Index w, int cls) {
        out.value += neg_log_sigmoid(f(v, cls) - f(w, cls));
    });
    if (out.pair_count == 0) throw Error("degenerate_validation_set", "degenerate validation set: no cross-class pairs");
    return out;
}

EdgeTensor compute_omega(const SparseMatrix &w, const EdgeTensor &delta_x) {
    if (delta_x.rows() != w.nonZeros()) throw Error("shape_mismatch", "dX does not match W's pattern");
    const Eigen::Map<const Eigen::VectorXd> values(w.valuePtr(), w.nonZeros());
    return -(delta_x.array().colwise() * values.array()).matrix();
}

EdgeTensor grad_P(const SparseGraph &graph, const EdgeTensor &omega) {
    const SparseMatrix &w = graph.weights;
    const SparseMatrix &p = graph.normalized;
    const Index n = w.rows();
    const Index d = omega.cols();
    if (omega.rows() != w.nonZeros() || p.nonZeros() != w.nonZeros())
        throw Error("shape_mismatch", "Omega, W and P must share one pattern");

    // W 1 and Omega 1
    const Eigen::VectorXd &deg = graph.degrees;
    Eigen::MatrixXd omega_rows = Eigen::MatrixXd::Zero(n, d);
    Index e = 0;
    for (Index i = 0; i < n; ++i)
        for (SparseMatrix::InnerIterator it(w, i); it; ++it, ++e) omega_rows.row(i) += omega.row(e);

    EdgeTensor dp(omega.rows(), d);
    e = 0;
    for (Index i = 0; i < n; ++i) {
        SparseMatrix::InnerIterator pit(p, i);
        for (SparseMatrix::InnerIterator it(w, i); it; ++it, ++pit, ++e) {
            const Index j = it.col();
            const double wij = it.value();
            if (wij == 0.0) throw Error("internal_error", "zero weight stored in graph pattern");
            const double ratio = pit.value() / wij;                 // P / W
            const double cube = 0.5 * ratio * ratio * ratio * wij;  // 1/2 P^3 / W^2
            dp.row(e) = omega.row(e) * ratio - cube * (deg(i) * omega_rows.row(j) + deg(j) * omega_rows.row(i));
        }
    }
    return dp;
}

GradFResult grad_F(const SparseMatrix &p, const Eigen::MatrixXd &f, const EdgeTensor &dp,
                   const SolverOptions &options, int threads) {
    if (dp.rows() != p.nonZeros()) throw Error("shape_mismatch", "dP/da does not match P's pattern");
    if (!(options.mu > 0.0 && options.mu < 1.0)) throw Error("bad_argument", "mu must lie in (0,1)");
    const Index d = dp.cols();
    GradFResult out;
    out.dF.resize(static_cast<std::size_t>(d));
    out.converged = true;

    const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(d, 1));
    if (workers == 1) {
        solve_dimension_range(p, f, dp, options, 0, d, out);
        return out;
    }
    std::vector<GradFResult> partial(static_cast<std::size_t>(workers));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
        partial[static_cast<std::size_t>(w)].dF.resize(static_cast<std::size_t>(d));
        pool.emplace_back([&, w] {
            try {
                solve_dimension_range(p, f, dp, options, d * w / workers, d * (w + 1) / workers,
                                      partial[static_cast<std::size_t>(w)]);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    for (const auto &err : errors)
        if (err) std::rethrow_exception(err);
    for (Index w = 0; w < workers; ++w) {
        auto &part = partial[static_cast<std::size_t>(w)];
        for (Index m = d * w / workers; m < d * (w + 1) / workers; ++m)
            out.dF[static_cast<std::size_t>(m)] = std::move(part.dF[static_cast<std::size_t>(m)]);
        out.iterations = std::max(out.iterations, part.iterations);
        out.residual = std::max(out.residual, part.residual);
        out.converged = out.converged && part.converged;
    }
    return out;
}

Eigen::VectorXd grad_loss(const Eigen::MatrixXd &f, std::span<const Eigen::MatrixXd> df,
                          std::span<const Index> validation, std::span<const int> truth) {
    check_validation(validation, truth, f.rows());
    const auto d = static_cast<Index>(df.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    const Index pairs = for_each_pair(validation, truth, static_cast<int>(f.cols()), [&](Index v, Index w, int cls) {
        const double o = sigmoid(f(v, cls) - f(w, cls));
        for (Index m = 0; m < d; ++m) {
            const auto &dfm = df[static_cast<std::size_t>(m)];
            g(m) += (o - 1.0) * (dfm(v, cls) - dfm(w, cls));
        }
    });
    if (pairs == 0) throw Error("degenerate_validation_set", "degenerate validation set: no cross-class pairs");
    return g;
}

GradientResult loss_gradient(const Eigen::MatrixXd &features, const SparseGraph &graph, const Eigen::MatrixXd &f,
                             std::span<const Index> validation, std::span<const int> truth,
                             const SolverOptions &options, int threads) {
    GradientResult out;
    out.loss = rank_loss(f, validation, truth);

    const EdgeTensor dx = delta_x_on_pattern(features, graph.weights);
    const EdgeTensor omega = compute_omega(graph.weights, dx);
    const EdgeTensor dp = grad_P(graph, omega);
    const GradFResult dfr = grad_F(graph.normalized, f, dp, options, threads);
    out.gradient = grad_loss(f, dfr.dF, validation, truth);

    const Index e = graph.edge_count();
    const Index d = features.cols();
    out.stats.edge_count = e;
    out.stats.dims = d;
    out.stats.tensor_entries = e * d;
    out.stats.peak_aux_entries = dx.size() + omega.size() + dp.size() + graph.n() * d;
    out.stats.df_iterations = dfr.iterations;
    out.stats.df_residual = dfr.residual;
    out.stats.df_converged = dfr.converged;
    return out;
}

}  // namespace pglearn
