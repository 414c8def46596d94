#include "pglearn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "pglearn/error.hpp"

namespace pglearn {
namespace {

using Triplet = Eigen::Triplet<double>;

// Builds a SparseGraph from a symmetric adjacency list (sorted rows) whose
// weights are evaluated on `points` (d x n).
SparseGraph assemble(const std::vector<std::vector<Index>> &adjacency, const Eigen::MatrixXd &points,
                     const Eigen::VectorXd &a) {
    const Index n = points.cols();
    const Index d = points.rows();
    std::vector<Triplet> triplets;
    std::size_t total = 0;
    for (const auto &row : adjacency) total += row.size();
    triplets.reserve(total);
    for (Index i = 0; i < n; ++i) {
        for (const Index j : adjacency[static_cast<std::size_t>(i)]) {
            const double w =
                std::exp(-weighted_sq_distance(points.col(i).data(), points.col(j).data(), a.data(), d));
            if (w >= kWeightFloor) triplets.emplace_back(i, j, w);
        }
    }
    SparseGraph g;
    g.weights.resize(n, n);
    g.weights.setFromTriplets(triplets.begin(), triplets.end());
    g.weights.makeCompressed();
    g.degrees = row_sums(g.weights);
    g.normalized = normalize(g.weights, g.degrees);
    g.isolated.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) g.isolated[static_cast<std::size_t>(i)] = g.degrees(i) <= 0.0;
    return g;
}

void check_weights(const Eigen::VectorXd &a, Index d) {
    if (a.size() != d)
        throw Error("shape_mismatch", "weight vector has " + std::to_string(a.size()) + " entries, expected " +
                                          std::to_string(d));
    if (!a.allFinite() || (a.array() < 0.0).any())
        throw Error("bad_argument", "bandwidth weights must be finite and non-negative");
}

}  // namespace

double weighted_sq_distance(const double *xi, const double *xj, const double *a, Index d) noexcept {
    double s = 0.0;
    for (Index m = 0; m < d; ++m) {
        const double diff = xi[m] - xj[m];
        s += a[m] * (diff * diff);
    }
    return s;
}

double pair_weight(const Eigen::Ref<const Eigen::VectorXd> &xi, const Eigen::Ref<const Eigen::VectorXd> &xj,
                   const Eigen::Ref<const Eigen::VectorXd> &a) {
    const Eigen::VectorXd ci = xi, cj = xj, ca = a;
    return std::exp(-weighted_sq_distance(ci.data(), cj.data(), ca.data(), ci.size()));
}

Index SparseGraph::isolated_count() const {
    return static_cast<Index>(std::count(isolated.begin(), isolated.end(), true));
}

std::vector<std::vector<Index>> ExactNeighborIndex::query(const Eigen::MatrixXd &points, const Eigen::VectorXd &a,
                                                          int k) const {
    const Index n = points.cols();
    const Index d = points.rows();
    std::vector<std::vector<Index>> out(static_cast<std::size_t>(n));
    std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            cand[c++] = {weighted_sq_distance(points.col(i).data(), points.col(j).data(), a.data(), d), j};
        }
        const auto kth = cand.begin() + k;
        std::nth_element(cand.begin(), kth - 1, cand.end());
        auto &row = out[static_cast<std::size_t>(i)];
        row.reserve(static_cast<std::size_t>(k));
        for (auto it = cand.begin(); it != kth; ++it) row.push_back(it->second);
    }
    return out;
}

SparseGraph build_knn_graph(const Eigen::MatrixXd &features, const HyperConfig &config) {
    static const ExactNeighborIndex exact;
    return build_knn_graph(features, config, exact);
}

SparseGraph build_knn_graph(const Eigen::MatrixXd &features, const HyperConfig &config,
                            const NeighborIndex &index) {
    const Index n = features.rows();
    check_weights(config.a, features.cols());
    if (config.k < 1 || config.k >= n)
        throw Error("bad_argument", "k=" + std::to_string(config.k) + " must lie in [1, n-1] for n=" +
                                        std::to_string(n));

    const Eigen::MatrixXd points = features.transpose();
    const auto neighbors = index.query(points, config.a, config.k);

    std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        for (const Index j : neighbors[static_cast<std::size_t>(i)]) {
            adjacency[static_cast<std::size_t>(i)].push_back(j);
            adjacency[static_cast<std::size_t>(j)].push_back(i);
        }
    }
    for (auto &row : adjacency) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return assemble(adjacency, points, config.a);
}

SparseGraph reweight(const SparseGraph &topology, const Eigen::MatrixXd &features, const Eigen::VectorXd &a) {
    check_weights(a, features.cols());
    const SparseMatrix &w = topology.weights;
    std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(w.rows()));
    for (Index i = 0; i < w.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(w, i); it; ++it) adjacency[static_cast<std::size_t>(i)].push_back(it.col());
    return assemble(adjacency, features.transpose(), a);
}

Eigen::VectorXd row_sums(const SparseMatrix &w) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(w.rows());
    for (Index i = 0; i < w.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(w, i); it; ++it) s(i) += it.value();
    return s;
}

SparseMatrix normalize(const SparseMatrix &w, const Eigen::VectorXd &degrees) {
    SparseMatrix p = w;
    for (Index i = 0; i < p.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(p, i); it; ++it) {
            const double dd = degrees(i) * degrees(it.col());
            it.valueRef() = dd > 0.0 ? it.value() / std::sqrt(dd) : 0.0;
        }
    }
    return p;
}

EdgeTensor delta_x_on_pattern(const Eigen::MatrixXd &features, const SparseMatrix &pattern) {
    const Index d = features.cols();
    const Eigen::MatrixXd points = features.transpose();
    EdgeTensor dx(pattern.nonZeros(), d);
    Index e = 0;
    for (Index i = 0; i < pattern.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(pattern, i); it; ++it, ++e) {
            const auto xi = points.col(i);
            const auto xj = points.col(it.col());
            dx.row(e) = (xi - xj).array().square().transpose();
        }
    }
    return dx;
}

void write_edge_list(std::ostream &out, const SparseGraph &graph) {
    const auto old = out.precision(17);
    for (Index i = 0; i < graph.weights.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(graph.weights, i); it; ++it)
            out << i << ' ' << it.col() << ' ' << it.value() << '\n';
    out.precision(old);
}

}  // namespace pglearn
