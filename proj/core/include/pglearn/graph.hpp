#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pglearn/dataset.hpp"

namespace pglearn {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Values attached to the stored entries of a sparse matrix: row e holds the
/// d-vector of stored entry e (CSR order), column m is dimension m. Storage is
/// O(nnz * d); the dense n x n x d tensor is never formed.
using EdgeTensor = Eigen::MatrixXd;

/// Neighbor count plus per-dimension weights a_m = 1 / sigma_m^2.
struct HyperConfig {
    int k = 5;
    Eigen::VectorXd a;

    bool operator==(const HyperConfig &other) const {
        return k == other.k && a.size() == other.a.size() && a == other.a;
    }
};

/// Edges whose weight falls below this are treated as numeric underflow and
/// dropped from the graph.
inline constexpr double kWeightFloor = 1e-300;

/// sum_m a_m (x_im - x_jm)^2, accumulated in ascending m.
double weighted_sq_distance(const double *xi, const double *xj, const double *a, Index d) noexcept;

/// exp(-sum_m a_m (x_im - x_jm)^2), in (0, 1] for finite inputs.
double pair_weight(const Eigen::Ref<const Eigen::VectorXd> &xi, const Eigen::Ref<const Eigen::VectorXd> &xj,
                   const Eigen::Ref<const Eigen::VectorXd> &a);

/// kNN query backend. Implementations return, for every point, its k nearest
/// other points under the a-weighted squared distance, ties broken by lower
/// point index.
class NeighborIndex {
public:
    virtual ~NeighborIndex() = default;

    /// `points` is d x n (one column per point).
    [[nodiscard]] virtual std::vector<std::vector<Index>> query(const Eigen::MatrixXd &points,
                                                                const Eigen::VectorXd &a, int k) const = 0;
};

/// Brute-force partial selection, O(n^2 d).
class ExactNeighborIndex final : public NeighborIndex {
public:
    [[nodiscard]] std::vector<std::vector<Index>> query(const Eigen::MatrixXd &points, const Eigen::VectorXd &a,
                                                        int k) const override;
};

/// Weighted union-kNN graph. W and P share one sparsity pattern, W_ii = 0.
struct SparseGraph {
    SparseMatrix weights;     // W, symmetric
    SparseMatrix normalized;  // P = D^{-1/2} W D^{-1/2}
    Eigen::VectorXd degrees;  // d_i = sum_j W_ij
    std::vector<bool> isolated;

    [[nodiscard]] Index n() const { return weights.rows(); }
    [[nodiscard]] Index edge_count() const { return weights.nonZeros(); }
    [[nodiscard]] Index isolated_count() const;
};

/// Builds the graph: an undirected edge (i, j) exists when either endpoint is
/// among the other's k nearest. Requires 1 <= k < n and a_m >= 0.
SparseGraph build_knn_graph(const Eigen::MatrixXd &features, const HyperConfig &config);
SparseGraph build_knn_graph(const Eigen::MatrixXd &features, const HyperConfig &config,
                            const NeighborIndex &index);

/// Recomputes weights for new `a` on the sparsity pattern of `topology`
/// (fixed-topology view used by gradient checks). Entries that underflow are
/// dropped.
SparseGraph reweight(const SparseGraph &topology, const Eigen::MatrixXd &features, const Eigen::VectorXd &a);

Eigen::VectorXd row_sums(const SparseMatrix &w);

/// P_ij = W_ij / sqrt(d_i d_j) on W's pattern; rows and columns of nodes with
/// zero degree stay zero.
SparseMatrix normalize(const SparseMatrix &w, const Eigen::VectorXd &degrees);

/// (x_i - x_j)^2 componentwise for every stored entry of `pattern`.
EdgeTensor delta_x_on_pattern(const Eigen::MatrixXd &features, const SparseMatrix &pattern);

/// Debug dump, one "i j w" line per stored entry (0-based, full precision).
void write_edge_list(std::ostream &out, const SparseGraph &graph);

}  // namespace pglearn
