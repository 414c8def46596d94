#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pglearn/dataset.hpp"
#include "pglearn/graph.hpp"
#include "pglearn/propagation.hpp"
#include "pglearn/rng.hpp"

namespace pglearn {

/// Immutable search problem: dataset, split and the diffusion sources.
/// Holds a reference to the dataset; the caller keeps it alive. Safe to share
/// across threads.
class Problem {
public:
    Problem(const Dataset &dataset, SplitSpec split, bool include_validation = false);

    [[nodiscard]] const Dataset &dataset() const { return *dataset_; }
    [[nodiscard]] const SplitSpec &split() const { return split_; }
    [[nodiscard]] const Eigen::MatrixXd &label_matrix() const { return y_; }
    [[nodiscard]] std::span<const int> truth() const { return dataset_->labels; }
    /// Unlabeled points that carry a ground-truth label (the test set).
    [[nodiscard]] std::span<const Index> test_indices() const { return test_; }

private:
    const Dataset *dataset_;
    SplitSpec split_;
    Eigen::MatrixXd y_;
    std::vector<Index> test_;
};

/// Sampling ranges for fresh configurations: k uniform in [k_min, k_max]
/// (clamped to n-1), sigma_m log-uniform in [low * dbar, high * dbar].
struct SearchSpace {
    int k_min = 5;
    int k_max = 20;
    double mean_distance = 1.0;  // dbar
    double sigma_low = 0.1;
    double sigma_high = 10.0;

    [[nodiscard]] int k_upper(Index n) const;
    /// 1e-12 / dbar^2
    [[nodiscard]] double a_floor() const;
};

/// Mean pairwise Euclidean distance over min(n, max_points) randomly chosen
/// points (all points when n <= max_points, in which case the seed is unused).
double estimate_mean_distance(const Eigen::MatrixXd &features, std::uint64_t seed, Index max_points = 1000);

SearchSpace make_search_space(const Dataset &dataset, std::uint64_t seed, int k_min = 5, int k_max = 20);

HyperConfig sample_config(const SearchSpace &space, Index n, Index d, Rng &rng);

struct OptimizerSettings {
    double gamma = 0.05;     // step as a fraction of ||a||_inf along the inf-normalized gradient
    double eps_conv = 1e-3;  // converged when ||delta a||_inf <= eps_conv ||a||_inf
    int max_halvings = 8;
    double a_floor = 1e-12;
    SolverOptions solver{};
    SolverOptions gradient_solver{};
    int gradient_threads = 1;
};

/// Loss and accuracies of one configuration, measured on a diffusion output.
struct Evaluation {
    double loss = std::numeric_limits<double>::infinity();
    Index pair_count = 0;
    double validation_accuracy = 0.0;
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    Index unreached = 0;
};

struct EvaluatedConfig {
    SparseGraph graph;
    SolutionMatrix solution;
    Evaluation evaluation;
};

Evaluation evaluate_solution(const Problem &problem, const Eigen::MatrixXd &f);

/// Builds the graph for `config`, diffuses the problem's label matrix and
/// measures it. `warm_start` may be empty.
EvaluatedConfig evaluate_config(const Problem &problem, const HyperConfig &config, const SolverOptions &solver,
                                const Eigen::MatrixXd &warm_start = Eigen::MatrixXd());

struct HistoryEntry {
    int iteration = 0;
    double loss = 0.0;
    double validation_accuracy = 0.0;
    double test_accuracy = 0.0;

    bool operator==(const HistoryEntry &) const = default;
};

/// One gradient-descent run over `a` at fixed k.
struct OptimizerState {
    HyperConfig config;
    HyperConfig initial;
    double gamma = 0.05;
    int iteration = 0;
    std::vector<HistoryEntry> history;  // append-only, one entry per step
    bool converged = false;
    bool diverged = false;
    double last_step = 0.0;  // ||delta a||_inf of the last step
    /// LGC solution at `config` (warm start for the next solve); empty until
    /// the first evaluation.
    Eigen::MatrixXd solution;
    std::optional<Evaluation> current;  // evaluation of `config`

    /// Graph for `config`; rebuilt on demand, never serialized.
    std::shared_ptr<const SparseGraph> graph_cache;

    [[nodiscard]] bool finished() const { return converged || diverged; }
};

OptimizerState init_state(const Problem &problem, const SearchSpace &space, const OptimizerSettings &settings,
                          std::uint64_t seed);
OptimizerState init_state(const HyperConfig &config, const OptimizerSettings &settings);

/// Makes sure `state.current` describes `state.config`, solving cold on the
/// first call.
void ensure_evaluated(OptimizerState &state, const Problem &problem, const OptimizerSettings &settings);

/// One pass: graph for a -> LGC solve -> dg/da -> projected, backtracked step.
/// A non-finite gradient marks the state diverged.
void gradient_step(OptimizerState &state, const Problem &problem, const OptimizerSettings &settings);

/// Either a number of gradient steps or a wall-clock allowance.
struct Budget {
    std::optional<int> iterations;
    std::optional<double> seconds;

    static Budget steps(int n) { return {n, std::nullopt}; }
    static Budget wall_clock(double s) { return {std::nullopt, s}; }
};

/// Repeats gradient_step until the state converges, diverges or the budget is
/// used up. Returns the number of steps taken. Resumable.
int run_until(OptimizerState &state, const Problem &problem, const OptimizerSettings &settings,
              const Budget &budget);

/// Checkpoint as JSON, doubles written with round-trip precision so a
/// restored state continues bit-identically.
std::string state_to_json(const OptimizerState &state);
OptimizerState state_from_json(const std::string &text);

}  // namespace pglearn
