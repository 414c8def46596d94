#pragma once

#include <cstdint>
#include <limits>

#include "pglearn/scheduler.hpp"

namespace pglearn {

/// Recursive 2-d grid over (k, sigma) with a shared bandwidth a_m = 1/sigma^2.
/// Starts from a 4 x 4 grid (k evenly spaced over the search range, sigma
/// log-spaced), then repeatedly halves both spacings and evaluates the 3 x 3
/// neighbourhood of the incumbent. Stops after `budget` evaluations; the
/// incumbent is the cell with the highest validation accuracy (lower rank
/// loss breaks ties).
/// `max_seconds` optionally bounds wall-clock time as well.
SearchReport grid_search(const Problem &problem, const SearchSpace &space, const SolverOptions &solver,
                         int budget, double max_seconds = std::numeric_limits<double>::infinity());

/// Samples configurations exactly like a fresh optimizer run, evaluates each
/// once (no gradient steps) and keeps the best by validation accuracy.
SearchReport random_search_d(const Problem &problem, const SearchSpace &space, const SolverOptions &solver,
                             int budget, std::uint64_t seed,
                             double max_seconds = std::numeric_limits<double>::infinity());

/// Same graph as a Grid cell: k neighbours, a_m = 1/sigma^2 for every m.
HyperConfig uniform_config(int k, double sigma, Index d);

}  // namespace pglearn
