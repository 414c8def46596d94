#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pglearn/optimizer.hpp"

namespace pglearn {

enum class UnitKind { iterations, seconds };

/// One time unit: `size` gradient steps (deterministic) or `size` seconds.
struct TimeUnit {
    UnitKind kind = UnitKind::iterations;
    double size = 4.0;

    bool operator==(const TimeUnit &) const = default;
};

struct SchedulerConfig {
    int budget = 16;  // B, time units per thread
    int rate = 2;     // r, downsampling rate
    int threads = 8;  // T
    TimeUnit unit{};
    std::uint64_t seed = 0;
};

/// R = floor(log_r B), computed in integer arithmetic.
int elimination_rounds(int budget, int rate);

/// Length of leg i (0 = initial leg): B r^-R for i = 0, otherwise
/// B (r^-(R-i) - r^-(R-i+1)).
double round_duration(int i, int budget, int rate, int rounds);

/// Cumulative time at the end of leg i: B r^-(R-i).
double checkpoint_time(int i, int budget, int rate, int rounds);

/// Cumulative step count at the end of leg i in deterministic mode:
/// floor(B U r^-(R-i)), with the last leg ending exactly at B U.
long checkpoint_steps(int i, int budget, int rate, int rounds, int steps_per_unit);

/// Threads kept at each checkpoint: max(1, floor(T / r)).
int survivor_count(int threads, int rate);

/// T + (T - survivors) R.
int configurations_examined(int threads, int rate, int budget);

/// Indices of the m lowest losses; non-finite losses rank last, ties go to the
/// lower index.
std::vector<std::size_t> get_top(std::span<const double> losses, std::size_t m);

/// Every configuration a search looked at.
struct ConfigRecord {
    int id = 0;
    int thread = 0;
    int origin_round = 0;
    int ended_round = 0;  // round at whose checkpoint it was replaced, or R+1 if alive at the end
    std::string status;   // "replaced", "surviving" or "final"
    HyperConfig initial;
    HyperConfig final_config;
    std::vector<HistoryEntry> trace;
    Evaluation final_evaluation;
    bool converged = false;
    bool diverged = false;
};

struct CheckpointRecord {
    int round = 0;
    double time = 0.0;  // cumulative time units
    std::vector<int> config_ids;
    std::vector<double> losses;
    std::vector<int> survivors;  // config ids kept
    std::vector<int> replaced;   // config ids terminated
};

/// One thread running one configuration for one leg.
struct LegEvent {
    int leg = 0;
    int thread = 0;
    int config_id = 0;
    bool resumed = false;
    int steps = 0;
};

struct CurvePoint {
    double time = 0.0;  // cumulative work (steps or evaluations, summed over threads)
    double seconds = 0.0;
    double best_validation_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct GridLevelRecord {
    int level = 0;
    double k_step = 0.0;
    double log_sigma_step = 0.0;
    int cells_evaluated = 0;
};

/// Common report for PG-learn, Gradient, Grid and Rand_d runs.
struct SearchReport {
    std::string method;
    HyperConfig best;
    Evaluation best_evaluation;
    int best_config_id = -1;
    std::vector<ConfigRecord> configs;
    std::vector<CheckpointRecord> checkpoints;
    std::vector<LegEvent> events;
    std::vector<CurvePoint> curve;
    std::vector<GridLevelRecord> grid_levels;
    double elapsed_seconds = 0.0;
    long work_units = 0;  // total gradient steps or evaluations consumed
};

/// Parallel successive halving over Gradient runs. Worker threads own their
/// optimizer states between barrier-synchronized checkpoints; fresh
/// configurations are drawn from per-(thread, round) seeded streams.
SearchReport pg_learn(const Problem &problem, const SearchSpace &space, const OptimizerSettings &settings,
                      const SchedulerConfig &config);

}  // namespace pglearn
