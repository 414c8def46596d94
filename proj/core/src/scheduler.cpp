#include "pglearn/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "pglearn/error.hpp"

namespace pglearn {
namespace {

long ipow(long base, int exp) {
    long out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

void check_schedule(int budget, int rate) {
    if (budget < 1) throw Error("bad_argument", "budget B must be >= 1");
    if (rate < 2) throw Error("bad_argument", "downsampling rate r must be >= 2");
}

struct Slot {
    OptimizerState state;
    int record = 0;  // index into report.configs
    bool resumed = false;
};

double loss_of(const OptimizerState &s) {
    if (s.diverged || !s.current) return std::numeric_limits<double>::infinity();
    return s.current->loss;
}

}  // namespace

int elimination_rounds(int budget, int rate) {
    check_schedule(budget, rate);
    int rounds = 0;
    long p = rate;
    while (p <= budget) {
        ++rounds;
        p *= rate;
    }
    return rounds;
}

double round_duration(int i, int budget, int rate, int rounds) {
    check_schedule(budget, rate);
    if (i < 0 || i > rounds) throw Error("bad_argument", "round index out of range");
    const double b = budget;
    if (i == 0) return b / static_cast<double>(ipow(rate, rounds));
    return b / static_cast<double>(ipow(rate, rounds - i)) - b / static_cast<double>(ipow(rate, rounds - i + 1));
}

double checkpoint_time(int i, int budget, int rate, int rounds) {
    check_schedule(budget, rate);
    if (i < 0 || i > rounds) throw Error("bad_argument", "round index out of range");
    return static_cast<double>(budget) / static_cast<double>(ipow(rate, rounds - i));
}

long checkpoint_steps(int i, int budget, int rate, int rounds, int steps_per_unit) {
    check_schedule(budget, rate);
    if (i < 0 || i > rounds) throw Error("bad_argument", "round index out of range");
    return static_cast<long>(budget) * steps_per_unit / ipow(rate, rounds - i);
}

int survivor_count(int threads, int rate) { return std::max(1, threads / rate); }

int configurations_examined(int threads, int rate, int budget) {
    return threads + (threads - survivor_count(threads, rate)) * elimination_rounds(budget, rate);
}

std::vector<std::size_t> get_top(std::span<const double> losses, std::size_t m) {
    std::vector<std::size_t> idx(losses.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const bool fa = std::isfinite(losses[a]);
        const bool fb = std::isfinite(losses[b]);
        if (fa != fb) return fa;
        return fa && losses[a] < losses[b];
    });
    idx.resize(std::min(m, idx.size()));
    return idx;
}

SearchReport pg_learn(const Problem &problem, const SearchSpace &space, const OptimizerSettings &settings,
                      const SchedulerConfig &config) {
    if (config.threads < 1) throw Error("bad_argument", "need at least one thread");
    const int rounds = elimination_rounds(config.budget, config.rate);
    const int keep = std::min(survivor_count(config.threads, config.rate), config.threads);
    const bool deterministic = config.unit.kind == UnitKind::iterations;
    const int steps_per_unit = static_cast<int>(std::lround(config.unit.size));
    if (deterministic && steps_per_unit < 1) throw Error("bad_argument", "a time unit must be >= 1 step");
    if (!deterministic && !(config.unit.size > 0.0)) throw Error("bad_argument", "unit length must be positive");

    const auto started = std::chrono::steady_clock::now();
    SearchReport report;
    report.method = config.threads == 1 ? "gradient" : "pg-learn";

    std::vector<Slot> slots(static_cast<std::size_t>(config.threads));
    auto spawn = [&](int thread, int round) {
        Slot &slot = slots[static_cast<std::size_t>(thread)];
        slot.state = init_state(problem, space, settings,
                                derive_seed(config.seed, {static_cast<std::uint64_t>(thread),
                                                          static_cast<std::uint64_t>(round)}));
        slot.resumed = false;
        ConfigRecord rec;
        rec.id = static_cast<int>(report.configs.size());
        rec.thread = thread;
        rec.origin_round = round;
        rec.initial = slot.state.config;
        report.configs.push_back(std::move(rec));
        slot.record = report.configs.back().id;
    };
    auto close = [&](const Slot &slot, const std::string &status, int ended) {
        ConfigRecord &rec = report.configs[static_cast<std::size_t>(slot.record)];
        rec.status = status;
        rec.ended_round = ended;
        rec.final_config = slot.state.config;
        rec.trace = slot.state.history;
        if (slot.state.current) rec.final_evaluation = *slot.state.current;
        rec.final_evaluation.loss = loss_of(slot.state);
        rec.converged = slot.state.converged;
        rec.diverged = slot.state.diverged;
    };
    for (int t = 0; t < config.threads; ++t) spawn(t, 0);

    double best_val = -1.0;
    double best_test = std::numeric_limits<double>::quiet_NaN();
    for (int leg = 0; leg <= rounds; ++leg) {
        const long steps = deterministic ? checkpoint_steps(leg, config.budget, config.rate, rounds, steps_per_unit) -
                                               (leg == 0 ? 0L
                                                         : checkpoint_steps(leg - 1, config.budget, config.rate,
                                                                            rounds, steps_per_unit))
                                         : 0L;
        const Budget budget = deterministic
                                  ? Budget::steps(static_cast<int>(steps))
                                  : Budget::wall_clock(round_duration(leg, config.budget, config.rate, rounds) *
                                                       config.unit.size);

        std::vector<int> taken(slots.size(), 0);
        std::vector<std::exception_ptr> errors(slots.size());
        auto work = [&](std::size_t t) {
            try {
                Slot &slot = slots[t];
                taken[t] = run_until(slot.state, problem, settings, budget);
                ensure_evaluated(slot.state, problem, settings);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        };
        if (slots.size() == 1) {
            work(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(slots.size());
            for (std::size_t t = 0; t < slots.size(); ++t) pool.emplace_back(work, t);
            for (auto &th : pool) th.join();
        }
        for (const auto &err : errors)
            if (err) std::rethrow_exception(err);

        std::vector<double> losses;
        for (std::size_t t = 0; t < slots.size(); ++t) {
            const Slot &slot = slots[t];
            report.events.push_back({leg, static_cast<int>(t), slot.record, slot.resumed, taken[t]});
            report.work_units += taken[t];
            losses.push_back(loss_of(slot.state));
            if (slot.state.current && !slot.state.diverged &&
                slot.state.current->validation_accuracy > best_val) {
                best_val = slot.state.current->validation_accuracy;
                best_test = slot.state.current->test_accuracy;
            }
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        const double units = checkpoint_time(leg, config.budget, config.rate, rounds);
        report.curve.push_back({deterministic ? static_cast<double>(report.work_units) : units * config.threads,
                                elapsed, std::max(best_val, 0.0), best_test});

        if (leg == rounds) break;

        CheckpointRecord cp;
        cp.round = leg + 1;
        cp.time = units;
        cp.losses = losses;
        for (const auto &slot : slots) cp.config_ids.push_back(slot.record);
        const auto top = get_top(losses, static_cast<std::size_t>(keep));
        std::vector<bool> kept(slots.size(), false);
        for (const std::size_t t : top) kept[t] = true;
        for (std::size_t t = 0; t < slots.size(); ++t) {
            Slot &slot = slots[t];
            if (kept[t]) {
                cp.survivors.push_back(slot.record);
                slot.resumed = true;
                continue;
            }
            cp.replaced.push_back(slot.record);
            close(slot, "replaced", leg + 1);
            spawn(static_cast<int>(t), leg + 1);
        }
        report.checkpoints.push_back(std::move(cp));
    }

    std::vector<double> losses;
    for (const auto &slot : slots) losses.push_back(loss_of(slot.state));
    const std::size_t winner = get_top(losses, 1).front();
    for (std::size_t t = 0; t < slots.size(); ++t) close(slots[t], t == winner ? "final" : "surviving", rounds + 1);
    if (!std::isfinite(losses[winner]))
        throw Error("all_diverged", "all " + std::to_string(slots.size()) + " threads diverged");

    report.best = slots[winner].state.config;
    report.best_evaluation = *slots[winner].state.current;
    report.best_config_id = slots[winner].record;
    report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace pglearn
