#include "pglearn/baselines.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "pglearn/error.hpp"

namespace pglearn {
namespace {

// Incumbent tracking shared by both searches.
class Tracker {
public:
    Tracker(SearchReport &report) : report_(report), start_(std::chrono::steady_clock::now()) {}

    bool add(const HyperConfig &config, const Evaluation &ev, int level) {
        ConfigRecord rec;
        rec.id = static_cast<int>(report_.configs.size());
        rec.origin_round = level;
        rec.ended_round = level;
        rec.status = "evaluated";
        rec.initial = config;
        rec.final_config = config;
        rec.final_evaluation = ev;
        rec.diverged = !std::isfinite(ev.loss);
        report_.configs.push_back(rec);
        ++report_.work_units;

        const bool better = report_.best_config_id < 0 ||
                            ev.validation_accuracy > report_.best_evaluation.validation_accuracy ||
                            (ev.validation_accuracy == report_.best_evaluation.validation_accuracy &&
                             ev.loss < report_.best_evaluation.loss);
        if (better) {
            report_.best = config;
            report_.best_evaluation = ev;
            report_.best_config_id = rec.id;
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        report_.curve.push_back({static_cast<double>(report_.work_units), elapsed,
                                 report_.best_evaluation.validation_accuracy, report_.best_evaluation.test_accuracy});
        return better;
    }

    [[nodiscard]] bool out_of_time(double limit) const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count() >= limit;
    }

    void finish() {
        report_.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        if (report_.best_config_id >= 0)
            report_.configs[static_cast<std::size_t>(report_.best_config_id)].status = "final";
    }

private:
    SearchReport &report_;
    std::chrono::steady_clock::time_point start_;
};

Evaluation evaluate_or_fail(const Problem &problem, const HyperConfig &config, const SolverOptions &solver) {
    try {
        return evaluate_config(problem, config, solver).evaluation;
    } catch (const Error &e) {
        if (e.code() != "non_finite") throw;
        return Evaluation{};
    }
}

}  // namespace

HyperConfig uniform_config(int k, double sigma, Index d) {
    return HyperConfig{k, Eigen::VectorXd::Constant(d, 1.0 / (sigma * sigma))};
}

SearchReport grid_search(const Problem &problem, const SearchSpace &space, const SolverOptions &solver,
                         int budget, double max_seconds) {
    if (budget < 1) throw Error("bad_argument", "grid search needs a budget of at least one evaluation");
    const Index n = problem.dataset().n();
    const Index d = problem.dataset().d();
    const int k_hi = space.k_upper(n);
    const int k_lo = std::min(space.k_min, k_hi);
    const double ls_lo = std::log(space.sigma_low * space.mean_distance);
    const double ls_hi = std::log(space.sigma_high * space.mean_distance);

    SearchReport report;
    report.method = "grid";
    Tracker tracker(report);
    std::map<std::pair<int, long long>, int> seen;  // (k, quantized log sigma) -> config id
    int used = 0;
    double best_k = k_lo, best_ls = ls_lo;

    auto visit = [&](double kf, double ls, int level) -> bool {
        if (used >= budget || tracker.out_of_time(max_seconds)) return false;
        const int k = static_cast<int>(std::clamp<long>(std::lround(kf), k_lo, k_hi));
        ls = std::clamp(ls, ls_lo, ls_hi);
        const auto key = std::make_pair(k, std::llround(ls * 1e9));
        if (seen.contains(key)) return false;
        const HyperConfig config = uniform_config(k, std::exp(ls), d);
        seen.emplace(key, static_cast<int>(report.configs.size()));
        ++used;
        if (tracker.add(config, evaluate_or_fail(problem, config, solver), level)) {
            best_k = k;
            best_ls = ls;
        }
        return true;
    };

    double k_step = (k_hi - k_lo) / 3.0;
    double ls_step = (ls_hi - ls_lo) / 3.0;
    GridLevelRecord initial{0, k_step, ls_step, 0};
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) initial.cells_evaluated += visit(k_lo + a * k_step, ls_lo + b * ls_step, 0);
    report.grid_levels.push_back(initial);

    // halving stops producing new cells once both spacings are below the
    // resolution of the dedup key
    for (int level = 1; used < budget && ls_step > 1e-8 && !tracker.out_of_time(max_seconds); ++level) {
        k_step /= 2.0;
        ls_step /= 2.0;
        GridLevelRecord rec{level, k_step, ls_step, 0};
        const double ck = best_k, cls = best_ls;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b) rec.cells_evaluated += visit(ck + a * k_step, cls + b * ls_step, level);
        report.grid_levels.push_back(rec);
    }
    tracker.finish();
    return report;
}

SearchReport random_search_d(const Problem &problem, const SearchSpace &space, const SolverOptions &solver,
                             int budget, std::uint64_t seed, double max_seconds) {
    if (budget < 1) throw Error("bad_argument", "random search needs a budget of at least one evaluation");
    SearchReport report;
    report.method = "random";
    Tracker tracker(report);
    Rng rng(seed);
    for (int i = 0; i < budget && !tracker.out_of_time(max_seconds); ++i) {
        const HyperConfig config = sample_config(space, problem.dataset().n(), problem.dataset().d(), rng);
        tracker.add(config, evaluate_or_fail(problem, config, solver), 0);
    }
    tracker.finish();
    return report;
}

}  // namespace pglearn
