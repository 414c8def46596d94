#include "pglearn/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json_util.hpp"
#include "pglearn/error.hpp"
#include "pglearn/objective.hpp"

namespace pglearn {

Problem::Problem(const Dataset &dataset, SplitSpec split, bool include_validation)
    : dataset_(&dataset), split_(std::move(split)) {
    split_.validate(dataset);
    y_ = build_label_matrix(dataset, split_, include_validation);
    for (const Index i : split_.unlabeled)
        if (dataset.labels[static_cast<std::size_t>(i)] != kUnlabeled) test_.push_back(i);
}

int SearchSpace::k_upper(Index n) const {
    return static_cast<int>(std::min<Index>(k_max, n - 1));
}

double SearchSpace::a_floor() const { return 1e-12 / (mean_distance * mean_distance); }

double estimate_mean_distance(const Eigen::MatrixXd &features, std::uint64_t seed, Index max_points) {
    const Index n = features.rows();
    std::vector<Index> pick(static_cast<std::size_t>(n));
    std::iota(pick.begin(), pick.end(), Index{0});
    if (n > max_points) {
        Rng rng(seed);
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(static_cast<std::size_t>(max_points));
    }
    const Eigen::MatrixXd pts = features(pick, Eigen::all).transpose();
    double sum = 0.0;
    Index pairs = 0;
    for (Index i = 0; i < pts.cols(); ++i) {
        for (Index j = i + 1; j < pts.cols(); ++j) {
            sum += (pts.col(i) - pts.col(j)).norm();
            ++pairs;
        }
    }
    if (pairs == 0 || !(sum > 0.0)) throw Error("degenerate_dataset", "all points coincide; mean distance is zero");
    return sum / static_cast<double>(pairs);
}

SearchSpace make_search_space(const Dataset &dataset, std::uint64_t seed, int k_min, int k_max) {
    if (k_min < 1 || k_max < k_min) throw Error("bad_argument", "need 1 <= k_min <= k_max");
    SearchSpace space;
    space.k_min = k_min;
    space.k_max = k_max;
    space.mean_distance = estimate_mean_distance(dataset.features, seed);
    return space;
}

HyperConfig sample_config(const SearchSpace &space, Index n, Index d, Rng &rng) {
    const int hi = space.k_upper(n);
    const int lo = std::min(space.k_min, hi);
    if (hi < 1) throw Error("bad_argument", "need at least 2 points to sample k");
    std::uniform_int_distribution<int> kdist(lo, hi);
    std::uniform_real_distribution<double> u(std::log(space.sigma_low * space.mean_distance),
                                              std::log(space.sigma_high * space.mean_distance));
    HyperConfig config;
    config.k = kdist(rng);
    config.a.resize(d);
    for (Index m = 0; m < d; ++m) {
        const double sigma = std::exp(u(rng));
        config.a(m) = 1.0 / (sigma * sigma);
    }
    return config;
}

Evaluation evaluate_solution(const Problem &problem, const Eigen::MatrixXd &f) {
    Evaluation ev;
    const auto &split = problem.split();
    const auto loss = rank_loss(f, split.validation, problem.truth());
    ev.loss = loss.value;
    ev.pair_count = loss.pair_count;
    const Prediction pred = predict(f);
    ev.validation_accuracy = accuracy(pred.labels, problem.truth(), split.validation);
    if (!problem.test_indices().empty()) ev.test_accuracy = accuracy(pred.labels, problem.truth(), problem.test_indices());
    ev.unreached = pred.unreached_count();
    return ev;
}

EvaluatedConfig evaluate_config(const Problem &problem, const HyperConfig &config, const SolverOptions &solver,
                                const Eigen::MatrixXd &warm_start) {
    EvaluatedConfig out;
    out.graph = build_knn_graph(problem.dataset().features, config);
    out.solution = warm_start.size() == 0
                       ? lgc_power_solve(out.graph.normalized, problem.label_matrix(), solver)
                       : lgc_power_solve(out.graph.normalized, problem.label_matrix(), solver, warm_start);
    out.evaluation = evaluate_solution(problem, out.solution.F);
    return out;
}

OptimizerState init_state(const HyperConfig &config, const OptimizerSettings &settings) {
    OptimizerState state;
    state.config = config;
    state.config.a = config.a.cwiseMax(settings.a_floor);
    state.initial = state.config;
    state.gamma = settings.gamma;
    return state;
}

OptimizerState init_state(const Problem &problem, const SearchSpace &space, const OptimizerSettings &settings,
                          std::uint64_t seed) {
    Rng rng(seed);
    return init_state(sample_config(space, problem.dataset().n(), problem.dataset().d(), rng), settings);
}

namespace {

void mark_diverged(OptimizerState &state) {
    state.diverged = true;
    if (!state.current) state.current.emplace();
    state.current->loss = std::numeric_limits<double>::infinity();
}

}  // namespace

void ensure_evaluated(OptimizerState &state, const Problem &problem, const OptimizerSettings &settings) {
    if (state.diverged) return;
    if (state.current && state.solution.size() != 0) {
        if (!state.graph_cache)
            state.graph_cache =
                std::make_shared<const SparseGraph>(build_knn_graph(problem.dataset().features, state.config));
        return;
    }
    try {
        EvaluatedConfig ev = evaluate_config(problem, state.config, settings.solver);
        state.solution = std::move(ev.solution.F);
        state.current = ev.evaluation;
        state.graph_cache = std::make_shared<const SparseGraph>(std::move(ev.graph));
    } catch (const Error &e) {
        if (e.code() != "non_finite") throw;
        mark_diverged(state);
    }
}

void gradient_step(OptimizerState &state, const Problem &problem, const OptimizerSettings &settings) {
    ensure_evaluated(state, problem, settings);
    if (state.diverged) return;

    const Evaluation &now = *state.current;
    state.history.push_back({state.iteration, now.loss, now.validation_accuracy, now.test_accuracy});
    ++state.iteration;

    Eigen::VectorXd grad;
    try {
        grad = loss_gradient(problem.dataset().features, *state.graph_cache, state.solution,
                             problem.split().validation, problem.truth(), settings.gradient_solver,
                             settings.gradient_threads)
                   .gradient;
    } catch (const Error &e) {
        if (e.code() != "non_finite") throw;
        mark_diverged(state);
        return;
    }
    if (!grad.allFinite()) {
        mark_diverged(state);
        return;
    }

    const double gnorm = grad.cwiseAbs().maxCoeff();
    if (gnorm == 0.0) {
        state.last_step = 0.0;
        state.converged = true;
        return;
    }
    const Eigen::VectorXd &a = state.config.a;
    const double base = state.gamma * a.cwiseAbs().maxCoeff() / gnorm;
    double scale = base;
    for (int h = 0; h <= settings.max_halvings; ++h, scale *= 0.5) {
        HyperConfig trial{state.config.k, (a - scale * grad).cwiseMax(settings.a_floor)};
        EvaluatedConfig ev;
        try {
            ev = evaluate_config(problem, trial, settings.solver, state.solution);
        } catch (const Error &e) {
            if (e.code() != "non_finite") throw;
            continue;
        }
        if (!(ev.evaluation.loss <= now.loss)) continue;

        state.last_step = (trial.a - a).cwiseAbs().maxCoeff();
        state.converged = state.last_step <= settings.eps_conv * trial.a.cwiseAbs().maxCoeff();
        state.config = std::move(trial);
        state.solution = std::move(ev.solution.F);
        state.current = ev.evaluation;
        state.graph_cache = std::make_shared<const SparseGraph>(std::move(ev.graph));
        return;
    }
    // no descent within the halving limit: stationary at this resolution
    state.last_step = 0.0;
    state.converged = true;
}

int run_until(OptimizerState &state, const Problem &problem, const OptimizerSettings &settings,
              const Budget &budget) {
    int steps = 0;
    if (budget.iterations) {
        while (steps < *budget.iterations && !state.finished()) {
            gradient_step(state, problem, settings);
            ++steps;
        }
    } else if (budget.seconds) {
        using clock = std::chrono::steady_clock;
        const auto deadline = clock::now() + std::chrono::duration<double>(*budget.seconds);
        while (clock::now() < deadline && !state.finished()) {
            gradient_step(state, problem, settings);
            ++steps;
        }
    }
    return steps;
}

std::string state_to_json(const OptimizerState &state) {
    using detail::number;
    nlohmann::json j;
    j["k"] = state.config.k;
    j["a"] = detail::vector_json(state.config.a);
    j["initial_k"] = state.initial.k;
    j["initial_a"] = detail::vector_json(state.initial.a);
    j["gamma"] = number(state.gamma);
    j["iteration"] = state.iteration;
    j["converged"] = state.converged;
    j["diverged"] = state.diverged;
    j["last_step"] = number(state.last_step);
    auto hist = nlohmann::json::array();
    for (const auto &h : state.history)
        hist.push_back({{"iteration", h.iteration},
                        {"loss", number(h.loss)},
                        {"validation_accuracy", number(h.validation_accuracy)},
                        {"test_accuracy", number(h.test_accuracy)}});
    j["loss_history"] = std::move(hist);
    j["solution"] = detail::matrix_json(state.solution);
    if (state.current) {
        const auto &c = *state.current;
        j["current"] = {{"loss", number(c.loss)},
                        {"pair_count", c.pair_count},
                        {"validation_accuracy", number(c.validation_accuracy)},
                        {"test_accuracy", number(c.test_accuracy)},
                        {"unreached", c.unreached}};
    } else {
        j["current"] = nullptr;
    }
    return j.dump();
}

OptimizerState state_from_json(const std::string &text) {
    using detail::number;
    try {
        const auto j = nlohmann::json::parse(text);
        OptimizerState s;
        s.config.k = j.at("k").get<int>();
        s.config.a = detail::vector_from(j.at("a"));
        s.initial.k = j.at("initial_k").get<int>();
        s.initial.a = detail::vector_from(j.at("initial_a"));
        s.gamma = number(j.at("gamma"));
        s.iteration = j.at("iteration").get<int>();
        s.converged = j.at("converged").get<bool>();
        s.diverged = j.at("diverged").get<bool>();
        s.last_step = number(j.at("last_step"));
        for (const auto &h : j.at("loss_history"))
            s.history.push_back({h.at("iteration").get<int>(), number(h.at("loss")),
                                 number(h.at("validation_accuracy")), number(h.at("test_accuracy"))});
        s.solution = detail::matrix_from(j.at("solution"));
        if (const auto &c = j.at("current"); !c.is_null()) {
            Evaluation ev;
            ev.loss = number(c.at("loss"));
            ev.pair_count = c.at("pair_count").get<Index>();
            ev.validation_accuracy = number(c.at("validation_accuracy"));
            ev.test_accuracy = number(c.at("test_accuracy"));
            ev.unreached = c.at("unreached").get<Index>();
            s.current = ev;
        }
        return s;
    } catch (const nlohmann::json::exception &e) {
        throw Error("parse_error", std::string("malformed optimizer checkpoint: ") + e.what());
    }
}

}  // namespace pglearn
