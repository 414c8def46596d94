#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pglearn/baselines.hpp"
#include "pglearn/error.hpp"
#include "pglearn/report.hpp"

namespace pglearn::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string> kMethods = {"pg-learn", "gradient", "grid", "random"};

CsvOptions csv_options(const std::string &label_column) {
    CsvOptions opts;
    const bool numeric = !label_column.empty() &&
                         std::all_of(label_column.begin(), label_column.end(),
                                     [](unsigned char ch) { return std::isdigit(ch) != 0; });
    if (numeric)
        opts.label_column = static_cast<std::size_t>(std::stoull(label_column));
    else
        opts.label_column = label_column;
    return opts;
}

Dataset load(const std::string &path, const std::string &label_column) {
    if (!fs::exists(path)) throw Error("missing_file", "dataset not found: " + path);
    Dataset ds = load_dataset(path, csv_options(label_column));
    const fs::path sidecar = path + ".noise.json";
    if (fs::exists(sidecar)) {
        auto mask = noise_columns_from_json(read_text_file(sidecar));
        if (static_cast<Index>(mask.size()) != ds.d())
            throw Error("inconsistent_metadata", "noise metadata does not match dataset dimensions");
        ds.noise_columns = std::move(mask);
    }
    return ds;
}

SplitSpec load_split(const std::string &path, const Dataset &ds) {
    if (!fs::exists(path)) throw Error("missing_file", "split not found: " + path);
    SplitSpec split = read_split(path);
    split.validate(ds);
    return split;
}

void check_method(const std::string &method) {
    if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end())
        throw Error("unknown_method", "unknown method '" + method + "' (pg-learn, gradient, grid, random)");
}

void write_file(const fs::path &path, const std::string &text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, text);
}

// CLI11 reports its own failures through exceptions; map them onto the
// one-line error format.
int usage_error(const CLI::Error &e, std::ostream &err) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
}

}  // namespace

TimeUnit parse_unit(const std::string &text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    TimeUnit unit;
    if (kind == "iters") {
        unit.kind = UnitKind::iterations;
        if (colon == std::string::npos) throw Error("invalid_unit", "iters unit needs a step count, e.g. iters:4");
    } else if (kind == "seconds") {
        unit.kind = UnitKind::seconds;
        unit.size = 1.0;
        if (colon == std::string::npos) return unit;
    } else {
        throw Error("invalid_unit", "unit must be iters:U or seconds[:S], got '" + text + "'");
    }
    const std::string value = text.substr(colon + 1);
    try {
        std::size_t used = 0;
        unit.size = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception &) {
        throw Error("invalid_unit", "bad unit size '" + value + "'");
    }
    if (!(unit.size > 0.0) || !std::isfinite(unit.size))
        throw Error("invalid_unit", "unit size must be positive");
    if (unit.kind == UnitKind::iterations && unit.size != std::floor(unit.size))
        throw Error("invalid_unit", "iters unit size must be an integer");
    return unit;
}

std::string format_unit(const TimeUnit &unit) {
    std::ostringstream s;
    s << (unit.kind == UnitKind::iterations ? "iters:" : "seconds:") << unit.size;
    return s.str();
}

std::string runspec_to_json(const RunSpec &spec) {
    json j = {{"dataset", spec.dataset},
              {"label_column", spec.label_column},
              {"split", spec.split},
              {"labeled_fraction", spec.labeled_fraction},
              {"validation_fraction", spec.validation_fraction},
              {"method", spec.method},
              {"budget", spec.budget},
              {"rate", spec.rate},
              {"threads", spec.threads},
              {"unit", format_unit(spec.unit)},
              {"mu", spec.mu},
              {"gamma", spec.gamma},
              {"k_min", spec.k_min},
              {"k_max", spec.k_max},
              {"seed", spec.seed},
              {"out", spec.out}};
    return j.dump(2);
}

RunSpec runspec_from_json(const std::string &text) {
    try {
        const json j = json::parse(text);
        RunSpec s;
        s.dataset = j.at("dataset").get<std::string>();
        s.label_column = j.at("label_column").get<std::string>();
        s.split = j.at("split").get<std::string>();
        s.labeled_fraction = j.at("labeled_fraction").get<double>();
        s.validation_fraction = j.at("validation_fraction").get<double>();
        s.method = j.at("method").get<std::string>();
        s.budget = j.at("budget").get<int>();
        s.rate = j.at("rate").get<int>();
        s.threads = j.at("threads").get<int>();
        s.unit = parse_unit(j.at("unit").get<std::string>());
        s.mu = j.at("mu").get<double>();
        s.gamma = j.at("gamma").get<double>();
        s.k_min = j.at("k_min").get<int>();
        s.k_max = j.at("k_max").get<int>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.out = j.at("out").get<std::string>();
        return s;
    } catch (const json::exception &e) {
        throw Error("parse_error", std::string("malformed runspec: ") + e.what());
    }
}

int baseline_evaluations(const RunSpec &spec) {
    if (spec.unit.kind != UnitKind::iterations) return std::numeric_limits<int>::max();
    return spec.threads * spec.budget * static_cast<int>(spec.unit.size);
}

double baseline_seconds(const RunSpec &spec) {
    if (spec.unit.kind != UnitKind::seconds) return std::numeric_limits<double>::infinity();
    return spec.threads * spec.budget * spec.unit.size;
}

SearchReport execute(const RunSpec &spec, const Dataset &dataset, const SplitSpec &split) {
    check_method(spec.method);
    if (!(spec.mu > 0.0 && spec.mu < 1.0)) throw Error("invalid_argument", "mu must lie in (0, 1)");
    if (!(spec.gamma > 0.0)) throw Error("invalid_argument", "gamma must be positive");
    if (spec.k_min < 1 || spec.k_max < spec.k_min) throw Error("invalid_argument", "need 1 <= k-min <= k-max");

    Problem problem(dataset, split);
    const SearchSpace space = make_search_space(dataset, spec.seed, spec.k_min, spec.k_max);
    SolverOptions solver;
    solver.mu = spec.mu;

    if (spec.method == "grid")
        return grid_search(problem, space, solver, baseline_evaluations(spec), baseline_seconds(spec));
    if (spec.method == "random")
        return random_search_d(problem, space, solver, baseline_evaluations(spec), spec.seed,
                               baseline_seconds(spec));

    OptimizerSettings settings;
    settings.gamma = spec.gamma;
    settings.a_floor = space.a_floor();
    settings.solver = solver;
    settings.gradient_solver.mu = spec.mu;
    SchedulerConfig sched;
    sched.budget = spec.budget;
    sched.rate = spec.rate;
    sched.threads = spec.method == "gradient" ? 1 : spec.threads;
    sched.unit = spec.unit;
    sched.seed = spec.seed;
    return pg_learn(problem, space, settings, sched);
}

namespace {

int cmd_synth(std::ostream &out, Index points, int classes, Index informative, double spread, std::uint64_t seed,
              const std::string &path) {
    const Dataset ds = make_blobs({points, classes, informative, spread}, seed);
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    write_dataset(path, ds);
    out << "wrote " << ds.n() << " x " << ds.d() << " dataset to " << path << "\n";
    return 0;
}

int cmd_split(std::ostream &out, const std::string &dataset, const std::string &label_column, double lf, double vf,
              std::uint64_t seed, const std::string &path) {
    const Dataset ds = load(dataset, label_column);
    const SplitSpec split = sample_split(ds, lf, vf, seed);
    write_file(path, split_to_json(split));
    out << "labeled " << split.labeled.size() << " validation " << split.validation.size() << " unlabeled "
        << split.unlabeled.size() << "\n";
    return 0;
}

int cmd_inject(std::ostream &out, const std::string &dataset, const std::string &label_column, double fraction,
               std::uint64_t seed, const std::string &path) {
    const Dataset ds = inject_noise_features(load(dataset, label_column), fraction, seed);
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    write_dataset(path, ds);
    write_text_file(path + ".noise.json", noise_metadata_json(ds));
    out << "wrote " << ds.n() << " x " << ds.d() << " dataset to " << path << "\n";
    return 0;
}

int cmd_run(std::ostream &out, RunSpec spec) {
    const Dataset ds = load(spec.dataset, spec.label_column);
    const SplitSpec split = spec.split.empty()
                                ? sample_split(ds, spec.labeled_fraction, spec.validation_fraction, spec.seed)
                                : load_split(spec.split, ds);
    const SearchReport report = execute(spec, ds, split);

    const fs::path dir = spec.out;
    fs::create_directories(dir);
    write_text_file(dir / "split.json", split_to_json(split));
    // the saved spec points at the saved split so it replays without resampling
    RunSpec saved = spec;
    saved.split = fs::absolute(dir / "split.json").string();
    write_text_file(dir / "runspec.json", runspec_to_json(saved));
    write_text_file(dir / "report.json", report_to_json(report));
    write_text_file(dir / "best_config.json", config_to_json(report.best));
    std::ofstream curve(dir / "curve.csv");
    write_curve_csv(curve, report);

    out << report.method << ": " << report.configs.size() << " configs, best k=" << report.best.k
        << " loss=" << report.best_evaluation.loss
        << " val_acc=" << report.best_evaluation.validation_accuracy << ", wrote " << dir.string() << "\n";
    return 0;
}

HyperConfig load_config(const std::string &path) {
    fs::path p = path;
    if (fs::is_directory(p)) p /= "best_config.json";
    if (!fs::exists(p)) throw Error("missing_file", "config not found: " + p.string());
    return config_from_json(read_text_file(p));
}

int cmd_evaluate(std::ostream &out, const std::string &dataset, const std::string &label_column,
                 const std::string &split_path, const std::string &config_path, double mu, const std::string &path) {
    const Dataset ds = load(dataset, label_column);
    const SplitSpec split = load_split(split_path, ds);
    const HyperConfig config = load_config(config_path);
    if (config.a.size() != ds.d())
        throw Error("inconsistent_config", "config has " + std::to_string(config.a.size()) +
                                               " weights, dataset has " + std::to_string(ds.d()) + " dimensions");
    if (!(mu > 0.0 && mu < 1.0)) throw Error("invalid_argument", "mu must lie in (0, 1)");
    const Problem refit(ds, split, true);
    SolverOptions solver;
    solver.mu = mu;
    const EvaluatedConfig ev = evaluate_config(refit, config, solver);
    const Prediction pred = predict(ev.solution.F);

    json j = {{"k", config.k},
              {"test_size", refit.test_indices().size()},
              {"unreached", pred.unreached_count()},
              {"edges", ev.graph.edge_count()},
              {"solver_iterations", ev.solution.iterations}};
    if (refit.test_indices().empty())
        j["test_accuracy"] = nullptr;
    else
        j["test_accuracy"] = ev.evaluation.test_accuracy;
    const std::string text = j.dump(2);
    if (!path.empty()) write_file(path, text);
    out << text << "\n";
    return 0;
}

int cmd_report(std::ostream &out, const std::string &run_path, const std::string &noise_path,
               const std::string &out_dir) {
    fs::path report_file = run_path;
    if (fs::is_directory(report_file)) report_file /= "report.json";
    if (!fs::exists(report_file)) throw Error("missing_file", "report not found: " + report_file.string());
    const SearchReport report = report_from_json(read_text_file(report_file));

    std::vector<bool> noise(static_cast<std::size_t>(report.best.a.size()), false);
    if (!noise_path.empty()) {
        if (!fs::exists(noise_path)) throw Error("missing_file", "noise metadata not found: " + noise_path);
        noise = noise_columns_from_json(read_text_file(noise_path));
        if (noise.size() != static_cast<std::size_t>(report.best.a.size()))
            throw Error("inconsistent_metadata", "noise metadata does not match the learned weights");
    }

    const fs::path dir = out_dir.empty() ? report_file.parent_path() : fs::path(out_dir);
    if (!dir.empty()) fs::create_directories(dir);
    {
        std::ofstream curve(dir / "curve.csv");
        write_curve_csv(curve, report);
        std::ofstream weights(dir / "weights.csv");
        write_weights_csv(weights, report.best.a, noise);
    }
    const WeightSummary w = summarize_weights(report.best.a, noise);
    json j = {{"original_count", w.original_count}, {"noise_count", w.noise_count},
              {"mean_original", w.mean_original},   {"mean_noise", w.mean_noise},
              {"median_original", w.median_original}, {"median_noise", w.median_noise}};
    if (w.noise_count == 0) {
        j["mean_noise"] = nullptr;
        j["median_noise"] = nullptr;
    }
    write_text_file(dir / "weights_summary.json", j.dump(2));
    out << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Graph learning for semi-supervised label propagation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    // synth
    Index points = 300;
    int classes = 4;
    Index informative = 4;
    double spread = 2.0;
    std::uint64_t seed = 0;
    std::string out_path;
    auto *synth = app.add_subcommand("synth", "Write a Gaussian blobs dataset");
    synth->add_option("--points", points)->check(CLI::PositiveNumber);
    synth->add_option("--classes", classes)->check(CLI::Range(2, 1 << 20));
    synth->add_option("--informative", informative)->check(CLI::PositiveNumber);
    synth->add_option("--spread", spread)->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", seed);
    synth->add_option("--out", out_path)->required();

    // split
    std::string dataset;
    std::string label_column = "label";
    double labeled_fraction = 0.1;
    double validation_fraction = kDefaultValidationFraction;
    auto *split = app.add_subcommand("split", "Sample labeled/validation/unlabeled sets");
    split->add_option("--dataset", dataset)->required();
    split->add_option("--label-column", label_column);
    split->add_option("--labeled-fraction", labeled_fraction)->check(CLI::Range(0.0, 1.0));
    split->add_option("--validation-fraction", validation_fraction)->check(CLI::Range(0.0, 1.0));
    split->add_option("--seed", seed);
    split->add_option("--out", out_path)->required();

    // inject-noise
    double noise_fraction = 1.0;
    auto *inject = app.add_subcommand("inject-noise", "Append N(0,1) noise columns");
    inject->add_option("--dataset", dataset)->required();
    inject->add_option("--label-column", label_column);
    inject->add_option("--fraction", noise_fraction)->check(CLI::NonNegativeNumber);
    inject->add_option("--seed", seed);
    inject->add_option("--out", out_path)->required();

    // run
    RunSpec spec;
    std::string unit_text = "iters:4";
    std::string runspec_path;
    auto *runcmd = app.add_subcommand("run", "Search for a graph configuration");
    auto *from_spec = runcmd->add_option("--runspec", runspec_path, "Replay a saved runspec.json");
    std::vector<CLI::Option *> spec_opts = {
        runcmd->add_option("--dataset", spec.dataset),
        runcmd->add_option("--label-column", spec.label_column),
        runcmd->add_option("--split", spec.split),
        runcmd->add_option("--labeled-fraction", spec.labeled_fraction)->check(CLI::Range(0.0, 1.0)),
        runcmd->add_option("--validation-fraction", spec.validation_fraction)->check(CLI::Range(0.0, 1.0)),
        runcmd->add_option("--method", spec.method),
        runcmd->add_option("--budget", spec.budget)->check(CLI::PositiveNumber),
        runcmd->add_option("--rate", spec.rate)->check(CLI::Range(2, 1 << 20)),
        runcmd->add_option("--threads", spec.threads)->check(CLI::PositiveNumber),
        runcmd->add_option("--unit", unit_text, "iters:U or seconds[:S]"),
        runcmd->add_option("--mu", spec.mu),
        runcmd->add_option("--gamma", spec.gamma),
        runcmd->add_option("--k-min", spec.k_min),
        runcmd->add_option("--k-max", spec.k_max),
        runcmd->add_option("--seed", spec.seed),
    };
    for (auto *opt : spec_opts) from_spec->excludes(opt);
    auto *run_out = runcmd->add_option("--out", spec.out);

    // evaluate
    std::string split_path;
    std::string config_path;
    double mu = 0.99;
    auto *evaluate = app.add_subcommand("evaluate", "Refit a configuration with validation labels and score the test set");
    evaluate->add_option("--dataset", dataset)->required();
    evaluate->add_option("--label-column", label_column);
    evaluate->add_option("--split", split_path)->required();
    evaluate->add_option("--config", config_path, "best_config.json, report.json or a run directory")->required();
    evaluate->add_option("--mu", mu);
    evaluate->add_option("--out", out_path);

    // report
    std::string run_path;
    std::string noise_path;
    auto *report = app.add_subcommand("report", "Export accuracy curve and learned-weight summary");
    report->add_option("--run", run_path, "run directory or report.json")->required();
    report->add_option("--noise", noise_path, "noise metadata from inject-noise");
    report->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion &) {
        out << "0.1.0\n";
        return 0;
    } catch (const CLI::ParseError &e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            out << app.help();
            return 0;
        }
        return usage_error(e, err);
    }

    try {
        if (synth->parsed()) return cmd_synth(out, points, classes, informative, spread, seed, out_path);
        if (split->parsed())
            return cmd_split(out, dataset, label_column, labeled_fraction, validation_fraction, seed, out_path);
        if (inject->parsed()) return cmd_inject(out, dataset, label_column, noise_fraction, seed, out_path);
        if (runcmd->parsed()) {
            if (!runspec_path.empty()) {
                if (!fs::exists(runspec_path)) throw Error("missing_file", "runspec not found: " + runspec_path);
                const std::string kept_out = spec.out;
                spec = runspec_from_json(read_text_file(runspec_path));
                if (run_out->count() > 0) spec.out = kept_out;
            } else {
                spec.unit = parse_unit(unit_text);
            }
            if (spec.dataset.empty()) throw Error("invalid_argument", "--dataset is required");
            check_method(spec.method);
            return cmd_run(out, spec);
        }
        if (evaluate->parsed()) return cmd_evaluate(out, dataset, label_column, split_path, config_path, mu, out_path);
        if (report->parsed()) return cmd_report(out, run_path, noise_path, out_path);
    } catch (const Error &e) {
        err << "error: " << e.code() << ": " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error &e) {
        err << "error: io_error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        err << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace pglearn::cli
