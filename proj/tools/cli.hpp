#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "pglearn/scheduler.hpp"

namespace pglearn::cli {

/// Everything needed to repeat a run. In deterministic-unit mode the same
/// RunSpec reproduces the same report.
struct RunSpec {
    std::string dataset;
    std::string label_column = "label";
    std::string split;  // empty: sample one from the fractions below
    double labeled_fraction = 0.1;
    double validation_fraction = kDefaultValidationFraction;
    std::string method = "pg-learn";
    int budget = 16;
    int rate = 2;
    int threads = 8;
    TimeUnit unit{};
    double mu = 0.99;
    double gamma = 0.05;
    int k_min = 5;
    int k_max = 20;
    std::uint64_t seed = 0;
    std::string out = "pglearn-run";

    bool operator==(const RunSpec &) const = default;
};

std::string runspec_to_json(const RunSpec &spec);
RunSpec runspec_from_json(const std::string &text);

/// "iters:U", "seconds" or "seconds:S".
TimeUnit parse_unit(const std::string &text);
std::string format_unit(const TimeUnit &unit);

/// Evaluation budget handed to Grid and Rand_d so they match a PG-learn run:
/// T*B*U evaluations for step units, unbounded (time-limited) otherwise.
int baseline_evaluations(const RunSpec &spec);
/// T*B*S seconds for wall-clock units, unbounded for step units.
double baseline_seconds(const RunSpec &spec);

SearchReport execute(const RunSpec &spec, const Dataset &dataset, const SplitSpec &split);

/// Full command line. Returns the process exit code; failures print one
/// "error: <code>: <message>" line to `err`.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace pglearn::cli
