#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pglearn/scheduler.hpp"

namespace pglearn {

std::string config_to_json(const HyperConfig &config);
HyperConfig config_from_json(const std::string &text);

/// Run report: every examined configuration with its loss trace, the
/// checkpoints with their eliminations, the leg event log, the best
/// configuration and timing.
std::string report_to_json(const SearchReport &report);
SearchReport report_from_json(const std::string &text);

/// time,seconds,best_val_acc,test_acc
void write_curve_csv(std::ostream &out, const SearchReport &report);

/// Learned weights split into original and injected-noise dimensions.
struct WeightSummary {
    double mean_original = 0.0;
    double mean_noise = 0.0;
    double median_original = 0.0;
    double median_noise = 0.0;
    Index original_count = 0;
    Index noise_count = 0;
};

WeightSummary summarize_weights(const Eigen::VectorXd &a, const std::vector<bool> &noise_columns);

/// dim,a,kind  (kind is "original" or "noise")
void write_weights_csv(std::ostream &out, const Eigen::VectorXd &a, const std::vector<bool> &noise_columns);

std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

}  // namespace pglearn
