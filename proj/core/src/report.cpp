#include "pglearn/report.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json_util.hpp"

namespace pglearn {
namespace {

using nlohmann::json;
using detail::number;

json config_json(const HyperConfig &c) { return {{"k", c.k}, {"a", detail::vector_json(c.a)}}; }

HyperConfig config_from(const json &j) { return {j.at("k").get<int>(), detail::vector_from(j.at("a"))}; }

json evaluation_json(const Evaluation &e) {
    return {{"loss", number(e.loss)},
            {"pair_count", e.pair_count},
            {"validation_accuracy", number(e.validation_accuracy)},
            {"test_accuracy", number(e.test_accuracy)},
            {"unreached", e.unreached}};
}

Evaluation evaluation_from(const json &j) {
    Evaluation e;
    e.loss = number(j.at("loss"));
    e.pair_count = j.at("pair_count").get<Index>();
    e.validation_accuracy = number(j.at("validation_accuracy"));
    e.test_accuracy = number(j.at("test_accuracy"));
    e.unreached = j.at("unreached").get<Index>();
    return e;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace

std::string config_to_json(const HyperConfig &config) { return config_json(config).dump(2); }

HyperConfig config_from_json(const std::string &text) {
    try {
        auto j = json::parse(text);
        if (j.contains("best")) j = j.at("best");
        return config_from(j);
    } catch (const json::exception &e) {
        throw Error("parse_error", std::string("malformed configuration JSON: ") + e.what());
    }
}

std::string report_to_json(const SearchReport &r) {
    json j;
    j["method"] = r.method;
    j["best"] = config_json(r.best);
    j["best_evaluation"] = evaluation_json(r.best_evaluation);
    j["best_config_id"] = r.best_config_id;
    j["elapsed_seconds"] = number(r.elapsed_seconds);
    j["work_units"] = r.work_units;
    j["configurations_examined"] = r.configs.size();

    auto configs = json::array();
    for (const auto &c : r.configs) {
        auto trace = json::array();
        for (const auto &h : c.trace)
            trace.push_back({h.iteration, number(h.loss), number(h.validation_accuracy), number(h.test_accuracy)});
        configs.push_back({{"id", c.id},
                           {"thread", c.thread},
                           {"origin_round", c.origin_round},
                           {"ended_round", c.ended_round},
                           {"status", c.status},
                           {"initial", config_json(c.initial)},
                           {"final", config_json(c.final_config)},
                           {"evaluation", evaluation_json(c.final_evaluation)},
                           {"converged", c.converged},
                           {"diverged", c.diverged},
                           {"trace", std::move(trace)}});
    }
    j["configs"] = std::move(configs);

    auto checkpoints = json::array();
    for (const auto &cp : r.checkpoints) {
        auto losses = json::array();
        for (const double l : cp.losses) losses.push_back(number(l));
        checkpoints.push_back({{"round", cp.round},
                               {"time", cp.time},
                               {"config_ids", cp.config_ids},
                               {"losses", std::move(losses)},
                               {"survivors", cp.survivors},
                               {"replaced", cp.replaced}});
    }
    j["checkpoints"] = std::move(checkpoints);

    auto events = json::array();
    for (const auto &e : r.events)
        events.push_back({{"leg", e.leg}, {"thread", e.thread}, {"config_id", e.config_id},
                          {"resumed", e.resumed}, {"steps", e.steps}});
    j["events"] = std::move(events);

    auto curve = json::array();
    for (const auto &p : r.curve)
        curve.push_back({{"time", p.time}, {"seconds", number(p.seconds)},
                         {"best_validation_accuracy", number(p.best_validation_accuracy)},
                         {"test_accuracy", number(p.test_accuracy)}});
    j["curve"] = std::move(curve);

    auto levels = json::array();
    for (const auto &g : r.grid_levels)
        levels.push_back({{"level", g.level}, {"k_step", g.k_step}, {"log_sigma_step", g.log_sigma_step},
                          {"cells_evaluated", g.cells_evaluated}});
    j["grid_levels"] = std::move(levels);
    return j.dump(2);
}

SearchReport report_from_json(const std::string &text) {
    try {
        const auto j = json::parse(text);
        SearchReport r;
        r.method = j.at("method").get<std::string>();
        r.best = config_from(j.at("best"));
        r.best_evaluation = evaluation_from(j.at("best_evaluation"));
        r.best_config_id = j.at("best_config_id").get<int>();
        r.elapsed_seconds = number(j.at("elapsed_seconds"));
        r.work_units = j.at("work_units").get<long>();
        for (const auto &c : j.at("configs")) {
            ConfigRecord rec;
            rec.id = c.at("id").get<int>();
            rec.thread = c.at("thread").get<int>();
            rec.origin_round = c.at("origin_round").get<int>();
            rec.ended_round = c.at("ended_round").get<int>();
            rec.status = c.at("status").get<std::string>();
            rec.initial = config_from(c.at("initial"));
            rec.final_config = config_from(c.at("final"));
            rec.final_evaluation = evaluation_from(c.at("evaluation"));
            rec.converged = c.at("converged").get<bool>();
            rec.diverged = c.at("diverged").get<bool>();
            for (const auto &h : c.at("trace"))
                rec.trace.push_back({h.at(0).get<int>(), number(h.at(1)), number(h.at(2)), number(h.at(3))});
            r.configs.push_back(std::move(rec));
        }
        for (const auto &cp : j.at("checkpoints")) {
            CheckpointRecord rec;
            rec.round = cp.at("round").get<int>();
            rec.time = cp.at("time").get<double>();
            rec.config_ids = cp.at("config_ids").get<std::vector<int>>();
            for (const auto &l : cp.at("losses")) rec.losses.push_back(number(l));
            rec.survivors = cp.at("survivors").get<std::vector<int>>();
            rec.replaced = cp.at("replaced").get<std::vector<int>>();
            r.checkpoints.push_back(std::move(rec));
        }
        for (const auto &e : j.at("events"))
            r.events.push_back({e.at("leg").get<int>(), e.at("thread").get<int>(), e.at("config_id").get<int>(),
                                e.at("resumed").get<bool>(), e.at("steps").get<int>()});
        for (const auto &p : j.at("curve"))
            r.curve.push_back({p.at("time").get<double>(), number(p.at("seconds")),
                               number(p.at("best_validation_accuracy")), number(p.at("test_accuracy"))});
        for (const auto &g : j.at("grid_levels"))
            r.grid_levels.push_back({g.at("level").get<int>(), g.at("k_step").get<double>(),
                                     g.at("log_sigma_step").get<double>(), g.at("cells_evaluated").get<int>()});
        return r;
    } catch (const json::exception &e) {
        throw Error("parse_error", std::string("malformed run report: ") + e.what());
    }
}

void write_curve_csv(std::ostream &out, const SearchReport &report) {
    const auto old = out.precision(10);
    out << "time,seconds,best_val_acc,test_acc\n";
    for (const auto &p : report.curve)
        out << p.time << ',' << p.seconds << ',' << p.best_validation_accuracy << ',' << p.test_accuracy << '\n';
    out.precision(old);
}

WeightSummary summarize_weights(const Eigen::VectorXd &a, const std::vector<bool> &noise_columns) {
    if (static_cast<Index>(noise_columns.size()) != a.size())
        throw Error("shape_mismatch", "noise mask has " + std::to_string(noise_columns.size()) +
                                          " entries but the config has " + std::to_string(a.size()) + " weights");
    std::vector<double> orig, noise;
    for (Index m = 0; m < a.size(); ++m) (noise_columns[static_cast<std::size_t>(m)] ? noise : orig).push_back(a(m));
    auto mean = [](const std::vector<double> &v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (const double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    WeightSummary s;
    s.original_count = static_cast<Index>(orig.size());
    s.noise_count = static_cast<Index>(noise.size());
    s.mean_original = mean(orig);
    s.mean_noise = mean(noise);
    s.median_original = median(orig);
    s.median_noise = median(noise);
    return s;
}

void write_weights_csv(std::ostream &out, const Eigen::VectorXd &a, const std::vector<bool> &noise_columns) {
    if (static_cast<Index>(noise_columns.size()) != a.size())
        throw Error("shape_mismatch", "noise mask does not match the number of weights");
    const auto old = out.precision(17);
    out << "dim,a,kind\n";
    for (Index m = 0; m < a.size(); ++m)
        out << m << ',' << a(m) << ',' << (noise_columns[static_cast<std::size_t>(m)] ? "noise" : "original") << '\n';
    out.precision(old);
}

std::string read_text_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw Error("missing_file", "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) throw Error("io_error", "cannot write '" + path.string() + "'");
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

}  // namespace pglearn
