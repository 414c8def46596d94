#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "pglearn/error.hpp"
#include "pglearn/report.hpp"

namespace fs = std::filesystem;
using namespace pglearn;
using json = nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "pglearn");
    std::vector<const char *> argv;
    for (const auto &a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("pglearn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string &name) const { return (dir_ / name).string(); }

    // 60 points, 3 classes, 2 informative + 2 noise columns
    std::string noisy_dataset() {
        EXPECT_EQ(invoke({"synth", "--points", "60", "--classes", "3", "--informative", "2", "--seed", "4", "--out",
                          path("blobs.csv")})
                      .code,
                  0);
        EXPECT_EQ(invoke({"inject-noise", "--dataset", path("blobs.csv"), "--seed", "5", "--out", path("noisy.csv")})
                      .code,
                  0);
        return path("noisy.csv");
    }

    fs::path dir_;
};

std::string error_code(const std::string &err) {
    // "error: <code>: <message>"
    const auto first = err.find(": ");
    const auto second = err.find(": ", first + 2);
    return err.substr(first + 2, second - first - 2);
}

}  // namespace

TEST_F(Cli, SynthSplitInject) {
    const std::string data = noisy_dataset();
    const Dataset ds = load_dataset(data, {std::string("label")});
    EXPECT_EQ(ds.n(), 60);
    EXPECT_EQ(ds.d(), 4);
    const auto noise = noise_columns_from_json(read_text_file(data + ".noise.json"));
    EXPECT_EQ(noise, (std::vector<bool>{false, false, true, true}));

    const Result r = invoke({"split", "--dataset", data, "--labeled-fraction", "0.2", "--seed", "1", "--out",
                             path("split.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const SplitSpec split = split_from_json(read_text_file(path("split.json")));
    EXPECT_EQ(split.labeled.size(), 12u);
    EXPECT_EQ(split.labeled.size() + split.unlabeled.size(), 60u);
}

TEST_F(Cli, RunWritesArtifactsAndListsAllConfigs) {
    const std::string data = noisy_dataset();
    const Result r = invoke({"run", "--dataset", data, "--labeled-fraction", "0.2", "--threads", "8", "--budget",
                             "16", "--unit", "iters:1", "--seed", "3", "--out", path("run")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char *f : {"split.json", "runspec.json", "report.json", "best_config.json", "curve.csv"})
        EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
    const SearchReport report = report_from_json(read_text_file(path("run/report.json")));
    EXPECT_EQ(report.configs.size(), 24u);
    EXPECT_EQ(config_from_json(read_text_file(path("run/best_config.json"))), report.best);
}

TEST_F(Cli, RunspecReplayIsIdentical) {
    const std::string data = noisy_dataset();
    ASSERT_EQ(invoke({"run", "--dataset", data, "--labeled-fraction", "0.2", "--threads", "3", "--budget", "4",
                      "--unit", "iters:2", "--seed", "11", "--out", path("first")})
                  .code,
              0);
    const Result r = invoke({"run", "--runspec", path("first/runspec.json"), "--out", path("second")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_text_file(path("first/best_config.json")), read_text_file(path("second/best_config.json")));
    EXPECT_EQ(read_text_file(path("first/split.json")), read_text_file(path("second/split.json")));
}

TEST_F(Cli, BaselinesRun) {
    const std::string data = noisy_dataset();
    for (const std::string method : {"grid", "random", "gradient"}) {
        const Result r = invoke({"run", "--dataset", data, "--labeled-fraction", "0.2", "--method", method,
                                 "--threads", "2", "--budget", "2", "--unit", "iters:2", "--out", path(method)});
        ASSERT_EQ(r.code, 0) << r.err;
        const SearchReport report = report_from_json(read_text_file(path(method + "/report.json")));
        EXPECT_EQ(report.method, method);
        if (method != "gradient") EXPECT_EQ(report.work_units, 8);
    }
}

TEST_F(Cli, EvaluateAndReport) {
    const std::string data = noisy_dataset();
    ASSERT_EQ(invoke({"run", "--dataset", data, "--labeled-fraction", "0.2", "--threads", "2", "--budget", "4",
                      "--unit", "iters:2", "--out", path("run")})
                  .code,
              0);
    const Result ev = invoke({"evaluate", "--dataset", data, "--split", path("run/split.json"), "--config",
                              path("run"), "--out", path("eval.json")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const json j = json::parse(read_text_file(path("eval.json")));
    EXPECT_EQ(j["test_size"].get<int>(), 48);
    EXPECT_GE(j["test_accuracy"].get<double>(), 0.0);
    EXPECT_LE(j["test_accuracy"].get<double>(), 1.0);

    const Result rep = invoke({"report", "--run", path("run"), "--noise", data + ".noise.json"});
    ASSERT_EQ(rep.code, 0) << rep.err;
    const json w = json::parse(read_text_file(path("run/weights_summary.json")));
    EXPECT_EQ(w["noise_count"].get<int>(), 2);
    EXPECT_TRUE(fs::exists(dir_ / "run" / "weights.csv"));
    std::ifstream curve(dir_ / "run" / "curve.csv");
    std::string header;
    std::getline(curve, header);
    EXPECT_EQ(header, "time,seconds,best_val_acc,test_acc");
}

TEST_F(Cli, EvaluateReportsUnreachedNodes) {
    const std::string data = noisy_dataset();
    ASSERT_EQ(invoke({"split", "--dataset", data, "--labeled-fraction", "0.2", "--out", path("split.json")}).code, 0);
    // bandwidths this narrow underflow every weight, leaving no edges
    write_text_file(path("edgeless.json"), config_to_json({5, Eigen::VectorXd::Constant(4, 1e8)}));
    const Result r = invoke({"evaluate", "--dataset", data, "--split", path("split.json"), "--config",
                             path("edgeless.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_EQ(j["edges"].get<int>(), 0);
    EXPECT_EQ(j["unreached"].get<int>(), j["test_size"].get<int>());
}

TEST_F(Cli, ErrorCodes) {
    const std::string data = noisy_dataset();

    Result r = invoke({"split", "--dataset", path("absent.csv"), "--out", path("s.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_code(r.err), "missing_file");

    r = invoke({"run", "--dataset", data, "--method", "annealing", "--out", path("x")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_code(r.err), "unknown_method");

    write_text_file(path("bad_split.json"), split_to_json({{0, 1, 2}, {0}, {3, 4}}));
    r = invoke({"run", "--dataset", data, "--split", path("bad_split.json"), "--out", path("y")});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(error_code(r.err), "inconsistent_split");

    r = invoke({"run", "--dataset", data, "--unit", "minutes", "--out", path("z")});
    EXPECT_EQ(error_code(r.err), "invalid_unit");

    r = invoke({"run", "--budget", "-3"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: usage:", 0), 0u);
}

TEST(RunSpec, JsonRoundTrip) {
    cli::RunSpec spec;
    spec.dataset = "/data/x.csv";
    spec.method = "grid";
    spec.unit = cli::parse_unit("seconds:2.5");
    spec.seed = 1234567890123ULL;
    EXPECT_EQ(cli::runspec_from_json(cli::runspec_to_json(spec)), spec);
}

TEST(RunSpec, UnitsAndBaselineBudgets) {
    EXPECT_EQ(cli::format_unit(cli::parse_unit("iters:4")), "iters:4");
    EXPECT_THROW(cli::parse_unit("iters:1.5"), Error);
    EXPECT_THROW(cli::parse_unit("iters"), Error);
    cli::RunSpec spec;
    spec.threads = 8;
    spec.budget = 16;
    spec.unit = cli::parse_unit("iters:4");
    EXPECT_EQ(cli::baseline_evaluations(spec), 512);
    spec.unit = cli::parse_unit("seconds:0.5");
    EXPECT_DOUBLE_EQ(cli::baseline_seconds(spec), 64.0);
}
