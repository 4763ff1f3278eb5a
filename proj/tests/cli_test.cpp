#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(T2_CLI_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 512> buf{};
    while (fgets(buf.data(), buf.size(), p)) r.out += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string config(const std::string& name) { return std::string(T2_CONFIG_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("t2_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

// keeps mock runs short
const std::string kFast =
    " --set data.pool_size=600 --set data.test_size=150 --set cost.runs=20 --set cost.cv_runs=4"
    " --set max_batches=2 --set diversity.epochs=100";

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST(Cli, SimulatePrintsClassCounts) {
    const auto dir = scratch("sim");
    const auto r = run("simulate -c " + config("diabetes_imbalance.json") + " -o " + dir.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("LR=7 MR=2 HR=1"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("test: 500 rows"), std::string::npos) << r.out;
    for (auto f : {"config.json", "d_ori.csv", "test.csv", "deficiency.json", "schema.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Cli, InvalidConfigExitsTwo) {
    const auto dir = scratch("bad");
    const auto r = run("simulate -c " + config("diabetes_imbalance.json") + " -o " + dir.string() +
                       " --set data.deficiency.ratios=[0.9,0.2,-0.1]");
    EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, MissingConfigFileExitsTwo) {
    EXPECT_EQ(run("run -c /nonexistent/t2.json -o /tmp/x").code, 2);
}

TEST(Cli, MockRunWritesReportAndHonoursOverrides) {
    const auto dir = scratch("run");
    const auto r = run("run -c " + config("diabetes_planned.json") + " -o " + dir.string() + kFast + " --set n_b=20");
    ASSERT_EQ(r.code, 0) << r.out;
    ASSERT_TRUE(fs::exists(dir / "report.json"));
    const auto rep = read_json(dir / "report.json");
    EXPECT_EQ(rep["config"]["n_b"], 20);
    EXPECT_EQ(rep["batches_processed"], 2);
    EXPECT_TRUE(fs::exists(dir / "batch_1.csv"));

    const auto rr = run("report " + dir.string());
    EXPECT_EQ(rr.code, 0) << rr.out;
    EXPECT_NE(rr.out.find("accepted "), std::string::npos) << rr.out;
    EXPECT_NE(rr.out.find("/2"), std::string::npos) << rr.out;
}

TEST(Cli, RemoteWithoutTokenExitsTwo) {
    const auto dir = scratch("remote");
    const auto r = run("run -c " + config("diabetes_remote.json") + " -o " + dir.string() +
                       " --set backend.remote.token_env=T2_CLI_TEST_UNSET_TOKEN");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("T2_CLI_TEST_UNSET_TOKEN"), std::string::npos) << r.out;
}

TEST(Cli, ReportHandlesEmptyAndCorruptRuns) {
    // a real report with its batch history removed, as after an immediate abort
    const auto dir = scratch("report");
    ASSERT_EQ(run("run -c " + config("diabetes_planned.json") + " -o " + dir.string() + kFast).code, 0);
    auto rep = read_json(dir / "report.json");
    rep["batches"] = nlohmann::json::array();
    rep["accepted"] = nlohmann::json::array();
    rep["batches_processed"] = 0;
    { std::ofstream(dir / "report.json") << rep.dump(); }
    const auto empty = run("report " + dir.string());
    EXPECT_EQ(empty.code, 0) << empty.out;
    EXPECT_NE(empty.out.find("no batches processed"), std::string::npos) << empty.out;

    { std::ofstream(dir / "report.json") << "{ not json"; }
    EXPECT_EQ(run("report " + dir.string()).code, 2);
    EXPECT_EQ(run("report " + (dir / "missing").string()).code, 2);
}

TEST(Cli, UnknownSubcommandExitsTwo) { EXPECT_EQ(run("frobnicate").code, 2); }
