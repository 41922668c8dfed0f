#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

fs::path work_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("maintcause_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

// Exit status of the CLI with the given arguments; output goes to log.
int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + MAINTCAUSE_CLI + "\" " + args + " >\"" + log.string() + "\" 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char ch : s) n += ch == '\n';
    return n;
}

const std::string kConfig = std::string("--config \"") + MAINTCAUSE_SMALL_CONFIG + "\"";

}  // namespace

TEST_CASE("generate is deterministic and writes n rows") {
    const auto d = work_dir("gen");
    REQUIRE(run(kConfig + " --seed 3 --out " + (d / "a").string() + " generate --n 50 --lambda 10", d / "log") == 0);
    REQUIRE(run(kConfig + " --seed 3 --out " + (d / "b").string() + " generate --n 50 --lambda 10", d / "log") == 0);
    for (const char* f : {"contracts.csv", "oracle.bin", "meta.json"}) {
        CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
    }
    const auto csv = slurp(d / "a" / "contracts.csv");
    CHECK(csv.rfind("# schema_version=1 config_hash=", 0) == 0);
    CHECK(count_lines(csv) == 50 + 2);
    const auto meta = nlohmann::json::parse(slurp(d / "a" / "meta.json"));
    CHECK(meta.at("n") == 50);
    CHECK(meta.at("seed") == 3);
    CHECK(meta.at("lambda") == 10.0);

    REQUIRE(run(kConfig + " --seed 4 --out " + (d / "c").string() + " generate --n 50 --lambda 10", d / "log") == 0);
    CHECK(slurp(d / "a" / "oracle.bin") != slurp(d / "c" / "oracle.bin"));
    fs::remove_all(d);
}

TEST_CASE("invalid input gives the documented exit codes") {
    const auto d = work_dir("codes");
    CHECK(run("--out " + d.string() + " generate --n 0", d / "log") == 2);
    CHECK(run("--out " + d.string() + " generate --lambda -1", d / "log") == 2);
    CHECK(run("frobnicate", d / "log") == 2);
    std::ofstream(d / "bad.json") << R"({"n": 100, "colour": "red"})";
    CHECK(run("--config " + (d / "bad.json").string() + " generate", d / "log") == 2);
    CHECK(slurp(d / "log").find("colour") != std::string::npos);
    CHECK(run("train --data " + (d / "missing").string(), d / "log") == 3);
    fs::remove_all(d);
}

TEST_CASE("train, prescribe and evaluate") {
    const auto d = work_dir("pipeline");
    const auto data = d / "data";
    REQUIRE(run(kConfig + " --seed 1 --out " + data.string() + " generate --lambda 30", d / "log") == 0);
    REQUIRE(run(kConfig + " --out " + data.string() + " train --data " + data.string(), d / "log") == 0);
    for (const char* f : {"model_mlp_overhauls.json", "model_mlp_failures.json", "model_scigan_overhauls.json",
                          "model_scigan_failures.json", "history_mlp_overhauls.csv", "gan_history_failures.csv"}) {
        CHECK_MESSAGE(fs::exists(data / f), f);
    }
    const auto model = nlohmann::json::parse(slurp(data / "model_scigan_failures.json"));
    CHECK(model.at("estimator") == "scigan");
    CHECK(model.at("outcome") == "failures");

    REQUIRE(run(kConfig + " --out " + data.string() + " prescribe --data " + data.string() +
                    " --policy MLP-ITE --policy ORACLE",
                d / "log") == 0);
    const auto rx = slurp(data / "prescriptions.csv");
    CHECK(rx.find("id,policy,prescribed_t,estimated_cost,true_cost") != std::string::npos);
    // 160 contracts leave 40 in the test split, one row per contract and policy.
    CHECK(count_lines(rx) == 2 + 2 * 40);

    REQUIRE(run(kConfig + " --out " + (d / "eval").string() + " evaluate --data " + data.string(), d / "log") == 0);
    const auto report = nlohmann::json::parse(slurp(d / "eval" / "report.json"));
    CHECK(report.at("kind") == "eval_report");
    const auto& cell = report.at("cells").at(0);
    CHECK(cell.at("pe").at("ORACLE") == 0.0);
    CHECK(cell.at("pcr").at("ORACLE") == 1.0);
    for (const char* f : {"mise_vs_lambda.csv", "pe_vs_lambda.csv", "pcr_vs_lambda.csv"}) {
        CHECK(fs::exists(d / "eval" / f));
    }

    CHECK(run(kConfig + " prescribe --data " + data.string() + " --policy RANDOM", d / "log") == 2);
    fs::remove_all(d);
}

TEST_CASE("sweep writes the report and resumes") {
    const auto d = work_dir("sweep");
    const auto out = d / "out";
    REQUIRE(run(kConfig + " --out " + out.string() + " sweep", d / "log") == 0);
    const auto first = slurp(out / "report.json");
    const auto report = nlohmann::json::parse(first);
    CHECK(report.at("cells").size() == 4);
    CHECK(report.at("incomplete").empty());
    CHECK(count_lines(slurp(out / "pe_vs_lambda.csv")) == 2 + 2 * 4);
    std::size_t cells = 0;
    for (const auto& e : fs::directory_iterator(out / "cells")) cells += e.path().extension() == ".json";
    CHECK(cells == 4);

    REQUIRE(run(kConfig + " --verbose --out " + out.string() + " sweep", d / "log") == 0);
    CHECK(slurp(out / "report.json") == first);
    CHECK(slurp(d / "log").find("reusing") != std::string::npos);
    fs::remove_all(d);
}
