#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "privacy_lab/cli.hpp"

namespace cli = privacy_lab::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("privacy_lab_cli_" + name);
}

}  // namespace

TEST(Cli, EquilibriumHumanOutput) {
    const auto r = invoke({"equilibrium", "--sigma-v", "1", "--sigma-u", "1", "--sigma-eps", "1"});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("λ  = 0.353553"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("β  = 1.41421"), std::string::npos);
    EXPECT_NE(r.out.find("λβ = 0.5"), std::string::npos);
}

TEST(Cli, EquilibriumJsonHasDiscrepancyBelowTolerance) {
    const auto r = invoke({"equilibrium", "--sigma-eps", "2", "--format", "json"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["command"], "equilibrium");
    EXPECT_LE(j["result"]["relative_discrepancy"].get<double>(), 1e-12);
    EXPECT_NEAR(j["result"]["lambda"].get<double>(), 1.0 / (2.0 * std::sqrt(5.0)), 1e-15);
}

TEST(Cli, InvalidParamsExitWithUsageCode) {
    auto r = invoke({"equilibrium", "--sigma-eps", "-1"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("sigma_eps"), std::string::npos) << r.err;
    EXPECT_TRUE(r.out.empty());

    EXPECT_EQ(invoke({"decompose", "--sigma-u", "0"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"equilibrium", "--format", "xml"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"nonsense"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"sweep", "--sigma-eps-values", "0,2,1"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"sweep", "--outputs", "bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"simulate", "--n-paths", "0"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"simulate", "--batched", "--tau", "0"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"equilibrium", "--config", "/nonexistent/cfg.json"}).code, cli::kExitUsage);
}

TEST(Cli, HelpExitsCleanly) {
    const auto r = invoke({"--help"});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_NE(r.out.find("simulate"), std::string::npos);
}

TEST(Cli, DecomposeReportsCalibratedSubsidy) {
    const auto r = invoke({"decompose", "--sigma-v", "3000", "--sigma-u", "1000", "--sigma-eps", "1000"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_NE(r.out.find("1,060,660"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("inflection σε* = 1414.21"), std::string::npos);
}

TEST(Cli, DecomposeCsvIsParsable) {
    const auto r = invoke({"decompose", "--sigma-eps", "1", "--format", "csv"});
    ASSERT_EQ(r.code, cli::kExitOk);
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "quantity,value");
    EXPECT_NE(r.out.find("pi_M,-0.35355339059327373"), std::string::npos) << r.out;
}

TEST(Cli, FeeComparisonJson) {
    const auto r = invoke({"fee", "--sigma-v", "3000", "--sigma-u", "1000", "--sigma-eps", "1000",
                           "--daily-volume", "1e9", "--fee-bps", "10", "--format", "json"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    const auto& f = j["result"]["fee_comparison"];
    EXPECT_DOUBLE_EQ(f["revenue"].get<double>(), 1e6);
    EXPECT_NEAR(f["shortfall_pct"].get<double>(), 6.066, 1e-3);
}

TEST(Cli, SweepCsvMatchesLibraryWriter) {
    const auto r = invoke({"sweep", "--sigma-eps-values", "0,0.5,1", "--format", "csv"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    std::ostringstream expected;
    privacy_lab::write_report_csv(
        expected, privacy_lab::sweep({{0.0, 1.0, 1.0, 0.0}, {0.0, 0.5, 1.0}}));
    EXPECT_EQ(r.out, expected.str());
}

TEST(Cli, JsonOutputRoundTripsThroughConfig) {
    const auto first = invoke({"simulate", "--sigma-v", "2", "--sigma-u", "0.5", "--sigma-eps", "0.7",
                               "--p0", "10", "--n-paths", "20000", "--seed", "9", "--format", "json"});
    ASSERT_NE(first.code, cli::kExitUsage) << first.err;
    const auto path = scratch("roundtrip.json");
    {
        std::ofstream f(path);
        f << first.out;
    }
    const auto second = invoke({"simulate", "--config", path.string()});
    EXPECT_EQ(second.code, first.code);
    EXPECT_EQ(second.out, first.out);

    // Flags override the file.
    const auto third = invoke({"equilibrium", "--config", path.string(), "--sigma-eps", "0", "--format", "json"});
    const auto j = nlohmann::json::parse(third.out);
    EXPECT_EQ(j["market"]["sigma_eps"].get<double>(), 0.0);
    EXPECT_EQ(j["market"]["sigma_v"].get<double>(), 2.0);
    std::filesystem::remove(path);
}

TEST(Cli, SimulateOutputIndependentOfThreadCap) {
    const std::vector<std::string> base = {"simulate", "--sigma-eps", "1", "--n-paths", "300000",
                                           "--chunk-size", "8192", "--format", "json"};
    ::setenv("PRIVACY_LAB_THREADS", "1", 1);
    const auto one = invoke(base);
    ::setenv("PRIVACY_LAB_THREADS", "4", 1);
    const auto four = invoke(base);
    ::unsetenv("PRIVACY_LAB_THREADS");
    auto flagged = base;
    flagged.insert(flagged.end(), {"--threads", "3"});
    const auto three = invoke(flagged);
    EXPECT_EQ(one.out, four.out);
    EXPECT_EQ(one.out, three.out);
    EXPECT_EQ(one.code, cli::kExitOk);
}

TEST(Cli, SimulatePassesOnAndOffEquilibrium) {
    for (const char* scale : {"1", "0.8", "1.2", "2"}) {
        const auto r = invoke({"simulate", "--sigma-eps", "1", "--n-paths", "1000000", "--beta-scale", scale});
        EXPECT_EQ(r.code, cli::kExitOk) << scale << '\n' << r.out;
        EXPECT_NE(r.out.find("all checks PASS"), std::string::npos);
    }
    const auto b = invoke({"simulate", "--batched", "--tau", "4", "--n-paths", "1000000", "--format", "csv"});
    EXPECT_EQ(b.code, cli::kExitOk) << b.out;
    EXPECT_EQ(b.out.substr(0, b.out.find('\n')), "check,closed_form,estimate,se,status");
}

TEST(Cli, FailedCheckExitsWithVerificationCode) {
    // Small samples: some seed puts an estimate outside its 3 se band.
    int found = -1;
    for (int seed = 1; seed <= 3000 && found < 0; ++seed) {
        const auto r = invoke({"simulate", "--sigma-eps", "1", "--n-paths", "200", "--seed",
                               std::to_string(seed), "--format", "csv"});
        ASSERT_NE(r.code, cli::kExitUsage) << r.err;
        if (r.code == cli::kExitVerification) {
            EXPECT_NE(r.out.find("FAIL"), std::string::npos);
            found = seed;
        } else {
            EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
        }
    }
    EXPECT_GT(found, 0);
}

TEST(Cli, OutputFlagWritesFile) {
    const auto path = scratch("out.csv");
    const auto r = invoke({"sweep", "--format", "csv", "--output", path.string()});
    EXPECT_EQ(r.code, cli::kExitOk);
    EXPECT_TRUE(r.out.empty());
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, privacy_lab::kReportCsvHeader);
    std::filesystem::remove(path);
}

TEST(Cli, ReproduceCommandWritesBundle) {
    const auto dir = scratch("repro");
    std::filesystem::remove_all(dir);
    const auto r = invoke({"reproduce-paper", "--out-dir", dir.string(), "--format", "json"});
    EXPECT_EQ(r.code, cli::kExitOk) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j["result"]["all_pass"].get<bool>());
    for (const char* name :
         {"table1.csv", "table2.csv", "figure1.csv", "figure1.json", "fee_comparison.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
    std::filesystem::remove_all(dir);
}

TEST(Cli, CommandExamples) {
    auto j = nlohmann::json::parse(
        invoke({"equilibrium", "--sigma-v", "3000", "--sigma-u", "1000", "--sigma-eps", "1414.2136",
                "--format", "json"})
            .out);
    EXPECT_NEAR(j["result"]["lambda"].get<double>(), 0.866, 5e-4);

    j = nlohmann::json::parse(invoke({"decompose", "--sigma-eps", "1", "--format", "json"}).out);
    EXPECT_NEAR(j["result"]["break_even_fee"]["net_pi_I"].get<double>(), 0.5, 1e-15);

    j = nlohmann::json::parse(invoke({"decompose", "--sigma-eps", "0", "--format", "json"}).out);
    EXPECT_EQ(j["result"]["welfare"]["subsidy"].get<double>(), 0.0);
    EXPECT_EQ(j["result"]["break_even_fee"]["fee_rate"].get<double>(), 0.0);
}

TEST(Cli, SweepJsonRoundTripsThroughConfig) {
    const auto first = invoke({"sweep", "--sigma-u", "2", "--sigma-eps-values", "0,1,3", "--outputs",
                               "equilibrium,fee", "--format", "json"});
    ASSERT_EQ(first.code, cli::kExitOk) << first.err;
    const auto path = scratch("sweep.json");
    {
        std::ofstream f(path);
        f << first.out;
    }
    EXPECT_EQ(invoke({"sweep", "--config", path.string()}).out, first.out);
    std::filesystem::remove(path);
}
