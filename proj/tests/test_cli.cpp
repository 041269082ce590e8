#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

// Integration tests against the installed command-line binary.

namespace fs = std::filesystem;
using specgap::json;

namespace {

#ifndef SPECGAP_CLI_PATH
#error "SPECGAP_CLI_PATH must be defined by the build"
#endif

const char* kCli = SPECGAP_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("specgap_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int counter() {
        static int c = 0;
        return c++;
    }
};

int run_cli(const std::string& args) {
    std::string cmd = std::string(kCli) + " " + args + " > /dev/null 2> /dev/null";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json fixture_2x2_input() {
    return json{{"kernel",
                 json{{"labels", {"1", "2"}}, {"tau", 1.0}, {"rows", {{1.0, 1.0}, {0.0, 2.0}}}}},
                {"V", {1.0, 2.0}},
                {"psi", {1.0, 1.0}}};
}

}  // namespace

TEST(Cli, CheckOnReducibleFixture) {
    TempDir tmp;
    write_file(tmp.path / "in.json", fixture_2x2_input().dump());
    int code = run_cli("check --input " + (tmp.path / "in.json").string() + " --out " +
                       tmp.path.string());
    EXPECT_EQ(code, 0);
    json witness = json::parse(read_file(tmp.path / "witness.json"));
    EXPECT_DOUBLE_EQ(witness.at("beta").get<double>(), 2.0);
    EXPECT_TRUE(witness.at("conditions").at("A1").at("pass").get<bool>());
}

TEST(Cli, BdQsdRejectsWhenConditionFails) {
    TempDir tmp;
    json in{{"model", "birth-death"}, {"b", 2.0}, {"d", 2.0}, {"b1", 1.0}, {"d1", 1.0}, {"N", 40}};
    write_file(tmp.path / "in.json", in.dump());
    int code = run_cli("bd-qsd --input " + (tmp.path / "in.json").string() + " --out " +
                       tmp.path.string());
    EXPECT_EQ(code, 3);
}

TEST(Cli, EigenOnIdentityReportsNoCertifiedGap) {
    TempDir tmp;
    json in{{"kernel", json{{"tau", 1.0}, {"rows", {{1.0, 0.0}, {0.0, 1.0}}}}}};
    write_file(tmp.path / "in.json", in.dump());
    int code = run_cli("eigen --input " + (tmp.path / "in.json").string() + " --out " +
                       tmp.path.string());
    EXPECT_EQ(code, 2);
    EXPECT_TRUE(fs::exists(tmp.path / "triplet.json"));
}

TEST(Cli, MalformedInputIsExitOne) {
    TempDir tmp;
    write_file(tmp.path / "in.json", "{ not json");
    EXPECT_EQ(run_cli("check --input " + (tmp.path / "in.json").string()), 1);
    write_file(tmp.path / "empty.json", "{}");
    EXPECT_EQ(run_cli("check --input " + (tmp.path / "empty.json").string()), 1);
}

TEST(Cli, ConfigFileOverridesFlags) {
    TempDir tmp;
    json in = fixture_2x2_input();
    in["command"] = "ledger";  // overrides the positional 'check'
    in["output_dir"] = tmp.path.string();
    write_file(tmp.path / "in.json", in.dump());
    int code = run_cli("check --input " + (tmp.path / "in.json").string());
    EXPECT_EQ(code, 0);
    EXPECT_TRUE(fs::exists(tmp.path / "ledger.json"));
}

TEST(Cli, ReRunsAreByteIdentical) {
    TempDir tmp;
    std::mt19937_64 rng(7);
    specgap::KernelOperator M = sgtest::random_positive_kernel(120, rng);
    json in{{"kernel", specgap::kernel_to_json(M, specgap::StateSpace::indexed(120))}};
    write_file(tmp.path / "in.json", in.dump());
    std::string args = "audit --input " + (tmp.path / "in.json").string() + " --seed 9 --out ";
    ASSERT_EQ(run_cli(args + (tmp.path / "a").string()), 0);
    ASSERT_EQ(run_cli(args + (tmp.path / "b").string()), 0);
    for (const char* name : {"witness.json", "ledger.json", "triplet.json", "audit.csv",
                             "audit_tv.csv", "audit.json"}) {
        EXPECT_EQ(read_file(tmp.path / "a" / name), read_file(tmp.path / "b" / name)) << name;
    }
}

TEST(Cli, HarrisCommandOnConservativeChain) {
    TempDir tmp;
    specgap::Matrix P = sgtest::conservative_birth_death_chain(12);
    specgap::Vector scrV(12);
    for (specgap::Index i = 0; i < 12; ++i) scrV[i] = std::pow(1.3, static_cast<double>(i));
    json in{{"kernel", specgap::kernel_to_json(specgap::KernelOperator(P, 1.0),
                                               specgap::StateSpace::indexed(12))},
            {"V", std::vector<double>(scrV.data(), scrV.data() + 12)}};
    write_file(tmp.path / "in.json", in.dump());
    int code = run_cli("harris --input " + (tmp.path / "in.json").string() + " --out " +
                       tmp.path.string());
    EXPECT_EQ(code, 0);
    json rep = json::parse(read_file(tmp.path / "harris.json"));
    EXPECT_TRUE(rep.at("pass").get<bool>());
    EXPECT_LE(rep.at("worst_case").at("ratio").get<double>(),
              rep.at("constants").at("frak_y").get<double>() + 1e-12);
}

TEST(Cli, WitnessOutFlagWritesExtraCopy) {
    TempDir tmp;
    write_file(tmp.path / "in.json", fixture_2x2_input().dump());
    fs::path extra = tmp.path / "copies" / "w.json";
    int code = run_cli("check --input " + (tmp.path / "in.json").string() + " --out " +
                       tmp.path.string() + " --witness-out " + extra.string());
    EXPECT_EQ(code, 0);
    EXPECT_TRUE(fs::exists(extra));
    EXPECT_EQ(read_file(extra), read_file(tmp.path / "witness.json"));
}
