#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "liouville/cli.hpp"

using namespace liouville;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("liouville_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LIOUVILLE_CLI_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("verify writes the fixed schema and exits 0 on a valid system") {
    const auto dir = fresh_dir("verify");
    spit(dir / "cfg.ini",
         "[system]\nname = harmonic_oscillator\n[task]\ngrid = 5\n");
    std::ostringstream log;
    const int code =
        cli::run("verify", (dir / "cfg.ini").string(), (dir / "out").string(), {}, log);
    CHECK(code == 0);
    const std::string csv = slurp(dir / "out" / "verify.csv");
    CHECK(csv.rfind("check,z1,z2,value,threshold,pass", 0) == 0);
    CHECK(csv.find("closed,") != std::string::npos);
    CHECK(csv.find("nondegenerate,") != std::string::npos);
}

TEST_CASE("verify flags the cocycle pair and exits 2") {
    const auto dir = fresh_dir("cocycle");
    spit(dir / "cfg.ini",
         "[system]\n"
         "n = 2\n"
         "box = -2 2 -2 2 -2 2 -2 2\n"
         "[omega]\n"
         "omega_13 = 1\n"
         "omega_24 = 1\n"
         "[hamiltonians]\n"
         "h1 = q1\n"
         "h2 = p1\n");
    std::ostringstream log;
    const int code =
        cli::run("verify", (dir / "cfg.ini").string(), (dir / "out").string(), {}, log);
    CHECK(code == 2);
    const std::string csv = slurp(dir / "out" / "verify.csv");
    CHECK(csv.find("cocycle_1_2") != std::string::npos);
    const std::string txt = slurp(dir / "out" / "verify.txt");
    CHECK(txt.find("2-cocycle") != std::string::npos);
}

TEST_CASE("orbit on the two-frequency system reports the lattice") {
    const auto dir = fresh_dir("orbit");
    spit(dir / "cfg.ini",
         "[system]\nname = uncoupled_oscillators\n[task]\nhorizon = 30\n");
    std::ostringstream log;
    const int code =
        cli::run("orbit", (dir / "cfg.ini").string(), (dir / "out").string(), {}, log);
    CHECK(code == 0);
    const std::string csv = slurp(dir / "out" / "orbit.csv");
    CHECK(csv.rfind("generator_index,t_1,t_2,return_residual", 0) == 0);
    // two generators near (2pi, 0) and (0, 2pi/sqrt(2))
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("report bundles prior artifacts") {
    const auto dir = fresh_dir("report");
    spit(dir / "cfg.ini", "[system]\nname = harmonic_oscillator\n");
    std::ostringstream log;
    CHECK(cli::run("verify", (dir / "cfg.ini").string(), (dir / "out").string(), {},
                   log) == 0);
    CHECK(cli::run("report", (dir / "cfg.ini").string(), (dir / "out").string(), {},
                   log) == 0);
    const std::string txt = slurp(dir / "out" / "report.txt");
    CHECK(txt.find("verify.csv") != std::string::npos);
    CHECK(txt.find("0 failing") != std::string::npos);
}

TEST_CASE("binary: malformed config exits 1 with a positioned message") {
    const auto dir = fresh_dir("badcfg");
    spit(dir / "bad.ini",
         "[system]\nn = 1\nbox = -1 1 -1 1\n[omega]\nomega_12 = 1\n"
         "[hamiltonians]\nh1 = sin(\n");
    CHECK(run_cli("verify --config " + (dir / "bad.ini").string() + " --out " +
                  (dir / "out").string()) == 1);
}

TEST_CASE("binary: two runs produce byte-identical CSVs") {
    const auto dir = fresh_dir("determinism");
    spit(dir / "cfg.ini",
         "[system]\nname = harmonic_oscillator\n[task]\nsamples = 25\nhorizon = 20\n");
    const std::string cfg = (dir / "cfg.ini").string();
    for (const std::string cmd : {"verify", "linearize"}) {
        REQUIRE(run_cli(cmd + " --config " + cfg + " --seed 9 --out " +
                        (dir / "a").string()) == 0);
        REQUIRE(run_cli(cmd + " --config " + cfg + " --seed 9 --out " +
                        (dir / "b").string()) == 0);
        const auto name = cmd + ".csv";
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
        CHECK(!slurp(dir / "a" / name).empty());
    }
}

TEST_CASE("unknown command is rejected by the library entry point") {
    const auto dir = fresh_dir("unknown");
    spit(dir / "cfg.ini", "[system]\nname = pendulum\n");
    std::ostringstream log;
    CHECK_THROWS_AS(
        cli::run("frobnicate", (dir / "cfg.ini").string(), (dir / "out").string(), {}, log),
        validation_error);
}
