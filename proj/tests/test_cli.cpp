#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#ifndef AGINGSIM_CLI
#error "AGINGSIM_CLI must name the CLI binary"
#endif

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(AGINGSIM_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path workdir() {
    const auto dir = fs::temp_directory_path() / "agingsim_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << R"({"schema_version": 1, "cluster": {"machines": 1, "cores_per_vm": 4},
        "trace": {"synthetic": {"duration_s": 1}}, "rates": [2], "seeds": [1]})";
    std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "cluster": {"machines": -3}})";
    std::ofstream(dir / "broken.json") << "{";
    return dir;
}

}  // namespace

TEST_CASE("calibrate, gen-trace, simulate and report succeed") {
    const auto d = workdir();
    const auto c = (d / "c.json").string();
    CHECK(cli("calibrate --config " + c + " --out " + (d / "p.json").string()) == 0);
    CHECK(fs::exists(d / "p.json"));
    CHECK(cli("gen-trace --config " + c + " --rate 3 --seed 4 --out " + (d / "t.csv").string()) == 0);
    std::ifstream t(d / "t.csv");
    std::string header;
    std::getline(t, header);
    CHECK(header == "arrival_s,input_tokens,output_tokens");
    CHECK(cli("simulate --config " + c + " --params " + (d / "p.json").string() + " --out " + (d / "runs").string() +
              " --parallel 2 --seed-offset 5") == 0);
    CHECK(fs::exists(d / "runs" / "linux_rate2_seed6" / "run.json"));
    CHECK(cli("report --runs " + (d / "runs").string() + " --out " + (d / "rep").string()) == 0);
    CHECK(fs::exists(d / "rep" / "summary.json"));
}

TEST_CASE("validation failures exit 1") {
    const auto d = workdir();
    CHECK(cli("simulate --config " + (d / "bad.json").string()) == 1);
    CHECK(cli("simulate --config " + (d / "broken.json").string()) == 1);
    CHECK(cli("simulate --config " + (d / "missing.json").string()) == 1);
    CHECK(cli("frobnicate") == 1);
    CHECK(cli("report --runs " + d.string() + " --out " + (d / "rep").string()) == 1);
    CHECK(cli("gen-trace --config " + (d / "c.json").string() + " --rate -1 --out x.csv") == 1);
}

TEST_CASE("runtime failures exit 2") {
    const auto d = workdir();
    fs::create_directories(d / "ro");
    std::ofstream(d / "ro" / "file") << "x";
    // The output path runs through a regular file, so directory creation fails.
    CHECK(cli("simulate --config " + (d / "c.json").string() + " --out " + (d / "ro" / "file" / "runs").string()) == 2);
}
