#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

// End-to-end checks of the installed CLI binary: exit codes, artifact shape,
// and the byte-identical determinism contract.

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mf_cli_test_" + std::to_string(static_cast<unsigned>(std::rand())));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

fs::path write_config(const TempDir& dir, const std::string& name, const std::string& body) {
    const fs::path p = dir.path / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("queue run writes the closed-form table and a manifest") {
    TempDir dir;
    const auto cfg = write_config(dir, "q.json", R"({"lambda": 5.0, "mu": [3.0, 3.0]})");
    const fs::path out = dir.path / "out";
    REQUIRE(run_cli("queue --config " + cfg.string() + " --out " + out.string()) == 0);

    const std::string table = slurp(out / "queue.csv");
    CHECK(table.find("metric,expected") != std::string::npos);
    CHECK(table.find("p_wait,0.757575758") != std::string::npos);
    CHECK(table.find("p_empty,0.0909090909") != std::string::npos);

    const json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["subcommand"] == "queue");
    CHECK(manifest["artifacts"].contains("queue.csv"));
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("identical config and seed reproduce artifacts byte for byte") {
    TempDir dir;
    const auto cfg = write_config(
        dir, "sim.json",
        R"({"lambda": 5.0, "mu": [2.9, 3.1], "horizon": 500, "replications": 3, "seed": 11})");
    const fs::path a = dir.path / "a", b = dir.path / "b";
    REQUIRE(run_cli("queue-sim --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run_cli("queue-sim --config " + cfg.string() + " --out " + b.string()) == 0);
    CHECK(slurp(a / "queue_sim.csv") == slurp(b / "queue_sim.csv"));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));

    // a different seed must change the observations
    const fs::path c = dir.path / "c";
    REQUIRE(run_cli("queue-sim --config " + cfg.string() + " --out " + c.string() +
                    " --seed 12") == 0);
    CHECK(slurp(a / "queue_sim.csv") != slurp(c / "queue_sim.csv"));
}

TEST_CASE("json format re-parses into the same records") {
    TempDir dir;
    const auto cfg = write_config(dir, "spite.json",
                                  R"({"n": 2, "alphas": [0.0, 1.0], "mc_samples": 20000,
                                      "seed": 5})");
    const fs::path out = dir.path / "out";
    REQUIRE(run_cli("auction-spite --config " + cfg.string() + " --out " + out.string() +
                    " --format json") == 0);
    const json doc = json::parse(slurp(out / "spite.json"));
    REQUIRE(doc["rows"].size() == 2);
    CHECK(doc["seed"] == 5);
    CHECK(doc["rows"][0]["revenue"].get<double>() == doctest::Approx(1.0 / 3.0));
    CHECK(doc["rows"][1]["revenue"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(doc["rows"][1]["bid_slope"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("validation failures exit with code 2") {
    TempDir dir;
    const fs::path out = dir.path / "out";

    const auto empty = write_config(dir, "empty.json", "");
    CHECK(run_cli("queue --config " + empty.string() + " --out " + out.string()) == 2);

    CHECK(run_cli("queue --config " + (dir.path / "missing.json").string() + " --out " +
                  out.string()) == 2);

    const auto unstable = write_config(dir, "unstable.json", R"({"lambda": 9.0, "mu": [3.0, 3.0]})");
    CHECK(run_cli("queue --config " + unstable.string() + " --out " + out.string()) == 2);

    const auto badfield = write_config(dir, "badfield.json", R"({"lambda": 5.0})");
    CHECK(run_cli("queue --config " + badfield.string() + " --out " + out.string()) == 2);
}

TEST_CASE("non-convergence exits with code 3 but keeps the artifacts") {
    TempDir dir;
    const auto cfg = write_config(dir, "tight.json",
                                  R"({"n": 2, "horizon": 2, "initial_budget": 0.3,
                                      "s_max": 0.5, "fp_max_rounds": 2, "seed": 1})");
    const fs::path out = dir.path / "out";
    CHECK(run_cli("dyn-auction --config " + cfg.string() + " --out " + out.string()) == 3);
    CHECK(fs::exists(out / "dyn_summary.csv"));
    CHECK(fs::exists(out / "dyn_policy.csv"));
    const json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["artifacts"].contains("dyn_summary.csv"));
    CHECK(slurp(out / "dyn_summary.csv").find("fixed_point_converged,false") != std::string::npos);
}

TEST_CASE("auction solve emits the inverse-bid grid") {
    TempDir dir;
    const auto cfg = write_config(dir, "solve.json",
                                  R"({"cdfs": [{"family": "uniform"}, {"family": "uniform"}],
                                      "method": "collocation", "K": 3, "seed": 2,
                                      "mc_samples": 5000})");
    const fs::path out = dir.path / "out";
    REQUIRE(run_cli("auction-solve --config " + cfg.string() + " --out " + out.string()) == 0);

    const std::string curves = slurp(out / "curves.csv");
    CHECK(curves.find("b,v_1,v_2") != std::string::npos);
    const std::string summary = slurp(out / "summary.csv");
    CHECK(summary.find("converged,true") != std::string::npos);
    // uniform pair: top bid 1/2, flow revenue 1/3
    CHECK(summary.find("b_high,0.5") != std::string::npos);
    CHECK(summary.find("revenue_flow,0.333333") != std::string::npos);
}
