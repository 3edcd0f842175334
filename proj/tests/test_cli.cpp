#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "lpflow/io.hpp"

using namespace lpflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lpflow_cli_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const fs::path& dir, const Json& j)
{
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

int run(const std::vector<std::string>& args, std::string* output = nullptr)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (output) *output = out.str() + err.str();
    return code;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Json hopf_config()
{
    return {{"field", {{"family", "hopf_cylinder"}}},
            {"integrator", {{"abs_tol", 1e-12}, {"rel_tol", 1e-11}}},
            {"initial_point", {1.0, 0.0, 0.0}},
            {"transient", 0.0},
            {"duration", 100.0},
            {"sample_dt", 0.05}};
}

Json short_lorenz_config()
{
    return {{"seed", 7},
            {"field", {{"family", "lorenz"}, {"params", {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}}}}},
            {"integrator", {{"box", {{"lower", {-50, -50, -10}}, {"upper", {50, 50, 80}}}}}},
            {"initial_point", {1.0, 1.0, 20.0}},
            {"duration", 400.0},
            {"returns", {{"max_candidates", 200}}},
            {"closing", {{"max_closures", 3}}}};
}

}  // namespace

TEST_CASE("spectrum command on the Hopf cycle gives {-2, -1}")
{
    TempDir dir("hopf");
    const auto cfg = write_config(dir.path, hopf_config());
    const std::string out = dir.path.string();
    REQUIRE(run({"simulate", "--config", cfg.string(), "--out", out}) == 0);
    REQUIRE(run({"spectrum", "--config", cfg.string(), "--out", out}) == 0);
    const Json s = read_json(dir.path / "spectrum.json");
    CHECK(s.at("schema_version") == kSchemaVersion);
    const auto e = s.at("exponents").get<std::vector<double>>();
    REQUIRE(e.size() == 2);
    CHECK(std::abs(e[0] + 2.0) <= 1e-3);
    CHECK(std::abs(e[1] + 1.0) <= 1e-3);
    CHECK(slurp(dir.path / "trajectory.csv").rfind("# schema_version=1\n", 0) == 0);
}

TEST_CASE("compare with identical spectrum files reports zero gaps")
{
    TempDir dir("identical");
    Json spec = {{"schema_version", 1}, {"exponents", {-14.5, 0.9}}};
    std::ofstream(dir.path / "a.json") << spec.dump();
    std::ofstream(dir.path / "b.json") << spec.dump();
    Json cfg = hopf_config();
    cfg["compare"] = {{"measure", "a.json"}, {"orbits", {"b.json"}}, {"eps", 1e-9}};
    const auto path = write_config(dir.path, cfg);
    REQUIRE(run({"compare", "--config", path.string(), "--out", dir.path.string()}) == 0);
    const Json r = read_json(dir.path / "comparison.json");
    const auto gaps = r.at("entries").at(0).at("report").at("gaps").get<std::vector<double>>();
    CHECK(gaps == std::vector<double>{0.0, 0.0});
    CHECK(r.at("entries").at(0).at("report").at("spectrum_pass").get<bool>());
    CHECK(fs::exists(dir.path / "comparison.txt"));
}

TEST_CASE("identical config and seed give byte-identical outputs")
{
    TempDir a("repeat_a"), b("repeat_b");
    const auto cfg_a = write_config(a.path, short_lorenz_config());
    const auto cfg_b = write_config(b.path, short_lorenz_config());
    for (const auto& [dir, cfg] : {std::pair{a.path, cfg_a}, std::pair{b.path, cfg_b}}) {
        for (const std::string cmd : {"simulate", "spectrum", "domination", "scan"}) {
            REQUIRE(run({cmd, "--config", cfg.string(), "--out", dir.string()}) == 0);
        }
        const int closed = run({"close", "--candidate", "selected", "--config", cfg.string(), "--out", dir.string()});
        CHECK((closed == 0 || closed == 4));
        run({"compare", "--config", cfg.string(), "--out", dir.string()});
    }
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a.path)) {
        const std::string name = e.path().filename().string();
        if (name == "config.json") continue;
        REQUIRE(fs::exists(b.path / name));
        CHECK_MESSAGE(slurp(e.path()) == slurp(b.path / name), name);
        ++compared;
    }
    CHECK(compared >= 8);
    const Json scan = read_json(a.path / "scan.json");
    CHECK(scan.at("returns").at("verification_failures") == 0);
    CHECK(scan.at("strings").at("verification_failures") == 0);
}

TEST_CASE("exit codes distinguish configuration, numerical and pipeline failures")
{
    TempDir dir("codes");
    const std::string out = dir.path.string();

    CHECK(run({"simulate", "--config", (dir.path / "missing.json").string()}) == cli::kConfig);
    CHECK(run({"simulate"}) == cli::kConfig);
    CHECK(run({"frobnicate", "--config", "x"}) == cli::kConfig);

    Json bad = hopf_config();
    bad["duraton"] = 5.0;
    CHECK(run({"simulate", "--config", write_config(dir.path, bad).string(), "--out", out}) == cli::kConfig);

    Json missing_param = hopf_config();
    missing_param["field"] = {{"family", "lorenz"}, {"params", {{"sigma", 10.0}, {"rho", 28.0}}}};
    CHECK(run({"simulate", "--config", write_config(dir.path, missing_param).string(), "--out", out}) == cli::kConfig);

    Json unknown_family = hopf_config();
    unknown_family["field"] = {{"family", "chua"}};
    CHECK(run({"simulate", "--config", write_config(dir.path, unknown_family).string(), "--out", out}) == cli::kConfig);

    // expanding linear field leaves its box: numerical failure
    Json escape = hopf_config();
    escape["field"] = {{"family", "linear"}, {"matrix", {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}};
    escape["integrator"] = {{"box", {{"lower", {-10, -10, -10}}, {"upper", {10, 10, 10}}}}};
    CHECK(run({"simulate", "--config", write_config(dir.path, escape).string(), "--out", out}) == cli::kNumerical);

    // a hand-made candidate spanning half the Hopf period cannot close: pipeline failure
    const auto cfg = write_config(dir.path, hopf_config());
    REQUIRE(run({"simulate", "--config", cfg.string(), "--out", out}) == 0);
    CHECK(run({"close", "--candidate", "0", "--config", cfg.string(), "--out", out}) == cli::kConfig);  // no scan.json
    const std::size_t half = static_cast<std::size_t>(std::round(3.14159 / 0.05));
    Json scan = {{"schema_version", 1},
                 {"returns", {{"candidates", {{{"id", 0}, {"i", 0}, {"j", half}, {"abs_gap", 0.0}, {"rel_gap", 0.0}}}},
                              {"selected", {0}}}}};
    write_json(dir.path / "scan.json", scan);
    CHECK(run({"close", "--candidate", "0", "--config", cfg.string(), "--out", out}) == cli::kPipeline);
    CHECK(run({"close", "--candidate", "5", "--config", cfg.string(), "--out", out}) == cli::kConfig);
    CHECK(run({"close", "--candidate", "x1", "--config", cfg.string(), "--out", out}) == cli::kConfig);
    const Json orbit = read_json(dir.path / "orbit_0.json");
    CHECK_FALSE(orbit.at("closed").get<bool>());
    CHECK(orbit.at("failure").get<std::string>().find("closing") == 0);
}
