#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ergolab/experiment.hpp"

using namespace ergolab;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

json load(const std::string& name) {
    std::ifstream is(std::string(ERGOLAB_CONFIG_DIR) + "/" + name);
    REQUIRE(is);
    return json::parse(is);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool has_path(const std::vector<Diagnostic>& d, const std::string& path) {
    for (const auto& x : d)
        if (x.path == path) return true;
    return false;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ergolab_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("every shipped config validates") {
    for (const auto& e : fs::directory_iterator(ERGOLAB_CONFIG_DIR)) {
        if (e.path().extension() != ".json") continue;
        const auto cfg = load(e.path().filename().string());
        CAPTURE(e.path().string());
        const auto diags = validate_config(cfg.at("kind").get<std::string>(), cfg);
        for (const auto& d : diags) MESSAGE(d.path << ": " << d.message);
        CHECK(diags.empty());
    }
}

TEST_CASE("validation reports every problem at once") {
    const json cfg = {{"kind", "tower"},
                      {"system", {{"backend", "cycle"}, {"M", 100}, {"colour", "red"}}},
                      {"params", {{"n", 0}, {"eps", -0.5}, {"extra", 1}}},
                      {"observable", {{"type", "random"}}}};
    const auto d = validate_config("tower", cfg);
    CHECK(has_path(d, "config.system.colour"));
    CHECK(has_path(d, "config.params.n"));
    CHECK(has_path(d, "config.params.eps"));
    CHECK(has_path(d, "config.params.extra"));
    CHECK(has_path(d, "config.observable"));
    CHECK(d.size() == 5);
}

TEST_CASE("randomized experiments require a seed") {
    json cfg = load("average_cycle.json");
    cfg.erase("seed");
    CHECK(has_path(validate_config("average", cfg), "config.seed"));
    CHECK(validate_config("average", cfg, 5).empty());
    cfg["observable"] = {{"type", "constant"}, {"value", 1.0}};
    CHECK(validate_config("average", cfg).empty());
    CHECK(is_randomized("cover", json::object()));
    CHECK_FALSE(is_randomized("tower", json::object()));
}

TEST_CASE("kind mismatches and unknown kinds are rejected") {
    const json cfg = load("tower.json");
    CHECK(has_path(validate_config("tower-zd", cfg), "config.kind"));
    CHECK(has_path(validate_config("nonsense", cfg), "kind"));
    const json bad_sys = {{"system", {{"backend", "torus"}, {"dims", {3, 0}}}}, {"params", {{"n", 1}, {"eps", 0.5}}}};
    CHECK(has_path(validate_config("tower", bad_sys), "config.system.dims[1]"));
    const json weights = {{"system", {{"backend", "cycle"}, {"M", 3}, {"weights", {0.5, 0.5}}}},
                          {"params", {{"n", 1}, {"eps", 0.5}}}};
    CHECK(has_path(validate_config("tower", weights), "config.system.weights"));
}

TEST_CASE("sculpt parameter checks") {
    json cfg = load("sculpt_rademacher.json");
    cfg["params"]["subtowers_per_axis"] = {32, 32};
    cfg["params"]["normalizer"] = "l3";
    cfg["params"]["target"] = {{"type", "atoms"}, {"atoms", {{0.0, -1.0}}}};
    const auto d = validate_config("sculpt", cfg);
    CHECK(has_path(d, "config.params.subtowers_per_axis"));
    CHECK(has_path(d, "config.params.normalizer"));
    CHECK(has_path(d, "config.params.target.atoms[0]"));
}

TEST_CASE("report schema and deterministic CSVs") {
    const auto cfg = load("average_cycle.json");
    const auto a = scratch("a"), b = scratch("b");
    const auto ra = run_experiment("average", cfg, a.string());
    const auto rb = run_experiment("average", cfg, b.string());
    CHECK(ra.report["schema_version"] == 1);
    CHECK(ra.report["status"] == "ok");
    CHECK(ra.report["config_hash"] == config_hash(cfg));
    CHECK(ra.report["config"] == cfg);
    CHECK(ra.report["seed"] == 7);
    CHECK(ra.report.contains("timings"));
    CHECK(ra.report.contains("versions"));
    REQUIRE(ra.files == std::vector<std::string>{"report.json", "sweep.csv"});
    CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
    // A different seed changes the data.
    const auto c = scratch("c");
    run_experiment("average", cfg, c.string(), 8);
    CHECK(slurp(a / "sweep.csv") != slurp(c / "sweep.csv"));
}

TEST_CASE("failures are recorded in the report") {
    json cfg = load("tower.json");
    cfg["params"]["n"] = 30000;
    cfg["params"]["eps"] = 0.01;
    const auto r = run_experiment("tower", cfg, scratch("fail").string());
    CHECK(r.report["status"] == "failed");
    CHECK(r.report.contains("error"));
    CHECK_THROWS_AS(run_experiment("tower", json::object(), scratch("bad").string()), Error);
}

TEST_CASE("command-line runner") {
    const std::string cli = ERGOLAB_CLI_PATH;
    const auto out = scratch("cli");
    const std::string cfg = std::string(ERGOLAB_CONFIG_DIR) + "/kakutani.json";
    CHECK(std::system((cli + " kakutani --config " + cfg + " --out " + out.string() + " > /dev/null").c_str()) == 0);
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "kakutani.csv"));
    CHECK(std::system((cli + " tower --config " + cfg + " --check > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((cli + " kakutani --config /nonexistent.json > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((cli + " kakutani --config " + cfg + " --check > /dev/null").c_str()) == 0);
}
