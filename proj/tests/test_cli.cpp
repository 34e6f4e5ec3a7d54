#include "support.hpp"

#include "twotsd/cli.hpp"
#include "twotsd/teacher.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("twotsd_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    [[nodiscard]] std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

const std::string small_config =
    R"({"device_count": 8, "warmup_per_device": 30, "task_count": 20, "seeds": [1, 2]})";

} // namespace

TEST_CASE("simulate writes csvs and a manifest") {
    TempDir tmp("simulate");
    write(tmp / "c.json", small_config);
    const auto r = run({"simulate", "--config", tmp / "c.json", "--out", tmp / "out"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto tasks = slurp(tmp / "out/metrics_tasks.csv");
    CHECK(tasks.rfind("seed,method,task_index,task_id,task_type,owner,selected,bundle_size,", 0) == 0);
    CHECK(std::count(tasks.begin(), tasks.end(), '\n') == 1 + 2 * 2 * 20);
    CHECK(fs::exists(tmp / "out/metrics_aggregate.csv"));
    const auto manifest = nlohmann::json::parse(slurp(tmp / "out/manifest.json"));
    CHECK(manifest.at("command") == "simulate");
    CHECK(manifest.at("config_hash").get<std::string>().rfind("fnv1a64:", 0) == 0);
    CHECK(manifest.at("config").at("device_count") == 8);
    for (const auto& e : fs::directory_iterator(tmp.path / "out")) CHECK(e.path().extension() != ".partial");
}

TEST_CASE("simulate output is byte-identical across runs") {
    TempDir tmp("repeat");
    write(tmp / "c.json", small_config);
    REQUIRE(run({"simulate", "--config", tmp / "c.json", "--out", tmp / "a"}).code == 0);
    REQUIRE(run({"simulate", "--config", tmp / "c.json", "--out", tmp / "b"}).code == 0);
    for (const auto* f : {"metrics_tasks.csv", "metrics_aggregate.csv", "manifest.json"}) {
        CHECK(slurp(tmp / (std::string("a/") + f)) == slurp(tmp / (std::string("b/") + f)));
    }
}

TEST_CASE("seed and override flags") {
    TempDir tmp("flags");
    write(tmp / "c.json", small_config);
    REQUIRE(run({"simulate", "--config", tmp / "c.json", "--out", tmp / "o", "--seed", "7", "--override",
                 "task_count=5"})
                .code == 0);
    const auto manifest = nlohmann::json::parse(slurp(tmp / "o/manifest.json"));
    CHECK(manifest.at("seeds") == nlohmann::json::array({7}));
    CHECK(manifest.at("config").at("task_count") == 5);
}

TEST_CASE("usage and config errors exit 2") {
    TempDir tmp("usage");
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"simulate", "--config", tmp / "missing.json", "--out", tmp / "o"}).code == 2);
    write(tmp / "bad.json", R"({"device_count": "many"})");
    const auto r = run({"simulate", "--config", tmp / "bad.json", "--out", tmp / "o"});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
    write(tmp / "c.json", small_config);
    CHECK(run({"simulate", "--config", tmp / "c.json", "--out", tmp / "o", "--engine", "psychic"}).code == 2);
    CHECK(run({"compare", "--config", tmp / "c.json", "--out", tmp / "o"}).code == 2);
    CHECK(run({"inspect", tmp / "nope.json"}).code == 2);
    CHECK_FALSE(fs::exists(tmp / "o/metrics_tasks.csv"));
}

TEST_CASE("version and help") {
    const auto v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find(tool_version) != std::string::npos);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("compare over a single-point sweep") {
    TempDir tmp("compare");
    write(tmp / "c.json", small_config);
    const auto r = run({"compare", "--config", tmp / "c.json", "--out", tmp / "o", "--override",
                        R"(sweep={"axis":"device_count","values":[6]})"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto t = slurp(tmp / "o/compare_evaluation_time.csv");
    CHECK(t.rfind("device_count,", 0) == 0);
    CHECK(t.find("\n6,") != std::string::npos);
    const auto d = slurp(tmp / "o/compare_data_collection.csv");
    CHECK(d.find("\n6,0.000000,5.000000,0,") != std::string::npos);
    CHECK(fs::exists(tmp / "o/compare_selection_accuracy.csv"));
}

TEST_CASE("inspect an empty snapshot") {
    TempDir tmp("inspect_empty");
    MemoryModule mem;
    mem.save(tmp / "s.json");
    const auto r = run({"inspect", tmp / "s.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("root only") != std::string::npos);
}

TEST_CASE("inspect after the c2 walkthrough") {
    TempDir tmp("inspect_c2");
    MemoryModule mem;
    Teacher teacher(mem, std::make_shared<DeterministicEngine>());
    for (const auto& rec : c2_history(0)) teacher.handle_performance_record(rec, rec.at);
    mem.save(tmp / "s.json");
    const auto r = run({"inspect", tmp / "s.json"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find(task_types::video_transcoding.str() + " (3 devices)") != std::string::npos);
    const auto j = r.out.find("a_j:");
    const auto k = r.out.find("a_k:");
    const auto l = r.out.find("a_l:");
    REQUIRE(j != std::string::npos);
    CHECK(j < k);
    CHECK(k < l);
    CHECK(r.out.find("loss_rate increasing") != std::string::npos);
    CHECK(r.out.find("records: 30") != std::string::npos);

    const auto capped = run({"inspect", tmp / "s.json", "--max-leaves", "1"});
    CHECK(capped.out.find("... 2 more") != std::string::npos);
}

TEST_CASE("serve runs for a bounded time and saves its snapshot") {
    TempDir tmp("serve");
    const auto r = run({"serve", "--port", "0", "--for", "0.2", "--snapshot", tmp / "s.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("listening on 127.0.0.1:") != std::string::npos);
    CHECK(fs::exists(tmp / "s.json"));
}
