#include "twotsd/cli.hpp"

#include "twotsd/codec.hpp"
#include "twotsd/config.hpp"
#include "twotsd/error.hpp"
#include "twotsd/llm_adapter.hpp"
#include "twotsd/memory.hpp"
#include "twotsd/protocol.hpp"
#include "twotsd/service.hpp"
#include "twotsd/simulation.hpp"
#include "twotsd/teacher.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

namespace twotsd {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::atomic<bool>& stop_requested() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool is_config_error(Errc c) {
    return c == Errc::config || c == Errc::invalid_field || c == Errc::out_of_range;
}

struct Common {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    std::string engine;
};

ScenarioConfig resolve_config(const Common& c) {
    if (c.config_path.empty()) throw UsageError("--config is required");
    if (!fs::exists(c.config_path)) throw UsageError("config file not found: " + c.config_path);
    auto overrides = c.overrides;
    if (!c.engine.empty()) overrides.push_back("engine=" + c.engine);
    auto cfg = load_config(c.config_path, overrides);
    if (c.seed) cfg.seeds = {*c.seed};
    return cfg;
}

RunOptions run_options(const ScenarioConfig& cfg) {
    RunOptions opts;
    if (cfg.engine == "remote") {
        const auto remote = remote_config_from_json(cfg.remote);
        opts.engine = [remote](const ScenarioConfig& c) -> std::shared_ptr<SemanticsEngine> {
            return std::make_shared<RemoteEngine>(remote, c.semantics);
        };
    }
    return opts;
}

// Files are written under temporary names and renamed only when every one succeeded.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}

    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& [tmp, _] : files_) fs::remove(tmp, ec);
    }

    std::ofstream open(const std::string& name) {
        const auto final_path = dir_ / name;
        const auto tmp = dir_ / (name + ".partial");
        files_.emplace_back(tmp, final_path);
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(Errc::io, "cannot write " + tmp.string());
        return f;
    }

    void commit() {
        for (const auto& [tmp, final_path] : files_) fs::rename(tmp, final_path);
        committed_ = true;
    }

    [[nodiscard]] std::vector<fs::path> paths() const {
        std::vector<fs::path> out;
        for (const auto& f : files_) out.push_back(f.second);
        return out;
    }

private:
    fs::path dir_;
    std::vector<std::pair<fs::path, fs::path>> files_;
    bool committed_ = false;
};

fs::path prepare_out(const std::string& out) {
    if (out.empty()) throw UsageError("--out is required");
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw Error(Errc::io, "cannot create output directory " + out);
    return dir;
}

void write_manifest(OutputSet& outs, const std::string& command, const ScenarioConfig& cfg) {
    const auto canonical = canonical_config(cfg);
    json m{{"tool", "twotsd"},
           {"version", tool_version},
           {"command", command},
           {"seeds", cfg.seeds},
           {"config_hash", "fnv1a64:" + fnv1a64_hex(canonical)},
           {"config", json::parse(canonical)}};
    auto f = outs.open("manifest.json");
    f << m.dump(2) << '\n';
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

int cmd_simulate(const Common& c, std::ostream& out) {
    auto cfg = resolve_config(c);
    const auto dir = prepare_out(c.out_dir);
    const auto report = run_scenario(cfg, run_options(cfg));

    OutputSet outs(dir);
    {
        auto f = outs.open(tasks_csv_name);
        write_tasks_csv(f, report);
        if (!f) throw Error(Errc::io, "write failed");
    }
    {
        auto f = outs.open(aggregate_csv_name);
        write_aggregate_csv(f, report);
        if (!f) throw Error(Errc::io, "write failed");
    }
    write_manifest(outs, "simulate", cfg);
    outs.commit();

    for (const auto& [m, s] : report.overall()) {
        const auto acc = s.selection_accuracy();
        out << to_string(m) << ": tasks=" << s.tasks << " accuracy=" << (acc ? num(*acc) : "n/a")
            << " mean_eval_s=" << num(s.mean_evaluation_time_sim_s())
            << " collections/task=" << num(s.mean_data_collection_events()) << '\n';
    }
    for (const auto& p : outs.paths()) out << "wrote " << p.string() << '\n';
    return exit_code::ok;
}

int cmd_compare(const Common& c, std::ostream& out) {
    auto cfg = resolve_config(c);
    if (!cfg.sweep) throw UsageError("compare needs a sweep (config key 'sweep' or --override sweep=...)");
    const auto dir = prepare_out(c.out_dir);
    const auto sweep = *cfg.sweep;
    const auto opts = run_options(cfg);

    std::ostringstream time_csv, collect_csv, acc_csv;
    time_csv << sweep.axis << ",twotsd_mean_evaluation_time_sim_s,baseline_mean_evaluation_time_sim_s\n";
    collect_csv << sweep.axis
                << ",twotsd_mean_data_collection_events,baseline_mean_data_collection_events,"
                   "twotsd_data_collection_events,baseline_data_collection_events\n";
    acc_csv << sweep.axis << ",twotsd_selection_accuracy,baseline_selection_accuracy,twotsd_scored,baseline_scored\n";

    for (double v : sweep.values) {
        auto point = cfg;
        point.sweep.reset();
        std::string label;
        if (sweep.axis == "device_count") {
            if (v < 2 || v != static_cast<double>(static_cast<std::size_t>(v))) {
                throw Error(Errc::config, "device_count sweep values must be integers >= 2");
            }
            point.device_count = static_cast<std::size_t>(v);
            label = std::to_string(point.device_count);
        } else {
            point.unreliable_fraction = v;
            label = num(v);
        }
        point.validate();
        auto overall = run_scenario(point, opts).overall();
        const auto& a = overall[Method::twotsd];
        const auto& b = overall[Method::baseline];
        auto acc = [](const MethodSummary& s) {
            const auto x = s.selection_accuracy();
            return x ? num(*x) : std::string();
        };
        time_csv << label << ',' << num(a.mean_evaluation_time_sim_s()) << ','
                 << num(b.mean_evaluation_time_sim_s()) << '\n';
        collect_csv << label << ',' << num(a.mean_data_collection_events()) << ','
                    << num(b.mean_data_collection_events()) << ',' << a.data_collection_events << ','
                    << b.data_collection_events << '\n';
        acc_csv << label << ',' << acc(a) << ',' << acc(b) << ',' << a.scored << ',' << b.scored << '\n';
    }

    OutputSet outs(dir);
    outs.open("compare_evaluation_time.csv") << time_csv.str();
    outs.open("compare_data_collection.csv") << collect_csv.str();
    outs.open("compare_selection_accuracy.csv") << acc_csv.str();
    write_manifest(outs, "compare", cfg);
    outs.commit();
    for (const auto& p : outs.paths()) out << "wrote " << p.string() << '\n';
    return exit_code::ok;
}

std::string trends_line(const TrustSemantics& ts) {
    std::string s;
    s += "throughput " + std::string(to_string(ts.comm.throughput));
    s += ", loss_rate " + std::string(to_string(ts.comm.loss_rate));
    s += "; accuracy " + std::string(to_string(ts.comp.accuracy));
    s += ", proc_speed " + std::string(to_string(ts.comp.proc_speed));
    return s;
}

int cmd_inspect(const std::string& snapshot, std::size_t max_leaves, std::ostream& out) {
    if (snapshot.empty()) throw UsageError("a snapshot path is required");
    MemoryModule mem;
    try {
        MemoryModule::load(mem, snapshot);
    } catch (const Error& e) {
        throw UsageError(std::string("unreadable snapshot: ") + e.what());
    }
    mem.tree.check_invariants();
    const auto types = mem.tree.task_types();
    std::size_t leaves = 0;
    for (const auto& t : types) leaves += mem.tree.by_task_type(t).size();

    out << "resources: " << mem.resources.size() << " profiles\n";
    out << "records: " << mem.records.size() << " (next id " << mem.records.next_id() << ")\n";
    out << "tree: " << mem.tree.node_count() << " nodes (1 root + " << types.size() << " task types + " << leaves
        << " devices + " << leaves << " leaves)\n";
    if (types.empty()) {
        out << "root only\n";
        return exit_code::ok;
    }
    out << "root\n";
    for (const auto& t : types) {
        const auto entries = mem.tree.by_task_type(t);
        out << "  " << t.str() << " (" << entries.size() << " devices)\n";
        std::size_t shown = 0;
        for (const auto& ts : entries) {
            if (shown++ == max_leaves) {
                out << "    ... " << entries.size() - max_leaves << " more\n";
                break;
            }
            out << "    " << ts.device.str() << ": " << to_string(ts.state) << "; " << trends_line(ts)
                << " (records " << ts.record_count << ", engine " << ts.engine << ")\n";
        }
    }
    return exit_code::ok;
}

struct ServeArgs {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7070;
    std::string snapshot;
    std::string config_path;
    std::string engine;
    double run_for_s = 0.0;
};

Timestamp wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
    ScenarioConfig cfg;
    cfg.task_types = default_task_templates();
    if (!a.config_path.empty()) {
        if (!fs::exists(a.config_path)) throw UsageError("config file not found: " + a.config_path);
        cfg = load_config(a.config_path, a.engine.empty() ? std::vector<std::string>{}
                                                           : std::vector<std::string>{"engine=" + a.engine});
    } else if (!a.engine.empty()) {
        cfg.engine = a.engine;
        cfg.validate();
    }

    MemoryModule mem;
    if (!a.snapshot.empty() && fs::exists(a.snapshot)) {
        try {
            MemoryModule::load(mem, a.snapshot);
        } catch (const Error& e) {
            throw UsageError(std::string("unreadable snapshot: ") + e.what());
        }
    }
    std::shared_ptr<SemanticsEngine> engine;
    if (cfg.engine == "remote") {
        engine = std::make_shared<RemoteEngine>(remote_config_from_json(cfg.remote), cfg.semantics);
    } else {
        engine = std::make_shared<DeterministicEngine>(cfg.semantics);
    }
    TeacherConfig tcfg;
    tcfg.window_k = cfg.semantics.window_k;
    tcfg.match = cfg.match;
    Teacher teacher(mem, engine, tcfg);
    Dispatcher dispatcher(teacher, wall_ms);
    TeacherServer server(dispatcher, a.host, a.port);
    server.start();
    out << "listening on " << a.host << ':' << server.port() << std::endl;

    const auto started = std::chrono::steady_clock::now();
    while (!stop_requested().load()) {
        if (a.run_for_s > 0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >= a.run_for_s) {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    if (!a.snapshot.empty()) {
        mem.save(a.snapshot);
        out << "saved snapshot " << a.snapshot << '\n';
    }
    const auto st = teacher.stats();
    out << "served " << server.connections_served() << " connections, " << st.requests_served << " task requests, "
        << st.records_ingested << " records\n";
    return exit_code::ok;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "Scenario config (JSON)");
    sub->add_option("--out", c.out_dir, "Output directory");
    sub->add_option("--seed", c.seed, "Run a single seed instead of the configured list");
    sub->add_option("--override", c.overrides, "key.path=value, repeatable")->take_all();
    sub->add_option("--engine", c.engine, "deterministic or remote")
        ->check(CLI::IsMember({"deterministic", "remote"}));
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"twotsd: trust semantics distillation teacher, simulator and tools", "twotsd"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    Common sim_args;
    Common cmp_args;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write per-task and aggregate CSVs");
    add_common(simulate, sim_args);
    auto* compare = app.add_subcommand("compare", "Sweep one axis and write one CSV per comparison");
    add_common(compare, cmp_args);

    std::string snapshot;
    std::size_t max_leaves = 20;
    auto* inspect = app.add_subcommand("inspect", "Print a memory snapshot");
    inspect->add_option("snapshot", snapshot, "Snapshot file")->required();
    inspect->add_option("--max-leaves", max_leaves, "Leaves shown per task type");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run the teacher as a TCP service");
    serve->add_option("--host", serve_args.host, "IPv4 address to bind");
    serve->add_option("--port", serve_args.port, "TCP port, 0 for any");
    serve->add_option("--snapshot", serve_args.snapshot, "Load at start (if present) and save at exit");
    serve->add_option("--config", serve_args.config_path, "Scenario config for engine and thresholds");
    serve->add_option("--engine", serve_args.engine, "deterministic or remote")
        ->check(CLI::IsMember({"deterministic", "remote"}));
    serve->add_option("--for", serve_args.run_for_s, "Stop after this many seconds (0 = until signalled)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim_args, out);
        if (compare->parsed()) return cmd_compare(cmp_args, out);
        if (inspect->parsed()) return cmd_inspect(snapshot, max_leaves, out);
        if (serve->parsed()) return cmd_serve(serve_args, out);
    } catch (const UsageError& e) {
        err << "twotsd: " << e.what() << '\n';
        return exit_code::usage;
    } catch (const Error& e) {
        err << "twotsd: " << e.what() << '\n';
        return is_config_error(e.code()) ? exit_code::usage : exit_code::runtime;
    } catch (const std::exception& e) {
        err << "twotsd: " << e.what() << '\n';
        return exit_code::runtime;
    }
    return exit_code::usage;
}

} // namespace twotsd
