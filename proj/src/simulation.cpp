#include "twotsd/simulation.hpp"

#include "twotsd/error.hpp"
#include "twotsd/matching.hpp"
#include "twotsd/protocol.hpp"
#include "twotsd/student.hpp"
#include "twotsd/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <random>

namespace twotsd {

std::string_view to_string(DeviceClass c) noexcept {
    switch (c) {
    case DeviceClass::reliable: return "reliable";
    case DeviceClass::drifting: return "drifting";
    case DeviceClass::unreliable: return "unreliable";
    }
    return "reliable";
}

std::string_view to_string(Method m) noexcept { return m == Method::twotsd ? "2tsd" : "baseline"; }

double GroundTruthDevice::reliability_at(const TaskType& tt, Timestamp t) const {
    auto it = reliability.find(tt);
    const double r0 = it == reliability.end() ? 0.0 : it->second;
    if (!drift) return r0;
    return std::max(floor, r0 - drift->reliability_per_s * (static_cast<double>(t) / 1000.0));
}

double GroundTruthDevice::loss_at(Timestamp t) const {
    if (!drift) return base_loss;
    return std::min(1.0, base_loss * (1.0 + drift->loss_rel_per_s * (static_cast<double>(t) / 1000.0)));
}

std::optional<double> MethodSummary::selection_accuracy() const {
    if (scored == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(scored);
}

double MethodSummary::mean_evaluation_time_sim_s() const {
    return tasks == 0 ? 0.0 : total_evaluation_time_sim_s / static_cast<double>(tasks);
}

double MethodSummary::mean_data_collection_events() const {
    return tasks == 0 ? 0.0 : static_cast<double>(data_collection_events) / static_cast<double>(tasks);
}

void MethodSummary::add(const MethodSummary& o) {
    tasks += o.tasks;
    scored += o.scored;
    correct += o.correct;
    total_evaluation_time_sim_s += o.total_evaluation_time_sim_s;
    data_collection_events += o.data_collection_events;
    messages += o.messages;
}

std::map<Method, MethodSummary> MetricsReport::overall() const {
    std::map<Method, MethodSummary> out;
    for (const auto& s : seeds) {
        for (const auto& [m, ms] : s.methods) out[m].add(ms);
    }
    return out;
}

namespace {

enum Stream : std::uint64_t { population_stream = 1, workload_stream = 2 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::string device_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "dev-%03zu", i);
    return buf;
}

Timestamp interval_ms(double s) { return std::max<Timestamp>(1, seconds_to_ms(s)); }

Timestamp warmup_span_ms(const ScenarioConfig& cfg) {
    return static_cast<Timestamp>(cfg.warmup_per_device * cfg.device_count) * interval_ms(cfg.event_interval_s);
}

// One collaboration or measured task, drawn once and shared by both methods.
struct Event {
    Timestamp at = 0;
    std::size_t owner = 0;
    std::size_t collaborator = 0; // warm-up only
    std::size_t tmpl = 0;
    double u = 0.0;               // outcome draw
    double eps[4] = {0, 0, 0, 0}; // metric noise
};

struct Workload {
    std::vector<Event> warmup;
    std::vector<Event> measured;
};

Workload make_workload(const ScenarioConfig& cfg, std::uint64_t seed) {
    auto rng = make_rng(seed, workload_stream);
    const auto n = cfg.device_count;
    std::vector<double> weights;
    for (const auto& t : cfg.task_types) weights.push_back(t.weight);
    std::discrete_distribution<std::size_t> pick_type(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> pick_owner(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, n - 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    const auto step = interval_ms(cfg.event_interval_s);
    auto draw = [&](Timestamp at, bool with_collaborator) {
        Event e;
        e.at = at;
        e.owner = pick_owner(rng);
        if (with_collaborator) {
            const auto k = pick_other(rng);
            e.collaborator = k >= e.owner ? k + 1 : k;
        }
        e.tmpl = pick_type(rng);
        e.u = unit(rng);
        for (double& x : e.eps) x = noise(rng);
        return e;
    };

    Workload w;
    const auto warm = cfg.warmup_per_device * n;
    w.warmup.reserve(warm);
    for (std::size_t i = 0; i < warm; ++i) w.warmup.push_back(draw(static_cast<Timestamp>(i + 1) * step, true));
    const auto t0 = warmup_span_ms(cfg);
    w.measured.reserve(cfg.task_count);
    for (std::size_t j = 0; j < cfg.task_count; ++j) {
        w.measured.push_back(draw(t0 + static_cast<Timestamp>(j + 1) * step, false));
    }
    return w;
}

Task make_task(const ScenarioConfig& cfg, const std::vector<GroundTruthDevice>& pop, const Event& e,
               std::size_t j) {
    const auto& t = cfg.task_types[e.tmpl];
    Task task;
    task.task_id = "m" + std::to_string(j);
    task.owner = pop[e.owner].device;
    task.task_type = t.type;
    task.size_mb = t.size_mb;
    task.density_cpb = t.density_cpb;
    task.deadline_s = t.deadline_s;
    return task;
}

PerformanceRecord make_record(const ScenarioConfig& cfg, const std::vector<GroundTruthDevice>& pop,
                              const Event& e, std::size_t collaborator, std::string id) {
    const auto& c = pop[collaborator];
    const auto& t = cfg.task_types[e.tmpl];
    const double j = cfg.metric_jitter;
    PerformanceRecord r;
    r.record_id = std::move(id);
    r.owner = pop[e.owner].device;
    r.collaborator = c.device;
    r.task_type = t.type;
    r.at = e.at;
    r.throughput_mbps = std::max(0.0, c.true_profile.bandwidth_mbps * (1.0 + j * e.eps[0]));
    r.loss_rate = std::clamp(c.loss_at(e.at) * (1.0 + j * e.eps[1]), 0.0, 1.0);
    r.proc_speed_mbps = std::max(0.0, c.true_profile.cpu_cps / (t.density_cpb * 8e6) * (1.0 + j * e.eps[2]));
    r.accuracy = std::clamp(0.98 * (1.0 + j * e.eps[3]), 0.0, 1.0);
    r.verdict = e.u < c.reliability_at(t.type, e.at) ? Verdict::satisfied : Verdict::unsatisfied;
    return r;
}

ResourceProfile profile_at(const GroundTruthDevice& d, Timestamp t) {
    auto p = d.true_profile;
    p.updated_at = t;
    return p;
}

struct MethodRun {
    std::vector<TaskMetrics> rows;
    MethodSummary summary;
    std::size_t collaborations = 0;
    std::size_t records_ingested = 0;
};

void tally(MethodRun& run, const TaskMetrics& row, std::size_t messages) {
    auto& s = run.summary;
    ++s.tasks;
    s.total_evaluation_time_sim_s += row.evaluation_time_sim_s;
    s.data_collection_events += row.data_collection_events;
    s.messages += messages;
    if (row.correct) {
        ++s.scored;
        if (*row.correct) ++s.correct;
    }
    run.rows.push_back(row);
}

MethodRun run_twotsd_world(const ScenarioConfig& cfg, std::uint64_t seed, const std::vector<GroundTruthDevice>& pop,
                           const Workload& w, const RunOptions& opts) {
    MemoryModule memory;
    std::shared_ptr<SemanticsEngine> engine =
        opts.engine ? opts.engine(cfg) : std::make_shared<DeterministicEngine>(cfg.semantics);
    TeacherConfig tcfg;
    tcfg.window_k = cfg.semantics.window_k;
    tcfg.match = cfg.match;
    Teacher teacher(memory, engine, tcfg);
    Timestamp now = 0;
    Dispatcher dispatcher(teacher, [&now] { return now; });
    InProcessChannel channel(dispatcher, cfg.latency.msg_s);

    const auto report_step = interval_ms(cfg.report_interval_s);
    Timestamp next_report = 0;
    auto advance = [&](Timestamp t) {
        while (next_report <= t) {
            for (const auto& d : pop) teacher.handle_resource_report(profile_at(d, next_report));
            next_report += report_step;
        }
        now = t;
    };

    MethodRun run;
    for (std::size_t i = 0; i < w.warmup.size(); ++i) {
        const auto& e = w.warmup[i];
        advance(e.at);
        teacher.handle_performance_record(make_record(cfg, pop, e, e.collaborator, "w" + std::to_string(i)), e.at);
        ++run.collaborations;
    }

    for (std::size_t j = 0; j < w.measured.size(); ++j) {
        const auto& e = w.measured[j];
        advance(e.at);
        const auto task = make_task(cfg, pop, e, j);

        auto retrieved = memory.tree.by_task_type(task.task_type).size();
        if (memory.tree.find(task.task_type, task.owner)) --retrieved;
        const auto contacts_before = teacher.stats().device_contacts;
        const auto elapsed_before = channel.elapsed_s();
        const auto messages_before = channel.messages();

        const auto reply = channel.request(make_message(task.owner, task, "req-" + task.task_id, e.at));
        if (const auto* err = std::get_if<ErrorPayload>(&reply.payload)) {
            throw Error(Errc::invalid_field, "teacher rejected " + task.task_id + ": " + err->message);
        }
        const auto& bundle = std::get<CandidateBundle>(reply.payload);

        TaskMetrics row;
        row.seed = seed;
        row.method = Method::twotsd;
        row.index = j;
        row.task_id = task.task_id;
        row.task_type = task.task_type;
        row.owner = task.owner;
        row.bundle_size = bundle.candidates.size();
        row.evaluation_time_sim_s = (channel.elapsed_s() - elapsed_before) + cfg.latency.lookup_s +
                                    cfg.latency.per_item_s * static_cast<double>(retrieved) + cfg.latency.engine_s;
        row.data_collection_events = teacher.stats().device_contacts - contacts_before;
        row.selected = decide(bundle, cfg.policy);
        row.correct = score_selection(row.selected, task, pop, e.at, cfg);
        const auto messages = channel.messages() - messages_before;

        if (row.selected) {
            const auto sel = static_cast<std::size_t>(
                std::find_if(pop.begin(), pop.end(), [&](const auto& d) { return d.device == *row.selected; }) -
                pop.begin());
            auto rec = make_record(cfg, pop, e, sel, task.task_id);
            channel.request(make_message(task.owner, rec, "rec-" + task.task_id, e.at));
            ++run.collaborations;
        }
        tally(run, row, messages);
    }
    run.records_ingested = teacher.stats().records_ingested;
    return run;
}

// Device-local state for the baseline: nothing is shared between devices.
struct LocalLog {
    std::vector<std::pair<std::size_t, PerformanceRecord>> owned;  // as task owner
    std::vector<std::pair<std::size_t, PerformanceRecord>> served; // as collaborator
};

MethodRun run_baseline_world(const ScenarioConfig& cfg, std::uint64_t seed, const std::vector<GroundTruthDevice>& pop,
                             const Workload& w) {
    DeterministicEngine engine(cfg.semantics);
    std::vector<LocalLog> logs(pop.size());
    std::size_t seq = 0;
    auto store = [&](std::size_t owner, std::size_t collaborator, const PerformanceRecord& rec) {
        logs[owner].owned.emplace_back(seq, rec);
        logs[collaborator].served.emplace_back(seq, rec);
        ++seq;
    };

    MethodRun run;
    for (std::size_t i = 0; i < w.warmup.size(); ++i) {
        const auto& e = w.warmup[i];
        store(e.owner, e.collaborator, make_record(cfg, pop, e, e.collaborator, "w" + std::to_string(i)));
        ++run.collaborations;
    }

    const auto k = cfg.baseline.window_k;
    const auto candidates = pop.size() - 1;
    const auto& lat = cfg.latency;
    const double per_candidate = 2.0 * lat.msg_s + static_cast<double>(k) * lat.rec_s + lat.local_eval_s;

    for (std::size_t j = 0; j < w.measured.size(); ++j) {
        const auto& e = w.measured[j];
        const auto task = make_task(cfg, pop, e, j);

        CandidateBundle bundle;
        bundle.task_id = task.task_id;
        bundle.generated_at = e.at;
        for (std::size_t c = 0; c < pop.size(); ++c) {
            if (c == e.owner) continue;
            const auto& dev = pop[c];
            std::vector<std::pair<std::size_t, const PerformanceRecord*>> fetched;
            const auto& served = logs[c].served;
            for (auto it = served.rbegin(); it != served.rend() && fetched.size() < k; ++it) {
                if (it->second.task_type != task.task_type) continue;
                if (dev.selective_disclosure && cfg.baseline.selective_disclosure &&
                    it->second.verdict != Verdict::satisfied) {
                    continue;
                }
                fetched.emplace_back(it->first, &it->second);
            }
            std::map<std::size_t, const PerformanceRecord*> view(fetched.begin(), fetched.end());
            for (const auto& [s, rec] : logs[e.owner].owned) {
                if (rec.collaborator == dev.device && rec.task_type == task.task_type) view.emplace(s, &rec);
            }
            std::vector<PerformanceRecord> window;
            auto first = view.begin();
            if (view.size() > cfg.semantics.window_k) {
                std::advance(first, static_cast<std::ptrdiff_t>(view.size() - cfg.semantics.window_k));
            }
            for (auto it = first; it != view.end(); ++it) window.push_back(*it->second);

            auto ts = engine.extract(dev.device, task.task_type, window, e.at);
            if (ts.state != TrustState::trusted) continue;
            auto verdict = evaluate_chain(task, profile_at(dev, e.at), e.at, cfg.match);
            if (!verdict.matched) continue;
            bundle.candidates.push_back(Candidate{std::move(ts), true, std::move(verdict.stages)});
        }

        TaskMetrics row;
        row.seed = seed;
        row.method = Method::baseline;
        row.index = j;
        row.task_id = task.task_id;
        row.task_type = task.task_type;
        row.owner = task.owner;
        row.bundle_size = bundle.candidates.size();
        row.evaluation_time_sim_s = static_cast<double>(candidates) * per_candidate;
        row.data_collection_events = candidates;
        row.selected = decide(bundle, cfg.policy);
        row.correct = score_selection(row.selected, task, pop, e.at, cfg);

        if (row.selected) {
            const auto sel = static_cast<std::size_t>(
                std::find_if(pop.begin(), pop.end(), [&](const auto& d) { return d.device == *row.selected; }) -
                pop.begin());
            store(e.owner, sel, make_record(cfg, pop, e, sel, task.task_id));
            ++run.collaborations;
        }
        tally(run, row, 2 * candidates);
    }
    run.records_ingested = seq;
    return run;
}

struct SeedResult {
    SeedSummary summary;
    std::vector<TaskMetrics> rows;
};

SeedResult run_seed(const ScenarioConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
    const auto pop = make_population(cfg, seed);
    const auto workload = make_workload(cfg, seed);
    SeedResult out;
    out.summary.seed = seed;

    std::optional<MethodRun> a;
    std::optional<MethodRun> b;
    if (opts.run_twotsd) {
        a = run_twotsd_world(cfg, seed, pop, workload, opts);
        out.summary.methods[Method::twotsd] = a->summary;
        out.summary.collaborations = a->collaborations;
        out.summary.records_ingested = a->records_ingested;
    }
    if (opts.run_baseline) {
        b = run_baseline_world(cfg, seed, pop, workload);
        out.summary.methods[Method::baseline] = b->summary;
        if (!a) {
            out.summary.collaborations = b->collaborations;
            out.summary.records_ingested = b->records_ingested;
        }
    }
    for (std::size_t j = 0; j < workload.measured.size(); ++j) {
        if (a) out.rows.push_back(a->rows[j]);
        if (b) out.rows.push_back(b->rows[j]);
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::vector<GroundTruthDevice> make_population(const ScenarioConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto rng = make_rng(seed, population_stream);
    const auto n = cfg.device_count;
    const auto& r = cfg.resources;
    std::uniform_real_distribution<double> cpu(r.cpu_min_cps, r.cpu_max_cps);
    std::uniform_real_distribution<double> storage(r.storage_min_mb, r.storage_max_mb);
    std::uniform_real_distribution<double> bandwidth(r.bandwidth_min_mbps, r.bandwidth_max_mbps);

    std::vector<GroundTruthDevice> pop(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& d = pop[i];
        d.device = DeviceId(device_name(i));
        d.true_profile.device = d.device;
        d.true_profile.cpu_cps = cpu(rng);
        d.true_profile.storage_mb = storage(rng);
        d.true_profile.bandwidth_mbps = bandwidth(rng);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto unreliable = static_cast<std::size_t>(std::lround(cfg.unreliable_fraction * static_cast<double>(n)));
    const auto drifting = static_cast<std::size_t>(std::lround(cfg.drift.share * static_cast<double>(unreliable)));
    const double span_s = static_cast<double>(warmup_span_ms(cfg)) / 1000.0;

    for (std::size_t k = 0; k < n; ++k) {
        auto& d = pop[order[k]];
        d.floor = cfg.unreliable_level;
        double level = cfg.reliable_level;
        if (k < drifting) {
            d.cls = DeviceClass::drifting;
            d.drift = DriftRates{cfg.drift.reliability_drop / span_s, cfg.drift.loss_growth / span_s};
        } else if (k < unreliable) {
            d.cls = DeviceClass::unreliable;
            level = cfg.unreliable_level;
            d.selective_disclosure = cfg.baseline.selective_disclosure;
        }
        for (const auto& t : cfg.task_types) d.reliability[t.type] = level;
    }
    return pop;
}

bool accuracy_of(const GroundTruthDevice& selected, const Task& task, Timestamp now, const ScenarioConfig& cfg) {
    if (selected.reliability_at(task.task_type, now) < cfg.semantics.state.trust_threshold) return false;
    return evaluate_chain(task, profile_at(selected, now), now, cfg.match).matched;
}

std::optional<bool> score_selection(const std::optional<DeviceId>& selected, const Task& task,
                                    const std::vector<GroundTruthDevice>& population, Timestamp now,
                                    const ScenarioConfig& cfg) {
    if (selected) {
        for (const auto& d : population) {
            if (d.device == *selected) return accuracy_of(d, task, now, cfg);
        }
        return false;
    }
    for (const auto& d : population) {
        if (d.device != task.owner && accuracy_of(d, task, now, cfg)) return false;
    }
    return std::nullopt;
}

MetricsReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    std::vector<SeedResult> results(cfg.seeds.size());
    if (cfg.parallel_seeds && cfg.seeds.size() > 1) {
        std::vector<std::future<SeedResult>> jobs;
        for (auto seed : cfg.seeds) {
            jobs.push_back(std::async(std::launch::async, [&cfg, &opts, seed] { return run_seed(cfg, seed, opts); }));
        }
        for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
    } else {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) results[i] = run_seed(cfg, cfg.seeds[i], opts);
    }

    MetricsReport report;
    for (auto& r : results) {
        report.tasks.insert(report.tasks.end(), r.rows.begin(), r.rows.end());
        report.seeds.push_back(std::move(r.summary));
    }
    return report;
}

MetricsReport run_baseline(const ScenarioConfig& cfg) {
    RunOptions opts;
    opts.run_twotsd = false;
    return run_scenario(cfg, opts);
}

void write_tasks_csv(std::ostream& out, const MetricsReport& report) {
    out << "seed,method,task_index,task_id,task_type,owner,selected,bundle_size,"
           "evaluation_time_sim_s,data_collection_events,correct\n";
    for (const auto& t : report.tasks) {
        out << t.seed << ',' << to_string(t.method) << ',' << t.index << ',' << t.task_id << ','
            << t.task_type.str() << ',' << t.owner.str() << ',' << (t.selected ? t.selected->str() : "") << ','
            << t.bundle_size << ',' << fmt(t.evaluation_time_sim_s) << ',' << t.data_collection_events << ','
            << (t.correct ? (*t.correct ? "1" : "0") : "") << '\n';
    }
}

void write_aggregate_csv(std::ostream& out, const MetricsReport& report) {
    out << "scope,method,tasks,scored,correct,selection_accuracy,mean_evaluation_time_sim_s,"
           "data_collection_events,mean_data_collection_events,messages\n";
    auto row = [&](const std::string& scope, Method m, const MethodSummary& s) {
        const auto acc = s.selection_accuracy();
        out << scope << ',' << to_string(m) << ',' << s.tasks << ',' << s.scored << ',' << s.correct << ','
            << (acc ? fmt(*acc) : "") << ',' << fmt(s.mean_evaluation_time_sim_s()) << ','
            << s.data_collection_events << ',' << fmt(s.mean_data_collection_events()) << ',' << s.messages
            << '\n';
    };
    for (const auto& s : report.seeds) {
        for (const auto& [m, ms] : s.methods) row("seed-" + std::to_string(s.seed), m, ms);
    }
    for (const auto& [m, ms] : report.overall()) row("all", m, ms);
}

} // namespace twotsd
