#pragma once

#include "twotsd/domain.hpp"
#include "twotsd/memory.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace twotsd;

inline DeviceId dev(const std::string& s) { return DeviceId(s); }

inline PerformanceRecord record(const std::string& owner, const std::string& collaborator, const TaskType& tt,
                                Timestamp at, Verdict v = Verdict::satisfied, double throughput = 100.0,
                                double loss = 0.01, double speed = 2.0, double accuracy = 0.98) {
    PerformanceRecord r;
    r.owner = dev(owner);
    r.collaborator = dev(collaborator);
    r.task_type = tt;
    r.at = at;
    r.throughput_mbps = throughput;
    r.loss_rate = loss;
    r.proc_speed_mbps = speed;
    r.accuracy = accuracy;
    r.verdict = v;
    return r;
}

inline ResourceProfile profile(const std::string& d, double cpu, double storage, double bw, Timestamp at) {
    ResourceProfile p;
    p.device = dev(d);
    p.cpu_cps = cpu;
    p.storage_mb = storage;
    p.bandwidth_mbps = bw;
    p.updated_at = at;
    return p;
}

inline Task task(const std::string& id, const std::string& owner, const TaskType& tt, double size, double density,
                 double deadline) {
    Task t;
    t.task_id = id;
    t.owner = dev(owner);
    t.task_type = tt;
    t.size_mb = size;
    t.density_cpb = density;
    t.deadline_s = deadline;
    return t;
}

// Task c2: video transcoding, 50 MB, 1000 cycles/bit, 50 s.
inline Task task_c2() { return task("c2", "a_i", task_types::video_transcoding, 50.0, 1000.0, 50.0); }

// The c2 walkthrough: a_k clean, a_j with rising loss, a_l trusted but too slow.
inline void load_c2_scenario(MemoryModule& mem, Timestamp now) {
    mem.resources.upsert(profile("a_k", 1e10, 200.0, 100.0, now));
    mem.resources.upsert(profile("a_j", 1.2e10, 500.0, 120.0, now));
    mem.resources.upsert(profile("a_l", 2.91e9, 200.0, 100.0, now));
}

inline std::vector<PerformanceRecord> c2_history(Timestamp start) {
    const auto& vt = task_types::video_transcoding;
    std::vector<PerformanceRecord> out;
    for (int i = 0; i < 10; ++i) {
        const Timestamp at = start + i * 1000;
        out.push_back(record("a_i", "a_k", vt, at, Verdict::satisfied, 100.0, 0.01, 2.0, 0.98));
        out.push_back(record("a_i", "a_j", vt, at + 1, Verdict::satisfied, 120.0, 0.01 * (1 + i), 2.4, 0.98));
        out.push_back(record("a_i", "a_l", vt, at + 2, Verdict::satisfied, 100.0, 0.01, 0.7, 0.98));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].record_id = "c2-" + std::to_string(i);
    return out;
}

inline TrustSemantics semantics(const std::string& d, const TaskType& tt, TrustState s, Timestamp at = 0) {
    TrustSemantics ts;
    ts.device = dev(d);
    ts.task_type = tt;
    ts.state = s;
    ts.extracted_at = at;
    if (s != TrustState::insufficient_data) {
        ts.record_count = 10;
        ts.window = TimeWindow{at - 9000, at};
    }
    return ts;
}

} // namespace testing
