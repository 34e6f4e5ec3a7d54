#include "twotsd/teacher.hpp"

#include "twotsd/error.hpp"

#include <algorithm>

namespace twotsd {

void TeacherConfig::validate() const {
    if (window_k < 1) throw Error(Errc::config, "teacher.window_k must be >= 1");
    if (extract_every < 1) throw Error(Errc::config, "teacher.extract_every must be >= 1");
    if (retention_horizon_s && !(*retention_horizon_s > 0.0)) {
        throw Error(Errc::config, "teacher.retention_horizon_s must be > 0");
    }
    match.validate();
}

Teacher::Teacher(MemoryModule& memory, std::shared_ptr<SemanticsEngine> engine, TeacherConfig cfg)
    : memory_(memory), engine_(std::move(engine)), cfg_(std::move(cfg)) {
    if (!engine_) throw Error(Errc::config, "teacher requires a semantics engine");
    cfg_.validate();
}

void Teacher::handle_resource_report(const ResourceProfile& profile) {
    memory_.resources.upsert(validate_profile(profile));
    ++resource_reports_;
}

std::mutex& Teacher::key_mutex(const Key& key) {
    std::lock_guard lock(keys_mu_);
    auto& slot = key_locks_[key];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

TrustSemantics Teacher::extract_and_store(const Key& key, Timestamp now) {
    std::lock_guard key_lock(key_mutex(key));
    const auto history =
        memory_.records.query(HistoryQuery{key.first, key.second, LastK{cfg_.window_k}});
    auto ts = validate_semantics(engine_->extract(key.first, key.second, history, now));
    memory_.tree.upsert(ts);
    ++extractions_;
    return ts;
}

TrustSemantics Teacher::handle_performance_record(const PerformanceRecord& rec, Timestamp now) {
    const auto valid = validate_record(rec);
    memory_.records.append(valid);
    ++records_ingested_;
    if (cfg_.retention_horizon_s) {
        memory_.records.prune_before(now - seconds_to_ms(*cfg_.retention_horizon_s));
    }

    const Key key{valid.collaborator, valid.task_type};
    bool extract_now = true;
    if (cfg_.extract_every > 1) {
        std::lock_guard lock(keys_mu_);
        auto& n = pending_[key];
        ++n;
        extract_now = n >= cfg_.extract_every;
        if (extract_now) pending_.erase(key);
    }
    if (!extract_now) {
        if (auto existing = memory_.tree.find(key.second, key.first)) return *existing;
        // First sighting still gets a leaf so the device is visible in the tree.
    }
    return extract_and_store(key, now);
}

std::size_t Teacher::flush_pending(Timestamp now) {
    std::map<Key, std::size_t> pending;
    {
        std::lock_guard lock(keys_mu_);
        pending.swap(pending_);
    }
    for (const auto& [key, _] : pending) extract_and_store(key, now);
    return pending.size();
}

RequestTrace Teacher::trace_task_request(const Task& raw, Timestamp now) {
    const auto task = validate_task(raw);
    RequestTrace trace;

    trace.retrieved = memory_.tree.by_task_type(task.task_type);
    std::erase_if(trace.retrieved, [&](const TrustSemantics& ts) { return ts.device == task.owner; });

    std::vector<DeviceId> devices;
    devices.reserve(trace.retrieved.size());
    for (const auto& ts : trace.retrieved) devices.push_back(ts.device);
    trace.resources = memory_.resources.get(devices);

    // Re-align profiles with the retrieved list; devices without a profile fail freshness.
    std::map<DeviceId, const ResourceProfile*> by_device;
    for (const auto& p : trace.resources.profiles) by_device.emplace(p.device, &p);
    trace.verdicts.reserve(devices.size());
    for (const auto& d : devices) {
        auto it = by_device.find(d);
        trace.verdicts.push_back(it == by_device.end() ? missing_profile_verdict(task, d)
                                                       : evaluate_chain(task, *it->second, now, cfg_.match));
    }

    trace.bundle.task_id = task.task_id;
    trace.bundle.generated_at = now;
    for (std::size_t i = 0; i < trace.retrieved.size(); ++i) {
        const auto& ts = trace.retrieved[i];
        const auto& v = trace.verdicts[i];
        if (ts.state == TrustState::trusted && v.matched) {
            trace.bundle.candidates.push_back(Candidate{ts, true, v.stages});
        }
    }
    ++requests_served_;
    return trace;
}

CandidateBundle Teacher::handle_task_request(const Task& task, Timestamp now) {
    return trace_task_request(task, now).bundle;
}

TeacherStats Teacher::stats() const {
    TeacherStats s;
    s.resource_reports = resource_reports_.load();
    s.records_ingested = records_ingested_.load();
    s.extractions = extractions_.load();
    s.requests_served = requests_served_.load();
    return s;
}

} // namespace twotsd
