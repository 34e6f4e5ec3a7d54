#pragma once

#include "twotsd/bundle.hpp"
#include "twotsd/matching.hpp"
#include "twotsd/memory.hpp"
#include "twotsd/semantics.hpp"

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

namespace twotsd {

struct TeacherConfig {
    std::size_t window_k = 20; // last-K history window fed to the engine
    MatchConfig match;
    // Extract on every n-th record per (device, task type); 1 = every record.
    std::size_t extract_every = 1;
    std::optional<double> retention_horizon_s;
    void validate() const;
};

struct TeacherStats {
    std::size_t resource_reports = 0;
    std::size_t records_ingested = 0;
    std::size_t extractions = 0;
    std::size_t requests_served = 0;
    // Operations that had to reach out to a device while serving. The teacher
    // has no device channel, so this stays zero; it exists for instrumentation.
    std::size_t device_contacts = 0;
};

// Intermediate products of one task request, in pipeline order.
struct RequestTrace {
    std::vector<TrustSemantics> retrieved;  // task-type subtree, owner removed
    ResourceLookup resources;
    std::vector<MatchVerdict> verdicts;     // one per retrieved device, device order
    CandidateBundle bundle;
};

class Teacher {
public:
    Teacher(MemoryModule& memory, std::shared_ptr<SemanticsEngine> engine, TeacherConfig cfg = {});

    // Throws Error(stale_update) on an out-of-order report.
    void handle_resource_report(const ResourceProfile& profile);

    // Appends the record, re-extracts the (collaborator, task type) semantics
    // from the configured window, and stores them in the tree.
    TrustSemantics handle_performance_record(const PerformanceRecord& rec, Timestamp now);

    CandidateBundle handle_task_request(const Task& task, Timestamp now);
    RequestTrace trace_task_request(const Task& task, Timestamp now);

    // Forces extraction for keys skipped under extract_every > 1. Returns count.
    std::size_t flush_pending(Timestamp now);

    [[nodiscard]] TeacherStats stats() const;
    [[nodiscard]] const TeacherConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] MemoryModule& memory() noexcept { return memory_; }

private:
    using Key = std::pair<DeviceId, TaskType>;

    TrustSemantics extract_and_store(const Key& key, Timestamp now);
    std::mutex& key_mutex(const Key& key);

    MemoryModule& memory_;
    std::shared_ptr<SemanticsEngine> engine_;
    TeacherConfig cfg_;

    std::mutex keys_mu_;
    std::map<Key, std::unique_ptr<std::mutex>> key_locks_;
    std::map<Key, std::size_t> pending_;

    std::atomic<std::size_t> resource_reports_{0};
    std::atomic<std::size_t> records_ingested_{0};
    std::atomic<std::size_t> extractions_{0};
    std::atomic<std::size_t> requests_served_{0};
};

} // namespace twotsd
