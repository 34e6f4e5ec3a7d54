#pragma once

#include "twotsd/domain.hpp"

#include <span>
#include <string>
#include <vector>

namespace twotsd {

enum class Stage { freshness, storage, communication, computation, deadline };

std::string_view to_string(Stage s) noexcept;
Stage parse_stage(std::string_view s);

struct StageResult {
    Stage stage = Stage::freshness;
    bool passed = false;
    double carry = 0.0; // accumulated elapsed-time estimate, seconds
    std::string note;
    bool operator==(const StageResult&) const = default;
};

struct MatchVerdict {
    DeviceId device;
    std::string task_id;
    std::vector<StageResult> stages; // stops at the first failed stage
    bool matched = false;
    bool operator==(const MatchVerdict&) const = default;
};

struct MatchConfig {
    double staleness_s = 300.0;
    bool include_result_return = false;
    double result_size_factor = 0.0; // result size as a fraction of the task size
    void validate() const;
};

// Upload time of the task (plus result return when enabled), seconds.
double transfer_time_s(const Task& task, const ResourceProfile& profile, const MatchConfig& cfg);
// Execution time on the collaborator, seconds.
double compute_time_s(const Task& task, const ResourceProfile& profile);

// freshness -> storage -> communication -> computation -> deadline
MatchVerdict evaluate_chain(const Task& task, const ResourceProfile& profile, Timestamp now,
                            const MatchConfig& cfg);

// Verdict for a device without any stored resource profile: fails freshness.
MatchVerdict missing_profile_verdict(const Task& task, const DeviceId& device);

std::vector<MatchVerdict> match_candidates(const Task& task, std::span<const ResourceProfile> profiles,
                                           Timestamp now, const MatchConfig& cfg);

} // namespace twotsd
