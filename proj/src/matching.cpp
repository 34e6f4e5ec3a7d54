#include "twotsd/matching.hpp"

#include "twotsd/error.hpp"

#include <cmath>
#include <cstdio>

namespace twotsd {

std::string_view to_string(Stage s) noexcept {
    switch (s) {
    case Stage::freshness: return "freshness";
    case Stage::storage: return "storage";
    case Stage::communication: return "communication";
    case Stage::computation: return "computation";
    case Stage::deadline: return "deadline";
    }
    return "freshness";
}

Stage parse_stage(std::string_view s) {
    for (auto st : {Stage::freshness, Stage::storage, Stage::communication, Stage::computation,
                    Stage::deadline}) {
        if (to_string(st) == s) return st;
    }
    throw Error(Errc::invalid_field, "stage: unknown value '" + std::string(s) + "'");
}

void MatchConfig::validate() const {
    if (!(staleness_s >= 0.0)) throw Error(Errc::config, "match.staleness_s must be >= 0");
    if (!(result_size_factor >= 0.0)) throw Error(Errc::config, "match.result_size_factor must be >= 0");
}

double transfer_time_s(const Task& task, const ResourceProfile& profile, const MatchConfig& cfg) {
    const double link_bps = profile.bandwidth_mbps * 1e6;
    double t = size_bits(task.size_mb) / link_bps;
    if (cfg.include_result_return) {
        t += size_bits(task.size_mb * cfg.result_size_factor) / link_bps;
    }
    return t;
}

double compute_time_s(const Task& task, const ResourceProfile& profile) {
    return size_bits(task.size_mb) * task.density_cpb / profile.cpu_cps;
}

namespace {

std::string fmt(const char* pattern, double a, double b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

} // namespace

MatchVerdict evaluate_chain(const Task& task, const ResourceProfile& profile, Timestamp now,
                            const MatchConfig& cfg) {
    MatchVerdict v;
    v.device = profile.device;
    v.task_id = task.task_id;

    auto push = [&](Stage stage, bool passed, double carry, std::string note) {
        v.stages.push_back({stage, passed, carry, std::move(note)});
        return passed;
    };

    // A report from the future counts as age zero.
    const double age_s = std::max<double>(0.0, static_cast<double>(now - profile.updated_at) / 1000.0);
    if (!push(Stage::freshness, age_s <= cfg.staleness_s, 0.0,
              fmt("age %.3f s, bound %.3f s", age_s, cfg.staleness_s))) {
        return v;
    }

    if (!push(Stage::storage, profile.storage_mb >= task.size_mb, 0.0,
              fmt("storage %.3f MB, need %.3f MB", profile.storage_mb, task.size_mb))) {
        return v;
    }

    double carry = transfer_time_s(task, profile, cfg);
    push(Stage::communication, true, carry, fmt("t_tx %.6f s over %.3f Mbps", carry, profile.bandwidth_mbps));

    const double t_cp = compute_time_s(task, profile);
    carry += t_cp;
    push(Stage::computation, true, carry, fmt("t_cp %.6f s at %.6g cps", t_cp, profile.cpu_cps));

    v.matched = push(Stage::deadline, carry <= task.deadline_s, carry,
                     fmt("elapsed %.6f s, deadline %.6f s", carry, task.deadline_s));
    return v;
}

MatchVerdict missing_profile_verdict(const Task& task, const DeviceId& device) {
    MatchVerdict v;
    v.device = device;
    v.task_id = task.task_id;
    v.stages.push_back({Stage::freshness, false, 0.0, "no resource profile"});
    return v;
}

std::vector<MatchVerdict> match_candidates(const Task& task, std::span<const ResourceProfile> profiles,
                                           Timestamp now, const MatchConfig& cfg) {
    std::vector<MatchVerdict> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) out.push_back(evaluate_chain(task, p, now, cfg));
    return out;
}

} // namespace twotsd
