#pragma once

#include "twotsd/bundle.hpp"

#include <cstdint>
#include <map>
#include <optional>

namespace twotsd {

enum class PolicyKind { trend_averse, first_match, random_seeded };

std::string_view to_string(PolicyKind k) noexcept;
PolicyKind parse_policy_kind(std::string_view s);

struct DecisionPolicy {
    PolicyKind kind = PolicyKind::trend_averse;
    // Trend direction that counts against a candidate, per metric.
    std::map<Metric, Trend> adverse = {
        {Metric::loss_rate, Trend::increasing},
        {Metric::throughput, Trend::decreasing},
        {Metric::accuracy, Trend::decreasing},
        {Metric::proc_speed, Trend::decreasing},
    };
    std::uint64_t seed = 0;
    // When every candidate is adverse: false = take the least adverse, true = none.
    bool strict_trends = false;

    void validate() const;
};

std::size_t adverse_count(const TrustSemantics& ts, const DecisionPolicy& policy);

// Pure function of (bundle, policy); independent of candidate order.
std::optional<DeviceId> decide(const CandidateBundle& bundle, const DecisionPolicy& policy);

} // namespace twotsd
