#include "twotsd/student.hpp"

#include "twotsd/error.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace twotsd {

std::string_view to_string(PolicyKind k) noexcept {
    switch (k) {
    case PolicyKind::trend_averse: return "trend_averse";
    case PolicyKind::first_match: return "first_match";
    case PolicyKind::random_seeded: return "random_seeded";
    }
    return "trend_averse";
}

PolicyKind parse_policy_kind(std::string_view s) {
    for (auto k : {PolicyKind::trend_averse, PolicyKind::first_match, PolicyKind::random_seeded}) {
        if (to_string(k) == s) return k;
    }
    throw Error(Errc::config, "unknown policy kind '" + std::string(s) + "'");
}

void DecisionPolicy::validate() const {
    if (adverse.size() != std::size(all_metrics)) {
        throw Error(Errc::config, "policy.adverse must cover exactly the four metrics");
    }
    for (auto m : all_metrics) {
        if (!adverse.contains(m)) {
            throw Error(Errc::config, "policy.adverse is missing " + std::string(to_string(m)));
        }
    }
}

std::size_t adverse_count(const TrustSemantics& ts, const DecisionPolicy& policy) {
    std::size_t n = 0;
    for (const auto& [metric, direction] : policy.adverse) {
        if (direction != Trend::normal && ts.trend(metric) == direction) ++n;
    }
    return n;
}

namespace {

// FNV-1a; mixes the task id into the seed so one student varies across tasks.
std::uint64_t mix(std::uint64_t seed, const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::optional<DeviceId> decide(const CandidateBundle& bundle, const DecisionPolicy& policy) {
    if (bundle.candidates.empty()) return std::nullopt;

    std::vector<const Candidate*> sorted;
    sorted.reserve(bundle.candidates.size());
    for (const auto& c : bundle.candidates) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](const Candidate* a, const Candidate* b) {
        return a->semantics.device < b->semantics.device;
    });

    switch (policy.kind) {
    case PolicyKind::first_match:
        return sorted.front()->semantics.device;

    case PolicyKind::random_seeded: {
        std::mt19937_64 rng(mix(policy.seed, bundle.task_id));
        return sorted[rng() % sorted.size()]->semantics.device;
    }

    case PolicyKind::trend_averse: {
        const Candidate* best = nullptr;
        std::size_t best_adverse = 0;
        for (const auto* c : sorted) {
            const auto n = adverse_count(c->semantics, policy);
            if (best == nullptr || n < best_adverse) {
                best = c;
                best_adverse = n;
            }
        }
        if (best_adverse > 0 && policy.strict_trends) return std::nullopt;
        return best->semantics.device;
    }
    }
    return std::nullopt;
}

} // namespace twotsd
