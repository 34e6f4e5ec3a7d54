#pragma once

#include "twotsd/domain.hpp"

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace twotsd {

struct TrendConfig {
    std::size_t n_min = 5;
    double rel_slope_threshold = 0.10;
    double abs_floor = 1e-6;
    // Optional per-metric replacement for abs_floor.
    std::map<Metric, double> metric_floors;

    [[nodiscard]] double floor_for(Metric m) const;
    void validate() const;
};

struct StateConfig {
    std::size_t n_min = 5;
    double trust_threshold = 0.8; // on the satisfied fraction
    void validate() const;
};

struct SemanticsConfig {
    TrendConfig trend;
    StateConfig state;
    std::size_t window_k = 20; // history window fed to the engine (last-K records)
    void validate() const;
};

struct Sample {
    Timestamp at = 0;
    double value = 0.0;
};

// Normalized least-squares slope over (index, value) pairs:
// b * (n - 1) / max(mean, abs_floor). Requires n >= 2.
double normalized_slope(std::span<const Sample> series, double abs_floor);

// Throws Error(unsorted_input) when timestamps decrease anywhere.
Trend detect_trend(std::span<const Sample> series, const TrendConfig& cfg);

// Throws Error(heterogeneous_input) when records differ in collaborator or task type.
TrustState aggregate_state(std::span<const PerformanceRecord> records, const StateConfig& cfg);

std::vector<Sample> metric_series(std::span<const PerformanceRecord> records, Metric m);

TrustSemantics extract_semantics(const DeviceId& device, const TaskType& task_type,
                                 std::span<const PerformanceRecord> records,
                                 const SemanticsConfig& cfg, Timestamp extracted_at);

// Pluggable (device, task_type, records) -> TrustSemantics capability.
class SemanticsEngine {
public:
    virtual ~SemanticsEngine() = default;

    [[nodiscard]] virtual std::string name() const = 0;

    virtual TrustSemantics extract(const DeviceId& device, const TaskType& task_type,
                                   std::span<const PerformanceRecord> records,
                                   Timestamp extracted_at) = 0;
};

class DeterministicEngine final : public SemanticsEngine {
public:
    explicit DeterministicEngine(SemanticsConfig cfg = {});

    [[nodiscard]] std::string name() const override { return "deterministic"; }

    TrustSemantics extract(const DeviceId& device, const TaskType& task_type,
                           std::span<const PerformanceRecord> records,
                           Timestamp extracted_at) override;

    [[nodiscard]] const SemanticsConfig& config() const noexcept { return cfg_; }

private:
    SemanticsConfig cfg_;
};

} // namespace twotsd
