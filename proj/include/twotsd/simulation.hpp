#pragma once

#include "twotsd/config.hpp"
#include "twotsd/semantics.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace twotsd {

enum class DeviceClass { reliable, drifting, unreliable };

std::string_view to_string(DeviceClass c) noexcept;

struct DriftRates {
    double reliability_per_s = 0.0; // subtracted, floored at the unreliable level
    double loss_rel_per_s = 0.0;    // relative loss growth
};

struct GroundTruthDevice {
    DeviceId device;
    DeviceClass cls = DeviceClass::reliable;
    ResourceProfile true_profile;
    std::map<TaskType, double> reliability; // at t = 0
    std::optional<DriftRates> drift;
    double base_loss = 0.01;
    double floor = 0.0;
    bool selective_disclosure = false;

    [[nodiscard]] double reliability_at(const TaskType& tt, Timestamp t) const;
    [[nodiscard]] double loss_at(Timestamp t) const;
};

enum class Method { twotsd, baseline };

std::string_view to_string(Method m) noexcept;

struct TaskMetrics {
    std::uint64_t seed = 0;
    Method method = Method::twotsd;
    std::size_t index = 0;
    std::string task_id;
    TaskType task_type;
    DeviceId owner;
    std::optional<DeviceId> selected;
    std::size_t bundle_size = 0;
    double evaluation_time_sim_s = 0.0;
    std::size_t data_collection_events = 0;
    std::optional<bool> correct; // empty = excluded from the accuracy denominator
};

struct MethodSummary {
    std::size_t tasks = 0;
    std::size_t scored = 0;
    std::size_t correct = 0;
    double total_evaluation_time_sim_s = 0.0;
    std::size_t data_collection_events = 0;
    std::size_t messages = 0;

    [[nodiscard]] std::optional<double> selection_accuracy() const;
    [[nodiscard]] double mean_evaluation_time_sim_s() const;
    [[nodiscard]] double mean_data_collection_events() const;
    void add(const MethodSummary& other);
};

struct SeedSummary {
    std::uint64_t seed = 0;
    std::map<Method, MethodSummary> methods;
    std::size_t collaborations = 0;    // warm-up + executed 2TSD selections
    std::size_t records_ingested = 0;  // as counted by the teacher
};

struct MetricsReport {
    std::vector<TaskMetrics> tasks; // seed order, then task order, then method
    std::vector<SeedSummary> seeds;

    [[nodiscard]] std::map<Method, MethodSummary> overall() const;
};

using EngineFactory = std::function<std::shared_ptr<SemanticsEngine>(const ScenarioConfig&)>;

struct RunOptions {
    // Teacher-side engine; deterministic when empty. The baseline always uses
    // the deterministic engine.
    EngineFactory engine;
    bool run_twotsd = true;
    bool run_baseline = true;
};

std::vector<GroundTruthDevice> make_population(const ScenarioConfig& cfg, std::uint64_t seed);

// Both methods on identical workloads, one pass per configured seed.
MetricsReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});
MetricsReport run_baseline(const ScenarioConfig& cfg);

bool accuracy_of(const GroundTruthDevice& selected, const Task& task, Timestamp now,
                 const ScenarioConfig& cfg);

// Correct iff a correct option was chosen; empty when no option could be correct.
std::optional<bool> score_selection(const std::optional<DeviceId>& selected, const Task& task,
                                    const std::vector<GroundTruthDevice>& population, Timestamp now,
                                    const ScenarioConfig& cfg);

void write_tasks_csv(std::ostream& out, const MetricsReport& report);
void write_aggregate_csv(std::ostream& out, const MetricsReport& report);

inline constexpr const char* tasks_csv_name = "metrics_tasks.csv";
inline constexpr const char* aggregate_csv_name = "metrics_aggregate.csv";

} // namespace twotsd
