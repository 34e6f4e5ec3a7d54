#pragma once

#include "twotsd/matching.hpp"
#include "twotsd/semantics.hpp"
#include "twotsd/student.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace twotsd {

struct TaskTemplate {
    TaskType type;
    double size_mb = 0.0;
    double density_cpb = 0.0;
    double deadline_s = 0.0;
    double weight = 1.0;
};

struct ResourceRanges {
    double cpu_min_cps = 3e9;
    double cpu_max_cps = 2e10;
    double storage_min_mb = 20.0;
    double storage_max_mb = 2000.0;
    double bandwidth_min_mbps = 20.0;
    double bandwidth_max_mbps = 200.0;
};

// Simulated cost model, seconds.
struct LatencyModel {
    double msg_s = 0.05;         // one message between two parties
    double rec_s = 0.002;        // shipping + processing one history record
    double engine_s = 0.5;       // one server-side matching engine call
    double lookup_s = 0.01;      // tree + resource retrieval, fixed part
    double per_item_s = 1e-4;    // retrieval, per device under the task-type node
    double local_eval_s = 0.01;  // baseline: local evaluation of one candidate
};

struct DriftSettings {
    double share = 0.5;            // fraction of the unreliable population that drifts
    double loss_growth = 4.0;      // relative loss increase over the warm-up span
    double reliability_drop = 0.3; // absolute reliability loss over the warm-up span
};

struct BaselineSettings {
    std::size_t window_k = 20;
    // Non-drifting unreliable devices hand out only their satisfied records.
    bool selective_disclosure = true;
};

struct Sweep {
    std::string axis; // "device_count" or "unreliable_fraction"
    std::vector<double> values;
};

struct ScenarioConfig {
    std::size_t device_count = 20;
    std::size_t warmup_per_device = 60;
    std::size_t task_count = 200;
    std::vector<TaskTemplate> task_types;
    double unreliable_fraction = 0.3;
    double reliable_level = 0.95;
    double unreliable_level = 0.4;
    DriftSettings drift;
    ResourceRanges resources;
    LatencyModel latency;
    double event_interval_s = 1.0;
    double report_interval_s = 60.0;
    double metric_jitter = 0.02;
    std::vector<std::uint64_t> seeds = {1};
    bool parallel_seeds = true;
    SemanticsConfig semantics;
    MatchConfig match;
    DecisionPolicy policy;
    BaselineSettings baseline;
    std::string engine = "deterministic";
    nlohmann::json remote = nlohmann::json::object();
    std::optional<Sweep> sweep;

    void validate() const;
};

std::vector<TaskTemplate> default_task_templates();

nlohmann::json to_json_config(const ScenarioConfig& cfg);
// Strict: unknown keys and wrong types raise Error(config).
ScenarioConfig config_from_json(const nlohmann::json& j);

// "a.b=value"; value parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Defaults <- file contents <- overrides, then validated.
ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
ScenarioConfig load_config_text(const std::string& text, const std::vector<std::string>& overrides = {});

// Canonical form used for hashing and manifests.
std::string canonical_config(const ScenarioConfig& cfg);
std::string fnv1a64_hex(const std::string& text);

} // namespace twotsd
