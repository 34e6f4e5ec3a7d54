#pragma once

// nlohmann::json conversions for every value that crosses a file or wire
// boundary. Decoding validates domain invariants and throws twotsd::Error.

#include "twotsd/bundle.hpp"
#include "twotsd/domain.hpp"
#include "twotsd/matching.hpp"

#include <nlohmann/json.hpp>

namespace twotsd {

using json = nlohmann::json;

void to_json(json& j, const DeviceId& v);
void from_json(const json& j, DeviceId& v);
void to_json(json& j, const TaskType& v);
void from_json(const json& j, TaskType& v);

void to_json(json& j, const Task& v);
void from_json(const json& j, Task& v);
void to_json(json& j, const ResourceProfile& v);
void from_json(const json& j, ResourceProfile& v);
void to_json(json& j, const PerformanceRecord& v);
void from_json(const json& j, PerformanceRecord& v);
void to_json(json& j, const TimeWindow& v);
void from_json(const json& j, TimeWindow& v);
void to_json(json& j, const TrustSemantics& v);
void from_json(const json& j, TrustSemantics& v);

void to_json(json& j, const StageResult& v);
void from_json(const json& j, StageResult& v);
void to_json(json& j, const MatchVerdict& v);
void from_json(const json& j, MatchVerdict& v);
void to_json(json& j, const Candidate& v);
void from_json(const json& j, Candidate& v);
void to_json(json& j, const CandidateBundle& v);
void from_json(const json& j, CandidateBundle& v);

// Reads a fraction stored either as a number (0.01) or a percent string ("1%").
double fraction_from_json(const json& j, const char* field);

} // namespace twotsd
