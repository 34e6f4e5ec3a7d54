#include "twotsd/domain.hpp"

#include "twotsd/error.hpp"

#include <charconv>
#include <cmath>

namespace twotsd {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_field: return "invalid_field";
    case Errc::self_collaboration: return "self_collaboration";
    case Errc::out_of_range: return "out_of_range";
    case Errc::stale_update: return "stale_update";
    case Errc::duplicate_record: return "duplicate_record";
    case Errc::unsorted_input: return "unsorted_input";
    case Errc::heterogeneous_input: return "heterogeneous_input";
    case Errc::malformed: return "malformed";
    case Errc::unknown_kind: return "unknown_kind";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::timeout: return "timeout";
    case Errc::auth: return "auth";
    case Errc::rate_limit: return "rate_limit";
    case Errc::schema_violation: return "schema_violation";
    case Errc::transport: return "transport";
    case Errc::config: return "config";
    case Errc::io: return "io";
    }
    return "unknown";
}

DeviceId::DeviceId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) {
        throw Error(Errc::invalid_field, "device id must be nonempty");
    }
}

TaskType::TaskType(std::string name) : name_(std::move(name)) {
    if (name_.empty()) {
        throw Error(Errc::invalid_field, "task_type must be nonempty");
    }
}

Trend TrustSemantics::trend(Metric m) const noexcept {
    switch (m) {
    case Metric::throughput: return comm.throughput;
    case Metric::loss_rate: return comm.loss_rate;
    case Metric::accuracy: return comp.accuracy;
    case Metric::proc_speed: return comp.proc_speed;
    }
    return Trend::normal;
}

void TrustSemantics::set_trend(Metric m, Trend t) noexcept {
    switch (m) {
    case Metric::throughput: comm.throughput = t; break;
    case Metric::loss_rate: comm.loss_rate = t; break;
    case Metric::accuracy: comp.accuracy = t; break;
    case Metric::proc_speed: comp.proc_speed = t; break;
    }
}

std::string_view to_string(Verdict v) noexcept {
    return v == Verdict::satisfied ? "satisfied" : "unsatisfied";
}

std::string_view to_string(Trend t) noexcept {
    switch (t) {
    case Trend::increasing: return "increasing";
    case Trend::decreasing: return "decreasing";
    case Trend::normal: return "normal";
    }
    return "normal";
}

std::string_view to_string(TrustState s) noexcept {
    switch (s) {
    case TrustState::trusted: return "trusted";
    case TrustState::untrusted: return "untrusted";
    case TrustState::insufficient_data: return "insufficient_data";
    }
    return "insufficient_data";
}

std::string_view to_string(Metric m) noexcept {
    switch (m) {
    case Metric::throughput: return "throughput";
    case Metric::loss_rate: return "loss_rate";
    case Metric::accuracy: return "accuracy";
    case Metric::proc_speed: return "proc_speed";
    }
    return "throughput";
}

Verdict parse_verdict(std::string_view s) {
    if (s == "satisfied") return Verdict::satisfied;
    if (s == "unsatisfied") return Verdict::unsatisfied;
    throw Error(Errc::invalid_field, "verdict: unknown value '" + std::string(s) + "'");
}

Trend parse_trend(std::string_view s) {
    if (s == "increasing") return Trend::increasing;
    if (s == "decreasing") return Trend::decreasing;
    if (s == "normal") return Trend::normal;
    throw Error(Errc::invalid_field, "trend: unknown value '" + std::string(s) + "'");
}

TrustState parse_trust_state(std::string_view s) {
    if (s == "trusted") return TrustState::trusted;
    if (s == "untrusted") return TrustState::untrusted;
    if (s == "insufficient_data") return TrustState::insufficient_data;
    throw Error(Errc::invalid_field, "state: unknown value '" + std::string(s) + "'");
}

Metric parse_metric(std::string_view s) {
    if (s == "throughput") return Metric::throughput;
    if (s == "loss_rate") return Metric::loss_rate;
    if (s == "accuracy") return Metric::accuracy;
    if (s == "proc_speed") return Metric::proc_speed;
    throw Error(Errc::invalid_field, "metric: unknown value '" + std::string(s) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

void require_positive(double v, const char* field) {
    if (!std::isfinite(v) || v <= 0.0) {
        throw Error(Errc::invalid_field, std::string(field) + " must be > 0");
    }
}

void require_nonnegative(double v, const char* field) {
    if (!std::isfinite(v) || v < 0.0) {
        throw Error(Errc::out_of_range, std::string(field) + " must be >= 0");
    }
}

void require_unit_interval(double v, const char* field) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw Error(Errc::out_of_range, std::string(field) + " must be in [0,1]");
    }
}

} // namespace

double parse_fraction(std::string_view text) {
    auto s = trim(text);
    bool percent = false;
    if (!s.empty() && s.back() == '%') {
        percent = true;
        s = trim(s.substr(0, s.size() - 1));
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw Error(Errc::invalid_field, "not a fraction: '" + std::string(text) + "'");
    }
    return percent ? value / 100.0 : value;
}

Task validate_task(Task raw) {
    if (raw.task_id.empty()) throw Error(Errc::invalid_field, "task_id must be nonempty");
    if (raw.owner.empty()) throw Error(Errc::invalid_field, "owner must be nonempty");
    if (raw.task_type.empty()) throw Error(Errc::invalid_field, "task_type must be nonempty");
    require_positive(raw.size_mb, "size_mb");
    require_positive(raw.density_cpb, "density_cpb");
    require_positive(raw.deadline_s, "deadline_s");
    return raw;
}

PerformanceRecord validate_record(PerformanceRecord raw) {
    if (raw.owner.empty()) throw Error(Errc::invalid_field, "owner must be nonempty");
    if (raw.collaborator.empty()) throw Error(Errc::invalid_field, "collaborator must be nonempty");
    if (raw.task_type.empty()) throw Error(Errc::invalid_field, "task_type must be nonempty");
    if (raw.owner == raw.collaborator) {
        throw Error(Errc::self_collaboration, "owner and collaborator are both " + raw.owner.str());
    }
    require_nonnegative(raw.throughput_mbps, "throughput_mbps");
    require_nonnegative(raw.proc_speed_mbps, "proc_speed_mbps");
    require_unit_interval(raw.loss_rate, "loss_rate");
    require_unit_interval(raw.accuracy, "accuracy");
    return raw;
}

ResourceProfile validate_profile(ResourceProfile raw) {
    if (raw.device.empty()) throw Error(Errc::invalid_field, "device must be nonempty");
    require_positive(raw.cpu_cps, "cpu_cps");
    require_nonnegative(raw.storage_mb, "storage_mb");
    require_positive(raw.bandwidth_mbps, "bandwidth_mbps");
    return raw;
}

TrustSemantics validate_semantics(TrustSemantics raw) {
    if (raw.device.empty()) throw Error(Errc::invalid_field, "device must be nonempty");
    if (raw.task_type.empty()) throw Error(Errc::invalid_field, "task_type must be nonempty");
    if (raw.state == TrustState::insufficient_data) {
        for (auto m : all_metrics) {
            if (raw.trend(m) != Trend::normal) {
                throw Error(Errc::invalid_field,
                            "insufficient_data semantics must have all trends normal");
            }
        }
    }
    if (raw.window && raw.window->from > raw.window->to) {
        throw Error(Errc::invalid_field, "window.from must not exceed window.to");
    }
    if (raw.record_count == 0 && raw.window) {
        throw Error(Errc::invalid_field, "window must be empty when record_count is 0");
    }
    return raw;
}

} // namespace twotsd
