#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace twotsd {

// Integer milliseconds on a scenario-local (simulation) or wall clock (service).
using Timestamp = std::int64_t;

constexpr Timestamp seconds_to_ms(double s) { return static_cast<Timestamp>(s * 1000.0); }

class DeviceId {
public:
    DeviceId() = default;
    explicit DeviceId(std::string value);

    [[nodiscard]] const std::string& str() const noexcept { return value_; }
    [[nodiscard]] bool empty() const noexcept { return value_.empty(); }

    auto operator<=>(const DeviceId&) const = default;

private:
    std::string value_;
};

class TaskType {
public:
    TaskType() = default;
    explicit TaskType(std::string name);

    [[nodiscard]] const std::string& str() const noexcept { return name_; }
    [[nodiscard]] bool empty() const noexcept { return name_.empty(); }

    auto operator<=>(const TaskType&) const = default;

private:
    std::string name_;
};

namespace task_types {
inline const TaskType face_recognition{"face_recognition"};
inline const TaskType video_transcoding{"video_transcoding"};
inline const TaskType text_word_count{"text_word_count"};
} // namespace task_types

// Opaque extension fields ("...") carried through but ignored by the engines.
using Extensions = std::map<std::string, std::string>;

struct Task {
    std::string task_id;
    DeviceId owner;
    TaskType task_type;
    double size_mb = 0.0;
    double density_cpb = 0.0;
    double deadline_s = 0.0;
    Extensions extra;

    bool operator==(const Task&) const = default;
};

struct ResourceProfile {
    DeviceId device;
    double cpu_cps = 0.0; // effective cycles/s, aggregate over cores
    double storage_mb = 0.0;
    double bandwidth_mbps = 0.0;
    Timestamp updated_at = 0;

    bool operator==(const ResourceProfile&) const = default;
};

enum class Verdict { satisfied, unsatisfied };

struct PerformanceRecord {
    std::string record_id; // submitter-chosen token, may be empty
    DeviceId owner;
    DeviceId collaborator;
    TaskType task_type;
    Timestamp at = 0;
    double throughput_mbps = 0.0;
    double loss_rate = 0.0; // fraction in [0,1]
    double proc_speed_mbps = 0.0; // MB/second
    double accuracy = 0.0; // fraction in [0,1]
    Verdict verdict = Verdict::satisfied;
    Extensions extra;

    bool operator==(const PerformanceRecord&) const = default;
};

enum class Trend { increasing, decreasing, normal };
enum class TrustState { trusted, untrusted, insufficient_data };
enum class Metric { throughput, loss_rate, accuracy, proc_speed };

inline constexpr Metric all_metrics[] = {Metric::throughput, Metric::loss_rate, Metric::accuracy,
                                         Metric::proc_speed};

struct CommTrends {
    Trend throughput = Trend::normal;
    Trend loss_rate = Trend::normal;
    bool operator==(const CommTrends&) const = default;
};

struct CompTrends {
    Trend accuracy = Trend::normal;
    Trend proc_speed = Trend::normal;
    bool operator==(const CompTrends&) const = default;
};

struct TimeWindow {
    Timestamp from = 0;
    Timestamp to = 0;
    bool operator==(const TimeWindow&) const = default;
};

struct TrustSemantics {
    DeviceId device;
    TaskType task_type;
    TrustState state = TrustState::insufficient_data;
    CommTrends comm;
    CompTrends comp;
    std::optional<TimeWindow> window; // empty when no records
    Timestamp extracted_at = 0;
    std::size_t record_count = 0;
    std::string engine = "deterministic"; // provenance of the extraction

    [[nodiscard]] Trend trend(Metric m) const noexcept;
    void set_trend(Metric m, Trend t) noexcept;

    bool operator==(const TrustSemantics&) const = default;
};

// Decimal units: 1 MB = 10^6 bytes, 1 Mbps = 10^6 bit/s.
constexpr double size_bits(double size_mb) { return size_mb * 8.0 * 1e6; }

std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(Trend t) noexcept;
std::string_view to_string(TrustState s) noexcept;
std::string_view to_string(Metric m) noexcept;

// Parsers throw Error(invalid_field) on unknown spellings.
Verdict parse_verdict(std::string_view s);
Trend parse_trend(std::string_view s);
TrustState parse_trust_state(std::string_view s);
Metric parse_metric(std::string_view s);

// Accepts "1%", "1 %", or a plain decimal such as "0.01".
double parse_fraction(std::string_view text);

Task validate_task(Task raw);
PerformanceRecord validate_record(PerformanceRecord raw);
ResourceProfile validate_profile(ResourceProfile raw);
TrustSemantics validate_semantics(TrustSemantics raw);

} // namespace twotsd
