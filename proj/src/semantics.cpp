#include "twotsd/semantics.hpp"

#include "twotsd/error.hpp"

#include <algorithm>
#include <cmath>

namespace twotsd {

double TrendConfig::floor_for(Metric m) const {
    auto it = metric_floors.find(m);
    return it == metric_floors.end() ? abs_floor : it->second;
}

void TrendConfig::validate() const {
    if (n_min < 2) throw Error(Errc::config, "trend.n_min must be >= 2");
    if (!(rel_slope_threshold > 0.0)) throw Error(Errc::config, "trend.rel_slope_threshold must be > 0");
    if (!(abs_floor >= 0.0)) throw Error(Errc::config, "trend.abs_floor must be >= 0");
    for (const auto& [m, f] : metric_floors) {
        if (!(f >= 0.0)) {
            throw Error(Errc::config, "trend.metric_floors." + std::string(to_string(m)) + " must be >= 0");
        }
    }
}

void StateConfig::validate() const {
    if (n_min < 1) throw Error(Errc::config, "state.n_min must be >= 1");
    if (!(trust_threshold > 0.0 && trust_threshold <= 1.0)) {
        throw Error(Errc::config, "state.trust_threshold must be in (0,1]");
    }
}

void SemanticsConfig::validate() const {
    trend.validate();
    state.validate();
    if (window_k < 1) throw Error(Errc::config, "window_k must be >= 1");
}

double normalized_slope(std::span<const Sample> series, double abs_floor) {
    const auto n = series.size();
    if (n < 2) return 0.0;
    // Centered x avoids cancellation for long series.
    const double x_mean = static_cast<double>(n - 1) / 2.0;
    double y_mean = 0.0;
    for (const auto& s : series) y_mean += s.value;
    y_mean /= static_cast<double>(n);

    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - x_mean;
        sxy += dx * (series[i].value - y_mean);
        sxx += dx * dx;
    }
    const double slope = sxy / sxx;
    return slope * static_cast<double>(n - 1) / std::max(y_mean, abs_floor);
}

Trend detect_trend(std::span<const Sample> series, const TrendConfig& cfg) {
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (series[i].at < series[i - 1].at) {
            throw Error(Errc::unsorted_input, "series timestamps must be ascending");
        }
    }
    if (series.size() < cfg.n_min) return Trend::normal;

    const double s = normalized_slope(series, cfg.abs_floor);
    if (s > cfg.rel_slope_threshold) return Trend::increasing;
    if (s < -cfg.rel_slope_threshold) return Trend::decreasing;
    return Trend::normal;
}

TrustState aggregate_state(std::span<const PerformanceRecord> records, const StateConfig& cfg) {
    if (!records.empty()) {
        const auto& first = records.front();
        for (const auto& r : records) {
            if (r.collaborator != first.collaborator || r.task_type != first.task_type) {
                throw Error(Errc::heterogeneous_input,
                            "records span more than one (collaborator, task_type) pair");
            }
        }
    }
    if (records.size() < cfg.n_min) return TrustState::insufficient_data;

    const auto satisfied = std::count_if(records.begin(), records.end(), [](const auto& r) {
        return r.verdict == Verdict::satisfied;
    });
    const double fraction = static_cast<double>(satisfied) / static_cast<double>(records.size());
    return fraction >= cfg.trust_threshold ? TrustState::trusted : TrustState::untrusted;
}

std::vector<Sample> metric_series(std::span<const PerformanceRecord> records, Metric m) {
    std::vector<Sample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        double v = 0.0;
        switch (m) {
        case Metric::throughput: v = r.throughput_mbps; break;
        case Metric::loss_rate: v = r.loss_rate; break;
        case Metric::accuracy: v = r.accuracy; break;
        case Metric::proc_speed: v = r.proc_speed_mbps; break;
        }
        out.push_back({r.at, v});
    }
    return out;
}

TrustSemantics extract_semantics(const DeviceId& device, const TaskType& task_type,
                                 std::span<const PerformanceRecord> records,
                                 const SemanticsConfig& cfg, Timestamp extracted_at) {
    for (const auto& r : records) {
        if (r.collaborator != device || r.task_type != task_type) {
            throw Error(Errc::heterogeneous_input, "record does not belong to (" + device.str() +
                                                       ", " + task_type.str() + ")");
        }
    }

    TrustSemantics ts;
    ts.device = device;
    ts.task_type = task_type;
    ts.extracted_at = extracted_at;
    ts.record_count = records.size();
    ts.state = aggregate_state(records, cfg.state);

    // Trends are always computed so unsorted input is reported even on cold start.
    for (auto m : all_metrics) {
        TrendConfig tc = cfg.trend;
        tc.abs_floor = cfg.trend.floor_for(m);
        const auto series = metric_series(records, m);
        const auto t = detect_trend(series, tc);
        ts.set_trend(m, ts.state == TrustState::insufficient_data ? Trend::normal : t);
    }
    if (!records.empty()) ts.window = TimeWindow{records.front().at, records.back().at};
    return ts;
}

DeterministicEngine::DeterministicEngine(SemanticsConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

TrustSemantics DeterministicEngine::extract(const DeviceId& device, const TaskType& task_type,
                                            std::span<const PerformanceRecord> records,
                                            Timestamp extracted_at) {
    return extract_semantics(device, task_type, records, cfg_, extracted_at);
}

} // namespace twotsd
