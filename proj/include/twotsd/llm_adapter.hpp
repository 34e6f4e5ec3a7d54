#pragma once

#include "twotsd/semantics.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace twotsd {

struct RemoteEngineConfig {
    std::string endpoint = "http://127.0.0.1:8080/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string credential_env = "TWOTSD_REMOTE_KEY"; // name of the variable, never its value
    double timeout_s = 30.0;
    std::size_t max_retries = 3;
    double backoff_initial_s = 0.5;
    double backoff_max_s = 8.0;
    std::string template_id = "trust-semantics-v1";
    std::size_t max_in_flight = 4;

    void validate() const;
};

RemoteEngineConfig remote_config_from_json(const nlohmann::json& j);

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Throws Error(timeout) or Error(transport) when no response arrives.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& url, const std::map<std::string, std::string>& headers,
                                   const std::string& body, double timeout_s) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport();

// Chat-completion request body for one extraction.
nlohmann::json build_request(const RemoteEngineConfig& cfg, const DeviceId& device, const TaskType& task_type,
                             std::span<const PerformanceRecord> records);

// "packet loss rate shows a normal trend, throughput shows a decreasing trend"
// Closed vocabulary; anything else raises Error(schema_violation).
std::map<Metric, Trend> parse_trend_phrases(std::string_view text);

// Parses the assistant content into semantics for (device, task_type). Window,
// record count and timestamps come from the records, not from the model.
TrustSemantics parse_semantics_document(const std::string& content, const DeviceId& device,
                                        const TaskType& task_type, std::span<const PerformanceRecord> records,
                                        Timestamp extracted_at, const std::string& engine_tag);

// Extracts the assistant content from a chat-completion response body.
std::string completion_content(const std::string& body);

struct RemoteStats {
    std::size_t calls = 0;
    std::size_t attempts = 0;
    std::size_t fallbacks = 0;
    std::map<std::string, std::size_t> errors; // by error kind
};

class RemoteEngine final : public SemanticsEngine {
public:
    using Sleeper = std::function<void(double seconds)>;

    RemoteEngine(RemoteEngineConfig cfg, SemanticsConfig fallback_cfg,
                 std::unique_ptr<HttpTransport> transport = nullptr, Sleeper sleeper = nullptr);

    [[nodiscard]] std::string name() const override { return "remote:" + cfg_.model; }

    // Falls back to the deterministic engine (engine tag "remote-fallback")
    // once retries are exhausted. Authentication failures are raised.
    TrustSemantics extract(const DeviceId& device, const TaskType& task_type,
                           std::span<const PerformanceRecord> records, Timestamp extracted_at) override;

    [[nodiscard]] RemoteStats stats() const;

private:
    TrustSemantics attempt(const DeviceId& device, const TaskType& task_type,
                           std::span<const PerformanceRecord> records, Timestamp extracted_at);
    void count_error(const std::string& kind);

    RemoteEngineConfig cfg_;
    DeterministicEngine fallback_;
    std::unique_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    std::counting_semaphore<256> in_flight_;

    mutable std::mutex stats_mu_;
    RemoteStats stats_;
};

} // namespace twotsd
