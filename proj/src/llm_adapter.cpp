#include "twotsd/llm_adapter.hpp"

#include "twotsd/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

namespace twotsd {

using json = nlohmann::json;

void RemoteEngineConfig::validate() const {
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
        throw Error(Errc::config, "remote.endpoint must be an http(s) URL");
    }
    if (model.empty()) throw Error(Errc::config, "remote.model must be nonempty");
    if (!(timeout_s > 0)) throw Error(Errc::config, "remote.timeout_s must be > 0");
    if (!(backoff_initial_s >= 0) || backoff_max_s < backoff_initial_s) {
        throw Error(Errc::config, "remote backoff bounds invalid");
    }
    if (template_id != "trust-semantics-v1") throw Error(Errc::config, "unknown prompt template " + template_id);
    if (max_in_flight < 1 || max_in_flight > 256) throw Error(Errc::config, "remote.max_in_flight must be in [1,256]");
}

RemoteEngineConfig remote_config_from_json(const json& j) {
    RemoteEngineConfig c;
    if (!j.is_object()) throw Error(Errc::config, "remote must be an object");
    for (const auto& [k, v] : j.items()) {
        try {
            if (k == "endpoint") c.endpoint = v.get<std::string>();
            else if (k == "model") c.model = v.get<std::string>();
            else if (k == "credential_env") c.credential_env = v.get<std::string>();
            else if (k == "timeout_s") c.timeout_s = v.get<double>();
            else if (k == "max_retries") c.max_retries = v.get<std::size_t>();
            else if (k == "backoff_initial_s") c.backoff_initial_s = v.get<double>();
            else if (k == "backoff_max_s") c.backoff_max_s = v.get<double>();
            else if (k == "template_id") c.template_id = v.get<std::string>();
            else if (k == "max_in_flight") c.max_in_flight = v.get<std::size_t>();
            else throw Error(Errc::config, "unknown key remote." + k);
        } catch (const json::exception& e) {
            throw Error(Errc::config, "remote." + k + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post_json(const std::string& url, const std::map<std::string, std::string>& headers,
                           const std::string& body, double timeout_s) override {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, url_re)) throw Error(Errc::config, "bad endpoint URL");
        const std::string origin = m[1];
        const std::string path = m[2].matched ? std::string(m[2]) : "/";

        httplib::Client client(origin);
        const auto whole = static_cast<time_t>(timeout_s);
        const auto micros = static_cast<time_t>((timeout_s - static_cast<double>(whole)) * 1e6);
        client.set_connection_timeout(whole, micros);
        client.set_read_timeout(whole, micros);
        client.set_write_timeout(whole, micros);

        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
                throw Error(Errc::timeout, "no response within " + std::to_string(timeout_s) + " s");
            }
            throw Error(Errc::transport, "request failed: " + httplib::to_string(err));
        }
        return {res->status, res->body};
    }
};

// Original template; the system text fixes the output schema.
constexpr const char* system_prompt_v1 =
    "You assess how trustworthy an edge device is as a collaborator for one task type. "
    "You receive its recent collaboration records in time order. Each record has throughput_mbps, "
    "loss_rate, proc_speed_mbps, accuracy and a verdict (satisfied or unsatisfied). "
    "Reply with one JSON object and nothing else:\n"
    "{\"state\": \"trusted\" | \"untrusted\" | \"insufficient_data\",\n"
    " \"comm_trends\": {\"throughput\": T, \"loss_rate\": T},\n"
    " \"comp_trends\": {\"accuracy\": T, \"proc_speed\": T}}\n"
    "where T is exactly one of \"increasing\", \"decreasing\", \"normal\". "
    "A trend is increasing or decreasing only when the change across the window is clear; otherwise normal. "
    "Use insufficient_data with all trends normal when there are too few records to judge.";

Trend trend_word(const std::string& w) {
    if (w == "increasing") return Trend::increasing;
    if (w == "decreasing") return Trend::decreasing;
    if (w == "normal") return Trend::normal;
    throw Error(Errc::schema_violation, "trend must be increasing, decreasing or normal, got '" + w + "'");
}

std::optional<Metric> metric_phrase(const std::string& p) {
    static const std::map<std::string, Metric> names = {
        {"throughput", Metric::throughput},
        {"packet loss rate", Metric::loss_rate},
        {"loss rate", Metric::loss_rate},
        {"loss_rate", Metric::loss_rate},
        {"accuracy", Metric::accuracy},
        {"computing accuracy", Metric::accuracy},
        {"processing speed", Metric::proc_speed},
        {"proc_speed", Metric::proc_speed},
    };
    auto it = names.find(p);
    if (it == names.end()) return std::nullopt;
    return it->second;
}

std::string lower_trim(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    const auto b = out.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = out.find_last_not_of(" \t\r\n.");
    return out.substr(b, e - b + 1);
}

// Object {metric: word} or a phrase string; must name exactly the two metrics.
void read_trends(const json& j, const char* field, Metric a, Metric b, TrustSemantics& ts) {
    std::map<Metric, Trend> got;
    if (j.is_string()) {
        got = parse_trend_phrases(j.get<std::string>());
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            const auto m = metric_phrase(k);
            if (!m || !v.is_string()) throw Error(Errc::schema_violation, std::string(field) + ": bad entry " + k);
            got[*m] = trend_word(v.get<std::string>());
        }
        if (got.size() != j.size()) throw Error(Errc::schema_violation, std::string(field) + ": repeated metric");
    } else {
        throw Error(Errc::schema_violation, std::string(field) + " must be an object or a phrase");
    }
    if (got.size() != 2 || !got.contains(a) || !got.contains(b)) {
        throw Error(Errc::schema_violation, std::string(field) + " must cover exactly its two metrics");
    }
    ts.set_trend(a, got[a]);
    ts.set_trend(b, got[b]);
}

bool retryable(Errc c) {
    return c == Errc::timeout || c == Errc::rate_limit || c == Errc::transport || c == Errc::schema_violation;
}

} // namespace

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

json build_request(const RemoteEngineConfig& cfg, const DeviceId& device, const TaskType& task_type,
                   std::span<const PerformanceRecord> records) {
    json rows = json::array();
    for (const auto& r : records) {
        rows.push_back({{"at", r.at},
                        {"throughput_mbps", r.throughput_mbps},
                        {"loss_rate", r.loss_rate},
                        {"proc_speed_mbps", r.proc_speed_mbps},
                        {"accuracy", r.accuracy},
                        {"verdict", std::string(to_string(r.verdict))}});
    }
    const json user{{"device", device.str()}, {"task_type", task_type.str()}, {"records", rows}};
    return json{{"model", cfg.model},
                {"temperature", 0},
                {"response_format", {{"type", "json_object"}}},
                {"messages",
                 json::array({json{{"role", "system"}, {"content", system_prompt_v1}},
                              json{{"role", "user"}, {"content", user.dump()}}})}};
}

std::map<Metric, Trend> parse_trend_phrases(std::string_view text) {
    static const std::regex clause_re(R"(^(.+?) shows an? ([a-z]+) trend$)");
    static const std::regex sep_re(R"(\s*,\s*(?:and\s+)?|\s+and\s+)");
    const auto whole = lower_trim(text);
    std::map<Metric, Trend> out;
    for (std::sregex_token_iterator it(whole.begin(), whole.end(), sep_re, -1), end; it != end; ++it) {
        const std::string clause = *it;
        std::smatch m;
        if (!std::regex_match(clause, m, clause_re)) {
            throw Error(Errc::schema_violation, "unrecognised trend clause '" + clause + "'");
        }
        const auto metric = metric_phrase(m[1]);
        if (!metric) throw Error(Errc::schema_violation, "unknown metric '" + std::string(m[1]) + "'");
        if (!out.emplace(*metric, trend_word(m[2])).second) {
            throw Error(Errc::schema_violation, "metric named twice: " + std::string(m[1]));
        }
    }
    return out;
}

std::string completion_content(const std::string& body) {
    json doc;
    try {
        doc = json::parse(body);
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw Error(Errc::schema_violation, "message content is not a string");
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::schema_violation, std::string("completion envelope: ") + e.what());
    }
}

TrustSemantics parse_semantics_document(const std::string& content, const DeviceId& device,
                                        const TaskType& task_type, std::span<const PerformanceRecord> records,
                                        Timestamp extracted_at, const std::string& engine_tag) {
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::exception&) {
        throw Error(Errc::schema_violation, "model output is not JSON");
    }
    if (!doc.is_object() || doc.size() != 3 || !doc.contains("state") || !doc.contains("comm_trends") ||
        !doc.contains("comp_trends")) {
        throw Error(Errc::schema_violation, "expected exactly state, comm_trends, comp_trends");
    }
    if (!doc["state"].is_string()) throw Error(Errc::schema_violation, "state must be a string");
    const auto state = lower_trim(doc["state"].get<std::string>());

    TrustSemantics ts;
    ts.device = device;
    ts.task_type = task_type;
    if (state == "trusted") ts.state = TrustState::trusted;
    else if (state == "untrusted") ts.state = TrustState::untrusted;
    else if (state == "insufficient_data") ts.state = TrustState::insufficient_data;
    else throw Error(Errc::schema_violation, "unknown state '" + state + "'");
    read_trends(doc["comm_trends"], "comm_trends", Metric::throughput, Metric::loss_rate, ts);
    read_trends(doc["comp_trends"], "comp_trends", Metric::accuracy, Metric::proc_speed, ts);

    ts.extracted_at = extracted_at;
    ts.record_count = records.size();
    if (!records.empty()) ts.window = TimeWindow{records.front().at, records.back().at};
    ts.engine = engine_tag;
    try {
        validate_semantics(ts);
    } catch (const Error& e) {
        throw Error(Errc::schema_violation, e.what());
    }
    return ts;
}

RemoteEngine::RemoteEngine(RemoteEngineConfig cfg, SemanticsConfig fallback_cfg,
                           std::unique_ptr<HttpTransport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      fallback_(std::move(fallback_cfg)),
      transport_(transport ? std::move(transport) : make_http_transport()),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); })),
      in_flight_(static_cast<std::ptrdiff_t>(cfg_.max_in_flight)) {
    cfg_.validate();
}

void RemoteEngine::count_error(const std::string& kind) {
    std::lock_guard lock(stats_mu_);
    ++stats_.errors[kind];
}

RemoteStats RemoteEngine::stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
}

TrustSemantics RemoteEngine::attempt(const DeviceId& device, const TaskType& task_type,
                                     std::span<const PerformanceRecord> records, Timestamp extracted_at) {
    std::map<std::string, std::string> headers;
    if (const char* key = std::getenv(cfg_.credential_env.c_str()); key != nullptr && *key != '\0') {
        headers["Authorization"] = std::string("Bearer ") + key;
    }
    const auto body = build_request(cfg_, device, task_type, records).dump();

    in_flight_.acquire();
    HttpResponse res;
    try {
        res = transport_->post_json(cfg_.endpoint, headers, body, cfg_.timeout_s);
    } catch (...) {
        in_flight_.release();
        throw;
    }
    in_flight_.release();

    if (res.status == 401 || res.status == 403) throw Error(Errc::auth, "endpoint rejected the credential");
    if (res.status == 429) throw Error(Errc::rate_limit, "endpoint rate limit");
    if (res.status == 408 || res.status == 504) throw Error(Errc::timeout, "endpoint timed out");
    if (res.status >= 500) throw Error(Errc::transport, "endpoint status " + std::to_string(res.status));
    if (res.status != 200) throw Error(Errc::transport, "unexpected status " + std::to_string(res.status));
    return parse_semantics_document(completion_content(res.body), device, task_type, records, extracted_at, name());
}

TrustSemantics RemoteEngine::extract(const DeviceId& device, const TaskType& task_type,
                                     std::span<const PerformanceRecord> records, Timestamp extracted_at) {
    {
        std::lock_guard lock(stats_mu_);
        ++stats_.calls;
    }
    double delay = cfg_.backoff_initial_s;
    for (std::size_t i = 0;; ++i) {
        {
            std::lock_guard lock(stats_mu_);
            ++stats_.attempts;
        }
        try {
            return attempt(device, task_type, records, extracted_at);
        } catch (const Error& e) {
            count_error(std::string(to_string(e.code())));
            if (!retryable(e.code())) throw;
            if (i >= cfg_.max_retries) break;
            sleeper_(delay);
            delay = std::min(cfg_.backoff_max_s, delay * 2.0);
        }
    }
    {
        std::lock_guard lock(stats_mu_);
        ++stats_.fallbacks;
    }
    auto ts = fallback_.extract(device, task_type, records, extracted_at);
    ts.engine = "remote-fallback";
    return ts;
}

} // namespace twotsd
