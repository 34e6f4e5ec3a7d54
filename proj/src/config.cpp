#include "twotsd/config.hpp"

#include "twotsd/error.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace twotsd {

using json = nlohmann::json;

std::vector<TaskTemplate> default_task_templates() {
    return {
        {task_types::face_recognition, 10.0, 2339.0, 60.0, 1.0},
        {task_types::video_transcoding, 50.0, 1000.0, 50.0, 1.0},
        {task_types::text_word_count, 5.0, 200.0, 10.0, 1.0},
    };
}

void ScenarioConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(Errc::config, what); };
    if (device_count < 2) bad("device_count must be >= 2");
    if (warmup_per_device < 1) bad("warmup_per_device must be >= 1");
    if (task_types.empty()) bad("task_types must not be empty");
    for (const auto& t : task_types) {
        if (!(t.size_mb > 0 && t.density_cpb > 0 && t.deadline_s > 0)) {
            bad("task_types." + t.type.str() + ": size, density, and deadline must be > 0");
        }
        if (!(t.weight > 0)) bad("task_types." + t.type.str() + ".weight must be > 0");
    }
    for (double f : {unreliable_fraction, reliable_level, unreliable_level, drift.share}) {
        if (!(f >= 0.0 && f <= 1.0)) bad("fractions and reliability levels must be in [0,1]");
    }
    if (!(drift.loss_growth >= 0.0) || !(drift.reliability_drop >= 0.0)) bad("drift rates must be >= 0");
    const auto& r = resources;
    if (!(r.cpu_min_cps > 0 && r.cpu_min_cps <= r.cpu_max_cps)) bad("resources.cpu range invalid");
    if (!(r.storage_min_mb >= 0 && r.storage_min_mb <= r.storage_max_mb)) bad("resources.storage range invalid");
    if (!(r.bandwidth_min_mbps > 0 && r.bandwidth_min_mbps <= r.bandwidth_max_mbps)) {
        bad("resources.bandwidth range invalid");
    }
    const auto& l = latency;
    for (double v : {l.msg_s, l.rec_s, l.engine_s, l.lookup_s, l.per_item_s, l.local_eval_s}) {
        if (!(v >= 0.0)) bad("latency terms must be >= 0");
    }
    if (!(event_interval_s > 0)) bad("event_interval_s must be > 0");
    if (!(report_interval_s > 0)) bad("report_interval_s must be > 0");
    if (!(metric_jitter >= 0 && metric_jitter < 0.5)) bad("metric_jitter must be in [0,0.5)");
    if (seeds.empty()) bad("seeds must not be empty");
    if (baseline.window_k < 1) bad("baseline.window_k must be >= 1");
    if (engine != "deterministic" && engine != "remote") bad("engine must be deterministic or remote");
    if (sweep) {
        if (sweep->axis != "device_count" && sweep->axis != "unreliable_fraction") {
            bad("sweep.axis must be device_count or unreliable_fraction");
        }
        if (sweep->values.empty()) bad("sweep.values must not be empty");
    }
    semantics.validate();
    match.validate();
    policy.validate();
}

json to_json_config(const ScenarioConfig& c) {
    json types = json::array();
    for (const auto& t : c.task_types) {
        types.push_back({{"type", t.type.str()},
                         {"size_mb", t.size_mb},
                         {"density_cpb", t.density_cpb},
                         {"deadline_s", t.deadline_s},
                         {"weight", t.weight}});
    }
    json floors = json::object();
    for (const auto& [m, f] : c.semantics.trend.metric_floors) floors[std::string(to_string(m))] = f;
    json adverse = json::object();
    for (const auto& [m, t] : c.policy.adverse) adverse[std::string(to_string(m))] = std::string(to_string(t));

    return json{
        {"device_count", c.device_count},
        {"warmup_per_device", c.warmup_per_device},
        {"task_count", c.task_count},
        {"task_types", types},
        {"unreliable_fraction", c.unreliable_fraction},
        {"reliable_level", c.reliable_level},
        {"unreliable_level", c.unreliable_level},
        {"drift",
         {{"share", c.drift.share},
          {"loss_growth", c.drift.loss_growth},
          {"reliability_drop", c.drift.reliability_drop}}},
        {"resources",
         {{"cpu_min_cps", c.resources.cpu_min_cps},
          {"cpu_max_cps", c.resources.cpu_max_cps},
          {"storage_min_mb", c.resources.storage_min_mb},
          {"storage_max_mb", c.resources.storage_max_mb},
          {"bandwidth_min_mbps", c.resources.bandwidth_min_mbps},
          {"bandwidth_max_mbps", c.resources.bandwidth_max_mbps}}},
        {"latency",
         {{"msg_s", c.latency.msg_s},
          {"rec_s", c.latency.rec_s},
          {"engine_s", c.latency.engine_s},
          {"lookup_s", c.latency.lookup_s},
          {"per_item_s", c.latency.per_item_s},
          {"local_eval_s", c.latency.local_eval_s}}},
        {"event_interval_s", c.event_interval_s},
        {"report_interval_s", c.report_interval_s},
        {"metric_jitter", c.metric_jitter},
        {"seeds", c.seeds},
        {"parallel_seeds", c.parallel_seeds},
        {"semantics",
         {{"window_k", c.semantics.window_k},
          {"trend",
           {{"n_min", c.semantics.trend.n_min},
            {"rel_slope_threshold", c.semantics.trend.rel_slope_threshold},
            {"abs_floor", c.semantics.trend.abs_floor},
            {"metric_floors", floors}}},
          {"state",
           {{"n_min", c.semantics.state.n_min}, {"trust_threshold", c.semantics.state.trust_threshold}}}}},
        {"match",
         {{"staleness_s", c.match.staleness_s},
          {"include_result_return", c.match.include_result_return},
          {"result_size_factor", c.match.result_size_factor}}},
        {"policy",
         {{"kind", std::string(to_string(c.policy.kind))},
          {"adverse", adverse},
          {"seed", c.policy.seed},
          {"strict_trends", c.policy.strict_trends}}},
        {"baseline",
         {{"window_k", c.baseline.window_k}, {"selective_disclosure", c.baseline.selective_disclosure}}},
        {"engine", c.engine},
        {"remote", c.remote},
        {"sweep", c.sweep ? json{{"axis", c.sweep->axis}, {"values", c.sweep->values}} : json(nullptr)},
    };
}

namespace {

// Reads an object strictly: every key must be consumed.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(Errc::config, where() + " must be an object");
    }

    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [k, _] : j_.items()) {
            if (!used_.contains(k)) throw Error(Errc::config, "unknown key " + where(k));
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (it->is_string()) {
                    out = parse_fraction(it->get<std::string>());
                    return;
                }
                if (!it->is_number()) throw Error(Errc::config, "expected a number");
            } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!it->is_number_unsigned()) throw Error(Errc::config, "expected a nonnegative integer");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw Error(Errc::config, "expected true/false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw Error(Errc::config, "expected a string");
            }
            out = it->get<T>();
        } catch (const std::exception& e) {
            throw Error(Errc::config, where(key) + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    [[nodiscard]] std::string where(const std::string& key = {}) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

} // namespace

ScenarioConfig config_from_json(const json& j) {
    ScenarioConfig c;
    c.task_types = default_task_templates();
    Reader r(j, "");
    r.get("device_count", c.device_count);
    r.get("warmup_per_device", c.warmup_per_device);
    r.get("task_count", c.task_count);
    if (const auto* types = r.child("task_types")) {
        if (!types->is_array()) throw Error(Errc::config, "task_types must be an array");
        c.task_types.clear();
        for (std::size_t i = 0; i < types->size(); ++i) {
            Reader tr((*types)[i], "task_types." + std::to_string(i));
            std::string name;
            TaskTemplate t;
            tr.get("type", name);
            if (name.empty()) throw Error(Errc::config, tr.where("type") + " must be nonempty");
            t.type = TaskType(name);
            tr.get("size_mb", t.size_mb);
            tr.get("density_cpb", t.density_cpb);
            tr.get("deadline_s", t.deadline_s);
            tr.get("weight", t.weight);
            c.task_types.push_back(t);
        }
    }
    r.get("unreliable_fraction", c.unreliable_fraction);
    r.get("reliable_level", c.reliable_level);
    r.get("unreliable_level", c.unreliable_level);
    if (const auto* d = r.child("drift")) {
        Reader dr(*d, "drift");
        dr.get("share", c.drift.share);
        dr.get("loss_growth", c.drift.loss_growth);
        dr.get("reliability_drop", c.drift.reliability_drop);
    }
    if (const auto* res = r.child("resources")) {
        Reader rr(*res, "resources");
        rr.get("cpu_min_cps", c.resources.cpu_min_cps);
        rr.get("cpu_max_cps", c.resources.cpu_max_cps);
        rr.get("storage_min_mb", c.resources.storage_min_mb);
        rr.get("storage_max_mb", c.resources.storage_max_mb);
        rr.get("bandwidth_min_mbps", c.resources.bandwidth_min_mbps);
        rr.get("bandwidth_max_mbps", c.resources.bandwidth_max_mbps);
    }
    if (const auto* lat = r.child("latency")) {
        Reader lr(*lat, "latency");
        lr.get("msg_s", c.latency.msg_s);
        lr.get("rec_s", c.latency.rec_s);
        lr.get("engine_s", c.latency.engine_s);
        lr.get("lookup_s", c.latency.lookup_s);
        lr.get("per_item_s", c.latency.per_item_s);
        lr.get("local_eval_s", c.latency.local_eval_s);
    }
    r.get("event_interval_s", c.event_interval_s);
    r.get("report_interval_s", c.report_interval_s);
    r.get("metric_jitter", c.metric_jitter);
    if (const auto* seeds = r.child("seeds")) {
        if (!seeds->is_array()) throw Error(Errc::config, "seeds must be an array of integers");
        c.seeds.clear();
        for (const auto& s : *seeds) {
            if (!s.is_number_unsigned()) throw Error(Errc::config, "seeds must be nonnegative integers");
            c.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    r.get("parallel_seeds", c.parallel_seeds);
    if (const auto* sem = r.child("semantics")) {
        Reader sr(*sem, "semantics");
        sr.get("window_k", c.semantics.window_k);
        if (const auto* tr = sr.child("trend")) {
            Reader t(*tr, "semantics.trend");
            t.get("n_min", c.semantics.trend.n_min);
            t.get("rel_slope_threshold", c.semantics.trend.rel_slope_threshold);
            t.get("abs_floor", c.semantics.trend.abs_floor);
            if (const auto* floors = t.child("metric_floors")) {
                Reader fr(*floors, "semantics.trend.metric_floors");
                for (auto m : all_metrics) {
                    const std::string name(to_string(m));
                    if (floors->contains(name)) {
                        double f = 0.0;
                        fr.get(name.c_str(), f);
                        c.semantics.trend.metric_floors[m] = f;
                    }
                }
            }
        }
        if (const auto* st = sr.child("state")) {
            Reader s(*st, "semantics.state");
            s.get("n_min", c.semantics.state.n_min);
            s.get("trust_threshold", c.semantics.state.trust_threshold);
        }
    }
    if (const auto* m = r.child("match")) {
        Reader mr(*m, "match");
        mr.get("staleness_s", c.match.staleness_s);
        mr.get("include_result_return", c.match.include_result_return);
        mr.get("result_size_factor", c.match.result_size_factor);
    }
    if (const auto* p = r.child("policy")) {
        Reader pr(*p, "policy");
        std::string kind(to_string(c.policy.kind));
        pr.get("kind", kind);
        c.policy.kind = parse_policy_kind(kind);
        if (const auto* adv = pr.child("adverse")) {
            Reader ar(*adv, "policy.adverse");
            c.policy.adverse.clear();
            for (auto metric : all_metrics) {
                const std::string name(to_string(metric));
                std::string dir;
                ar.get(name.c_str(), dir);
                if (!dir.empty()) {
                    try {
                        c.policy.adverse[metric] = parse_trend(dir);
                    } catch (const Error& e) {
                        throw Error(Errc::config, "policy.adverse." + name + ": " + e.what());
                    }
                }
            }
        }
        pr.get("seed", c.policy.seed);
        pr.get("strict_trends", c.policy.strict_trends);
    }
    if (const auto* b = r.child("baseline")) {
        Reader br(*b, "baseline");
        br.get("window_k", c.baseline.window_k);
        br.get("selective_disclosure", c.baseline.selective_disclosure);
    }
    r.get("engine", c.engine);
    if (const auto* rem = r.child("remote")) c.remote = *rem;
    if (const auto* sw = r.child("sweep")) {
        Reader swr(*sw, "sweep");
        Sweep s;
        swr.get("axis", s.axis);
        if (const auto* vals = swr.child("values")) {
            if (!vals->is_array()) throw Error(Errc::config, "sweep.values must be an array");
            for (const auto& v : *vals) {
                if (!v.is_number()) throw Error(Errc::config, "sweep.values must be numbers");
                s.values.push_back(v.get<double>());
            }
        }
        c.sweep = s;
    }
    return c;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(Errc::config, "override must look like key=value: '" + assignment + "'");
    }
    const auto key = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    std::string pointer;
    std::size_t start = 0;
    while (start <= key.size()) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw Error(Errc::config, "empty path segment in override '" + key + "'");
        pointer += "/" + part;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    try {
        doc[json::json_pointer(pointer)] = value;
    } catch (const json::exception& e) {
        throw Error(Errc::config, "cannot apply override '" + assignment + "': " + e.what());
    }
}

ScenarioConfig load_config_text(const std::string& text, const std::vector<std::string>& overrides) {
    json user;
    try {
        user = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::config, std::string("config is not valid JSON: ") + e.what());
    }
    if (!user.is_object()) throw Error(Errc::config, "config must be a JSON object");
    ScenarioConfig defaults;
    defaults.task_types = default_task_templates();
    auto doc = to_json_config(defaults);
    for (const auto& [k, v] : user.items()) {
        // Objects merge key-by-key; everything else replaces.
        if (v.is_object() && doc.contains(k) && doc[k].is_object() && k != "remote") {
            for (const auto& [k2, v2] : v.items()) {
                if (v2.is_object() && doc[k].contains(k2) && doc[k][k2].is_object()) {
                    doc[k][k2].update(v2);
                } else {
                    doc[k][k2] = v2;
                }
            }
        } else {
            doc[k] = v;
        }
    }
    for (const auto& o : overrides) apply_override(doc, o);
    auto cfg = config_from_json(doc);
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::config, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config_text(ss.str(), overrides);
}

std::string canonical_config(const ScenarioConfig& cfg) { return to_json_config(cfg).dump(); }

std::string fnv1a64_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace twotsd
